use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::data::FeatureVector;
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub per_class_f1: BTreeMap<u16, f64>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl ClassScores {
    /// Scores `predicted` against `truth` over `classes` plus every label seen.
    /// F1 is 0 for a class with no true and no predicted samples.
    pub fn from_predictions(truth: &[u16], predicted: &[u16], classes: &[u16]) -> Result<Self> {
        if truth.is_empty() || truth.len() != predicted.len() {
            return Err(Error::invalid("score needs equal, non-empty label lists"));
        }
        let all: BTreeSet<u16> = classes.iter().chain(truth).copied().collect();
        let mut tp: BTreeMap<u16, usize> = BTreeMap::new();
        let mut fp: BTreeMap<u16, usize> = BTreeMap::new();
        let mut fneg: BTreeMap<u16, usize> = BTreeMap::new();
        let mut correct = 0;
        for (&t, &p) in truth.iter().zip(predicted) {
            if t == p {
                correct += 1;
                *tp.entry(t).or_default() += 1;
            } else {
                *fp.entry(p).or_default() += 1;
                *fneg.entry(t).or_default() += 1;
            }
        }
        let per_class_f1: BTreeMap<u16, f64> = all
            .iter()
            .map(|c| {
                let tp = *tp.get(c).unwrap_or(&0) as f64;
                let fp = *fp.get(c).unwrap_or(&0) as f64;
                let fneg = *fneg.get(c).unwrap_or(&0) as f64;
                let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
                let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
                (*c, f1)
            })
            .collect();
        let macro_f1 = per_class_f1.values().sum::<f64>() / per_class_f1.len() as f64;
        Ok(ClassScores { per_class_f1, accuracy: correct as f64 / truth.len() as f64, macro_f1 })
    }
}

/// Per-class F1, accuracy and macro-F1 of `model` on labeled feature vectors.
pub fn score<M: Classifier + ?Sized>(model: &M, data: &[FeatureVector], exec: Execution) -> Result<ClassScores> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("cannot score on zero samples".into()));
    }
    let predicted = exec.try_map(data, |x| model.predict(&x.values))?;
    let truth: Vec<u16> = data.iter().map(|x| x.label).collect();
    ClassScores::from_predictions(&truth, &predicted, model.class_ids())
}
