use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Compact class index <-> original class id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    /// `ids[index]` is the original class id of compact index `index`.
    pub ids: Vec<u16>,
}

impl ClassMap {
    pub fn new(mut ids: Vec<u16>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        ClassMap { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: u16) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn id_of(&self, index: usize) -> Option<u16> {
        self.ids.get(index).copied()
    }
}

fn check_easy(ds: &LabeledDataset, easy: &BTreeSet<u16>) -> Result<()> {
    if easy.is_empty() {
        return Err(Error::invalid("easy class set is empty"));
    }
    if let Some(bad) = easy.iter().find(|id| !ds.class_names.contains_key(id)) {
        return Err(Error::invalid(format!("easy class {bad} not in dataset classes")));
    }
    if easy.len() == ds.class_names.len() {
        return Err(Error::invalid("easy class set covers every class; nothing left for the CNN"));
    }
    Ok(())
}

/// Easy windows keep their label, every other window becomes `fallback_id`.
pub fn make_dt_dataset(ds: &LabeledDataset, easy: &BTreeSet<u16>, fallback_id: u16) -> Result<LabeledDataset> {
    check_easy(ds, easy)?;
    if ds.class_names.contains_key(&fallback_id) {
        return Err(Error::invalid(format!("fallback id {fallback_id} collides with an existing class")));
    }
    let mut class_names: BTreeMap<u16, String> =
        easy.iter().map(|id| (*id, ds.class_names[id].clone())).collect();
    class_names.insert(fallback_id, "FALLBACK".to_string());
    let windows = ds
        .windows
        .iter()
        .map(|w| {
            let mut w = w.clone();
            if !easy.contains(&w.label) {
                w.label = fallback_id;
            }
            w
        })
        .collect();
    Ok(LabeledDataset { windows, class_names, split: ds.split })
}

/// Drops easy windows and compacts the remaining labels to `0..M_hard`.
pub fn make_cnn_dataset(ds: &LabeledDataset, easy: &BTreeSet<u16>) -> Result<(LabeledDataset, ClassMap)> {
    check_easy(ds, easy)?;
    let hard = ds.filter_indexed(|_, w| !easy.contains(&w.label));
    if hard.is_empty() {
        return Err(Error::EmptyDataset("no hard-class windows remain".into()));
    }
    let ids: Vec<u16> = ds.class_names.keys().copied().filter(|id| !easy.contains(id)).collect();
    let map = ClassMap::new(ids);
    Ok((relabel(&hard, &map)?, map))
}

/// Compacts every class of the dataset (used by the all-class CNN).
pub fn compact_labels(ds: &LabeledDataset) -> Result<(LabeledDataset, ClassMap)> {
    let map = ClassMap::new(ds.class_ids());
    Ok((relabel(ds, &map)?, map))
}

fn relabel(ds: &LabeledDataset, map: &ClassMap) -> Result<LabeledDataset> {
    let class_names = map
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (i as u16, ds.class_names.get(id).cloned().unwrap_or_default()))
        .collect();
    let windows = ds
        .windows
        .iter()
        .map(|w| {
            let idx = map
                .index_of(w.label)
                .ok_or_else(|| Error::Format(format!("label {} missing from class map", w.label)))?;
            let mut w = w.clone();
            w.label = idx as u16;
            Ok(w)
        })
        .collect::<Result<_>>()?;
    Ok(LabeledDataset { windows, class_names, split: ds.split })
}

/// Repeats every window of a targeted class `factor` times in place.
pub fn oversample_classes(ds: &LabeledDataset, classes: &BTreeSet<u16>, factor: usize) -> Result<LabeledDataset> {
    if factor < 1 {
        return Err(Error::invalid("oversampling factor must be at least 1"));
    }
    let mut windows = Vec::new();
    for w in &ds.windows {
        let reps = if classes.contains(&w.label) { factor } else { 1 };
        windows.extend(std::iter::repeat_n(w, reps).cloned());
    }
    Ok(LabeledDataset { windows, class_names: ds.class_names.clone(), split: ds.split })
}
