use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use super::{score, train_tree, ClassScores, TreeModel};
use crate::data::FeatureVector;
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best_depth: usize,
    pub model: TreeModel,
    pub scores: ClassScores,
    /// `(depth, macro_f1)` for every depth tried, ascending.
    pub trials: Vec<(usize, f64)>,
}

/// Index of the highest value; ties go to the earliest (smallest depth).
pub fn argmax_depth(trials: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(d, s) in trials {
        match best {
            Some((bd, bs)) if s < bs || (s == bs && d >= bd) => {}
            _ => best = Some((d, s)),
        }
    }
    best.map(|(d, _)| d)
}

/// Trains one tree per depth and keeps the one with the best macro-F1.
///
/// Scores are computed on `eval` when given (hold-out), otherwise on the
/// training data itself.
pub fn depth_grid_search(
    train: &[FeatureVector],
    depths: RangeInclusive<usize>,
    eval: Option<&[FeatureVector]>,
    exec: Execution,
) -> Result<GridSearchResult> {
    let depth_list: Vec<usize> = depths.collect();
    if depth_list.is_empty() {
        return Err(Error::invalid("empty depth range"));
    }
    let eval = eval.unwrap_or(train);
    let fitted = exec.try_map(&depth_list, |&d| -> Result<(TreeModel, ClassScores)> {
        let model = train_tree(train, d, 0)?;
        let scores = score(&model, eval, Execution::Sequential)?;
        Ok((model, scores))
    })?;
    let trials: Vec<(usize, f64)> =
        depth_list.iter().zip(&fitted).map(|(&d, (_, s))| (d, s.macro_f1)).collect();
    let best_depth = argmax_depth(&trials).expect("non-empty");
    let pos = depth_list.iter().position(|&d| d == best_depth).expect("present");
    let (model, scores) = fitted.into_iter().nth(pos).expect("present");
    Ok(GridSearchResult { best_depth, model, scores, trials })
}

/// The `m_easy` static classes with the highest F1 (ties: smaller id).
pub fn select_easy_classes(scores: &ClassScores, static_ids: &[u16], m_easy: usize) -> Result<BTreeSet<u16>> {
    let mut ids: Vec<u16> = static_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if m_easy > ids.len() {
        return Err(Error::invalid(format!("m_easy = {m_easy} exceeds {} static classes", ids.len())));
    }
    let f1 = |id: &u16| scores.per_class_f1.get(id).copied().unwrap_or(0.0);
    ids.sort_by(|a, b| f1(b).total_cmp(&f1(a)).then(a.cmp(b)));
    Ok(ids.into_iter().take(m_easy).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn argmax_tie_rule() {
        assert_eq!(argmax_depth(&[(2, 0.6), (3, 0.9), (4, 0.9)]), Some(3));
        assert_eq!(argmax_depth(&[(4, 0.9), (3, 0.9)]), Some(3));
        assert_eq!(argmax_depth(&[]), None);
    }

    #[test]
    fn singleton_range() {
        let data: Vec<FeatureVector> =
            (0..20).map(|i| FeatureVector::new(vec![i as f64], (i % 3) as u16)).collect();
        let r = depth_grid_search(&data, 2..=2, None, Execution::Sequential).unwrap();
        assert_eq!(r.best_depth, 2);
        assert_eq!(r.trials.len(), 1);
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 3..=2;
        assert!(depth_grid_search(&data, empty, None, Execution::Sequential).is_err());
    }

    #[test]
    fn plateau_at_three() {
        // label = 3-bit code, features = its bits: depth 2 reaches 4 leaves at
        // most, depth 3 is perfect and deeper trees are identical.
        let mut data = Vec::new();
        for _ in 0..3 {
            for code in 0..8u16 {
                let b = |k: u16| ((code >> k) & 1) as f64;
                data.push(FeatureVector::new(vec![b(0), b(1), b(2), 0.0], code));
            }
        }
        let r = depth_grid_search(&data, 2..=10, None, Execution::Parallel).unwrap();
        assert_eq!(r.best_depth, 3);
        assert_eq!(r.scores.accuracy, 1.0);
        // recompute every depth: the winner is the tie-ruled argmax
        let recomputed: Vec<(usize, f64)> = (2..=10)
            .map(|d| (d, score(&train_tree(&data, d, 0).unwrap(), &data, Execution::Sequential).unwrap().macro_f1))
            .collect();
        assert_eq!(recomputed, r.trials);
        assert!(r.trials[0].1 < 1.0);
    }

    #[test]
    fn easy_selection() {
        let scores = ClassScores {
            per_class_f1: BTreeMap::from([(4, 0.88), (5, 0.70), (6, 0.91), (1, 0.99)]),
            accuracy: 0.0,
            macro_f1: 0.0,
        };
        let e = select_easy_classes(&scores, &[4, 5, 6], 2).unwrap();
        assert_eq!(e, BTreeSet::from([4, 6]));
        assert_eq!(select_easy_classes(&scores, &[4, 5, 6], 3).unwrap(), BTreeSet::from([4, 5, 6]));
        assert!(select_easy_classes(&scores, &[4, 5], 3).is_err());
    }

    #[test]
    fn easy_selection_ties_smaller_id() {
        let scores = ClassScores {
            per_class_f1: BTreeMap::from([(4, 0.9), (5, 0.9), (6, 0.9)]),
            accuracy: 0.0,
            macro_f1: 0.0,
        };
        assert_eq!(select_easy_classes(&scores, &[6, 5, 4], 2).unwrap(), BTreeSet::from([4, 5]));
    }
}
