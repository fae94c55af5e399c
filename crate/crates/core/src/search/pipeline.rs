use std::collections::BTreeSet;

use super::{pareto_indices, spec_strings, ParetoPoint, PointKind, SweepConfig};
use crate::cascade::{evaluate_cascade, evaluate_static, CascadeModel};
use crate::cnn::{train_cnn, CnnModel, CnnSpec, TrainConfig, TrainLog};
use crate::cost::{cnn_cost, forest_cost, McuProfile};
use crate::data::{compact_labels, extract_all, make_cnn_dataset, make_dt_dataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};
use crate::trees::{depth_grid_search, score, select_easy_classes, ClassScores, ForestModel, ForestOptions, GridSearchResult};
use crate::{trees, FALLBACK_ID};

const STREAM_HARD: u64 = 1;
const STREAM_STATIC: u64 = 2;
const STREAM_FOREST: u64 = 3;

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub easy_ids: BTreeSet<u16>,
    pub full_task_depth: usize,
    pub full_task_scores: ClassScores,
    pub trials: Vec<(usize, f64)>,
}

/// Grid-searches a tree on the full task and keeps the `m_easy` best-scoring
/// static classes as the easy set.
pub fn decompose(train: &LabeledDataset, static_ids: &[u16], cfg: &SweepConfig, exec: Execution) -> Result<Decomposition> {
    let features = extract_all(&train.windows, exec);
    let g = depth_grid_search(&features, cfg.dt_depth_min..=cfg.dt_depth_max, None, exec)?;
    let easy_ids = select_easy_classes(&g.scores, static_ids, cfg.m_easy)?;
    Ok(Decomposition { easy_ids, full_task_depth: g.best_depth, full_task_scores: g.scores, trials: g.trials })
}

/// The easy-vs-fallback tree shared by every cascade.
pub fn train_final_dt(
    train: &LabeledDataset,
    easy: &BTreeSet<u16>,
    cfg: &SweepConfig,
    exec: Execution,
) -> Result<GridSearchResult> {
    let dt_ds = make_dt_dataset(train, easy, FALLBACK_ID)?;
    let features = extract_all(&dt_ds.windows, exec);
    depth_grid_search(&features, cfg.dt_depth_min..=cfg.dt_depth_max, None, exec)
}

/// Stratified `(fit, valid)` split of the training set.
pub fn split_validation(train: &LabeledDataset, cfg: &SweepConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let (fit, valid) = train.stratified_holdout(cfg.valid_fraction)?;
    if valid.is_empty() || fit.is_empty() {
        return Err(Error::EmptyDataset("validation split left an empty side".into()));
    }
    Ok((fit, valid))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepTarget {
    /// Only the classes outside the easy set.
    Hard(BTreeSet<u16>),
    AllClasses,
}

impl SweepTarget {
    pub fn kind(&self) -> PointKind {
        match self {
            SweepTarget::Hard(_) => PointKind::Adaptive,
            SweepTarget::AllClasses => PointKind::Static,
        }
    }

    fn stream(&self) -> u64 {
        match self {
            SweepTarget::Hard(_) => STREAM_HARD,
            SweepTarget::AllClasses => STREAM_STATIC,
        }
    }

    fn prepare(&self, ds: &LabeledDataset) -> Result<(LabeledDataset, crate::data::ClassMap)> {
        match self {
            SweepTarget::Hard(easy) => make_cnn_dataset(ds, easy),
            SweepTarget::AllClasses => compact_labels(ds),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub spec: CnnSpec,
    pub model: CnnModel,
    pub log: TrainLog,
}

/// Trains every template of the sweep on `target`, one derived seed each.
///
/// Runs are independent and may execute concurrently; the result order
/// follows [`SweepConfig::specs`].
pub fn sweep_cnns(
    fit: &LabeledDataset,
    valid: &LabeledDataset,
    target: &SweepTarget,
    cfg: &SweepConfig,
    exec: Execution,
) -> Result<Vec<SweepEntry>> {
    let (fit_c, map) = target.prepare(fit)?;
    let (valid_c, valid_map) = target.prepare(valid)?;
    if map != valid_map {
        return Err(Error::invalid("training and validation splits cover different classes"));
    }
    let input_len = fit.windows.first().map_or(0, |w| w.len());
    let specs = cfg.specs(map.len(), input_len)?;
    let stream = derive_seed(cfg.seed, target.stream());
    let jobs: Vec<(usize, CnnSpec)> = specs.into_iter().enumerate().collect();
    exec.try_map(&jobs, |(i, spec)| {
        let train_cfg = TrainConfig { seed: derive_seed(stream, *i as u64), ..cfg.train.clone() };
        let (model, log) = train_cnn(spec, &fit_c, &valid_c, &map, &train_cfg)?;
        Ok(SweepEntry { spec: spec.clone(), model, log })
    })
}

#[derive(Debug, Clone)]
pub struct Assembly {
    /// One cascade per validation-Pareto-optimal hard-class CNN, cheapest first.
    pub cascades: Vec<CascadeModel>,
    /// Adaptive points (aligned with `cascades`) followed by every static point.
    pub points: Vec<ParetoPoint>,
}

/// Selects hard-class CNNs on the validation Pareto front, pairs each with the
/// shared tree, and evaluates cascades and static CNNs on the test set.
pub fn assemble(
    dt: &trees::TreeModel,
    easy: &BTreeSet<u16>,
    hard: &[SweepEntry],
    statics: &[SweepEntry],
    valid: &LabeledDataset,
    test: &LabeledDataset,
    profile: &McuProfile,
    exec: Execution,
) -> Result<Assembly> {
    let coords: Vec<(f64, f64)> =
        hard.iter().map(|e| (e.model.valid_accuracy, cnn_cost(&e.spec, profile).energy_j)).collect();
    let selected = pareto_indices(&coords)?;
    let mut cascades = Vec::with_capacity(selected.len());
    let mut points = Vec::new();
    for i in selected {
        let entry = &hard[i];
        let cascade = CascadeModel::new(dt.clone(), entry.model.clone(), easy.clone(), FALLBACK_ID)?;
        let v = evaluate_cascade(&cascade, valid, profile, exec)?;
        let t = evaluate_cascade(&cascade, test, profile, exec)?;
        let (channels, kernels) = spec_strings(&entry.spec);
        points.push(ParetoPoint {
            kind: PointKind::Adaptive,
            config_id: entry.spec.config_id(),
            channels,
            kernels,
            accuracy: t.accuracy,
            valid_accuracy: Some(v.accuracy),
            p_fallback: Some(t.p_fallback),
            energy_j: t.avg_energy_j,
            latency_s: t.avg_latency_s,
            memory_bytes: t.memory_bytes,
        });
        cascades.push(cascade);
    }
    for entry in statics {
        let t = evaluate_static(&entry.model, test, profile, exec)?;
        let (channels, kernels) = spec_strings(&entry.spec);
        points.push(ParetoPoint {
            kind: PointKind::Static,
            config_id: entry.spec.config_id(),
            channels,
            kernels,
            accuracy: t.accuracy,
            valid_accuracy: Some(entry.model.valid_accuracy),
            p_fallback: Some(1.0),
            energy_j: t.avg_energy_j,
            latency_s: t.avg_latency_s,
            memory_bytes: t.memory_bytes,
        });
    }
    Ok(Assembly { cascades, points })
}

/// One point per `(n_trees, depth)` pair of the forest grid.
///
/// For each depth a single forest of `forest_trees_max` trees is grown; the
/// forest with `n` trees is its first `n` members, since tree `i` depends only
/// on the depth seed and `i`.
pub fn run_forest_baseline(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &SweepConfig,
    profile: &McuProfile,
    exec: Execution,
) -> Result<Vec<ParetoPoint>> {
    cfg.validate()?;
    let train_f = extract_all(&train.windows, exec);
    let test_f = extract_all(&test.windows, exec);
    let stream = derive_seed(cfg.seed, STREAM_FOREST);
    let depths: Vec<usize> = (cfg.forest_depth_min..=cfg.forest_depth_max).collect();
    let per_depth = exec.try_map(&depths, |&d| -> Result<Vec<ParetoPoint>> {
        let full = trees::train_forest(
            &train_f,
            cfg.forest_trees_max,
            d,
            derive_seed(stream, d as u64),
            ForestOptions::default(),
            Execution::Sequential,
        )?;
        (1..=cfg.forest_trees_max)
            .map(|n| {
                let forest =
                    ForestModel { trees: full.trees[..n].to_vec(), n_trees: n, class_ids: full.class_ids.clone() };
                let acc = score(&forest, &test_f, Execution::Sequential)?.accuracy;
                let c = forest_cost(&forest, &test_f, profile)?;
                Ok(ParetoPoint {
                    kind: PointKind::Forest,
                    config_id: format!("rf_t{n}_d{d}"),
                    channels: String::new(),
                    kernels: String::new(),
                    accuracy: acc,
                    valid_accuracy: None,
                    p_fallback: None,
                    energy_j: c.energy_j,
                    latency_s: c.latency_s,
                    memory_bytes: c.memory_bytes,
                })
            })
            .collect()
    })?;
    Ok(per_depth.into_iter().flatten().collect())
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub decomposition: Decomposition,
    pub dt: GridSearchResult,
    pub hard: Vec<SweepEntry>,
    pub statics: Vec<SweepEntry>,
    pub assembly: Assembly,
}

/// Task decomposition, final tree, CNN sweeps and cascade assembly in order.
pub fn run_pipeline(
    train: &LabeledDataset,
    test: &LabeledDataset,
    static_ids: &[u16],
    cfg: &SweepConfig,
    profile: &McuProfile,
    exec: Execution,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    profile.validate()?;
    let decomposition = decompose(train, static_ids, cfg, exec)?;
    let dt = train_final_dt(train, &decomposition.easy_ids, cfg, exec)?;
    let (fit, valid) = split_validation(train, cfg)?;
    let hard = sweep_cnns(&fit, &valid, &SweepTarget::Hard(decomposition.easy_ids.clone()), cfg, exec)?;
    let statics = sweep_cnns(&fit, &valid, &SweepTarget::AllClasses, cfg, exec)?;
    let assembly = assemble(&dt.model, &decomposition.easy_ids, &hard, &statics, &valid, test, profile, exec)?;
    Ok(PipelineOutput { decomposition, dt, hard, statics, assembly })
}
