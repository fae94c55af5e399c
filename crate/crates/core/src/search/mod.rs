//! Architecture sweep, Pareto extraction and the end-to-end training flow.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnn::{CnnSpec, TrainConfig};
use crate::error::{Error, Result};

mod export;
mod pipeline;

pub use export::{read_points_csv, write_plot_csv, write_sweep_csv};
pub use pipeline::{
    assemble, decompose, run_forest_baseline, run_pipeline, split_validation, sweep_cnns, train_final_dt,
    Assembly, Decomposition, PipelineOutput, SweepEntry, SweepTarget,
};

/// `"HAR"` in ASCII.
pub const DEFAULT_MASTER_SEED: u64 = 0x48_41_52;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelPolicy {
    /// One channel count and one kernel size shared by all three blocks.
    #[default]
    Tied,
    /// Every per-block combination.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub channel_choices: Vec<usize>,
    pub kernel_choices: Vec<usize>,
    pub channel_policy: ChannelPolicy,
    pub dt_depth_min: usize,
    pub dt_depth_max: usize,
    pub m_easy: usize,
    pub forest_trees_max: usize,
    pub forest_depth_min: usize,
    pub forest_depth_max: usize,
    pub seed: u64,
    pub train: TrainConfig,
    /// Share of each training class held out for CNN checkpointing and Pareto selection.
    pub valid_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            channel_choices: vec![2, 4, 8, 16, 32, 64, 128],
            kernel_choices: vec![7, 15],
            channel_policy: ChannelPolicy::Tied,
            dt_depth_min: 2,
            dt_depth_max: 10,
            m_easy: 2,
            forest_trees_max: 15,
            forest_depth_min: 2,
            forest_depth_max: 20,
            seed: DEFAULT_MASTER_SEED,
            train: TrainConfig::default(),
            valid_fraction: 0.2,
        }
    }
}

impl SweepConfig {
    /// A desk-scale sweep for the synthetic generator.
    pub fn synthetic() -> Self {
        SweepConfig {
            channel_choices: vec![2, 4, 8, 16],
            ..SweepConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_choices.is_empty() || self.kernel_choices.is_empty() {
            return Err(Error::invalid("channel and kernel choice sets must be non-empty"));
        }
        if self.dt_depth_min < 1 || self.dt_depth_min > self.dt_depth_max {
            return Err(Error::invalid(format!("bad DT depth range {}..={}", self.dt_depth_min, self.dt_depth_max)));
        }
        if self.forest_trees_max < 1 || self.forest_depth_min < 1 || self.forest_depth_min > self.forest_depth_max {
            return Err(Error::invalid("bad forest grid"));
        }
        if !(self.valid_fraction > 0.0 && self.valid_fraction < 1.0) {
            return Err(Error::invalid(format!("valid_fraction {} outside (0, 1)", self.valid_fraction)));
        }
        self.specs(2, 250).map(|_| ())
    }

    /// The CNN templates of the sweep, in a fixed order.
    pub fn specs(&self, n_classes: usize, input_len: usize) -> Result<Vec<CnnSpec>> {
        let mut out = Vec::new();
        let make = |ch: [usize; 3], k: [usize; 3]| CnnSpec::with_input(ch, k, n_classes, 6, input_len);
        match self.channel_policy {
            ChannelPolicy::Tied => {
                for &c in &self.channel_choices {
                    for &k in &self.kernel_choices {
                        out.push(make([c; 3], [k; 3])?);
                    }
                }
            }
            ChannelPolicy::Free => {
                let cs = &self.channel_choices;
                let ks = &self.kernel_choices;
                for &c0 in cs {
                    for &c1 in cs {
                        for &c2 in cs {
                            for &k0 in ks {
                                for &k1 in ks {
                                    for &k2 in ks {
                                        out.push(make([c0, c1, c2], [k0, k1, k2])?);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Short SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// First 16 hex digits of the SHA-256 of a value's JSON serialization.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Adaptive,
    Static,
    Forest,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::Adaptive => "adaptive",
            PointKind::Static => "static",
            PointKind::Forest => "forest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub kind: PointKind,
    pub config_id: String,
    /// `c1-c2-c3`, empty for forests.
    pub channels: String,
    /// `k1-k2-k3`, empty for forests.
    pub kernels: String,
    /// Test accuracy.
    pub accuracy: f64,
    /// Accuracy on the validation hold-out, when one was used.
    pub valid_accuracy: Option<f64>,
    pub p_fallback: Option<f64>,
    pub energy_j: f64,
    pub latency_s: f64,
    pub memory_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostAxis {
    Energy,
    Memory,
}

impl ParetoPoint {
    pub fn cost(&self, axis: CostAxis) -> f64 {
        match axis {
            CostAxis::Energy => self.energy_j,
            CostAxis::Memory => self.memory_bytes as f64,
        }
    }
}

/// Indices of the points not dominated in (maximize accuracy, minimize cost),
/// sorted by cost ascending, then accuracy descending, then index.
///
/// A point is dominated when another has accuracy and cost at least as good
/// and is strictly better in one of them. Exact duplicates dominate nothing,
/// so all copies of a non-dominated point are kept.
pub fn pareto_indices(points: &[(f64, f64)]) -> Result<Vec<usize>> {
    if let Some(i) = points.iter().position(|(a, c)| !a.is_finite() || !c.is_finite()) {
        return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i].1.total_cmp(&points[j].1).then(points[j].0.total_cmp(&points[i].0)).then(i.cmp(&j))
    });
    let mut front = Vec::new();
    let mut best_cheaper = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let cost = points[order[start]].1;
        let end = start + order[start..].iter().take_while(|&&i| points[i].1 == cost).count();
        // sorted by accuracy descending within a cost group
        let group_best = points[order[start]].0;
        if group_best > best_cheaper {
            front.extend(order[start..end].iter().copied().filter(|&i| points[i].0 == group_best));
            best_cheaper = group_best;
        }
        start = end;
    }
    Ok(front)
}

/// The non-dominated subset of `points` on the given cost axis, sorted by cost.
pub fn pareto_front(points: &[ParetoPoint], axis: CostAxis) -> Result<Vec<ParetoPoint>> {
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.accuracy, p.cost(axis))).collect();
    Ok(pareto_indices(&coords)?.into_iter().map(|i| points[i].clone()).collect())
}

/// Per-point membership flags of the front.
pub fn pareto_flags(points: &[ParetoPoint], axis: CostAxis) -> Result<Vec<bool>> {
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.accuracy, p.cost(axis))).collect();
    let mut flags = vec![false; points.len()];
    for i in pareto_indices(&coords)? {
        flags[i] = true;
    }
    Ok(flags)
}

/// Highest accuracy, then lowest energy, then smallest config id.
pub fn best_by_accuracy<'a>(points: impl IntoIterator<Item = &'a ParetoPoint>) -> Option<&'a ParetoPoint> {
    points.into_iter().min_by(|a, b| {
        b.accuracy.total_cmp(&a.accuracy).then(a.energy_j.total_cmp(&b.energy_j)).then(a.config_id.cmp(&b.config_id))
    })
}

/// Points sorted for emission: kind, then config id.
pub fn sort_points(points: &mut [ParetoPoint]) {
    points.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.config_id.cmp(&b.config_id)));
}

pub(crate) fn spec_strings(spec: &CnnSpec) -> (String, String) {
    let join = |v: &[usize; 3]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-");
    (join(&spec.channels), join(&spec.kernel_sizes))
}
