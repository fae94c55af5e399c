//! Analytical MCU cost model: MAC and node-visit counts turned into cycles,
//! latency, energy and parameter memory.
//!
//! Batchnorm multiplies and pooling comparisons are folded into the MAC count
//! as MAC-equivalents. Memory covers parameters only, not activation buffers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cnn::CnnSpec;
use crate::data::FeatureVector;
use crate::error::{Error, Result};
use crate::trees::{ForestModel, TreeModel};

/// Bytes per serialized tree node: feature index (2) + threshold (4) +
/// children / class (4), padded to 12.
pub const BYTES_PER_TREE_NODE: u64 = 12;
/// 32-bit parameters.
pub const BYTES_PER_PARAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McuProfile {
    pub clock_hz: f64,
    pub active_power_w: f64,
    pub memory_budget_bytes: u64,
    pub cycles_per_mac: f64,
    pub cycles_per_node: f64,
    /// Charged once per CNN invocation (layer setup, buffer management).
    pub fixed_overhead_cycles: f64,
    /// Charged once per tree / forest invocation.
    pub tree_overhead_cycles: f64,
    /// Node-visit equivalents to finalize one input feature from its
    /// per-sample running accumulators.
    pub visits_per_feature: f64,
}

impl Default for McuProfile {
    /// 205.1 MHz, 3.8 mW active power, 520 kB of memory.
    fn default() -> Self {
        McuProfile {
            clock_hz: 205.1e6,
            active_power_w: 3.8e-3,
            memory_budget_bytes: 520 * 1024,
            cycles_per_mac: 1.0,
            cycles_per_node: 5.0,
            fixed_overhead_cycles: 10_000.0,
            tree_overhead_cycles: 0.0,
            visits_per_feature: 1.0,
        }
    }
}

impl McuProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clock_hz", self.clock_hz),
            ("active_power_w", self.active_power_w),
            ("cycles_per_mac", self.cycles_per_mac),
            ("cycles_per_node", self.cycles_per_node),
            ("fixed_overhead_cycles", self.fixed_overhead_cycles),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("profile field {name} must be strictly positive, got {v}")));
            }
        }
        if self.memory_budget_bytes == 0 {
            return Err(Error::invalid("memory_budget_bytes must be positive"));
        }
        for (name, v) in [("tree_overhead_cycles", self.tree_overhead_cycles), ("visits_per_feature", self.visits_per_feature)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("profile field {name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// MAC-equivalent breakdown of one CNN inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacCount {
    pub conv: u64,
    pub batchnorm: u64,
    pub pool: u64,
    pub fc: u64,
}

impl MacCount {
    pub fn total(&self) -> u64 {
        self.conv + self.batchnorm + self.pool + self.fc
    }
}

/// `C_in*C_out*K*L` per same-padded conv, `2*C*L` per batchnorm, one
/// comparison per pooled output, `in*out` for the FC layer.
pub fn count_macs_cnn(spec: &CnnSpec) -> MacCount {
    let lengths = spec.lengths();
    let mut m = MacCount { conv: 0, batchnorm: 0, pool: 0, fc: 0 };
    for b in 0..3 {
        let (ci, co, k) = (spec.in_channels(b) as u64, spec.channels[b] as u64, spec.kernel_sizes[b] as u64);
        let len = lengths[b] as u64;
        m.conv += ci * co * k * len;
        m.batchnorm += 2 * co * len;
        m.pool += co * lengths[b + 1] as u64;
    }
    m.fc = (spec.fc_inputs() * spec.n_classes) as u64;
    m
}

/// Expected tree work per inference, in node visits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeCost {
    /// Mean split nodes visited per sample, summed over the trees of a forest.
    pub path_visits: f64,
    /// Feature-extraction term: features x visits per feature.
    pub feature_visits: f64,
}

impl TreeCost {
    pub fn total_visits(&self) -> f64 {
        self.path_visits + self.feature_visits
    }
}

/// Models whose inference walks one or more root-to-leaf paths.
pub trait PathModel {
    fn path_visits(&self, x: &[f64]) -> Result<usize>;
    fn n_features(&self) -> usize;
}

impl PathModel for TreeModel {
    fn path_visits(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_path(x)?.1)
    }

    fn n_features(&self) -> usize {
        self.n_features
    }
}

impl PathModel for ForestModel {
    fn path_visits(&self, x: &[f64]) -> Result<usize> {
        self.trees.iter().map(|t| Ok(t.predict_path(x)?.1)).sum()
    }

    fn n_features(&self) -> usize {
        self.trees.first().map_or(0, |t| t.n_features)
    }
}

pub fn expected_tree_cost<M: PathModel + ?Sized>(model: &M, data: &[FeatureVector], profile: &McuProfile) -> Result<TreeCost> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("tree cost needs at least one sample".into()));
    }
    let mut total = 0usize;
    for x in data {
        total += model.path_visits(&x.values)?;
    }
    Ok(TreeCost {
        path_visits: total as f64 / data.len() as f64,
        feature_visits: model.n_features() as f64 * profile.visits_per_feature,
    })
}

/// Work of one inference in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub macs: u64,
    pub node_visits: f64,
    pub overhead_cycles: f64,
}

impl Workload {
    pub fn cnn(macs: u64, profile: &McuProfile) -> Self {
        Workload { macs, node_visits: 0.0, overhead_cycles: profile.fixed_overhead_cycles }
    }

    pub fn tree(cost: &TreeCost, profile: &McuProfile) -> Self {
        Workload { macs: 0, node_visits: cost.total_visits(), overhead_cycles: profile.tree_overhead_cycles }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub macs: u64,
    pub tree_node_visits: f64,
    pub cycles: f64,
    pub latency_s: f64,
    pub energy_j: f64,
    pub memory_bytes: u64,
}

/// `cycles = macs*cpm + visits*cpn + overhead`, `latency = cycles / clock`,
/// `energy = power * latency`.
pub fn cost_report(work: Workload, profile: &McuProfile, memory_bytes: u64) -> CostReport {
    let cycles = work.macs as f64 * profile.cycles_per_mac + work.node_visits * profile.cycles_per_node + work.overhead_cycles;
    let latency_s = cycles / profile.clock_hz;
    CostReport {
        macs: work.macs,
        tree_node_visits: work.node_visits,
        cycles,
        latency_s,
        energy_j: profile.active_power_w * latency_s,
        memory_bytes,
    }
}

pub fn cnn_memory_bytes(spec: &CnnSpec) -> u64 {
    (spec.n_params() + spec.n_buffers()) as u64 * BYTES_PER_PARAM
}

pub fn tree_memory_bytes(model: &TreeModel) -> u64 {
    model.n_nodes() as u64 * BYTES_PER_TREE_NODE
}

pub fn forest_memory_bytes(model: &ForestModel) -> u64 {
    model.trees.iter().map(tree_memory_bytes).sum()
}

/// Cost of one CNN inference.
pub fn cnn_cost(spec: &CnnSpec, profile: &McuProfile) -> CostReport {
    cost_report(Workload::cnn(count_macs_cnn(spec).total(), profile), profile, cnn_memory_bytes(spec))
}

/// Expected cost of one tree inference (feature extraction included).
pub fn tree_cost(model: &TreeModel, data: &[FeatureVector], profile: &McuProfile) -> Result<CostReport> {
    let c = expected_tree_cost(model, data, profile)?;
    Ok(cost_report(Workload::tree(&c, profile), profile, tree_memory_bytes(model)))
}

pub fn forest_cost(model: &ForestModel, data: &[FeatureVector], profile: &McuProfile) -> Result<CostReport> {
    let c = expected_tree_cost(model, data, profile)?;
    Ok(cost_report(Workload::tree(&c, profile), profile, forest_memory_bytes(model)))
}

/// Average cascade energy: `e_dt + p_fallback * e_cnn`.
pub fn cascade_energy(e_dt: f64, e_cnn: f64, p_fallback: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_fallback) {
        return Err(Error::invalid(format!("p_fallback {p_fallback} outside [0, 1]")));
    }
    Ok(e_dt + p_fallback * e_cnn)
}

/// Writes labeled reports as CSV (`name` column first).
pub fn write_reports_csv<W: Write>(out: W, reports: &[(String, CostReport)]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        macs: u64,
        tree_node_visits: f64,
        cycles: f64,
        latency_ms: f64,
        energy_uj: f64,
        memory_bytes: u64,
    }
    let mut w = csv::Writer::from_writer(out);
    for (name, r) in reports {
        w.serialize(Row {
            name,
            macs: r.macs,
            tree_node_visits: r.tree_node_visits,
            cycles: r.cycles,
            latency_ms: r.latency_s * 1e3,
            energy_uj: r.energy_j * 1e6,
            memory_bytes: r.memory_bytes,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
