//! The two-stage router: the tree classifies easy windows and defers every
//! other window to the CNN through the fallback label.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::cnn::CnnModel;
use crate::cost::{self, cascade_energy, CostReport, McuProfile};
use crate::data::{extract_all, extract_features, LabeledDataset, Window};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::trees::{ClassScores, TreeModel};

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub dt: TreeModel,
    pub cnn: CnnModel,
    pub easy_ids: BTreeSet<u16>,
    pub fallback_id: u16,
    /// Every class of the full task.
    pub class_ids: Vec<u16>,
}

impl CascadeModel {
    pub fn new(dt: TreeModel, cnn: CnnModel, easy_ids: BTreeSet<u16>, fallback_id: u16) -> Result<Self> {
        let cnn_ids: BTreeSet<u16> = cnn.class_map.ids.iter().copied().collect();
        if !easy_ids.is_disjoint(&cnn_ids) {
            return Err(Error::invalid("easy classes overlap the CNN classes"));
        }
        if easy_ids.contains(&fallback_id) || cnn_ids.contains(&fallback_id) {
            return Err(Error::invalid(format!("fallback id {fallback_id} collides with a real class")));
        }
        if let Some(bad) = dt.class_ids.iter().find(|c| **c != fallback_id && !easy_ids.contains(c)) {
            return Err(Error::invalid(format!("tree predicts class {bad}, which is neither easy nor fallback")));
        }
        let class_ids = easy_ids.union(&cnn_ids).copied().collect();
        Ok(CascadeModel { dt, cnn, easy_ids, fallback_id, class_ids })
    }

    /// `(class_id, routed_to_cnn)` for one raw window.
    pub fn predict(&self, w: &Window) -> Result<(u16, bool)> {
        let f = extract_features(w);
        let first = self.dt.predict(&f.values)?;
        if first != self.fallback_id {
            return Ok((first, false));
        }
        Ok((self.cnn.predict(w)?, true))
    }

    pub fn memory_bytes(&self) -> u64 {
        cost::tree_memory_bytes(&self.dt) + cost::cnn_memory_bytes(self.cnn.spec())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CascadeDocument {
            format: CASCADE_FORMAT.into(),
            dt: self.dt.clone(),
            cnn: self.cnn.to_value()?,
            easy_ids: self.easy_ids.iter().copied().collect(),
            fallback_id: self.fallback_id,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CascadeDocument = serde_json::from_str(s)?;
        if doc.format != CASCADE_FORMAT {
            return Err(Error::Format(format!("unsupported cascade format {:?}", doc.format)));
        }
        doc.dt.validate()?;
        CascadeModel::new(doc.dt, CnnModel::from_value(doc.cnn)?, doc.easy_ids.into_iter().collect(), doc.fallback_id)
    }
}

pub const CASCADE_FORMAT: &str = "harcascade-cascade/1";

#[derive(Serialize, Deserialize)]
struct CascadeDocument {
    format: String,
    dt: TreeModel,
    cnn: serde_json::Value,
    easy_ids: Vec<u16>,
    fallback_id: u16,
}

/// Per-window routing record of one evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutingTrace {
    pub predictions: Vec<u16>,
    pub routed_to_cnn: Vec<bool>,
    /// Split nodes visited by the tree for each window (0 for static CNNs).
    pub dt_visits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeMetrics {
    pub n: usize,
    pub n_routed_cnn: usize,
    pub accuracy: f64,
    pub p_fallback: f64,
    pub per_class_f1: BTreeMap<u16, f64>,
    pub macro_f1: f64,
    /// Expected tree energy per inference, feature extraction included (0 for static).
    pub e_dt_j: f64,
    pub e_cnn_j: f64,
    pub avg_energy_j: f64,
    pub avg_latency_s: f64,
    pub memory_bytes: u64,
    /// Tree accuracy on the easy-vs-fallback sub-task (1.0 for static).
    pub dt_stage_accuracy_on_easy: f64,
}

fn check_nonempty(ds: &LabeledDataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("evaluation set is empty".into()));
    }
    Ok(())
}

/// Runs the cascade over `ds` and returns metrics plus the routing trace.
///
/// Average energy is `E_DT + p_fallback * E_CNN` where `E_DT` is the tree's
/// expected cost over this dataset and `p_fallback` the routed fraction.
pub fn evaluate_cascade_traced(
    m: &CascadeModel,
    ds: &LabeledDataset,
    profile: &McuProfile,
    exec: Execution,
) -> Result<(CascadeMetrics, RoutingTrace)> {
    check_nonempty(ds)?;
    let features = extract_all(&ds.windows, exec);
    let first: Vec<(u16, usize)> = exec.try_map(&features, |f| m.dt.predict_path(&f.values))?;
    let routed_idx: Vec<usize> = (0..first.len()).filter(|&i| first[i].0 == m.fallback_id).collect();
    let routed_windows: Vec<Window> = routed_idx.iter().map(|&i| ds.windows[i].clone()).collect();
    let cnn_pred = m.cnn.predict_all(&routed_windows, exec)?;

    let mut predictions: Vec<u16> = first.iter().map(|p| p.0).collect();
    let mut routed = vec![false; ds.len()];
    for (&i, &p) in routed_idx.iter().zip(&cnn_pred) {
        predictions[i] = p;
        routed[i] = true;
    }
    let truth = ds.labels();
    let scores = ClassScores::from_predictions(&truth, &predictions, &m.class_ids)?;

    let dt_ok = truth
        .iter()
        .zip(&first)
        .filter(|(t, (p, _))| {
            let expected = if m.easy_ids.contains(t) { **t } else { m.fallback_id };
            expected == *p
        })
        .count();

    let dt_cost = cost::tree_cost(&m.dt, &features, profile)?;
    let cnn_cost = cost::cnn_cost(m.cnn.spec(), profile);
    let p_fallback = routed_idx.len() as f64 / ds.len() as f64;
    let metrics = CascadeMetrics {
        n: ds.len(),
        n_routed_cnn: routed_idx.len(),
        accuracy: scores.accuracy,
        p_fallback,
        per_class_f1: scores.per_class_f1,
        macro_f1: scores.macro_f1,
        e_dt_j: dt_cost.energy_j,
        e_cnn_j: cnn_cost.energy_j,
        avg_energy_j: cascade_energy(dt_cost.energy_j, cnn_cost.energy_j, p_fallback)?,
        avg_latency_s: dt_cost.latency_s + p_fallback * cnn_cost.latency_s,
        memory_bytes: m.memory_bytes(),
        dt_stage_accuracy_on_easy: dt_ok as f64 / ds.len() as f64,
    };
    let trace = RoutingTrace { predictions, routed_to_cnn: routed, dt_visits: first.iter().map(|p| p.1).collect() };
    Ok((metrics, trace))
}

pub fn evaluate_cascade(m: &CascadeModel, ds: &LabeledDataset, profile: &McuProfile, exec: Execution) -> Result<CascadeMetrics> {
    Ok(evaluate_cascade_traced(m, ds, profile, exec)?.0)
}

/// A CNN trained on every class, run on every window.
pub fn evaluate_static(cnn: &CnnModel, ds: &LabeledDataset, profile: &McuProfile, exec: Execution) -> Result<CascadeMetrics> {
    check_nonempty(ds)?;
    let predictions = cnn.predict_all(&ds.windows, exec)?;
    let scores = ClassScores::from_predictions(&ds.labels(), &predictions, &cnn.class_map.ids)?;
    let c: CostReport = cost::cnn_cost(cnn.spec(), profile);
    Ok(CascadeMetrics {
        n: ds.len(),
        n_routed_cnn: ds.len(),
        accuracy: scores.accuracy,
        p_fallback: 1.0,
        per_class_f1: scores.per_class_f1,
        macro_f1: scores.macro_f1,
        e_dt_j: 0.0,
        e_cnn_j: c.energy_j,
        avg_energy_j: c.energy_j,
        avg_latency_s: c.latency_s,
        memory_bytes: c.memory_bytes,
        dt_stage_accuracy_on_easy: 1.0,
    })
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

/// Exact per-window energy ledger of a traced cascade run.
///
/// Each window is charged the tree cost of its own path plus, when routed,
/// one CNN inference. Every profile constant is converted to an exact
/// rational, so the sum has no rounding.
pub fn exact_average_energy(m: &CascadeModel, trace: &RoutingTrace, profile: &McuProfile) -> BigRational {
    let cpn = exact(profile.cycles_per_node);
    let feature_visits = exact(m.dt.n_features as f64) * exact(profile.visits_per_feature);
    let tree_overhead = exact(profile.tree_overhead_cycles);
    let cnn_cycles = exact_cnn_cycles(m, profile);
    let watts_per_hz = exact(profile.active_power_w) / exact(profile.clock_hz);
    let mut total = BigRational::from_integer(BigInt::from(0));
    for (&visits, &routed) in trace.dt_visits.iter().zip(&trace.routed_to_cnn) {
        let mut cycles = (BigRational::from_integer(BigInt::from(visits)) + &feature_visits) * &cpn + &tree_overhead;
        if routed {
            cycles += &cnn_cycles;
        }
        total += cycles * &watts_per_hz;
    }
    total / BigRational::from_integer(BigInt::from(trace.dt_visits.len()))
}

fn exact_cnn_cycles(m: &CascadeModel, profile: &McuProfile) -> BigRational {
    let macs = cost::count_macs_cnn(m.cnn.spec()).total();
    BigRational::from_integer(BigInt::from(macs)) * exact(profile.cycles_per_mac) + exact(profile.fixed_overhead_cycles)
}

/// `E_DT + p * E_CNN` in exact arithmetic, with `E_DT` from the mean path
/// length and `p = routed / n`.
pub fn exact_cascade_energy(m: &CascadeModel, trace: &RoutingTrace, profile: &McuProfile) -> BigRational {
    let n = BigInt::from(trace.dt_visits.len());
    let total_visits: usize = trace.dt_visits.iter().sum();
    let routed = trace.routed_to_cnn.iter().filter(|r| **r).count();
    let mean_visits = BigRational::new(BigInt::from(total_visits), n.clone());
    let watts_per_hz = exact(profile.active_power_w) / exact(profile.clock_hz);
    let feature_visits = exact(m.dt.n_features as f64) * exact(profile.visits_per_feature);
    let e_dt = ((mean_visits + feature_visits) * exact(profile.cycles_per_node) + exact(profile.tree_overhead_cycles))
        * &watts_per_hz;
    let e_cnn = exact_cnn_cycles(m, profile) * &watts_per_hz;
    let p = BigRational::new(BigInt::from(routed), n);
    e_dt + p * e_cnn
}

/// One CSV row per labeled metrics record.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[(String, CascadeMetrics)]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        mode: &'a str,
        n: usize,
        accuracy: f64,
        macro_f1: f64,
        p_fallback: f64,
        energy_uj: f64,
        latency_ms: f64,
        memory_kb: f64,
        dt_easy_accuracy: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for (mode, m) in rows {
        w.serialize(Row {
            mode,
            n: m.n,
            accuracy: m.accuracy,
            macro_f1: m.macro_f1,
            p_fallback: m.p_fallback,
            energy_uj: m.avg_energy_j * 1e6,
            latency_ms: m.avg_latency_s * 1e3,
            memory_kb: m.memory_bytes as f64 / 1000.0,
            dt_easy_accuracy: m.dt_stage_accuracy_on_easy,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
