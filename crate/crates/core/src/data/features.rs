use serde::{Deserialize, Serialize};

use super::{Window, N_CHANNELS};
use crate::exec::Execution;

/// mean, std, min, max
pub const STATS_PER_CHANNEL: usize = 4;
pub const N_FEATURES: usize = N_CHANNELS * STATS_PER_CHANNEL;

/// Tree input: a flat list of real-valued features plus the class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: u16,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, label: u16) -> Self {
        FeatureVector { values, label }
    }
}

/// Per-channel mean, population std, min and max, channel-major.
pub fn extract_features(w: &Window) -> FeatureVector {
    let mut values = Vec::with_capacity(N_FEATURES);
    for c in 0..N_CHANNELS {
        // Welford
        let (mut n, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in w.channel(c) {
            let v = v as f64;
            n += 1.0;
            let d = v - mean;
            mean += d / n;
            m2 += d * (v - mean);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let std = if n > 0.0 { (m2 / n).max(0.0).sqrt() } else { 0.0 };
        values.extend_from_slice(&[mean, std, lo, hi]);
    }
    FeatureVector { values, label: w.label }
}

pub fn extract_all(windows: &[Window], exec: Execution) -> Vec<FeatureVector> {
    exec.map(windows, extract_features)
}
