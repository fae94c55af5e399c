//! Sensor windows, HAPT ingestion and the sub-task datasets derived from them.

mod cache;
mod features;
mod hapt;
mod subtask;
mod synth;
mod window;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use features::{extract_features, extract_all, FeatureVector, N_FEATURES, STATS_PER_CHANNEL};
pub use hapt::{
    hapt_class_names, load_hapt, load_hapt_split, read_split_file, HAPT_STATIC_IDS,
    HAPT_TEST_SUBJECTS,
};
pub use subtask::{compact_labels, make_cnn_dataset, make_dt_dataset, oversample_classes, ClassMap};
pub use synth::{synth_dataset, Archetype, SynthClass, SynthSpec};
pub use window::{window_dataset, window_recording};

/// Samples per second of the HAPT recordings.
pub const SAMPLE_RATE_HZ: f64 = 50.0;
/// 5 s at 50 Hz.
pub const WINDOW_LEN: usize = 250;
/// acc x,y,z then gyro x,y,z.
pub const N_CHANNELS: usize = 6;

/// Inclusive `[start, end]` index range of one labeled activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSegment {
    pub activity_id: u16,
    pub start: usize,
    pub end: usize,
}

impl LabelSegment {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub experiment_id: u32,
    pub user_id: u32,
    pub samples: Vec<[f32; N_CHANNELS]>,
    pub label_segments: Vec<LabelSegment>,
}

impl RawRecording {
    /// Checks that segments lie inside the recording and do not overlap.
    pub fn validate(&self) -> Result<()> {
        let mut segs = self.label_segments.clone();
        segs.sort_by_key(|s| s.start);
        for s in &segs {
            if s.end < s.start || s.end >= self.samples.len() {
                return Err(Error::Shape(format!(
                    "segment [{}, {}] outside recording of {} rows (exp {})",
                    s.start,
                    s.end,
                    self.samples.len(),
                    self.experiment_id
                )));
            }
        }
        for pair in segs.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::Shape(format!(
                    "overlapping segments at rows {} and {} (exp {})",
                    pair[0].start, pair[1].start, self.experiment_id
                )));
            }
        }
        Ok(())
    }
}

/// One fixed-length multichannel segment, stored time-major
/// (`data[t * N_CHANNELS + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub data: Vec<f32>,
    pub label: u16,
    pub subject_id: u32,
}

impl Window {
    pub fn new(data: Vec<f32>, label: u16, subject_id: u32) -> Result<Self> {
        if data.is_empty() || !data.len().is_multiple_of(N_CHANNELS) {
            return Err(Error::Shape(format!(
                "window data length {} is not a positive multiple of {N_CHANNELS}",
                data.len()
            )));
        }
        Ok(Window { data, label, subject_id })
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.data.len() / N_CHANNELS
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, t: usize) -> &[f32] {
        &self.data[t * N_CHANNELS..(t + 1) * N_CHANNELS]
    }

    pub fn channel(&self, c: usize) -> impl Iterator<Item = f32> + '_ {
        self.data.iter().skip(c).step_by(N_CHANNELS).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub windows: Vec<Window>,
    pub class_names: BTreeMap<u16, String>,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(windows: Vec<Window>, class_names: BTreeMap<u16, String>, split: Split) -> Result<Self> {
        let ds = LabeledDataset { windows, class_names, split };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for w in &self.windows {
            if !self.class_names.contains_key(&w.label) {
                return Err(Error::Format(format!("window label {} has no class name", w.label)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn class_ids(&self) -> Vec<u16> {
        self.class_names.keys().copied().collect()
    }

    pub fn labels(&self) -> Vec<u16> {
        self.windows.iter().map(|w| w.label).collect()
    }

    /// Window count per class id; classes without windows report zero.
    pub fn class_counts(&self) -> BTreeMap<u16, usize> {
        let mut counts: BTreeMap<u16, usize> = self.class_names.keys().map(|&k| (k, 0)).collect();
        for w in &self.windows {
            *counts.entry(w.label).or_default() += 1;
        }
        counts
    }

    /// Keeps the windows whose index passes `keep`; class names are retained.
    pub fn filter_indexed(&self, mut keep: impl FnMut(usize, &Window) -> bool) -> LabeledDataset {
        LabeledDataset {
            windows: self
                .windows
                .iter()
                .enumerate()
                .filter(|(i, w)| keep(*i, w))
                .map(|(_, w)| w.clone())
                .collect(),
            class_names: self.class_names.clone(),
            split: self.split,
        }
    }

    /// Deterministic stratified hold-out: within each class every
    /// `round(1/fraction)`-th window (in dataset order) goes to the second set.
    pub fn stratified_holdout(&self, fraction: f64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!("holdout fraction {fraction} not in (0,1)")));
        }
        let stride = (1.0 / fraction).round().max(2.0) as usize;
        let mut seen: BTreeMap<u16, usize> = BTreeMap::new();
        let mut is_holdout = Vec::with_capacity(self.len());
        for w in &self.windows {
            let k = seen.entry(w.label).or_default();
            is_holdout.push(*k % stride == stride - 1);
            *k += 1;
        }
        let fit = self.filter_indexed(|i, _| !is_holdout[i]);
        let hold = self.filter_indexed(|i, _| is_holdout[i]);
        Ok((fit, hold))
    }
}
