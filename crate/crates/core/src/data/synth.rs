//! Controllable synthetic HAR-like data for desk-scale runs and tests.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Split, Window, N_CHANNELS, SAMPLE_RATE_HZ, WINDOW_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Archetype {
    /// Fixed gravity direction on the accelerometer, near-zero rotation.
    Static { gravity: [f32; 3] },
    /// Band-limited oscillation: per window a frequency is drawn from
    /// `[freq_lo_hz, freq_hi_hz]` and an amplitude from `[amp_lo, amp_hi]`.
    Dynamic { freq_lo_hz: f64, freq_hi_hz: f64, amp_lo: f64, amp_hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub id: u16,
    pub name: String,
    pub archetype: Archetype,
    pub train_count: usize,
    pub test_count: usize,
}

impl SynthClass {
    pub fn is_static(&self) -> bool {
        matches!(self.archetype, Archetype::Static { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    /// Std of the additive white noise on every channel.
    pub noise: f64,
    /// Per-window uniform jitter of the static gravity direction.
    pub orientation_jitter: f64,
    pub window_len: usize,
}

impl Default for SynthSpec {
    /// Four classes, two static. The test split has a 40% easy share.
    fn default() -> Self {
        let class = |id, name: &str, archetype, train_count, test_count| SynthClass {
            id,
            name: name.to_string(),
            archetype,
            train_count,
            test_count,
        };
        SynthSpec {
            classes: vec![
                class(1, "SITTING", Archetype::Static { gravity: [0.25, 0.45, 0.86] }, 150, 40),
                class(2, "LAYING", Archetype::Static { gravity: [0.95, 0.05, -0.30] }, 150, 40),
                class(
                    3,
                    "WALKING",
                    Archetype::Dynamic { freq_lo_hz: 1.4, freq_hi_hz: 1.9, amp_lo: 0.3, amp_hi: 0.6 },
                    150,
                    60,
                ),
                class(
                    4,
                    "STAIRS",
                    Archetype::Dynamic { freq_lo_hz: 2.3, freq_hi_hz: 2.9, amp_lo: 0.3, amp_hi: 0.6 },
                    150,
                    60,
                ),
            ],
            noise: 0.05,
            orientation_jitter: 0.05,
            window_len: WINDOW_LEN,
        }
    }
}

impl SynthSpec {
    pub fn static_ids(&self) -> Vec<u16> {
        self.classes.iter().filter(|c| c.is_static()).map(|c| c.id).collect()
    }

    pub fn class_names(&self) -> BTreeMap<u16, String> {
        self.classes.iter().map(|c| (c.id, c.name.clone())).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.classes.len() < 3 {
            return Err(Error::invalid(format!("synthetic spec needs at least 3 classes, got {}", self.classes.len())));
        }
        if self.class_names().len() != self.classes.len() {
            return Err(Error::invalid("duplicate synthetic class id"));
        }
        if self.window_len == 0 || !(self.noise >= 0.0) || !(self.orientation_jitter >= 0.0) {
            return Err(Error::invalid("window_len must be positive and noise levels non-negative"));
        }
        for c in &self.classes {
            if let Archetype::Dynamic { freq_lo_hz, freq_hi_hz, amp_lo, amp_hi } = c.archetype {
                if !(freq_lo_hz > 0.0 && freq_lo_hz <= freq_hi_hz && amp_lo >= 0.0 && amp_lo <= amp_hi) {
                    return Err(Error::invalid(format!("bad dynamic band for class {}", c.id)));
                }
            }
        }
        Ok(())
    }

    fn window(&self, class: &SynthClass, subject_id: u32, rng: &mut ChaCha8Rng) -> Window {
        let len = self.window_len;
        let noise = Normal::new(0.0, self.noise.max(f64::MIN_POSITIVE)).expect("finite std");
        let noisy = |rng: &mut ChaCha8Rng| if self.noise > 0.0 { noise.sample(rng) } else { 0.0 };
        let mut data = vec![0.0f32; len * N_CHANNELS];
        match &class.archetype {
            Archetype::Static { gravity } => {
                let j = self.orientation_jitter;
                let g: Vec<f64> = gravity
                    .iter()
                    .map(|&v| v as f64 + if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 })
                    .collect();
                for t in 0..len {
                    for c in 0..N_CHANNELS {
                        let base = if c < 3 { g[c] } else { 0.0 };
                        data[t * N_CHANNELS + c] = (base + noisy(rng)) as f32;
                    }
                }
            }
            Archetype::Dynamic { freq_lo_hz, freq_hi_hz, amp_lo, amp_hi } => {
                let freq = rng.gen_range(*freq_lo_hz..=*freq_hi_hz);
                let amp = rng.gen_range(*amp_lo..=*amp_hi);
                let phases: Vec<f64> = (0..N_CHANNELS).map(|_| rng.gen_range(0.0..TAU)).collect();
                let gains: Vec<f64> = (0..N_CHANNELS).map(|_| rng.gen_range(0.6..1.0)).collect();
                for t in 0..len {
                    let time = t as f64 / SAMPLE_RATE_HZ;
                    for c in 0..N_CHANNELS {
                        let gravity = if c == 2 { 1.0 } else { 0.0 };
                        let arg = TAU * freq * time + phases[c];
                        // fundamental plus a weaker second harmonic
                        let osc = arg.sin() + 0.3 * (2.0 * arg).sin();
                        data[t * N_CHANNELS + c] = (gravity + amp * gains[c] * osc + noisy(rng)) as f32;
                    }
                }
            }
        }
        Window { data, label: class.id, subject_id }
    }
}

/// Deterministic train/test datasets for `spec`; windows are emitted class by class.
pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let make = |split: Split, stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut windows = Vec::new();
        for class in &spec.classes {
            let n = if split == Split::Train { class.train_count } else { class.test_count };
            for i in 0..n {
                let subject = match split {
                    Split::Train => 1 + (i % 20) as u32,
                    Split::Test => 21 + (i % 10) as u32,
                };
                windows.push(spec.window(class, subject, &mut rng));
            }
        }
        LabeledDataset::new(windows, spec.class_names(), split)
    };
    Ok((make(Split::Train, 0)?, make(Split::Test, 1)?))
}
