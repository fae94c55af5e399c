use serde::{Deserialize, Serialize};

use super::network::{ConvBlock, Network};
use super::spec::CnnSpec;
use super::train::TrainConfig;
use super::{kernels, Tensor};
use crate::data::{ClassMap, LabeledDataset, Window, N_CHANNELS};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Per-channel standardization fitted on the training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: [f32; N_CHANNELS],
    pub std: [f32; N_CHANNELS],
}

impl InputNorm {
    pub fn identity() -> Self {
        InputNorm { mean: [0.0; N_CHANNELS], std: [1.0; N_CHANNELS] }
    }

    pub fn fit(ds: &LabeledDataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset("cannot fit input normalization".into()));
        }
        let mut sum = [0.0f64; N_CHANNELS];
        let mut sq = [0.0f64; N_CHANNELS];
        let mut n = 0usize;
        for w in &ds.windows {
            for row in w.data.chunks_exact(N_CHANNELS) {
                for c in 0..N_CHANNELS {
                    sum[c] += row[c] as f64;
                }
            }
            n += w.len();
        }
        let mean = sum.map(|s| s / n as f64);
        for w in &ds.windows {
            for row in w.data.chunks_exact(N_CHANNELS) {
                for c in 0..N_CHANNELS {
                    sq[c] += (row[c] as f64 - mean[c]).powi(2);
                }
            }
        }
        let std = std::array::from_fn(|c| {
            let s = (sq[c] / n as f64).sqrt();
            if s > 1e-8 {
                s as f32
            } else {
                1.0
            }
        });
        Ok(InputNorm { mean: mean.map(|m| m as f32), std })
    }

    /// Normalized, channel-major copy of the window (`channels x length`).
    pub fn apply(&self, w: &Window) -> Vec<f32> {
        let len = w.len();
        let mut out = vec![0.0f32; len * N_CHANNELS];
        for (t, row) in w.data.chunks_exact(N_CHANNELS).enumerate() {
            for c in 0..N_CHANNELS {
                out[c * len + t] = (row[c] - self.mean[c]) / self.std[c];
            }
        }
        out
    }

    pub fn batch(&self, windows: &[&Window]) -> Tensor<f32> {
        let len = windows.first().map_or(0, |w| w.len());
        let mut data = Vec::with_capacity(windows.len() * len * N_CHANNELS);
        for w in windows {
            data.extend(self.apply(w));
        }
        Tensor::new(vec![windows.len(), N_CHANNELS, len], data)
    }
}

/// Trained 32-bit CNN with its input normalization and output class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub network: Network<f32>,
    pub norm: InputNorm,
    pub class_map: ClassMap,
    pub train_config: TrainConfig,
    pub best_epoch: usize,
    pub valid_accuracy: f64,
}

const EVAL_CHUNK: usize = 64;

impl CnnModel {
    pub fn spec(&self) -> &CnnSpec {
        &self.network.spec
    }

    /// Compact class index predicted for each window.
    pub fn predict_indices(&self, windows: &[&Window]) -> Result<Vec<usize>> {
        let n_cls = self.spec().n_classes;
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(EVAL_CHUNK) {
            let logits = self.network.forward_eval(&self.norm.batch(chunk))?;
            for row in logits.chunks_exact(n_cls) {
                let mut best = 0;
                for (k, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = k;
                    }
                }
                out.push(best);
            }
        }
        Ok(out)
    }

    /// Original class id predicted for one window.
    pub fn predict(&self, w: &Window) -> Result<u16> {
        let idx = self.predict_indices(&[w])?[0];
        self.class_map.id_of(idx).ok_or_else(|| Error::Format(format!("class index {idx} missing from map")))
    }

    /// Original class ids for many windows, chunked over `exec`.
    pub fn predict_all(&self, windows: &[Window], exec: Execution) -> Result<Vec<u16>> {
        let chunks: Vec<&[Window]> = windows.chunks(EVAL_CHUNK).collect();
        let parts = exec.try_map(&chunks, |chunk| {
            let refs: Vec<&Window> = chunk.iter().collect();
            self.predict_indices(&refs)
        })?;
        parts
            .into_iter()
            .flatten()
            .map(|i| self.class_map.id_of(i).ok_or_else(|| Error::Format(format!("class index {i} missing"))))
            .collect()
    }

    /// Accuracy on a dataset whose labels are compact indices.
    pub fn accuracy_compact(&self, ds: &LabeledDataset) -> Result<f64> {
        Ok(self.evaluate_compact(ds)?.0)
    }

    /// `(accuracy, mean cross-entropy)` on a dataset with compact labels.
    pub fn evaluate_compact(&self, ds: &LabeledDataset) -> Result<(f64, f64)> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset("accuracy of an empty dataset".into()));
        }
        let n_cls = self.spec().n_classes;
        let refs: Vec<&Window> = ds.windows.iter().collect();
        let mut ok = 0usize;
        let mut loss = 0.0f64;
        for (chunk, labels) in refs.chunks(EVAL_CHUNK).zip(ds.windows.chunks(EVAL_CHUNK)) {
            let logits = self.network.forward_eval(&self.norm.batch(chunk))?;
            for (row, w) in logits.chunks_exact(n_cls).zip(labels) {
                let target = w.label as usize;
                let (l, _) = kernels::softmax_xent(row, target)?;
                loss += l as f64;
                let mut best = 0;
                for (k, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = k;
                    }
                }
                ok += (best == target) as usize;
            }
        }
        Ok((ok as f64 / ds.len() as f64, loss / ds.len() as f64))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CnnDocument::from_model(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<CnnDocument>(s)?.into_model()
    }

    /// Same document as [`CnnModel::to_json`], for embedding in larger bundles.
    pub fn to_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(CnnDocument::from_model(self))?)
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self> {
        serde_json::from_value::<CnnDocument>(v)?.into_model()
    }
}

pub const CNN_FORMAT: &str = "harcascade-cnn/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDoc {
    name: String,
    values: Vec<f32>,
}

/// Serialized form: spec, flat per-layer arrays in declaration order
/// (trainable tensors then batchnorm buffers), metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CnnDocument {
    format: String,
    spec: CnnSpec,
    layers: Vec<LayerDoc>,
    norm: InputNorm,
    class_map: ClassMap,
    train_config: TrainConfig,
    best_epoch: usize,
    valid_accuracy: f64,
}

impl CnnDocument {
    fn from_model(m: &CnnModel) -> Self {
        let net = &m.network;
        let mut layers: Vec<LayerDoc> = net
            .param_names()
            .into_iter()
            .zip(net.params())
            .map(|(name, v)| LayerDoc { name, values: v.to_vec() })
            .collect();
        for (i, b) in net.blocks.iter().enumerate() {
            layers.push(LayerDoc { name: format!("block{}.bn_running_mean", i + 1), values: b.running_mean.clone() });
            layers.push(LayerDoc { name: format!("block{}.bn_running_var", i + 1), values: b.running_var.clone() });
        }
        CnnDocument {
            format: CNN_FORMAT.into(),
            spec: net.spec.clone(),
            layers,
            norm: m.norm.clone(),
            class_map: m.class_map.clone(),
            train_config: m.train_config.clone(),
            best_epoch: m.best_epoch,
            valid_accuracy: m.valid_accuracy,
        }
    }

    fn into_model(self) -> Result<CnnModel> {
        if self.format != CNN_FORMAT {
            return Err(Error::Format(format!("unsupported CNN format {:?}", self.format)));
        }
        self.spec.validate()?;
        if self.class_map.len() != self.spec.n_classes {
            return Err(Error::Format("class map size does not match n_classes".into()));
        }
        // shapes come from a freshly initialized network
        let mut net: Network<f32> = Network::init(&self.spec, 0);
        let names = net.param_names();
        let mut layers = self.layers.into_iter();
        for (name, slot) in names.iter().zip(net.params_mut()) {
            let l = layers.next().ok_or_else(|| Error::Format(format!("missing layer {name}")))?;
            if &l.name != name || l.values.len() != slot.len() {
                return Err(Error::Format(format!("layer {} does not match expected {name}", l.name)));
            }
            *slot = l.values;
        }
        for (i, block) in net.blocks.iter_mut().enumerate() {
            for (suffix, slot) in [("bn_running_mean", &mut block.running_mean), ("bn_running_var", &mut block.running_var)] {
                let want = format!("block{}.{suffix}", i + 1);
                let l = layers.next().ok_or_else(|| Error::Format(format!("missing layer {want}")))?;
                if l.name != want || l.values.len() != slot.len() {
                    return Err(Error::Format(format!("layer {} does not match expected {want}", l.name)));
                }
                *slot = l.values;
            }
            check_block(block)?;
        }
        if layers.next().is_some() {
            return Err(Error::Format("unexpected extra layers".into()));
        }
        Ok(CnnModel {
            network: net,
            norm: self.norm,
            class_map: self.class_map,
            train_config: self.train_config,
            best_epoch: self.best_epoch,
            valid_accuracy: self.valid_accuracy,
        })
    }
}

fn check_block(b: &ConvBlock<f32>) -> Result<()> {
    if b.running_var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Format("batchnorm running variance must be positive".into()));
    }
    Ok(())
}
