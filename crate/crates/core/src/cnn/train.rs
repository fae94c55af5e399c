use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{CnnModel, InputNorm};
use super::network::Network;
use super::spec::CnnSpec;
use crate::data::{ClassMap, LabeledDataset, Window};
use crate::error::{Error, Result};
use crate::exec::derive_seed;

/// Adam mini-batch training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, batch_size: 64, epochs: 50, seed: 0, beta1: 0.9, beta2: 0.999, adam_eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub valid_accuracy: Vec<f64>,
    /// Mean validation cross-entropy per epoch.
    #[serde(default)]
    pub valid_loss: Vec<f64>,
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    step: i32,
}

impl Adam {
    fn new(net: &Network<f32>) -> Self {
        let shapes: Vec<Vec<f32>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Adam { m: shapes.clone(), v: shapes, step: 0 }
    }

    fn update(&mut self, net: &mut Network<f32>, grads: &[Vec<f32>], cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let bc1 = 1.0 - b1.powi(self.step);
        let bc2 = 1.0 - b2.powi(self.step);
        let lr = cfg.lr as f32;
        let eps = cfg.adam_eps as f32;
        for (((p, g), m), v) in net.params_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

fn check_labels(ds: &LabeledDataset, n_classes: usize, what: &str) -> Result<()> {
    if let Some(w) = ds.windows.iter().find(|w| w.label as usize >= n_classes) {
        return Err(Error::invalid(format!(
            "{what} label {} outside 0..{n_classes}; labels must be compacted to the spec's classes",
            w.label
        )));
    }
    Ok(())
}

/// Trains the template on compact labels and returns the parameters of the
/// epoch with the best validation accuracy. Ties go to the lower validation
/// loss, then to the earlier epoch.
///
/// Shuffling and initialization derive from `cfg.seed`, and every reduction
/// runs in a fixed order, so identical inputs give identical models.
pub fn train_cnn(
    spec: &CnnSpec,
    train: &LabeledDataset,
    valid: &LabeledDataset,
    class_map: &ClassMap,
    cfg: &TrainConfig,
) -> Result<(CnnModel, TrainLog)> {
    spec.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::EmptyDataset("CNN training and validation sets must be non-empty".into()));
    }
    if class_map.len() != spec.n_classes || train.class_names.len() != spec.n_classes {
        return Err(Error::invalid(format!(
            "spec has {} classes but data has {} (class map {})",
            spec.n_classes,
            train.class_names.len(),
            class_map.len()
        )));
    }
    check_labels(train, spec.n_classes, "training")?;
    check_labels(valid, spec.n_classes, "validation")?;
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::invalid("batch_size and epochs must be positive"));
    }
    let norm = InputNorm::fit(train)?;
    let mut net: Network<f32> = Network::init(spec, derive_seed(cfg.seed, 0));
    let mut adam = Adam::new(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, f64, Network<f32>)> = None;

    let model_with = |net: Network<f32>, best_epoch, acc| CnnModel {
        network: net,
        norm: norm.clone(),
        class_map: class_map.clone(),
        train_config: cfg.clone(),
        best_epoch,
        valid_accuracy: acc,
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let windows: Vec<&Window> = batch.iter().map(|&i| &train.windows[i]).collect();
            let targets: Vec<usize> = windows.iter().map(|w| w.label as usize).collect();
            let x = norm.batch(&windows);
            let (loss, grads) = net.loss_and_grads(&x, &targets, 1.0, true)?;
            loss_sum += loss as f64 * batch.len() as f64;
            adam.update(&mut net, &grads, cfg);
        }
        log.epoch_loss.push(loss_sum / train.len() as f64);
        let (acc, vloss) = model_with(net.clone(), epoch, 0.0).evaluate_compact(valid)?;
        log.valid_accuracy.push(acc);
        log.valid_loss.push(vloss);
        if best.as_ref().is_none_or(|(b, bl, _)| acc > *b || (acc == *b && vloss < *bl)) {
            best = Some((acc, vloss, net.clone()));
            log.best_epoch = epoch;
        }
    }
    let (acc, _, chosen) = best.expect("at least one epoch");
    Ok((model_with(chosen, log.best_epoch, acc), log))
}
