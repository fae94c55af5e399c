use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{self, BatchNormCache};
use super::spec::{CnnSpec, N_BLOCKS};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

/// Parameters of the 3-block template.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub spec: CnnSpec,
    pub blocks: Vec<ConvBlock<T>>,
    pub fc_weight: Vec<T>,
    pub fc_bias: Vec<T>,
}

struct BlockCache<T> {
    input: Tensor<T>,
    bn: BatchNormCache<T>,
    relu_out: Tensor<T>,
    argmax: Vec<usize>,
}

/// Activations from a train-mode forward pass.
pub struct ForwardCache<T> {
    blocks: Vec<BlockCache<T>>,
    fc_input: Vec<T>,
    batch: usize,
}

impl<T: Scalar> ForwardCache<T> {
    /// ReLU on/off states and max-pool winners of every block. Two inputs
    /// with equal patterns lie in the same smooth piece of the network.
    pub fn activation_pattern(&self) -> (Vec<bool>, Vec<usize>) {
        let mut on = Vec::new();
        let mut winners = Vec::new();
        for b in &self.blocks {
            on.extend(b.relu_out.data.iter().map(|v| *v > T::zero()));
            winners.extend_from_slice(&b.argmax);
        }
        (on, winners)
    }
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<T> {
    (0..n).map(|_| T::from_f64(rng.gen_range(-bound..bound)).expect("finite")).collect()
}

fn c<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite constant")
}

impl<T: Scalar> Network<T> {
    /// Fan-in scaled uniform init: weights and biases in `±1/sqrt(fan_in)`.
    pub fn init(spec: &CnnSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(N_BLOCKS);
        for b in 0..N_BLOCKS {
            let (ci, co, k) = (spec.in_channels(b), spec.channels[b], spec.kernel_sizes[b]);
            let bound = 1.0 / ((ci * k) as f64).sqrt();
            blocks.push(ConvBlock {
                weight: uniform(&mut rng, co * ci * k, bound),
                bias: uniform(&mut rng, co, bound),
                gamma: vec![T::one(); co],
                beta: vec![T::zero(); co],
                running_mean: vec![T::zero(); co],
                running_var: vec![T::one(); co],
            });
        }
        let fan_in = spec.fc_inputs();
        let bound = 1.0 / (fan_in as f64).sqrt();
        let fc_weight = uniform(&mut rng, fan_in * spec.n_classes, bound);
        let fc_bias = uniform(&mut rng, spec.n_classes, bound);
        Network { spec: spec.clone(), blocks, fc_weight, fc_bias }
    }

    /// Names of the trainable tensors, in declaration order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for b in 0..self.blocks.len() {
            for p in ["conv_weight", "conv_bias", "bn_gamma", "bn_beta"] {
                names.push(format!("block{}.{p}", b + 1));
            }
        }
        names.push("fc.weight".into());
        names.push("fc.bias".into());
        names
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = Vec::new();
        for b in &self.blocks {
            v.extend([b.weight.as_slice(), &b.bias, &b.gamma, &b.beta]);
        }
        v.push(&self.fc_weight);
        v.push(&self.fc_bias);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut v: Vec<&mut Vec<T>> = Vec::new();
        for b in &mut self.blocks {
            v.push(&mut b.weight);
            v.push(&mut b.bias);
            v.push(&mut b.gamma);
            v.push(&mut b.beta);
        }
        v.push(&mut self.fc_weight);
        v.push(&mut self.fc_bias);
        v
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, ch, len) = x.dims3();
        if ch != self.spec.input_channels || len != self.spec.input_len {
            return Err(Error::Shape(format!(
                "network expects {}x{} inputs, got {ch}x{len}",
                self.spec.input_channels, self.spec.input_len
            )));
        }
        Ok(())
    }

    /// Inference with running statistics. Returns `batch x n_classes` logits.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (b, block) in self.blocks.iter().enumerate() {
            let conv = kernels::conv1d_forward(&h, &block.weight, &block.bias, self.spec.channels[b], self.spec.kernel_sizes[b])?;
            let mut bn = kernels::batchnorm_forward_eval(
                &conv,
                &block.gamma,
                &block.beta,
                &block.running_mean,
                &block.running_var,
                c(BN_EPS),
            )?;
            kernels::relu_forward(&mut bn);
            h = kernels::maxpool1d(&bn)?.0;
        }
        let (batch, _, _) = h.dims3();
        kernels::fc_forward(&h.data, batch, &self.fc_weight, &self.fc_bias, self.spec.n_classes)
    }

    /// Train-mode forward pass using batch statistics.
    ///
    /// With `update_running` the batchnorm running statistics move towards the
    /// batch statistics (momentum [`BN_MOMENTUM`], unbiased variance).
    pub fn forward_train(&mut self, x: &Tensor<T>, update_running: bool) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let (batch, _, _) = x.dims3();
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        let momentum: T = c(BN_MOMENTUM);
        for b in 0..self.blocks.len() {
            let (co, k) = (self.spec.channels[b], self.spec.kernel_sizes[b]);
            let block = &mut self.blocks[b];
            let conv = kernels::conv1d_forward(&h, &block.weight, &block.bias, co, k)?;
            let (mut act, bn) = kernels::batchnorm_forward_train(&conv, &block.gamma, &block.beta, c(BN_EPS))?;
            if update_running {
                let (bsz, _, len) = conv.dims3();
                let n = (bsz * len) as f64;
                let unbias: T = c(if n > 1.0 { n / (n - 1.0) } else { 1.0 });
                for ch in 0..co {
                    block.running_mean[ch] = (T::one() - momentum) * block.running_mean[ch] + momentum * bn.mean[ch];
                    block.running_var[ch] =
                        (T::one() - momentum) * block.running_var[ch] + momentum * bn.var[ch] * unbias;
                }
            }
            kernels::relu_forward(&mut act);
            let (pooled, argmax) = kernels::maxpool1d(&act)?;
            caches.push(BlockCache { input: h, bn, relu_out: act, argmax });
            h = pooled;
        }
        let logits = kernels::fc_forward(&h.data, batch, &self.fc_weight, &self.fc_bias, self.spec.n_classes)?;
        Ok((logits, ForwardCache { blocks: caches, fc_input: h.data, batch }))
    }

    /// Gradients of every trainable tensor (declaration order) given `dL/dlogits`.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &[T]) -> Vec<Vec<T>> {
        let n_cls = self.spec.n_classes;
        let (dfc_in, dfc_w, dfc_b) = kernels::fc_backward(&cache.fc_input, cache.batch, &self.fc_weight, dlogits, n_cls);
        let mut per_block: Vec<[Vec<T>; 4]> = Vec::with_capacity(self.blocks.len());
        let last = cache.blocks.last().expect("at least one block");
        let (b, c_last, len_last) = last.relu_out.dims3();
        let mut grad = Tensor::new(vec![b, c_last, len_last / 2], dfc_in);
        for (bi, bc) in cache.blocks.iter().enumerate().rev() {
            let block = &self.blocks[bi];
            let mut g = kernels::maxpool1d_backward(&grad, &bc.argmax, &bc.relu_out.shape);
            kernels::relu_backward(&mut g, &bc.relu_out);
            let (g, dgamma, dbeta) = kernels::batchnorm_backward(&g, &bc.bn, &block.gamma);
            let (dx, dw, db) =
                kernels::conv1d_backward(&bc.input, &g, &block.weight, self.spec.channels[bi], self.spec.kernel_sizes[bi]);
            per_block.push([dw, db, dgamma, dbeta]);
            grad = dx;
        }
        per_block.reverse();
        let mut out: Vec<Vec<T>> = per_block.into_iter().flatten().collect();
        out.push(dfc_w);
        out.push(dfc_b);
        out
    }

    /// Batch-mean cross-entropy times `scale`, with matching gradients.
    pub fn loss_and_grads(
        &mut self,
        x: &Tensor<T>,
        targets: &[usize],
        scale: T,
        update_running: bool,
    ) -> Result<(T, Vec<Vec<T>>)> {
        let (logits, cache) = self.forward_train(x, update_running)?;
        let n_cls = self.spec.n_classes;
        if targets.len() != cache.batch {
            return Err(Error::Shape(format!("{} targets for a batch of {}", targets.len(), cache.batch)));
        }
        let inv_b = scale / T::from_usize(cache.batch).expect("batch");
        let mut loss = T::zero();
        let mut dlogits = vec![T::zero(); logits.len()];
        for (n, &t) in targets.iter().enumerate() {
            let row = &logits[n * n_cls..(n + 1) * n_cls];
            let (l, probs) = kernels::softmax_xent(row, t)?;
            loss += l;
            for (k, p) in probs.into_iter().enumerate() {
                let onehot = if k == t { T::one() } else { T::zero() };
                dlogits[n * n_cls + k] = (p - onehot) * inv_b;
            }
        }
        let grads = self.backward(&cache, &dlogits);
        Ok((loss * inv_b, grads))
    }

    /// Train-mode loss without touching running statistics.
    pub fn train_loss(&self, x: &Tensor<T>, targets: &[usize]) -> Result<T> {
        let mut probe = self.clone();
        let (logits, cache) = probe.forward_train(x, false)?;
        let n_cls = self.spec.n_classes;
        let mut loss = T::zero();
        for (n, &t) in targets.iter().enumerate() {
            loss += kernels::softmax_xent(&logits[n * n_cls..(n + 1) * n_cls], t)?.0;
        }
        Ok(loss / T::from_usize(cache.batch).expect("batch"))
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from(*x).expect("castable")).collect::<Vec<U>>();
        Network {
            spec: self.spec.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| ConvBlock {
                    weight: conv(&b.weight),
                    bias: conv(&b.bias),
                    gamma: conv(&b.gamma),
                    beta: conv(&b.beta),
                    running_mean: conv(&b.running_mean),
                    running_var: conv(&b.running_var),
                })
                .collect(),
            fc_weight: conv(&self.fc_weight),
            fc_bias: conv(&self.fc_bias),
        }
    }
}
