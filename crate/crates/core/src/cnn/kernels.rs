//! Batched forward/backward kernels on flat `(batch, channels, length)` buffers.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Shape(msg()))
    }
}

/// Same-padded 1D convolution, stride 1.
///
/// `w` is `c_out x c_in x k` (k odd), `bias` has `c_out` entries.
/// `y[n,o,t] = bias[o] + sum_{i,j} w[o,i,j] * x[n,i,t+j-(k-1)/2]`, zero outside.
pub fn conv1d_forward<T: Scalar>(x: &Tensor<T>, w: &[T], bias: &[T], c_out: usize, k: usize) -> Result<Tensor<T>> {
    let (b, c_in, len) = x.dims3();
    check(k % 2 == 1, || format!("kernel size {k} must be odd"))?;
    check(w.len() == c_out * c_in * k, || format!("weight has {} values, expected {c_out}x{c_in}x{k}", w.len()))?;
    check(bias.len() == c_out, || format!("bias has {} values, expected {c_out}", bias.len()))?;
    let pad = (k - 1) / 2;
    let mut y = vec![T::zero(); b * c_out * len];
    for n in 0..b {
        for o in 0..c_out {
            let yo = &mut y[(n * c_out + o) * len..(n * c_out + o + 1) * len];
            yo.iter_mut().for_each(|v| *v = bias[o]);
            for i in 0..c_in {
                let xi = &x.data[(n * c_in + i) * len..(n * c_in + i + 1) * len];
                for j in 0..k {
                    let wv = w[(o * c_in + i) * k + j];
                    // t + j - pad in [0, len)
                    let t0 = pad.saturating_sub(j);
                    let t1 = (len + pad).saturating_sub(j).min(len);
                    if t0 >= t1 {
                        continue;
                    }
                    let src = &xi[t0 + j - pad..t1 + j - pad];
                    for (yv, &xv) in yo[t0..t1].iter_mut().zip(src) {
                        *yv += wv * xv;
                    }
                }
            }
        }
    }
    Ok(Tensor::new(vec![b, c_out, len], y))
}

/// Returns `(dx, dw, dbias)`.
pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    dy: &Tensor<T>,
    w: &[T],
    c_out: usize,
    k: usize,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let (b, c_in, len) = x.dims3();
    let pad = (k - 1) / 2;
    let mut dx = vec![T::zero(); x.data.len()];
    let mut dw = vec![T::zero(); w.len()];
    let mut db = vec![T::zero(); c_out];
    for n in 0..b {
        for o in 0..c_out {
            let dyo = &dy.data[(n * c_out + o) * len..(n * c_out + o + 1) * len];
            db[o] += dyo.iter().fold(T::zero(), |a, &v| a + v);
            for i in 0..c_in {
                let base = (n * c_in + i) * len;
                for j in 0..k {
                    let t0 = pad.saturating_sub(j);
                    let t1 = (len + pad).saturating_sub(j).min(len);
                    if t0 >= t1 {
                        continue;
                    }
                    let s0 = base + t0 + j - pad;
                    let s1 = base + t1 + j - pad;
                    let wi = (o * c_in + i) * k + j;
                    let mut acc = T::zero();
                    for (&g, &xv) in dyo[t0..t1].iter().zip(&x.data[s0..s1]) {
                        acc += g * xv;
                    }
                    dw[wi] += acc;
                    let wv = w[wi];
                    for (dxv, &g) in dx[s0..s1].iter_mut().zip(&dyo[t0..t1]) {
                        *dxv += wv * g;
                    }
                }
            }
        }
    }
    (Tensor::new(x.shape.clone(), dx), dw, db)
}

/// Normalization intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    /// Biased batch variance per channel.
    pub var: Vec<T>,
}

/// Train-mode batch normalization with statistics over batch x length.
pub fn batchnorm_forward_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (b, c, len) = x.dims3();
    check(gamma.len() == c && beta.len() == c, || format!("batchnorm params do not match {c} channels"))?;
    let count = T::from_usize(b * len).expect("count");
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    for ch in 0..c {
        let mut s = T::zero();
        for n in 0..b {
            s = x.data[(n * c + ch) * len..(n * c + ch + 1) * len].iter().fold(s, |a, &v| a + v);
        }
        mean[ch] = s / count;
        let mut q = T::zero();
        for n in 0..b {
            for &v in &x.data[(n * c + ch) * len..(n * c + ch + 1) * len] {
                let d = v - mean[ch];
                q += d * d;
            }
        }
        var[ch] = q / count;
    }
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.data.len()];
    let mut y = vec![T::zero(); x.data.len()];
    for n in 0..b {
        for ch in 0..c {
            for t in 0..len {
                let idx = (n * c + ch) * len + t;
                xhat[idx] = (x.data[idx] - mean[ch]) * inv_std[ch];
                y[idx] = gamma[ch] * xhat[idx] + beta[ch];
            }
        }
    }
    Ok((Tensor::new(x.shape.clone(), y), BatchNormCache { xhat, inv_std, mean, var }))
}

/// Eval-mode batch normalization with fixed statistics.
pub fn batchnorm_forward_eval<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: T,
) -> Result<Tensor<T>> {
    let (b, c, len) = x.dims3();
    check(
        gamma.len() == c && beta.len() == c && running_mean.len() == c && running_var.len() == c,
        || format!("batchnorm params do not match {c} channels"),
    )?;
    let mut y = x.data.clone();
    for ch in 0..c {
        let scale = gamma[ch] / (running_var[ch] + eps).sqrt();
        let shift = beta[ch] - running_mean[ch] * scale;
        for n in 0..b {
            for v in &mut y[(n * c + ch) * len..(n * c + ch + 1) * len] {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(Tensor::new(x.shape.clone(), y))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batchnorm_backward<T: Scalar>(dy: &Tensor<T>, cache: &BatchNormCache<T>, gamma: &[T]) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let (b, c, len) = dy.dims3();
    let count = T::from_usize(b * len).expect("count");
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for n in 0..b {
        for ch in 0..c {
            for t in 0..len {
                let idx = (n * c + ch) * len + t;
                dbeta[ch] += dy.data[idx];
                dgamma[ch] += dy.data[idx] * cache.xhat[idx];
            }
        }
    }
    let mut dx = vec![T::zero(); dy.data.len()];
    for ch in 0..c {
        // sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
        let s1 = gamma[ch] * dbeta[ch];
        let s2 = gamma[ch] * dgamma[ch];
        let k = cache.inv_std[ch] / count;
        for n in 0..b {
            for t in 0..len {
                let idx = (n * c + ch) * len + t;
                let dxhat = dy.data[idx] * gamma[ch];
                dx[idx] = k * (count * dxhat - s1 - cache.xhat[idx] * s2);
            }
        }
    }
    (Tensor::new(dy.shape.clone(), dx), dgamma, dbeta)
}

pub fn relu_forward<T: Scalar>(x: &mut Tensor<T>) {
    for v in &mut x.data {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Gradient through ReLU given the ReLU output.
pub fn relu_backward<T: Scalar>(dy: &mut Tensor<T>, out: &Tensor<T>) {
    for (g, &o) in dy.data.iter_mut().zip(&out.data) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Width-2, stride-2 max pooling. Output length is `floor(len / 2)`; the
/// returned indices point at the winning input element (first on ties).
pub fn maxpool1d<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (b, c, len) = x.dims3();
    check(len >= 2, || format!("max-pool needs length >= 2, got {len}"))?;
    let out_len = len / 2;
    let mut y = Vec::with_capacity(b * c * out_len);
    let mut arg = Vec::with_capacity(b * c * out_len);
    for row in 0..b * c {
        let base = row * len;
        for t in 0..out_len {
            let i = base + 2 * t;
            let (v, a) = if x.data[i + 1] > x.data[i] { (x.data[i + 1], i + 1) } else { (x.data[i], i) };
            y.push(v);
            arg.push(a);
        }
    }
    Ok((Tensor::new(vec![b, c, out_len], y), arg))
}

pub fn maxpool1d_backward<T: Scalar>(dy: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Tensor<T> {
    let mut dx = vec![T::zero(); input_shape.iter().product()];
    for (&g, &a) in dy.data.iter().zip(argmax) {
        dx[a] += g;
    }
    Tensor::new(input_shape.to_vec(), dx)
}

/// `logits[n] = W x[n] + b` with `W` stored `n_out x n_in`.
pub fn fc_forward<T: Scalar>(x: &[T], batch: usize, w: &[T], bias: &[T], n_out: usize) -> Result<Vec<T>> {
    check(batch > 0 && x.len().is_multiple_of(batch), || "fc input not divisible by batch".to_string())?;
    let n_in = x.len() / batch;
    check(w.len() == n_in * n_out && bias.len() == n_out, || {
        format!("fc weight {} / bias {} do not match {n_in} -> {n_out}", w.len(), bias.len())
    })?;
    let mut out = Vec::with_capacity(batch * n_out);
    for n in 0..batch {
        let xn = &x[n * n_in..(n + 1) * n_in];
        for o in 0..n_out {
            let wo = &w[o * n_in..(o + 1) * n_in];
            out.push(wo.iter().zip(xn).fold(bias[o], |a, (&wv, &xv)| a + wv * xv));
        }
    }
    Ok(out)
}

/// Returns `(dx, dw, dbias)`.
pub fn fc_backward<T: Scalar>(x: &[T], batch: usize, w: &[T], dlogits: &[T], n_out: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n_in = x.len() / batch;
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); w.len()];
    let mut db = vec![T::zero(); n_out];
    for n in 0..batch {
        let xn = &x[n * n_in..(n + 1) * n_in];
        let dxn = &mut dx[n * n_in..(n + 1) * n_in];
        for o in 0..n_out {
            let g = dlogits[n * n_out + o];
            db[o] += g;
            let wo = &w[o * n_in..(o + 1) * n_in];
            let dwo = &mut dw[o * n_in..(o + 1) * n_in];
            for i in 0..n_in {
                dwo[i] += g * xn[i];
                dxn[i] += g * wo[i];
            }
        }
    }
    (dx, dw, db)
}

/// Max-subtracted softmax of one logit row.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
    let e: Vec<T> = logits.iter().map(|&v| (v - m).exp()).collect();
    let s = e.iter().fold(T::zero(), |a, &v| a + v);
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of one logit row: `(loss, probs)` with `loss = -log p[target]`.
pub fn softmax_xent<T: Scalar>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if target >= logits.len() {
        return Err(Error::invalid(format!("target {target} out of range for {} classes", logits.len())));
    }
    let m = logits.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
    let s = logits.iter().fold(T::zero(), |a, &v| a + (v - m).exp());
    let log_z = m + s.ln();
    let probs = logits.iter().map(|&v| (v - log_z).exp()).collect();
    Ok((log_z - logits[target], probs))
}

/// Fully-connected layer followed by softmax cross-entropy on one sample.
pub fn fc_softmax_xent<T: Scalar>(x: &[T], w: &[T], bias: &[T], target: usize) -> Result<(T, Vec<T>)> {
    let logits = fc_forward(x, 1, w, bias, bias.len())?;
    softmax_xent(&logits, target)
}
