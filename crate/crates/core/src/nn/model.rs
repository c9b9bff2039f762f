//! Whole-network forward pass, sparse categorical cross-entropy and gradients.

use super::config::{DENSE_HIDDEN, DENSE_OUTPUT};
use super::lstm::{check_finite, layer_backward, layer_forward, sigmoid, LayerCache};
use super::params::{Layer, ModelParams};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// How dropout between the two dense layers behaves for one pass.
pub enum Dropout<'a, T> {
    /// Identity (inference).
    Off,
    /// Fresh Bernoulli mask from the generator, inverted scaling.
    Sample(&'a mut Rng),
    /// Caller-supplied multiplicative mask, `[B, dense_hidden]`.
    Fixed(&'a [T]),
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    batch: usize,
    lstm: Vec<LayerCache<T>>,
    /// Sigmoid activations of the hidden dense layer, `[B, H]`.
    hidden_act: Vec<T>,
    /// Multiplicative dropout mask (`0` or `1/(1-rate)`), `[B, H]`.
    mask: Vec<T>,
    dropped: Vec<T>,
    probs: Vec<T>,
    logits: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn mask(&self) -> &[T] {
        &self.mask
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }
}

fn check_batch<T: Real>(params: &ModelParams<T>, batch: &Tensor<T>) -> Result<(usize, usize)> {
    let cfg = params.config();
    let s = batch.shape();
    if s.len() != 3 || s[1] != cfg.sequence_length || s[2] != cfg.input_features {
        return Err(Error::Shape {
            context: "model input [batch, steps, features]".into(),
            expected: vec![s.first().copied().unwrap_or(0), cfg.sequence_length, cfg.input_features],
            actual: s.to_vec(),
        });
    }
    if !batch.is_finite() {
        return Err(Error::NonFinite {
            layer: "input".into(),
        });
    }
    Ok((s[0], s[1]))
}

/// `[B, S, F]` → `[S, B, F]`
fn to_time_major<T: Real>(data: &[T], b: usize, s: usize, f: usize) -> Vec<T> {
    let mut out = vec![T::zero(); data.len()];
    for bi in 0..b {
        for t in 0..s {
            let src = (bi * s + t) * f;
            let dst = (t * b + bi) * f;
            out[dst..dst + f].copy_from_slice(&data[src..src + f]);
        }
    }
    out
}

fn affine<T: Real>(x: &[T], rows: usize, w: &Tensor<T>, bias: &Tensor<T>) -> Vec<T> {
    let (o, i) = (w.shape()[0], w.shape()[1]);
    let mut out = Vec::with_capacity(rows * o);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    T::gemm(rows, i, o, T::one(), x, false, w.data(), true, T::one(), &mut out);
    out
}

pub(crate) fn softmax_rows<T: Real>(logits: &[T], classes: usize) -> Vec<T> {
    let mut out = logits.to_vec();
    for row in out.chunks_exact_mut(classes) {
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Class probabilities `[B, num_classes]` for a `[B, steps, features]` batch.
pub fn forward<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    training: bool,
    rng: &mut Rng,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    let dropout = if training { Dropout::Sample(rng) } else { Dropout::Off };
    forward_with(params, batch, dropout)
}

pub fn forward_with<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    dropout: Dropout<'_, T>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    let (b, steps) = check_batch(params, batch)?;
    let cfg = params.config();

    let mut x = to_time_major(batch.data(), b, steps, cfg.input_features);
    let mut caches = Vec::with_capacity(cfg.lstm_sizes.len());
    for (idx, (name, layer)) in params.layers().iter().enumerate() {
        let Layer::Lstm(p) = layer else { break };
        let cache = layer_forward(p, x, steps, b);
        check_finite(&cache.hidden, name)?;
        x = if idx + 1 < cfg.lstm_sizes.len() {
            cache.hidden.clone()
        } else {
            Vec::new()
        };
        caches.push(cache);
    }
    let last = caches.last().expect("at least one LSTM layer");
    let h_last = *cfg.lstm_sizes.last().expect("validated");
    let last_hidden = last.last_hidden(h_last);

    let d1 = params.dense(DENSE_HIDDEN);
    let mut hidden_act = affine(last_hidden, b, &d1.weights, &d1.bias);
    hidden_act.iter_mut().for_each(|v| *v = sigmoid(*v));
    check_finite(&hidden_act, DENSE_HIDDEN)?;

    let n_hidden = cfg.dense_hidden;
    let mask: Vec<T> = match dropout {
        Dropout::Off => vec![T::one(); b * n_hidden],
        Dropout::Fixed(m) => {
            if m.len() != b * n_hidden {
                return Err(Error::Shape {
                    context: "dropout mask".into(),
                    expected: vec![b, n_hidden],
                    actual: vec![m.len()],
                });
            }
            m.to_vec()
        }
        Dropout::Sample(rng) => {
            let rate = cfg.dropout_rate;
            let keep = T::from_f64(1.0 / (1.0 - rate));
            (0..b * n_hidden)
                .map(|_| if rng.uniform(0.0, 1.0) < rate { T::zero() } else { keep })
                .collect()
        }
    };
    let dropped: Vec<T> = hidden_act.iter().zip(&mask).map(|(a, m)| *a * *m).collect();

    let d2 = params.dense(DENSE_OUTPUT);
    let logits = affine(&dropped, b, &d2.weights, &d2.bias);
    check_finite(&logits, DENSE_OUTPUT)?;
    let probs = softmax_rows(&logits, cfg.num_classes);

    let out = Tensor::from_vec(&[b, cfg.num_classes], probs.clone())?;
    Ok((
        out,
        ForwardCache {
            batch: b,
            lstm: caches,
            hidden_act,
            mask,
            dropped,
            probs,
            logits,
        },
    ))
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::Shape {
            context: "labels".into(),
            expected: vec![batch],
            actual: vec![labels.len()],
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: classes,
        });
    }
    Ok(())
}

/// Mean sparse categorical cross-entropy, computed from logits.
pub fn cross_entropy<T: Real>(logits: &[T], labels: &[usize], classes: usize) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.chunks_exact(classes).zip(labels) {
        let m = row.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.as_f64()));
        let lse = m + row.iter().map(|v| (v.as_f64() - m).exp()).sum::<f64>().ln();
        total += lse - row[y].as_f64();
    }
    total / labels.len() as f64
}

/// Loss and gradients with a freshly sampled dropout mask.
pub fn loss_and_grads<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    rng: &mut Rng,
) -> Result<(f64, ModelParams<T>)> {
    loss_and_grads_with(params, batch, labels, Dropout::Sample(rng))
}

pub fn loss_and_grads_with<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    dropout: Dropout<'_, T>,
) -> Result<(f64, ModelParams<T>)> {
    let (loss, grads, _) = loss_grads_and_predictions(params, batch, labels, dropout)?;
    Ok((loss, grads))
}

/// Like [`loss_and_grads_with`], also returning the argmax class per row of
/// the training-mode forward pass.
pub fn loss_grads_and_predictions<T: Real>(
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    dropout: Dropout<'_, T>,
) -> Result<(f64, ModelParams<T>, Vec<usize>)> {
    let cfg = params.config().clone();
    check_labels(labels, batch.shape().first().copied().unwrap_or(0), cfg.num_classes)?;
    let (probs, cache) = forward_with(params, batch, dropout)?;
    let loss = cross_entropy(&cache.logits, labels, cfg.num_classes);
    let grads = backward(params, &cache, labels)?;
    Ok((loss, grads, predict_classes(&probs)))
}

fn backward<T: Real>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    labels: &[usize],
) -> Result<ModelParams<T>> {
    let cfg = params.config();
    let b = cache.batch;
    let (nc, nh) = (cfg.num_classes, cfg.dense_hidden);
    let h_last = *cfg.lstm_sizes.last().expect("validated");
    let one = T::one();
    let inv_b = T::from_f64(1.0 / b as f64);

    let mut grads = ModelParams::<T>::zeros(cfg)?;
    let n_lstm = cfg.lstm_sizes.len();

    // softmax + cross-entropy
    let mut dlogits = cache.probs.clone();
    for (row, &y) in dlogits.chunks_exact_mut(nc).zip(labels) {
        row[y] = row[y] - one;
        row.iter_mut().for_each(|v| *v = *v * inv_b);
    }

    let d2 = params.dense(DENSE_OUTPUT);
    let d1 = params.dense(DENSE_HIDDEN);
    let last_hidden = cache.lstm[n_lstm - 1].last_hidden(h_last);

    let mut d_dropped = vec![T::zero(); b * nh];
    T::gemm(b, nc, nh, one, &dlogits, false, d2.weights.data(), false, T::zero(), &mut d_dropped);
    let mut dz1 = d_dropped;
    for ((g, m), a) in dz1.iter_mut().zip(&cache.mask).zip(&cache.hidden_act) {
        *g = *g * *m * *a * (one - *a);
    }
    let mut d_last = vec![T::zero(); b * h_last];
    T::gemm(b, nh, h_last, one, &dz1, false, d1.weights.data(), false, T::zero(), &mut d_last);

    {
        let layers = grads.layers_mut();
        let (lstm_part, dense_part) = layers.split_at_mut(n_lstm);
        let (hidden_part, output_part) = dense_part.split_at_mut(1);
        if let (Layer::Dense(g1), Layer::Dense(g2)) = (&mut hidden_part[0].1, &mut output_part[0].1) {
            T::gemm(nc, b, nh, one, &dlogits, true, &cache.dropped, false, T::zero(), g2.weights.data_mut());
            col_sum(&dlogits, nc, g2.bias.data_mut());
            T::gemm(nh, b, h_last, one, &dz1, true, last_hidden, false, T::zero(), g1.weights.data_mut());
            col_sum(&dz1, nh, g1.bias.data_mut());
        }

        let steps = cache.lstm[0].steps;
        let mut d_hidden = vec![T::zero(); steps * b * h_last];
        d_hidden[(steps - 1) * b * h_last..].copy_from_slice(&d_last);
        for (idx, p) in params.lstm_layers().enumerate().collect::<Vec<_>>().into_iter().rev() {
            let Layer::Lstm(g) = &mut lstm_part[idx].1 else { unreachable!() };
            d_hidden = layer_backward(p, &cache.lstm[idx], &d_hidden, g);
        }
    }
    for (name, t) in grads.tensors() {
        check_finite(t.data(), &name)?;
    }
    Ok(grads)
}

fn col_sum<T: Real>(m: &[T], cols: usize, out: &mut [T]) {
    for row in m.chunks_exact(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o = *o + *v;
        }
    }
}

/// Arg-max class per row of a probability tensor.
pub fn predict_classes<T: Real>(probs: &Tensor<T>) -> Vec<usize> {
    let c = probs.shape()[1];
    probs
        .data()
        .chunks_exact(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}
