//! Independent reference routes shared by the integration tests.
#![allow(dead_code)]

use eeg_lstm::nn::{init_params, loss_and_grads_with, Dropout, ModelConfig, ModelParams};
use eeg_lstm::{Rng, Tensor};

const STEP: f64 = 1e-3;

pub fn setup(sizes: &[usize], seed: u64) -> (ModelParams<f64>, Tensor<f64>, Vec<usize>, Vec<f64>) {
    let cfg = ModelConfig {
        input_features: 3,
        sequence_length: 5,
        dense_hidden: 4,
        num_classes: 3,
        dropout_rate: 0.3,
        ..ModelConfig::default()
    }
    .with_lstm_sizes(sizes);
    let mut rng = Rng::new(seed);
    let mut params: ModelParams<f64> = init_params(&cfg, &mut rng).unwrap();
    // non-trivial biases so every gate path carries gradient
    for t in params.tensors_mut() {
        if t.shape().len() == 1 {
            for v in t.data_mut() {
                *v += rng.uniform(-0.5, 0.5);
            }
        }
    }
    let b = 2;
    let x: Vec<f64> = (0..b * 5 * 3).map(|_| rng.uniform(-1.5, 1.5)).collect();
    let x = Tensor::from_vec(&[b, 5, 3], x).unwrap();
    let keep = 1.0 / 0.7;
    let mask: Vec<f64> = (0..b * 4)
        .map(|i| if i % 4 == 1 { 0.0 } else { keep })
        .collect();
    (params, x, vec![2, 0], mask)
}

fn loss_at(p: &ModelParams<f64>, x: &Tensor<f64>, y: &[usize], mask: &[f64]) -> f64 {
    loss_and_grads_with(p, x, y, Dropout::Fixed(mask)).unwrap().0
}

/// Returns the worst relative error `|a - n| / max(|a| + |n|, 1e-10)` and the
/// tensor it occurred in.
pub fn fd_check(sizes: &[usize], seed: u64) -> (f64, String) {
    let (params, x, y, mask) = setup(sizes, seed);
    let (_, grads) = loss_and_grads_with(&params, &x, &y, Dropout::Fixed(&mask)).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();

    let mut worst = (0.0f64, String::new());
    let n_tensors = analytic.len();
    for k in 0..n_tensors {
        let len = analytic[k].1.len();
        for i in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[k].data_mut()[i] += STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[k].data_mut()[i] -= STEP;
            let numeric = (loss_at(&plus, &x, &y, &mask) - loss_at(&minus, &x, &y, &mask)) / (2.0 * STEP);
            let a = analytic[k].1[i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-10);
            if rel > worst.0 {
                worst = (rel, format!("{}[{i}] analytic={a:e} numeric={numeric:e}", analytic[k].0));
            }
        }
    }
    worst
}

/// Counts straight from the label/prediction vectors, no confusion matrix.
pub fn brute_force_weighted_f1(labels: &[usize], preds: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut total = 0.0;
    for c in 0..3 {
        let tp = labels.iter().zip(preds).filter(|(&t, &p)| t == c && p == c).count() as f64;
        let fp = labels.iter().zip(preds).filter(|(&t, &p)| t != c && p == c).count() as f64;
        let fneg = labels.iter().zip(preds).filter(|(&t, &p)| t == c && p != c).count() as f64;
        let support = tp + fneg;
        if support == 0.0 {
            continue;
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = tp / support;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1 * support / n;
    }
    total
}

