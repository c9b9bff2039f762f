//! BPTT gradients against central finite differences, run in f64.

mod common;

use common::{fd_check as check, setup};
use eeg_lstm::nn::{loss_and_grads_with, Dropout, Layer};

#[test]
fn five_layer_stack_matches_finite_differences() {
    let (err, at) = check(&[4, 3, 3, 2, 2], 1);
    assert!(err < 1e-3, "max relative error {err:e} at {at}");
}

#[test]
fn single_layer_matches_finite_differences() {
    for seed in 0..3 {
        let (err, at) = check(&[4], seed);
        assert!(err < 1e-3, "seed {seed}: max relative error {err:e} at {at}");
    }
}

#[test]
fn dropped_unit_columns_are_zero_in_both_routes() {
    let (params, x, y, mask) = setup(&[4, 3], 7);
    let (_, grads) = loss_and_grads_with(&params, &x, &y, Dropout::Fixed(&mask)).unwrap();
    let Layer::Dense(g) = &grads.layers()[2].1 else { panic!() };
    // unit 1 is masked in every row
    let w = g.weights.shape()[1];
    assert!(g.weights.data()[w..2 * w].iter().all(|&v| v == 0.0));
}
