//! LSTM forward and backward passes.
//!
//! Sequences are stored time-major, `[S, B, features]`, so each timestep of
//! a batch is one contiguous `[B, features]` block and the large input
//! projections run as a single matrix product over all `S·B` rows.

use super::params::LstmLayerParams;
use crate::error::{Error, Result};
use crate::tensor::Real;

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Intermediates of one cell step, enough to run the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    /// Post-activation gates `[i | f | g | o]`, length `4h`.
    pub gates: Vec<T>,
    pub tanh_c: Vec<T>,
}

/// Nonlinear half of a step for a batch of `B` rows. `z` holds the gate
/// pre-activations (`x·W_inᵀ + h_prev·W_recᵀ + bias`) and is overwritten with
/// the activated gates.
fn activate_step<T: Real>(
    z: &mut [T],
    c_prev: Option<&[T]>,
    c: &mut [T],
    tanh_c: &mut [T],
    h: &mut [T],
    hidden: usize,
) {
    let rows = c.len() / hidden;
    for r in 0..rows {
        let zr = &mut z[r * 4 * hidden..(r + 1) * 4 * hidden];
        for j in 0..hidden {
            let i = sigmoid(zr[j]);
            let f = sigmoid(zr[hidden + j]);
            let g = zr[2 * hidden + j].tanh();
            let o = sigmoid(zr[3 * hidden + j]);
            zr[j] = i;
            zr[hidden + j] = f;
            zr[2 * hidden + j] = g;
            zr[3 * hidden + j] = o;
            let k = r * hidden + j;
            let cp = c_prev.map_or(T::zero(), |cp| cp[k]);
            let cv = f * cp + i * g;
            let tc = cv.tanh();
            c[k] = cv;
            tanh_c[k] = tc;
            h[k] = o * tc;
        }
    }
}

/// One timestep for a single example.
pub fn lstm_cell_step<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    p: &LstmLayerParams<T>,
) -> Result<(Vec<T>, Vec<T>, StepCache<T>)> {
    let (d, hs) = (p.input_size, p.hidden_size);
    if x.len() != d || h_prev.len() != hs || c_prev.len() != hs {
        return Err(Error::Shape {
            context: "lstm_cell_step".into(),
            expected: vec![d, hs, hs],
            actual: vec![x.len(), h_prev.len(), c_prev.len()],
        });
    }
    let mut z = p.bias.data().to_vec();
    T::gemm(1, d, 4 * hs, T::one(), x, false, p.w_input.data(), true, T::one(), &mut z);
    T::gemm(1, hs, 4 * hs, T::one(), h_prev, false, p.w_recurrent.data(), true, T::one(), &mut z);
    let mut c = vec![T::zero(); hs];
    let mut tanh_c = vec![T::zero(); hs];
    let mut h = vec![T::zero(); hs];
    activate_step(&mut z, Some(c_prev), &mut c, &mut tanh_c, &mut h, hs);
    Ok((h, c, StepCache { gates: z, tanh_c }))
}

/// Everything a layer keeps from its forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub steps: usize,
    pub batch: usize,
    /// Layer input, `[S·B·d]`.
    pub input: Vec<T>,
    /// Activated gates, `[S·B·4h]`.
    pub gates: Vec<T>,
    pub cell: Vec<T>,
    pub tanh_cell: Vec<T>,
    /// Hidden states for every step, `[S·B·h]`.
    pub hidden: Vec<T>,
}

impl<T: Real> LayerCache<T> {
    /// `[B, h]` hidden state at the final timestep.
    pub fn last_hidden(&self, hidden_size: usize) -> &[T] {
        let n = self.batch * hidden_size;
        &self.hidden[(self.steps - 1) * n..self.steps * n]
    }
}

/// Runs a layer over a whole time-major sequence from zero initial state.
pub fn layer_forward<T: Real>(
    p: &LstmLayerParams<T>,
    input: Vec<T>,
    steps: usize,
    batch: usize,
) -> LayerCache<T> {
    let (d, h) = (p.input_size, p.hidden_size);
    let g = 4 * h;
    let rows = steps * batch;
    debug_assert_eq!(input.len(), rows * d);

    let mut gates = vec![T::zero(); rows * g];
    for row in gates.chunks_exact_mut(g) {
        row.copy_from_slice(p.bias.data());
    }
    T::gemm(rows, d, g, T::one(), &input, false, p.w_input.data(), true, T::one(), &mut gates);

    let mut cell = vec![T::zero(); rows * h];
    let mut tanh_cell = vec![T::zero(); rows * h];
    let mut hidden = vec![T::zero(); rows * h];
    let bh = batch * h;
    let bg = batch * g;
    for t in 0..steps {
        let (h_done, h_rest) = hidden.split_at_mut(t * bh);
        let (c_done, c_rest) = cell.split_at_mut(t * bh);
        let z = &mut gates[t * bg..(t + 1) * bg];
        let c_prev = if t > 0 {
            let h_prev = &h_done[(t - 1) * bh..];
            T::gemm(batch, h, g, T::one(), h_prev, false, p.w_recurrent.data(), true, T::one(), z);
            Some(&c_done[(t - 1) * bh..])
        } else {
            None
        };
        activate_step(
            z,
            c_prev,
            &mut c_rest[..bh],
            &mut tanh_cell[t * bh..(t + 1) * bh],
            &mut h_rest[..bh],
            h,
        );
    }
    LayerCache {
        steps,
        batch,
        input,
        gates,
        cell,
        tanh_cell,
        hidden,
    }
}

/// Backpropagation through time for one layer.
///
/// `d_hidden` is the loss gradient w.r.t. every emitted hidden state
/// (`[S·B·h]`, zeros where the state was not consumed). Gradients are
/// accumulated into `grads`; the return value is the gradient w.r.t. the
/// layer input, `[S·B·d]`.
pub fn layer_backward<T: Real>(
    p: &LstmLayerParams<T>,
    cache: &LayerCache<T>,
    d_hidden: &[T],
    grads: &mut LstmLayerParams<T>,
) -> Vec<T> {
    let (d, h) = (p.input_size, p.hidden_size);
    let g = 4 * h;
    let (steps, batch) = (cache.steps, cache.batch);
    let rows = steps * batch;
    let (bh, bg) = (batch * h, batch * g);

    let mut dz = vec![T::zero(); rows * g];
    let mut dh_next = vec![T::zero(); bh];
    let mut dc_next = vec![T::zero(); bh];
    let one = T::one();

    for t in (0..steps).rev() {
        let gates = &cache.gates[t * bg..(t + 1) * bg];
        let tanh_c = &cache.tanh_cell[t * bh..(t + 1) * bh];
        let dz_t = &mut dz[t * bg..(t + 1) * bg];
        for r in 0..batch {
            let gr = &gates[r * g..(r + 1) * g];
            let dzr = &mut dz_t[r * g..(r + 1) * g];
            for j in 0..h {
                let k = r * h + j;
                let (i, f, gg, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                let tc = tanh_c[k];
                let dh = d_hidden[t * bh + k] + dh_next[k];
                let d_o = dh * tc;
                let dc = dh * o * (one - tc * tc) + dc_next[k];
                let c_prev = if t > 0 { cache.cell[(t - 1) * bh + k] } else { T::zero() };
                dzr[j] = dc * gg * i * (one - i);
                dzr[h + j] = dc * c_prev * f * (one - f);
                dzr[2 * h + j] = dc * i * (one - gg * gg);
                dzr[3 * h + j] = d_o * o * (one - o);
                dc_next[k] = dc * f;
            }
        }
        // dh_{t-1} = dz_t · W_rec
        T::gemm(batch, g, h, one, dz_t, false, p.w_recurrent.data(), false, T::zero(), &mut dh_next);
    }

    // dW_rec = Σ_{t≥1} dz_tᵀ · h_{t-1}
    if steps > 1 {
        T::gemm(
            g,
            (steps - 1) * batch,
            h,
            one,
            &dz[bg..],
            true,
            &cache.hidden[..(steps - 1) * bh],
            false,
            one,
            grads.w_recurrent.data_mut(),
        );
    }
    T::gemm(g, rows, d, one, &dz, true, &cache.input, false, one, grads.w_input.data_mut());
    let db = grads.bias.data_mut();
    for row in dz.chunks_exact(g) {
        for (acc, v) in db.iter_mut().zip(row) {
            *acc = *acc + *v;
        }
    }
    let mut dx = vec![T::zero(); rows * d];
    T::gemm(rows, g, d, one, &dz, false, p.w_input.data(), false, T::zero(), &mut dx);
    dx
}

pub(crate) fn check_finite<T: Real>(values: &[T], layer: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer: layer.to_string(),
        })
    }
}
