//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function so the same code
//! paths are covered by native tests.

use eeg_lstm::dsp::{apply_zero_phase, design_bandpass, frequency_response, BandName, BandSpec};
use eeg_lstm::nn::ModelConfig;
use eeg_lstm::synth::pink_noise;
use eeg_lstm::Rng;
use wasm_bindgen::prelude::*;

fn band(name: &str) -> Result<BandSpec, String> {
    name.parse::<BandName>().map(BandName::spec).map_err(|e| e.to_string())
}

/// `|H(f)|` of the band-pass cascade at `points` frequencies spread evenly
/// over `[0, fs/2]`.
pub fn response_curve(band_name: &str, order: usize, fs: f64, points: usize) -> Result<Vec<f64>, String> {
    let cascade = design_bandpass(&band(band_name)?, fs, order).map_err(|e| e.to_string())?;
    let n = points.max(2);
    Ok((0..n)
        .map(|i| frequency_response(&cascade, fs / 2.0 * i as f64 / (n - 1) as f64))
        .collect())
}

/// One synthetic channel: a sinusoid over pink noise, followed by the same
/// signal after zero-phase band-pass filtering (concatenated, equal halves).
pub fn synth_and_filter(
    seed: u64,
    freq_hz: f64,
    amplitude: f64,
    noise_sd: f64,
    samples: usize,
    fs: f64,
    band_name: &str,
    order: usize,
) -> Result<Vec<f64>, String> {
    let mut rng = Rng::new(seed);
    let phase = rng.uniform(0.0, std::f64::consts::TAU);
    let noise = pink_noise(samples, noise_sd, &mut rng);
    let raw: Vec<f64> = noise
        .iter()
        .enumerate()
        .map(|(t, n)| amplitude * (std::f64::consts::TAU * freq_hz * t as f64 / fs + phase).sin() + n)
        .collect();
    let cascade = design_bandpass(&band(band_name)?, fs, order).map_err(|e| e.to_string())?;
    let filtered = apply_zero_phase(&raw, &cascade).map_err(|e| e.to_string())?;
    Ok([raw, filtered].concat())
}

/// Per-layer parameter counts as JSON `[["lstm1", n], ...]` plus the total.
pub fn param_table(lstm_sizes: &[usize], dense_hidden: usize, input_features: usize) -> Result<String, String> {
    let mut cfg = ModelConfig::default().with_lstm_sizes(lstm_sizes);
    cfg.dense_hidden = dense_hidden;
    cfg.input_features = input_features;
    cfg.validate().map_err(|e| e.to_string())?;
    let layers = cfg.layer_param_counts();
    let total: usize = layers.iter().map(|(_, n)| n).sum();
    Ok(serde_json::json!({ "layers": layers, "total": total }).to_string())
}

#[wasm_bindgen(js_name = responseCurve)]
pub fn response_curve_js(band_name: &str, order: usize, fs: f64, points: usize) -> Result<Vec<f64>, JsError> {
    response_curve(band_name, order, fs, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = synthAndFilter)]
#[allow(clippy::too_many_arguments)]
pub fn synth_and_filter_js(
    seed: u32,
    freq_hz: f64,
    amplitude: f64,
    noise_sd: f64,
    samples: usize,
    fs: f64,
    band_name: &str,
    order: usize,
) -> Result<Vec<f64>, JsError> {
    synth_and_filter(seed as u64, freq_hz, amplitude, noise_sd, samples, fs, band_name, order).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = paramTable)]
pub fn param_table_js(lstm_sizes: Vec<u32>, dense_hidden: usize, input_features: usize) -> Result<String, JsError> {
    let sizes: Vec<usize> = lstm_sizes.into_iter().map(|s| s as usize).collect();
    param_table(&sizes, dense_hidden, input_features).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_peaks_inside_band() {
        let curve = response_curve("theta", 4, 250.0, 251).unwrap();
        assert!(curve[0] < 1e-6);
        // 0.5 Hz grid: index 12 is 6 Hz
        assert!(curve[12] > 0.9);
        assert!(curve[100] < 0.01);
        assert!(response_curve("delta", 4, 250.0, 10).is_err());
    }

    #[test]
    fn filtered_half_keeps_in_band_tone() {
        let out = synth_and_filter(1, 10.0, 1.0, 0.0, 500, 250.0, "alpha", 4).unwrap();
        let (raw, filt) = out.split_at(500);
        let mid = 125..375;
        let err: f64 = mid.clone().map(|i| (raw[i] - filt[i]).abs()).fold(0.0, f64::max);
        assert!(err < 0.1, "{err}");
    }

    #[test]
    fn default_param_total() {
        let json = param_table(&[256, 128, 64, 32, 16], 64, 31).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["total"], 558_275);
        assert!(param_table(&[], 64, 31).is_err());
    }
}
