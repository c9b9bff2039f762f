//! Seeded multichannel synthetic EEG: class-specific sinusoid patterns over
//! pink background noise, written in the same CSV + manifest layout as
//! recorded data.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    label_from_ambiguity, write_trial_csv, DatasetManifest, Label, ManifestEntry, Trial, NUM_CHANNELS,
};
use crate::dsp::DEFAULT_FS;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// One sinusoid with a fixed spatial distribution over channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureComponent {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub spatial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Trials per class: left, high-ambiguity, right.
    pub n_per_class: [usize; 3],
    pub channels: usize,
    pub fs: f64,
    /// Inclusive trial length range in samples.
    pub min_samples: usize,
    pub max_samples: usize,
    /// Signal components per class, indexed like `n_per_class`.
    pub signatures: [Vec<SignatureComponent>; 3],
    /// Standard deviation of the per-channel pink background.
    pub pink_amplitude: f64,
    pub n_participants: usize,
    pub seed: u64,
}

/// Spatial weights peaking at `center` with the given channel width.
pub fn gaussian_pattern(channels: usize, center: f64, width: f64) -> Vec<f64> {
    (0..channels)
        .map(|c| (-0.5 * ((c as f64 - center) / width).powi(2)).exp())
        .collect()
}

impl SynthSpec {
    /// Trial lengths spanning `[0.7·fs, 1.5·fs]`, no signal, no noise.
    pub fn empty(n_per_class: [usize; 3], fs: f64, seed: u64) -> Self {
        Self {
            n_per_class,
            channels: NUM_CHANNELS,
            fs,
            min_samples: (0.7 * fs).round() as usize,
            max_samples: (1.5 * fs).round() as usize,
            signatures: [Vec::new(), Vec::new(), Vec::new()],
            pink_amplitude: 0.0,
            n_participants: 1,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.n_per_class.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Dataset(m));
        if self.n_per_class.contains(&0) {
            return bad("every class needs at least one trial".into());
        }
        if self.n_participants == 0 {
            return bad("need at least one participant".into());
        }
        if self.channels != NUM_CHANNELS {
            return bad(format!("trials must have {NUM_CHANNELS} channels"));
        }
        if self.min_samples < 2 || self.min_samples > self.max_samples {
            return bad(format!("bad length range {}..={}", self.min_samples, self.max_samples));
        }
        if !(self.fs > 0.0) || !(self.pink_amplitude >= 0.0) {
            return bad("fs must be positive and noise amplitude non-negative".into());
        }
        for comp in self.signatures.iter().flatten() {
            if comp.amplitude < 0.0 || comp.spatial.len() != self.channels {
                return bad("signature amplitudes must be >= 0 with one weight per channel".into());
            }
            if !(comp.freq_hz > 0.0 && comp.freq_hz < self.fs / 2.0) {
                return bad(format!("signature frequency {} Hz outside (0, fs/2)", comp.freq_hz));
            }
        }
        Ok(())
    }

    /// Copy with every signature amplitude set to zero (noise-only control).
    pub fn without_signal(&self) -> Self {
        let mut s = self.clone();
        for comp in s.signatures.iter_mut().flatten() {
            comp.amplitude = 0.0;
        }
        s
    }
}

/// Pink background standard deviation of the benchmark.
pub const BENCHMARK_PINK_AMPLITUDE: f64 = 1.0;
/// Peak amplitude of each class's theta component in the benchmark.
pub const BENCHMARK_SIGNAL_AMPLITUDE: f64 = 1.5;
/// Alpha and beta components, relative to the theta amplitude.
pub const BENCHMARK_ALPHA_RATIO: f64 = 0.5;
pub const BENCHMARK_BETA_RATIO: f64 = 0.35;

/// Small three-class set separated mainly by theta rhythms: class `k`
/// carries `5 + k` Hz on its own third of the channel montage, plus weaker
/// `10 + k` Hz and `20 + 2k` Hz components on the same channels.
pub fn default_benchmark_spec() -> SynthSpec {
    benchmark_spec(BENCHMARK_SIGNAL_AMPLITUDE)
}

/// The benchmark layout with a custom theta amplitude.
pub fn benchmark_spec(theta_amplitude: f64) -> SynthSpec {
    let mut spec = SynthSpec::empty([60, 60, 60], DEFAULT_FS, 2024);
    let third = NUM_CHANNELS as f64 / 3.0;
    for (k, sig) in spec.signatures.iter_mut().enumerate() {
        let spatial = gaussian_pattern(NUM_CHANNELS, third * (k as f64 + 0.5), third / 2.0);
        let kf = k as f64;
        for (freq_hz, ratio) in [
            (5.0 + kf, 1.0),
            (10.0 + kf, BENCHMARK_ALPHA_RATIO),
            (20.0 + 2.0 * kf, BENCHMARK_BETA_RATIO),
        ] {
            sig.push(SignatureComponent {
                freq_hz,
                amplitude: theta_amplitude * ratio,
                spatial: spatial.clone(),
            });
        }
    }
    spec.pink_amplitude = BENCHMARK_PINK_AMPLITUDE;
    spec.n_participants = 10;
    spec
}

/// Unit-variance-ish pink noise (Paul Kellet's three-pole filter over
/// Gaussian white noise), rescaled to exactly `sd` over the segment.
pub fn pink_noise(n: usize, sd: f64, rng: &mut Rng) -> Vec<f64> {
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let (mut b0, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
    let mut tick = |rng: &mut Rng| {
        let w: f64 = StandardNormal.sample(rng);
        b0 = 0.99765 * b0 + w * 0.099_046_0;
        b1 = 0.96300 * b1 + w * 0.296_516_4;
        b2 = 0.57000 * b2 + w * 1.052_691_3;
        b0 + b1 + b2 + w * 0.1848
    };
    // settle the slowest pole
    for _ in 0..2000 {
        tick(rng);
    }
    let mut x: Vec<f64> = (0..n).map(|_| tick(rng)).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { sd / var.sqrt() } else { 0.0 };
    x.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    x
}

fn class_levels(label: Label) -> &'static [f64] {
    match label {
        Label::Left => &[0.15, 0.25],
        Label::HighAmbiguity => &[0.4, 0.45, 0.55, 0.6],
        Label::Right => &[0.75, 0.85],
    }
}

/// Builds one trial from its own derived random stream.
fn make_trial(spec: &SynthSpec, index: usize, label: Label, ambiguity: f64, participant: String) -> Result<Trial> {
    let mut rng = Rng::derive(spec.seed, 0x5E_7417, index as u64);
    let len = spec.min_samples + rng.below(spec.max_samples - spec.min_samples + 1);
    let mut data = vec![0.0f64; spec.channels * len];
    for comp in &spec.signatures[label.index()] {
        let phase = rng.uniform(0.0, 2.0 * PI);
        let w = 2.0 * PI * comp.freq_hz / spec.fs;
        let wave: Vec<f64> = (0..len).map(|t| comp.amplitude * (w * t as f64 + phase).sin()).collect();
        for (c, &weight) in comp.spatial.iter().enumerate() {
            for (d, s) in data[c * len..(c + 1) * len].iter_mut().zip(&wave) {
                *d += weight * s;
            }
        }
    }
    for c in 0..spec.channels {
        let noise = pink_noise(len, spec.pink_amplitude, &mut rng);
        for (d, n) in data[c * len..(c + 1) * len].iter_mut().zip(noise) {
            *d += n;
        }
    }
    let data = Tensor::from_vec(&[spec.channels, len], data.into_iter().map(|v| v as f32).collect())?;
    Trial::new(data, ambiguity, participant, spec.fs, format!("trial_{index:05}.csv"))
}

/// Metadata of one planned trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrial {
    pub index: usize,
    pub label: Label,
    pub ambiguity: f64,
    pub participant_id: String,
}

/// Trial metadata in manifest order. Class order is shuffled, participants
/// are assigned round-robin over that order and ambiguity levels cycle
/// within each class.
pub fn trial_plan(spec: &SynthSpec) -> Result<Vec<PlannedTrial>> {
    spec.validate()?;
    let mut labels: Vec<Label> = Label::ALL
        .iter()
        .zip(spec.n_per_class)
        .flat_map(|(&l, n)| std::iter::repeat_n(l, n))
        .collect();
    Rng::derive(spec.seed, 0x0DE5, 0).shuffle(&mut labels);
    let mut seen = [0usize; 3];
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(index, label)| {
            let levels = class_levels(label);
            let ambiguity = levels[seen[label.index()] % levels.len()];
            seen[label.index()] += 1;
            debug_assert_eq!(label_from_ambiguity(ambiguity).ok(), Some(label));
            PlannedTrial {
                index,
                label,
                ambiguity,
                participant_id: format!("P{:02}", index % spec.n_participants + 1),
            }
        })
        .collect())
}

pub fn generate_trials(spec: &SynthSpec) -> Result<Vec<Trial>> {
    let plan = trial_plan(spec)?;
    let build = |p: &PlannedTrial| make_trial(spec, p.index, p.label, p.ambiguity, p.participant_id.clone());
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        plan.par_iter().map(build).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        plan.iter().map(build).collect()
    }
}

pub const TRIAL_DIR: &str = "trials";
pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes `trials/*.csv`, `manifest.csv` and `synth_spec.json` under `out`.
pub fn generate(spec: &SynthSpec, out: &Path) -> Result<DatasetManifest> {
    let trials = generate_trials(spec)?;
    write_dataset(&trials, out)?;
    crate::dataset::save_json(&out.join("synth_spec.json"), spec)?;
    DatasetManifest::read(&out.join(MANIFEST_FILE))
}

/// Writes trials as `out/trials/<file_name>` plus a manifest at `out`.
pub fn write_dataset(trials: &[Trial], out: &Path) -> Result<DatasetManifest> {
    write_dataset_in(trials, out, TRIAL_DIR)
}

/// Like [`write_dataset`] with trial files under `out/<subdir>`; an empty
/// `subdir` puts them next to the manifest.
pub fn write_dataset_in(trials: &[Trial], out: &Path, subdir: &str) -> Result<DatasetManifest> {
    let dir = if subdir.is_empty() { out.to_path_buf() } else { out.join(subdir) };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let entries: Vec<ManifestEntry> = trials
        .iter()
        .map(|t| ManifestEntry {
            path: if subdir.is_empty() {
                t.file_name.clone()
            } else {
                format!("{subdir}/{}", t.file_name)
            },
            ambiguity: t.ambiguity,
            participant_id: t.participant_id.clone(),
            fs_hz: t.fs,
        })
        .collect();
    let write = |t: &Trial| write_trial_csv(&dir.join(&t.file_name), t);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        trials.par_iter().map(write).collect::<Result<()>>()?;
    }
    #[cfg(not(feature = "parallel"))]
    {
        trials.iter().map(write).collect::<Result<()>>()?;
    }
    let manifest = DatasetManifest::new(entries, out)?;
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}
