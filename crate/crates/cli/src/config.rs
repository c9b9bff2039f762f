use std::path::Path;

use eeg_lstm::dataset::BandTag;
use eeg_lstm::dsp::{BandName, DEFAULT_FS, DEFAULT_ORDER};
use eeg_lstm::nn::{AdamConfig, ModelConfig};
use eeg_lstm::synth::{benchmark_spec, default_benchmark_spec, SynthSpec};
use eeg_lstm::train::{ProtocolConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a command can be configured with. Loaded from TOML, then
/// overridden by flags; the result is echoed next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub protocol: ProtocolSection,
    pub filter: FilterSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub shuffle: bool,
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub split_ratio: f64,
    pub baseline_epochs: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub curriculum: Vec<BandTag>,
    pub mixed_pool: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub order: usize,
    pub bands: Vec<BandName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub per_class: [usize; 3],
    pub participants: usize,
    pub fs: f64,
    /// Theta amplitude of the benchmark signatures; alpha and beta scale with it.
    pub signal_amplitude: Option<f64>,
    pub pink_amplitude: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelConfig::default(),
            train: TrainSection::default(),
            protocol: ProtocolSection::default(),
            filter: FilterSection::default(),
            synth: SynthSection::default(),
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            adam: t.adam,
            shuffle: t.shuffle,
            normalize: t.normalize,
        }
    }
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            split_ratio: p.split_ratio,
            baseline_epochs: p.baseline_epochs,
            pretrain_epochs: p.pretrain_epochs,
            finetune_epochs: p.finetune_epochs,
            curriculum: p.curriculum,
            mixed_pool: p.mixed_pool,
        }
    }
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            bands: BandName::ALL.to_vec(),
        }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        let spec = default_benchmark_spec();
        Self {
            per_class: spec.n_per_class,
            participants: spec.n_participants,
            fs: DEFAULT_FS,
            signal_amplitude: None,
            pink_amplitude: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.model = cfg.model.resolved();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.train_config(self.train.epochs)
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let p = &self.protocol;
        if !(p.split_ratio > 0.0 && p.split_ratio < 1.0) {
            return Err(CliError::Usage(format!("protocol.split_ratio {} must lie in (0, 1)", p.split_ratio)));
        }
        if p.baseline_epochs == 0 || p.pretrain_epochs == 0 || p.finetune_epochs == 0 {
            return Err(CliError::Usage("protocol epoch budgets must be at least 1".into()));
        }
        if p.curriculum.is_empty() || p.curriculum.contains(&BandTag::Raw) {
            return Err(CliError::Usage("protocol.curriculum must list band subsets only".into()));
        }
        if !matches!(self.filter.order, 2 | 4 | 6 | 8) {
            return Err(CliError::Usage(format!("filter.order {} must be 2, 4, 6 or 8", self.filter.order)));
        }
        Ok(())
    }

    pub fn train_config(&self, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: self.train.batch_size,
            adam: self.train.adam,
            seed: self.seed,
            shuffle: self.train.shuffle,
            normalize: self.train.normalize,
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            model: self.model.clone(),
            train: self.train_config(self.train.epochs),
            split_ratio: self.protocol.split_ratio,
            baseline_epochs: self.protocol.baseline_epochs,
            pretrain_epochs: self.protocol.pretrain_epochs,
            finetune_epochs: self.protocol.finetune_epochs,
            curriculum: self.protocol.curriculum.clone(),
            mixed_pool: self.protocol.mixed_pool,
        }
    }

    /// Benchmark generator with the `[synth]` overrides applied.
    pub fn synth_spec(&self) -> SynthSpec {
        let base = self.synth.signal_amplitude.map_or_else(default_benchmark_spec, benchmark_spec);
        let s = &self.synth;
        SynthSpec {
            signatures: base.signatures.clone(),
            pink_amplitude: s.pink_amplitude.unwrap_or(base.pink_amplitude),
            n_participants: s.participants,
            ..SynthSpec::empty(s.per_class, s.fs, self.seed)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }
}
