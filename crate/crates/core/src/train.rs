//! Baseline training, band-subset pretraining, fine-tuning and the five-row
//! comparison built on top of them.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentedCorpus;
use crate::checkpoint::{ensure_config, Checkpoint, Stage};
use crate::dataset::{hash_trials, normalize_per_channel, standardize_length, stratified_split, BandTag, SplitPlan, Trial};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::nn::{
    adam_step, forward, init_params, loss_grads_and_predictions, predict_classes, AdamConfig, Dropout, ModelConfig,
    ModelParams, OptimizerState, param_count, REPORTED_PARAM_COUNT,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

const SHUFFLE_STREAM: u64 = 0x5_4FF1E;
const DROPOUT_STREAM: u64 = 0xD50_9047;
const INIT_STREAM: u64 = 0x1_417;
const STAGE_STREAM: u64 = 0x57_A6E;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub shuffle: bool,
    /// Per-channel z-score after length standardization.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            shuffle: true,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Training("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Training("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// Batch audit log: keys of every trial that entered a training batch.
    pub seen: BTreeSet<String>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }
}

/// Identifies the source recording of a trial, the same for every band copy.
pub fn trial_key(trial: &Trial) -> String {
    let mut h = Sha256::new();
    h.update(trial.participant_id.as_bytes());
    h.update([0]);
    h.update(trial.file_name.as_bytes());
    hex::encode(&h.finalize()[..12])
}

/// Trials resampled to the model's sequence length, optionally z-scored, and
/// laid out `[N, steps, channels]` ready for batching.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSet {
    inputs: Vec<f32>,
    labels: Vec<usize>,
    keys: Vec<String>,
    steps: usize,
    features: usize,
    data_hash: String,
}

impl PreparedSet {
    pub fn new(trials: &[Trial], model: &ModelConfig, normalize: bool) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::Training("empty dataset".into()));
        }
        let (steps, features) = (model.sequence_length, model.input_features);
        let one = |t: &Trial| -> Result<Vec<f32>> {
            if t.channels() != features {
                return Err(Error::Shape {
                    context: format!("trial {}", t.file_name),
                    expected: vec![features, steps],
                    actual: t.data.shape().to_vec(),
                });
            }
            let mut t = standardize_length(t, steps)?;
            if normalize {
                t = normalize_per_channel(&t);
            }
            let mut out = vec![0.0f32; steps * features];
            for c in 0..features {
                for (s, &v) in t.channel(c).iter().enumerate() {
                    out[s * features + c] = v;
                }
            }
            Ok(out)
        };
        #[cfg(feature = "parallel")]
        let rows: Vec<Vec<f32>> = {
            use rayon::prelude::*;
            trials.par_iter().map(one).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Vec<f32>> = trials.iter().map(one).collect::<Result<_>>()?;
        Ok(Self {
            inputs: rows.concat(),
            labels: trials.iter().map(|t| t.label.index()).collect(),
            keys: trials.iter().map(trial_key).collect(),
            steps,
            features,
            data_hash: hash_trials(trials),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn data_hash(&self) -> &str {
        &self.data_hash
    }

    /// Concatenation of several sets (the pooled-bands variant).
    pub fn concat(sets: &[&PreparedSet]) -> Result<Self> {
        let first = sets.first().ok_or_else(|| Error::Training("nothing to pool".into()))?;
        if sets.iter().any(|s| s.steps != first.steps || s.features != first.features) {
            return Err(Error::Training("pooled sets disagree on shape".into()));
        }
        let mut h = Sha256::new();
        for s in sets {
            h.update(s.data_hash.as_bytes());
        }
        Ok(Self {
            inputs: sets.iter().flat_map(|s| s.inputs.iter().copied()).collect(),
            labels: sets.iter().flat_map(|s| s.labels.iter().copied()).collect(),
            keys: sets.iter().flat_map(|s| s.keys.iter().cloned()).collect(),
            steps: first.steps,
            features: first.features,
            data_hash: hex::encode(h.finalize()),
        })
    }

    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<f32>, Vec<usize>)> {
        let row = self.steps * self.features;
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(&self.inputs[i * row..(i + 1) * row]);
        }
        let x = Tensor::from_vec(&[indices.len(), self.steps, self.features], data)?;
        Ok((x, indices.iter().map(|&i| self.labels[i]).collect()))
    }
}

fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    Rng::derive(seed, a, b).next_u64()
}

/// Plain minibatch training from `params` with a fresh Adam state.
pub fn train(params: ModelParams<f32>, data: &PreparedSet, cfg: &TrainConfig) -> Result<(ModelParams<f32>, TrainHistory)> {
    train_observed(params, data, cfg, &mut |_, _| {})
}

/// [`train`] with a callback after every epoch (`epoch`, history so far).
pub fn train_observed(
    mut params: ModelParams<f32>,
    data: &PreparedSet,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, &TrainHistory),
) -> Result<(ModelParams<f32>, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Training("empty dataset".into()));
    }
    let model = params.config();
    if data.steps != model.sequence_length || data.features != model.input_features {
        return Err(Error::Shape {
            context: "training set".into(),
            expected: vec![model.sequence_length, model.input_features],
            actual: vec![data.steps, data.features],
        });
    }
    let mut opt = OptimizerState::new(&params, cfg.adam);
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..data.len()).collect();
        if cfg.shuffle {
            Rng::derive(cfg.seed, SHUFFLE_STREAM, epoch as u64).shuffle(&mut order);
        }
        let mut dropout_rng = Rng::derive(cfg.seed, DROPOUT_STREAM, epoch as u64);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = data.batch(idx)?;
            let diverged = || Error::Diverged { epoch, batch: b };
            let (loss, grads, preds) =
                loss_grads_and_predictions(&params, &x, &y, Dropout::Sample(&mut dropout_rng)).map_err(|e| match e {
                    Error::NonFinite { .. } => diverged(),
                    other => other,
                })?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(diverged());
            }
            adam_step(&mut params, &grads, &mut opt)?;
            loss_sum += loss * idx.len() as f64;
            correct += preds.iter().zip(&y).filter(|(p, t)| p == t).count();
            history.seen.extend(idx.iter().map(|&i| data.keys[i].clone()));
        }
        history.loss.push(loss_sum / data.len() as f64);
        history.accuracy.push(correct as f64 / data.len() as f64);
        history.epoch_seconds.push(start.elapsed().as_secs_f64());
        on_epoch(epoch, &history);
    }
    Ok((params, history))
}

/// Inference-mode predictions for every trial, in order.
pub fn predict(params: &ModelParams<f32>, data: &PreparedSet, batch_size: usize) -> Result<Vec<usize>> {
    let mut rng = Rng::new(0);
    let all: Vec<usize> = (0..data.len()).collect();
    let mut preds = Vec::with_capacity(data.len());
    for idx in all.chunks(batch_size.max(1)) {
        let (x, _) = data.batch(idx)?;
        let (probs, _) = forward(params, &x, false, &mut rng)?;
        preds.extend(predict_classes(&probs));
    }
    Ok(preds)
}

pub fn evaluate(params: &ModelParams<f32>, data: &PreparedSet, batch_size: usize) -> Result<EvalReport> {
    EvalReport::evaluate(data.labels(), &predict(params, data, batch_size)?)
}

/// Glorot-initialized starting point shared by every row of one protocol run.
pub fn initial_checkpoint(model: &ModelConfig, seed: u64) -> Result<Checkpoint> {
    let params = init_params(model, &mut Rng::derive(seed, INIT_STREAM, 0))?;
    Ok(Checkpoint::new(params, Vec::new()))
}

/// Continues from `start` with a fresh optimizer and appends one stage.
pub fn train_stage(
    start: &Checkpoint,
    data: &PreparedSet,
    subset: &str,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, &TrainHistory),
) -> Result<(Checkpoint, TrainHistory)> {
    let (params, history) = train_observed(start.params.clone(), data, cfg, on_epoch)?;
    let stage = Stage {
        subset: subset.to_string(),
        epochs: cfg.epochs,
        seed: cfg.seed,
        data_hash: data.data_hash().to_string(),
    };
    Ok((start.extended(params, stage), history))
}

/// Chains one stage per band: stage `i` starts from the weights stage `i-1`
/// ended with. `sets[i]` is the training split of band `order[i]`.
pub fn pretrain_curriculum(
    start: &Checkpoint,
    order: &[BandTag],
    sets: &[&PreparedSet],
    epochs_per_stage: usize,
    cfg: &TrainConfig,
) -> Result<Vec<(BandTag, Checkpoint, TrainHistory)>> {
    if order.is_empty() {
        return Err(Error::Training("curriculum order is empty".into()));
    }
    if order.len() != sets.len() {
        return Err(Error::Training(format!(
            "{} curriculum bands but {} training sets",
            order.len(),
            sets.len()
        )));
    }
    let mut out: Vec<(BandTag, Checkpoint, TrainHistory)> = Vec::with_capacity(order.len());
    let mut current = start.clone();
    for (i, (&tag, data)) in order.iter().zip(sets).enumerate() {
        let stage_cfg = TrainConfig {
            epochs: epochs_per_stage,
            seed: sub_seed(cfg.seed, STAGE_STREAM, i as u64),
            ..cfg.clone()
        };
        let (next, history) = train_stage(&current, data, tag.as_str(), &stage_cfg, &mut |_, _| {})?;
        current = next.clone();
        out.push((tag, next, history));
    }
    Ok(out)
}

/// Curriculum over the band subsets of `corpus`, each restricted to `train`.
pub fn pretrain_corpus(
    start: &Checkpoint,
    corpus: &AugmentedCorpus,
    order: &[BandTag],
    train: &[usize],
    epochs_per_stage: usize,
    cfg: &TrainConfig,
) -> Result<Vec<(BandTag, Checkpoint, TrainHistory)>> {
    if order.is_empty() {
        return Err(Error::Training("curriculum order is empty".into()));
    }
    let sets = order
        .iter()
        .map(|&tag| band_training_set(corpus, tag, train, start.config(), cfg.normalize))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PreparedSet> = sets.iter().collect();
    pretrain_curriculum(start, order, &refs, epochs_per_stage, cfg)
}

pub fn band_training_set(
    corpus: &AugmentedCorpus,
    tag: BandTag,
    indices: &[usize],
    model: &ModelConfig,
    normalize: bool,
) -> Result<PreparedSet> {
    let subset = corpus
        .subsets
        .get(&tag)
        .ok_or_else(|| Error::Training(format!("corpus has no `{tag}` subset")))?;
    PreparedSet::new(&select(subset, indices)?, model, normalize)
}

pub fn select(trials: &[Trial], indices: &[usize]) -> Result<Vec<Trial>> {
    indices
        .iter()
        .map(|&i| {
            trials
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Training(format!("index {i} out of range for {} trials", trials.len())))
        })
        .collect()
}

/// Fresh Adam on the raw training split, appending a `raw` stage.
pub fn finetune(start: &Checkpoint, data: &PreparedSet, cfg: &TrainConfig) -> Result<(Checkpoint, TrainHistory)> {
    finetune_observed(start, data, cfg, &mut |_, _| {})
}

pub fn finetune_observed(
    start: &Checkpoint,
    data: &PreparedSet,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, &TrainHistory),
) -> Result<(Checkpoint, TrainHistory)> {
    train_stage(start, data, BandTag::Raw.as_str(), cfg, on_epoch)
}

/// Settings for the five-row comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split_ratio: f64,
    pub baseline_epochs: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub curriculum: Vec<BandTag>,
    /// Train the last row on the pooled band subsets instead of chaining them.
    pub mixed_pool: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split_ratio: 0.6,
            baseline_epochs: 100,
            pretrain_epochs: 20,
            finetune_epochs: 50,
            curriculum: vec![BandTag::Theta, BandTag::Alpha, BandTag::Beta],
            mixed_pool: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub weighted_f1: f64,
    pub per_class_f1: [f64; 3],
    pub accuracy: f64,
    pub paper_reference: f64,
    pub epochs: String,
    pub provenance: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Report {
    pub version: u32,
    pub seed: u64,
    pub model: ModelConfig,
    pub param_count: usize,
    pub reported_param_count: usize,
    pub train_trials: usize,
    pub test_trials: usize,
    pub corpus_hash: String,
    pub mixed_pool: bool,
    pub rows: Vec<ReportRow>,
}

/// Row labels and the F1 values published for them.
pub const TABLE2_ROWS: [(&str, f64); 5] = [
    ("Original", 0.63),
    ("Original+Theta", 0.78),
    ("Original+Alpha", 0.71),
    ("Original+Beta", 0.69),
    ("Original+Theta+Alpha+Beta", 0.73),
];

impl Table2Report {
    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<27} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7}",
            "row", "wF1", "F1 L", "F1 H", "F1 R", "ref", "epochs"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<27} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.2} {:>7}",
                r.label, r.weighted_f1, r.per_class_f1[0], r.per_class_f1[1], r.per_class_f1[2], r.paper_reference, r.epochs
            );
        }
        s
    }
}

/// Progress events from [`run_table2_protocol_observed`].
#[derive(Debug, Clone, Copy)]
pub enum ProtocolEvent<'a> {
    Stage { row: &'a str, subset: &'a str, epochs: usize },
    Epoch { row: &'a str, epoch: usize, loss: f64, accuracy: f64 },
    Row(&'a ReportRow),
}

pub fn run_table2_protocol(original: &[Trial], corpus: &AugmentedCorpus, cfg: &ProtocolConfig) -> Result<Table2Report> {
    run_table2_protocol_observed(original, corpus, cfg, &mut |_| {})
}

pub fn run_table2_protocol_observed(
    original: &[Trial],
    corpus: &AugmentedCorpus,
    cfg: &ProtocolConfig,
    on_event: &mut dyn FnMut(ProtocolEvent<'_>),
) -> Result<Table2Report> {
    cfg.model.validate()?;
    cfg.train.validate()?;
    check_corpus_alignment(original, corpus)?;
    let pretrain_order = [BandTag::Theta, BandTag::Alpha, BandTag::Beta];
    for tag in pretrain_order.iter().chain(&cfg.curriculum) {
        corpus.subset(*tag)?;
    }
    if cfg.curriculum.is_empty() {
        return Err(Error::Training("curriculum order is empty".into()));
    }

    let labels: Vec<_> = original.iter().map(|t| t.label).collect();
    let split: SplitPlan = stratified_split(&labels, cfg.split_ratio, cfg.train.seed)?;
    let norm = cfg.train.normalize;
    let raw_train = PreparedSet::new(&select(original, &split.train)?, &cfg.model, norm)?;
    let raw_test = PreparedSet::new(&select(original, &split.test)?, &cfg.model, norm)?;
    let band_sets: Vec<(BandTag, PreparedSet)> = pretrain_order
        .iter()
        .map(|&tag| Ok((tag, band_training_set(corpus, tag, &split.train, &cfg.model, norm)?)))
        .collect::<Result<_>>()?;
    let band_set = |tag: BandTag| -> &PreparedSet {
        &band_sets.iter().find(|(t, _)| *t == tag).expect("all bands prepared").1
    };

    let init = initial_checkpoint(&cfg.model, cfg.train.seed)?;
    let stage_cfg = |epochs: usize, stream: u64| TrainConfig {
        epochs,
        seed: sub_seed(cfg.train.seed, STAGE_STREAM, stream),
        ..cfg.train.clone()
    };
    let test_keys: BTreeSet<&String> = raw_test.keys().iter().collect();
    let mut rows = Vec::with_capacity(TABLE2_ROWS.len());

    for (row_idx, (label, reference)) in TABLE2_ROWS.iter().enumerate() {
        let mut seen = BTreeSet::new();
        let mut run = |start: &Checkpoint,
                       data: &PreparedSet,
                       subset: &str,
                       epochs: usize,
                       stream: u64,
                       on_event: &mut dyn FnMut(ProtocolEvent<'_>)|
         -> Result<Checkpoint> {
            on_event(ProtocolEvent::Stage { row: label, subset, epochs });
            let (ckpt, history) = train_stage(start, data, subset, &stage_cfg(epochs, stream), &mut |epoch, h| {
                on_event(ProtocolEvent::Epoch {
                    row: label,
                    epoch,
                    loss: h.loss[epoch],
                    accuracy: h.accuracy[epoch],
                });
            })?;
            seen.extend(history.seen);
            Ok(ckpt)
        };
        let stream = 16 * row_idx as u64;
        let (ckpt, epochs) = match row_idx {
            0 => (
                run(&init, &raw_train, "raw", cfg.baseline_epochs, stream, on_event)?,
                cfg.baseline_epochs.to_string(),
            ),
            1..=3 => {
                let tag = pretrain_order[row_idx - 1];
                let pre = run(&init, band_set(tag), tag.as_str(), cfg.pretrain_epochs, stream, on_event)?;
                (
                    run(&pre, &raw_train, "raw", cfg.finetune_epochs, stream + 1, on_event)?,
                    format!("{}+{}", cfg.pretrain_epochs, cfg.finetune_epochs),
                )
            }
            _ => {
                let mut current = init.clone();
                let stages = if cfg.mixed_pool {
                    let pooled: Vec<&PreparedSet> = cfg.curriculum.iter().map(|&t| band_set(t)).collect();
                    let name: Vec<&str> = cfg.curriculum.iter().map(|t| t.as_str()).collect();
                    current = run(
                        &current,
                        &PreparedSet::concat(&pooled)?,
                        &name.join("+"),
                        cfg.pretrain_epochs,
                        stream,
                        on_event,
                    )?;
                    1
                } else {
                    for (i, &tag) in cfg.curriculum.iter().enumerate() {
                        current = run(&current, band_set(tag), tag.as_str(), cfg.pretrain_epochs, stream + i as u64, on_event)?;
                    }
                    cfg.curriculum.len()
                };
                let ckpt = run(&current, &raw_train, "raw", cfg.finetune_epochs, stream + 15, on_event)?;
                let pre = vec![cfg.pretrain_epochs.to_string(); stages].join("+");
                (ckpt, format!("{pre}+{}", cfg.finetune_epochs))
            }
        };
        if let Some(leak) = seen.iter().find(|k| test_keys.contains(k)) {
            return Err(Error::Training(format!("test trial {leak} reached a training batch")));
        }
        let report = evaluate(&ckpt.params, &raw_test, cfg.train.batch_size)?;
        let row = ReportRow {
            label: label.to_string(),
            weighted_f1: report.weighted_f1,
            per_class_f1: [report.per_class[0].f1, report.per_class[1].f1, report.per_class[2].f1],
            accuracy: report.accuracy,
            paper_reference: *reference,
            epochs,
            provenance: ckpt.provenance,
        };
        on_event(ProtocolEvent::Row(&row));
        rows.push(row);
    }

    Ok(Table2Report {
        version: REPORT_VERSION,
        seed: cfg.train.seed,
        model: cfg.model.clone(),
        param_count: param_count(&cfg.model),
        reported_param_count: REPORTED_PARAM_COUNT,
        train_trials: split.train.len(),
        test_trials: split.test.len(),
        corpus_hash: corpus.provenance.corpus_hash.clone(),
        mixed_pool: cfg.mixed_pool,
        rows,
    })
}

/// Every band subset must be a filtered copy of `original`, trial for trial.
pub fn check_corpus_alignment(original: &[Trial], corpus: &AugmentedCorpus) -> Result<()> {
    for (tag, subset) in &corpus.subsets {
        if subset.len() != original.len() {
            return Err(Error::Training(format!(
                "`{tag}` subset has {} trials, original has {}",
                subset.len(),
                original.len()
            )));
        }
        for (a, b) in original.iter().zip(subset) {
            if a.file_name != b.file_name || a.label != b.label || a.participant_id != b.participant_id {
                return Err(Error::Training(format!(
                    "`{tag}` subset trial {} does not correspond to original trial {}",
                    b.file_name, a.file_name
                )));
            }
        }
    }
    Ok(())
}

/// Refuses a checkpoint whose architecture differs from `model`.
pub fn check_start(start: &Checkpoint, model: &ModelConfig) -> Result<()> {
    ensure_config(start.config(), model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::build_corpus;
    use crate::dsp::{ALPHA, BETA, THETA};
    use crate::synth::{generate_trials, SynthSpec};

    fn tiny_model(channels: usize) -> ModelConfig {
        let mut m = ModelConfig::default().with_lstm_sizes(&[6, 4]);
        m.input_features = channels;
        m.sequence_length = 24;
        m.dense_hidden = 5;
        m
    }

    fn tiny_data() -> Vec<Trial> {
        let spec = SynthSpec {
            min_samples: 40,
            max_samples: 60,
            n_participants: 3,
            pink_amplitude: 1.0,
            ..SynthSpec::empty([4, 6, 4], 250.0, 9)
        };
        generate_trials(&spec).unwrap()
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let data = tiny_data();
        let model = tiny_model(31);
        let set = PreparedSet::new(&data, &model, true).unwrap();
        let init = initial_checkpoint(&model, 1).unwrap();
        let err = train(init.params, &set, &quick(0)).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn history_length_and_replay() {
        let data = tiny_data();
        let model = tiny_model(31);
        let set = PreparedSet::new(&data, &model, true).unwrap();
        let init = initial_checkpoint(&model, 1).unwrap();
        let (p1, h1) = train(init.params.clone(), &set, &quick(3)).unwrap();
        let (p2, h2) = train(init.params, &set, &quick(3)).unwrap();
        assert_eq!(h1.loss.len(), 3);
        assert_eq!(h1.accuracy.len(), 3);
        assert_eq!(h1.loss, h2.loss);
        assert_eq!(p1, p2);
        assert_eq!(h1.seen.len(), data.len());
    }

    #[test]
    fn prepared_layout_is_time_major_per_trial() {
        let data = tiny_data();
        let mut model = tiny_model(31);
        model.sequence_length = data[0].samples();
        let set = PreparedSet::new(&data[..1], &model, false).unwrap();
        let (x, y) = set.batch(&[0]).unwrap();
        assert_eq!(x.shape(), &[1, data[0].samples(), 31]);
        assert_eq!(y, vec![data[0].label.index()]);
        assert_eq!(x.data()[31 * 5 + 2], data[0].channel(2)[5]);
    }

    #[test]
    fn curriculum_chains_weights() {
        let data = tiny_data();
        let model = tiny_model(31);
        let corpus = build_corpus(&data, &[THETA, ALPHA, BETA], 250.0, 4).unwrap();
        let init = initial_checkpoint(&model, 2).unwrap();
        let train_idx: Vec<usize> = (0..8).collect();
        let order = [BandTag::Theta, BandTag::Alpha, BandTag::Beta];
        let stages = pretrain_corpus(&init, &corpus, &order, &train_idx, 2, &quick(1)).unwrap();
        assert_eq!(stages.len(), 3);
        assert_eq!(stages[2].1.provenance.len(), 3);
        assert_eq!(stages[0].1.provenance[0].subset, "theta");
        assert_eq!(stages[0].1.provenance[0].epochs, 2);

        // stage 1 replayed from stage 0's output gives stage 1's output
        let alpha = band_training_set(&corpus, BandTag::Alpha, &train_idx, &model, true).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            seed: sub_seed(11, STAGE_STREAM, 1),
            ..quick(1)
        };
        let (replayed, _) = train_stage(&stages[0].1, &alpha, "alpha", &cfg, &mut |_, _| {}).unwrap();
        assert_eq!(replayed, stages[1].1);

        assert!(pretrain_corpus(&init, &corpus, &[], &train_idx, 2, &quick(1)).is_err());
        assert!(pretrain_corpus(&init, &corpus, &[BandTag::Raw], &train_idx, 2, &quick(1)).is_err());
    }

    #[test]
    fn finetune_from_fresh_equals_plain_training() {
        let data = tiny_data();
        let model = tiny_model(31);
        let set = PreparedSet::new(&data, &model, true).unwrap();
        let init = initial_checkpoint(&model, 3).unwrap();
        let (ft, _) = finetune(&init, &set, &quick(2)).unwrap();
        let (plain, _) = train(init.params.clone(), &set, &quick(2)).unwrap();
        assert_eq!(ft.params, plain);
        assert_eq!(ft.provenance.len(), 1);
        assert_eq!(ft.provenance[0].subset, "raw");
        assert_eq!(ft.provenance[0].epochs, 2);
    }

    #[test]
    fn protocol_rows_and_no_leakage() {
        let data = tiny_data();
        let corpus = build_corpus(&data, &[THETA, ALPHA, BETA], 250.0, 4).unwrap();
        let cfg = ProtocolConfig {
            model: tiny_model(31),
            train: quick(1),
            baseline_epochs: 2,
            pretrain_epochs: 1,
            finetune_epochs: 1,
            ..ProtocolConfig::default()
        };
        let report = run_table2_protocol(&data, &corpus, &cfg).unwrap();
        let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, TABLE2_ROWS.iter().map(|r| r.0).collect::<Vec<_>>());
        let refs: Vec<f64> = report.rows.iter().map(|r| r.paper_reference).collect();
        assert_eq!(refs, vec![0.63, 0.78, 0.71, 0.69, 0.73]);
        assert_eq!(report.rows[4].provenance.len(), 4);
        assert_eq!(report.rows[4].epochs, "1+1+1+1");
        assert_eq!(report.train_trials + report.test_trials, data.len());
        let again = run_table2_protocol(&data, &corpus, &cfg).unwrap();
        assert_eq!(report.to_json().unwrap(), again.to_json().unwrap());

        let pooled = run_table2_protocol(&data, &corpus, &ProtocolConfig { mixed_pool: true, ..cfg }).unwrap();
        assert_eq!(pooled.rows[4].provenance[0].subset, "theta+alpha+beta");
    }
}
