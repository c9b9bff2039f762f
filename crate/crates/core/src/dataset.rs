//! Trial ingest, labeling, length standardization and experiment splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::BandName;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const NUM_CHANNELS: usize = 31;
pub const MIN_TRIAL_SAMPLES: usize = 700;
pub const MAX_TRIAL_SAMPLES: usize = 1500;
pub const MANIFEST_VERSION: u32 = 1;
pub const PLAN_VERSION: u32 = 1;

/// Stimulus ambiguity levels shown in the experiment.
pub const AMBIGUITY_LEVELS: [f64; 8] = [0.15, 0.25, 0.4, 0.45, 0.55, 0.6, 0.75, 0.85];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Left = 0,
    HighAmbiguity = 1,
    Right = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Left, Label::HighAmbiguity, Label::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Left => "Left",
            Label::HighAmbiguity => "High-ambiguity",
            Label::Right => "Right",
        }
    }
}

/// Maps a presented ambiguity level to its class.
pub fn label_from_ambiguity(a: f64) -> Result<Label> {
    const TOL: f64 = 1e-9;
    let is = |v: f64| (a - v).abs() < TOL;
    if is(0.15) || is(0.25) {
        Ok(Label::Left)
    } else if is(0.4) || is(0.45) || is(0.55) || is(0.6) {
        Ok(Label::HighAmbiguity)
    } else if is(0.75) || is(0.85) {
        Ok(Label::Right)
    } else {
        Err(Error::UnknownAmbiguity(a))
    }
}

/// Which signal a trial holds: the recording itself or a band-filtered copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandTag {
    Raw,
    Theta,
    Alpha,
    Beta,
}

impl BandTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BandTag::Raw => "raw",
            BandTag::Theta => "theta",
            BandTag::Alpha => "alpha",
            BandTag::Beta => "beta",
        }
    }
}

impl From<BandName> for BandTag {
    fn from(b: BandName) -> Self {
        match b {
            BandName::Theta => BandTag::Theta,
            BandName::Alpha => BandTag::Alpha,
            BandName::Beta => BandTag::Beta,
        }
    }
}

impl fmt::Display for BandTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("raw") {
            Ok(BandTag::Raw)
        } else {
            s.parse::<BandName>().map(BandTag::from)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// `[channels, samples]`
    pub data: Tensor<f32>,
    pub ambiguity: f64,
    pub label: Label,
    pub participant_id: String,
    pub fs: f64,
    pub band_tag: BandTag,
    /// File name the trial was read from or will be written as.
    pub file_name: String,
    /// Sample count outside the expected recording range on ingest.
    pub length_warning: bool,
    /// Channels that were constant when normalized (left as zeros).
    pub flat_channels: Vec<usize>,
}

impl Trial {
    pub fn new(
        data: Tensor<f32>,
        ambiguity: f64,
        participant_id: impl Into<String>,
        fs: f64,
        file_name: impl Into<String>,
    ) -> Result<Self> {
        let label = label_from_ambiguity(ambiguity)?;
        if data.shape().len() != 2 {
            return Err(Error::Dataset("trial data must be [channels, samples]".into()));
        }
        if !data.is_finite() {
            return Err(Error::Dataset("trial contains non-finite samples".into()));
        }
        let samples = data.shape()[1];
        Ok(Self {
            data,
            ambiguity,
            label,
            participant_id: participant_id.into(),
            fs,
            band_tag: BandTag::Raw,
            file_name: file_name.into(),
            length_warning: !(MIN_TRIAL_SAMPLES..=MAX_TRIAL_SAMPLES).contains(&samples),
            flat_channels: Vec::new(),
        })
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn samples(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let t = self.samples();
        &self.data.data()[c * t..(c + 1) * t]
    }

    /// Same metadata with new `[channels, samples]` data.
    pub fn with_data(&self, data: Tensor<f32>) -> Trial {
        Trial {
            data,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Trial {
        Trial {
            data: Tensor::zeros(&[1, 1]),
            ambiguity: self.ambiguity,
            label: self.label,
            participant_id: self.participant_id.clone(),
            fs: self.fs,
            band_tag: self.band_tag,
            file_name: self.file_name.clone(),
            length_warning: self.length_warning,
            flat_channels: self.flat_channels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub ambiguity: f64,
    pub participant_id: String,
    pub fs_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub fs: f64,
    pub version: u32,
    /// Directory relative paths resolve against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.path.as_str()) {
                return Err(Error::Dataset(format!("duplicate manifest path `{}`", e.path)));
            }
            label_from_ambiguity(e.ambiguity)?;
        }
        let fs = entries.first().map_or(0.0, |e| e.fs_hz);
        if let Some(e) = entries.iter().find(|e| (e.fs_hz - fs).abs() > 1e-9) {
            return Err(Error::Dataset(format!(
                "mixed sampling rates in manifest ({} and {} Hz)",
                fs, e.fs_hz
            )));
        }
        Ok(Self {
            entries,
            fs,
            version: MANIFEST_VERSION,
            root: root.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries
            .iter()
            .map(|e| label_from_ambiguity(e.ambiguity).expect("validated on construction"))
            .collect()
    }

    pub fn participants(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.participant_id.as_str()).collect()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let expected = ["path", "ambiguity", "participant_id", "fs_hz"];
        if headers.iter().map(str::trim).ne(expected) {
            return Err(Error::Dataset(format!(
                "{}: manifest header must be `{}`",
                path.display(),
                expected.join(",")
            )));
        }
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(entries, root)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Picks the delimiter from the first line: whichever of `,` `;` `\t`
/// occurs most.
pub fn detect_delimiter(first_line: &str) -> u8 {
    [b',', b';', b'\t']
        .into_iter()
        .max_by_key(|&d| (first_line.bytes().filter(|&b| b == d).count(), d == b','))
        .expect("non-empty candidate list")
}

/// Parsed trial file plus the delimiter it used.
pub fn read_trial_matrix(path: &Path) -> Result<(Tensor<f32>, u8)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let delimiter = detect_delimiter(text.lines().next().unwrap_or(""));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.trim().parse::<f32>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::BadCell {
                    path: path.to_path_buf(),
                    row: r + 1,
                    col: c + 1,
                    cell: cell.to_string(),
                })
            })
            .collect::<Result<Vec<f32>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Ragged {
                    path: path.to_path_buf(),
                    row: r + 1,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() != NUM_CHANNELS {
        return Err(Error::ChannelCount {
            path: path.to_path_buf(),
            expected: NUM_CHANNELS,
            found: rows.len(),
        });
    }
    let t = rows[0].len();
    let data = Tensor::from_vec(&[NUM_CHANNELS, t], rows.concat())?;
    Ok((data, delimiter))
}

pub fn load_trial_csv(path: &Path, entry: &ManifestEntry) -> Result<Trial> {
    let (data, _) = read_trial_matrix(path)?;
    let file_name = Path::new(&entry.path)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| entry.path.clone());
    Trial::new(data, entry.ambiguity, entry.participant_id.clone(), entry.fs_hz, file_name)
}

/// Writes `[channels, samples]` as comma-separated rows.
pub fn write_trial_csv(path: &Path, trial: &Trial) -> Result<()> {
    use std::fmt::Write as _;
    let t = trial.samples();
    let mut out = String::with_capacity(trial.data.len() * 10);
    for c in 0..trial.channels() {
        for (i, v) in trial.channel(c).iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("write to String");
        }
        debug_assert_eq!(trial.channel(c).len(), t);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads every trial listed in a manifest, in manifest order.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Vec<Trial>> {
    let load = |e: &ManifestEntry| load_trial_csv(&manifest.resolve(e), e);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        manifest.entries.par_iter().map(load).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        manifest.entries.iter().map(load).collect()
    }
}

/// Linear resampling of one channel onto `target` points spanning the same
/// duration (first and last samples map onto each other).
pub fn resample_linear(x: &[f32], target: usize) -> Vec<f32> {
    let n = x.len();
    if n == target {
        return x.to_vec();
    }
    if target == 1 || n == 1 {
        return vec![x[0]; target];
    }
    let scale = (n - 1) as f64 / (target - 1) as f64;
    (0..target)
        .map(|i| {
            let pos = i as f64 * scale;
            let lo = (pos.floor() as usize).min(n - 2);
            let frac = pos - lo as f64;
            let (a, b) = (x[lo] as f64, x[lo + 1] as f64);
            (a + (b - a) * frac) as f32
        })
        .collect()
}

pub fn standardize_length(trial: &Trial, target: usize) -> Result<Trial> {
    if trial.samples() < 2 || target < 2 {
        return Err(Error::Dataset(format!(
            "cannot resample {} samples to {target}",
            trial.samples()
        )));
    }
    if trial.samples() == target {
        return Ok(trial.clone());
    }
    let c = trial.channels();
    let mut data = Vec::with_capacity(c * target);
    for ch in 0..c {
        data.extend(resample_linear(trial.channel(ch), target));
    }
    Ok(trial.with_data(Tensor::from_vec(&[c, target], data)?))
}

/// Per-channel z-score. Constant channels become zeros and are listed in
/// `flat_channels`.
pub fn normalize_per_channel(trial: &Trial) -> Trial {
    let (c, t) = (trial.channels(), trial.samples());
    let mut data = trial.data.data().to_vec();
    let mut flat = Vec::new();
    for ch in 0..c {
        let row = &mut data[ch * t..(ch + 1) * t];
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / t as f64;
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / t as f64;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            row.fill(0.0);
            flat.push(ch);
        } else {
            row.iter_mut().for_each(|v| *v = ((*v as f64 - mean) / sd) as f32);
        }
    }
    let mut out = trial.with_data(Tensor::from_vec(&[c, t], data).expect("same shape"));
    out.flat_channels = flat;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub version: u32,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
    pub grouped: bool,
}

impl SplitPlan {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let plan: SplitPlan = load_json(path)?;
        check_plan_version(plan.version)?;
        Ok(plan)
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(Error::Dataset(format!("split ratio {ratio} must lie strictly between 0 and 1")))
    }
}

/// Stratified split: within each class, `round(ratio·n)` randomly chosen
/// trials go to train.
pub fn stratified_split(labels: &[Label], ratio: f64, seed: u64) -> Result<SplitPlan> {
    check_ratio(ratio)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, class) in Label::ALL.into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            return Err(Error::Dataset(format!("class {} has no trials", class.name())));
        }
        Rng::derive(seed, 0x5EED_5911, k as u64).shuffle(&mut idx);
        let n_train = (ratio * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        version: PLAN_VERSION,
        train,
        test,
        ratio,
        seed,
        grouped: false,
    })
}

pub fn split_train_test(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<SplitPlan> {
    stratified_split(&manifest.labels(), ratio, seed)
}

/// Participant-level split: whole participants go to train (in seeded random
/// order) until the train share reaches `ratio`. Class counts only
/// approximate `ratio`.
pub fn split_train_test_grouped(
    manifest: &DatasetManifest,
    ratio: f64,
    seed: u64,
) -> Result<SplitPlan> {
    check_ratio(ratio)?;
    let groups = group_indices(&manifest.participants());
    if groups.len() < 2 {
        return Err(Error::Dataset("grouped split needs at least two participants".into()));
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    Rng::derive(seed, 0x6E0F_5911, 0).shuffle(&mut order);
    let target = ratio * manifest.len() as f64;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let n_groups = order.len();
    for (pos, g) in order.into_iter().enumerate() {
        let members = &groups[g].1;
        // the last participant always lands in test, the first in train
        let last = pos + 1 == n_groups;
        if !last && (train.is_empty() || (train.len() as f64) < target) {
            train.extend_from_slice(members);
        } else {
            test.extend_from_slice(members);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        version: PLAN_VERSION,
        train,
        test,
        ratio,
        seed,
        grouped: true,
    })
}

/// `(participant, trial indices)` sorted by participant id.
fn group_indices(participants: &[&str]) -> Vec<(String, Vec<usize>)> {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in participants.iter().enumerate() {
        map.entry(p).or_default().push(i);
    }
    map.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub version: u32,
    pub k: usize,
    /// Fold index of every trial.
    pub assignments: Vec<usize>,
    /// Participants held by each fold.
    pub fold_participants: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let plan: FoldPlan = load_json(path)?;
        check_plan_version(plan.version)?;
        Ok(plan)
    }
}

/// Participant-grouped K folds. Participants are taken in descending order
/// of trial count and each goes to the fold currently holding the fewest
/// trials, so no participant is split and fold sizes stay balanced.
pub fn make_folds_for(participants: &[&str], k: usize) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::Dataset("need at least one fold".into()));
    }
    let mut groups = group_indices(participants);
    if groups.len() < k {
        return Err(Error::Dataset(format!(
            "{} participants cannot fill {k} folds",
            groups.len()
        )));
    }
    groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    let mut load = vec![0usize; k];
    let mut assignments = vec![0usize; participants.len()];
    let mut fold_participants = vec![Vec::new(); k];
    for (pid, members) in groups {
        let fold = (0..k).min_by_key(|&f| (load[f], f)).expect("k > 0");
        load[fold] += members.len();
        for i in members {
            assignments[i] = fold;
        }
        fold_participants[fold].push(pid);
    }
    Ok(FoldPlan {
        version: PLAN_VERSION,
        k,
        assignments,
        fold_participants,
    })
}

pub fn make_folds(manifest: &DatasetManifest, k: usize) -> Result<FoldPlan> {
    make_folds_for(&manifest.participants(), k)
}

fn check_plan_version(v: u32) -> Result<()> {
    if v == PLAN_VERSION {
        Ok(())
    } else {
        Err(Error::Dataset(format!("unsupported plan version {v}")))
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// SHA-256 over labels, participants, band tags and sample data, in order.
pub fn hash_trials(trials: &[Trial]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for t in trials {
        h.update(t.file_name.as_bytes());
        h.update([0, t.label as u8, t.band_tag as u8]);
        h.update(t.participant_id.as_bytes());
        h.update(t.ambiguity.to_le_bytes());
        for &d in t.data.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for v in t.data.data() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Class tallies `[left, high, right]`.
pub fn class_counts(labels: impl IntoIterator<Item = Label>) -> [usize; 3] {
    let mut out = [0; 3];
    for l in labels {
        out[l.index()] += 1;
    }
    out
}
