//! Band-filtered copies of a dataset used as pretraining material.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{hash_trials, load_dataset, load_json, save_json, BandTag, DatasetManifest, Trial};
use crate::dsp::{apply_zero_phase_f32, design_bandpass, BandSpec, FilterCascade};
use crate::error::{Error, Result};
use crate::synth::write_dataset_in;
use crate::tensor::Tensor;

pub const CORPUS_FILE: &str = "corpus.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusProvenance {
    pub source_hash: String,
    pub fs: f64,
    pub bands: Vec<BandSpec>,
    pub filters: Vec<FilterCascade>,
    /// Hash over the source hash, filter designs and all filtered data.
    pub corpus_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCorpus {
    pub subsets: BTreeMap<BandTag, Vec<Trial>>,
    pub provenance: CorpusProvenance,
}

impl AugmentedCorpus {
    pub fn subset(&self, tag: BandTag) -> Result<&[Trial]> {
        self.subsets
            .get(&tag)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Training(format!("corpus has no `{tag}` subset")))
    }

    pub fn total(&self) -> usize {
        self.subsets.values().map(Vec::len).sum()
    }
}

fn filter_trial(trial: &Trial, cascade: &FilterCascade, tag: BandTag) -> Result<Trial> {
    let (c, t) = (trial.channels(), trial.samples());
    let mut data = Vec::with_capacity(c * t);
    for ch in 0..c {
        data.extend(apply_zero_phase_f32(trial.channel(ch), cascade)?);
    }
    let mut out = trial.with_data(Tensor::from_vec(&[c, t], data)?);
    out.band_tag = tag;
    Ok(out)
}

/// Zero-phase filters every channel of every trial; labels, participants and
/// lengths are unchanged.
pub fn generate_band_subset(dataset: &[Trial], band: &BandSpec, fs: f64, order: usize) -> Result<Vec<Trial>> {
    if dataset.is_empty() {
        return Err(Error::Dataset("cannot filter an empty dataset".into()));
    }
    if let Some(t) = dataset.iter().find(|t| (t.fs - fs).abs() > 1e-9) {
        return Err(Error::Dataset(format!(
            "trial {} sampled at {} Hz, filter designed for {fs} Hz",
            t.file_name, t.fs
        )));
    }
    let cascade = design_bandpass(band, fs, order)?;
    let tag = BandTag::from(band.name);
    let run = |t: &Trial| filter_trial(t, &cascade, tag);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        dataset.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        dataset.iter().map(run).collect()
    }
}

pub fn build_corpus(dataset: &[Trial], bands: &[BandSpec], fs: f64, order: usize) -> Result<AugmentedCorpus> {
    if bands.is_empty() {
        return Err(Error::Dataset("no bands requested".into()));
    }
    let mut subsets = BTreeMap::new();
    let mut filters = Vec::with_capacity(bands.len());
    for band in bands {
        let tag = BandTag::from(band.name);
        if subsets.contains_key(&tag) {
            return Err(Error::Dataset(format!("band `{tag}` requested twice")));
        }
        subsets.insert(tag, generate_band_subset(dataset, band, fs, order)?);
        filters.push(design_bandpass(band, fs, order)?);
    }
    let source_hash = hash_trials(dataset);
    let corpus_hash = corpus_hash(&source_hash, &filters, &subsets)?;
    Ok(AugmentedCorpus {
        subsets,
        provenance: CorpusProvenance {
            source_hash,
            fs,
            bands: bands.to_vec(),
            filters,
            corpus_hash,
        },
    })
}

fn corpus_hash(source: &str, filters: &[FilterCascade], subsets: &BTreeMap<BandTag, Vec<Trial>>) -> Result<String> {
    let mut h = Sha256::new();
    h.update(source.as_bytes());
    h.update(serde_json::to_vec(filters)?);
    for (tag, trials) in subsets {
        h.update(tag.as_str().as_bytes());
        h.update(hash_trials(trials).as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// Writes `<out>/<band>/<file_name>`, `<out>/<band>/manifest.csv` and
/// `<out>/corpus.json`.
pub fn write_corpus(corpus: &AugmentedCorpus, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (tag, trials) in &corpus.subsets {
        write_dataset_in(trials, &out.join(tag.as_str()), "")?;
    }
    save_json(&out.join(CORPUS_FILE), &corpus.provenance)
}

pub fn read_corpus(dir: &Path) -> Result<AugmentedCorpus> {
    let provenance: CorpusProvenance = load_json(&dir.join(CORPUS_FILE))?;
    let mut subsets = BTreeMap::new();
    for band in &provenance.bands {
        let tag = BandTag::from(band.name);
        let manifest = DatasetManifest::read(&dir.join(tag.as_str()).join(crate::synth::MANIFEST_FILE))?;
        let mut trials = load_dataset(&manifest)?;
        trials.iter_mut().for_each(|t| t.band_tag = tag);
        subsets.insert(tag, trials);
    }
    Ok(AugmentedCorpus { subsets, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::class_counts;
    use crate::dsp::{ALPHA, BETA, THETA};
    use crate::synth::{generate_trials, SynthSpec};

    fn small() -> Vec<Trial> {
        let spec = SynthSpec {
            pink_amplitude: 1.0,
            n_participants: 3,
            ..SynthSpec::empty([3, 4, 2], 250.0, 5)
        };
        generate_trials(&spec).unwrap()
    }

    #[test]
    fn subset_preserves_metadata() {
        let data = small();
        let sub = generate_band_subset(&data, &THETA, 250.0, 4).unwrap();
        assert_eq!(sub.len(), data.len());
        for (a, b) in data.iter().zip(&sub) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.participant_id, b.participant_id);
            assert_eq!(a.data.shape(), b.data.shape());
            assert_eq!(b.band_tag, BandTag::Theta);
            assert_ne!(a.data, b.data);
        }
        assert!(generate_band_subset(&[], &THETA, 250.0, 4).is_err());
    }

    #[test]
    fn zero_trial_stays_zero() {
        let data = generate_trials(&SynthSpec::empty([1, 1, 1], 250.0, 0)).unwrap();
        let sub = generate_band_subset(&data, &ALPHA, 250.0, 4).unwrap();
        assert!(sub.iter().all(|t| t.data.data().iter().all(|&v| v == 0.0)));
        assert_eq!(sub[1].label, data[1].label);
    }

    #[test]
    fn corpus_tallies_and_hash() {
        let data = small();
        let corpus = build_corpus(&data, &[THETA, ALPHA, BETA], 250.0, 4).unwrap();
        assert_eq!(corpus.total(), 27);
        for trials in corpus.subsets.values() {
            assert_eq!(class_counts(trials.iter().map(|t| t.label)), [3, 4, 2]);
        }
        let again = build_corpus(&data, &[THETA, ALPHA, BETA], 250.0, 4).unwrap();
        assert_eq!(corpus.provenance.corpus_hash, again.provenance.corpus_hash);
        let single = build_corpus(&data, &[THETA], 250.0, 4).unwrap();
        assert_eq!(single.total(), 9);
        assert_ne!(single.provenance.corpus_hash, corpus.provenance.corpus_hash);
        assert!(build_corpus(&data, &[THETA, THETA], 250.0, 4).is_err());
    }
}
