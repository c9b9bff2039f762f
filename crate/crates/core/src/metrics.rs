//! Confusion matrix and support-weighted F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 3;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..NUM_CLASSES).all(|i| (0..NUM_CLASSES).all(|j| i == j || self.counts[i][j] == 0))
    }
}

pub fn confusion(labels: &[usize], preds: &[usize]) -> Result<ConfusionMatrix> {
    if labels.len() != preds.len() {
        return Err(Error::Dataset(format!(
            "{} labels but {} predictions",
            labels.len(),
            preds.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Dataset("cannot evaluate zero trials".into()));
    }
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (&t, &p) in labels.iter().zip(preds) {
        if t >= NUM_CLASSES || p >= NUM_CLASSES {
            return Err(Error::LabelOutOfRange {
                label: t.max(p),
                num_classes: NUM_CLASSES,
            });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(precision, recall, f1)` of one class; zero denominators give 0.
pub fn class_scores(cm: &ConfusionMatrix, class: usize) -> (f64, f64, f64) {
    let tp = cm.counts[class][class];
    let p = ratio(tp, cm.predicted(class));
    let r = ratio(tp, cm.support(class));
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// F1 per class averaged with weights equal to each class's true support.
pub fn weighted_f1(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    (0..NUM_CLASSES)
        .map(|c| class_scores(cm, c).2 * cm.support(c) as f64)
        .sum::<f64>()
        / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Self {
        let per_class: Vec<ClassMetrics> = (0..NUM_CLASSES)
            .map(|c| {
                let (precision, recall, f1) = class_scores(&cm, c);
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: cm.support(c),
                }
            })
            .collect();
        let correct: u64 = (0..NUM_CLASSES).map(|c| cm.counts[c][c]).sum();
        Self {
            weighted_f1: weighted_f1(&cm),
            macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / NUM_CLASSES as f64,
            accuracy: ratio(correct, cm.total()),
            per_class,
            confusion: cm,
        }
    }

    pub fn evaluate(labels: &[usize], preds: &[usize]) -> Result<Self> {
        Ok(Self::from_confusion(confusion(labels, preds)?))
    }
}
