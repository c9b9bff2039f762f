use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the classifier: stacked LSTMs, one sigmoid dense layer, dropout,
/// softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Features per timestep (one per EEG channel).
    pub input_features: usize,
    /// Timesteps per example.
    pub sequence_length: usize,
    pub lstm_sizes: Vec<usize>,
    /// Empty means every layer but the last returns its full sequence.
    #[serde(default)]
    pub return_sequences: Vec<bool>,
    pub dense_hidden: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_features: 31,
            sequence_length: 256,
            lstm_sizes: vec![256, 128, 64, 32, 16],
            return_sequences: vec![true, true, true, true, false],
            dense_hidden: 64,
            num_classes: 3,
            dropout_rate: 0.3,
        }
    }
}

/// Total parameter count the original authors report for their network.
/// The layer list above gives 558 275; the gap is unexplained.
pub const REPORTED_PARAM_COUNT: usize = 2_062_531;

impl ModelConfig {
    /// Same topology with custom LSTM widths; all but the last layer return
    /// sequences.
    pub fn with_lstm_sizes(mut self, sizes: &[usize]) -> Self {
        self.lstm_sizes = sizes.to_vec();
        self.return_sequences = (0..sizes.len()).map(|i| i + 1 < sizes.len()).collect();
        self
    }

    /// Fills an empty `return_sequences` with the standard stacking pattern.
    pub fn resolved(mut self) -> Self {
        if self.return_sequences.is_empty() {
            self.return_sequences = (0..self.lstm_sizes.len()).map(|i| i + 1 < self.lstm_sizes.len()).collect();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.input_features == 0 || self.sequence_length == 0 {
            return bad("input_features and sequence_length must be positive".into());
        }
        if self.lstm_sizes.is_empty() {
            return bad("at least one LSTM layer is required".into());
        }
        if self.lstm_sizes.len() != self.return_sequences.len() {
            return bad(format!(
                "{} LSTM sizes but {} return_sequences flags",
                self.lstm_sizes.len(),
                self.return_sequences.len()
            ));
        }
        if self.lstm_sizes.contains(&0) || self.dense_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.num_classes < 2 {
            return bad("need at least two classes".into());
        }
        let n = self.return_sequences.len();
        if self.return_sequences[n - 1] {
            return bad("the last LSTM layer must not return sequences".into());
        }
        if self.return_sequences[..n - 1].iter().any(|r| !r) {
            return bad("only the last LSTM layer may drop the time axis".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    /// `(layer name, parameter count)` in network order.
    pub fn layer_param_counts(&self) -> Vec<(String, usize)> {
        let mut out = Vec::with_capacity(self.lstm_sizes.len() + 2);
        let mut d = self.input_features;
        for (i, &h) in self.lstm_sizes.iter().enumerate() {
            out.push((lstm_name(i), lstm_param_count(d, h)));
            d = h;
        }
        out.push((DENSE_HIDDEN.to_string(), dense_param_count(d, self.dense_hidden)));
        out.push((
            DENSE_OUTPUT.to_string(),
            dense_param_count(self.dense_hidden, self.num_classes),
        ));
        out
    }
}

pub(crate) const DENSE_HIDDEN: &str = "dense1";
pub(crate) const DENSE_OUTPUT: &str = "dense2";

pub(crate) fn lstm_name(i: usize) -> String {
    format!("lstm{}", i + 1)
}

pub fn lstm_param_count(input_size: usize, hidden_size: usize) -> usize {
    4 * hidden_size * (input_size + hidden_size + 1)
}

pub fn dense_param_count(inputs: usize, outputs: usize) -> usize {
    outputs * (inputs + 1)
}

pub fn param_count(config: &ModelConfig) -> usize {
    config.layer_param_counts().iter().map(|(_, n)| n).sum()
}
