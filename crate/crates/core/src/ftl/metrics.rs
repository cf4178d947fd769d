use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{format_sig, METRIC_DIGITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
        })
    }
}

/// One epoch of one split. `step` and `epoch` are 1-based; `epoch` restarts
/// at 1 in every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRecord {
    pub step: usize,
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    /// Percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    records: Vec<MetricRecord>,
    keys: HashSet<(usize, usize, Split)>,
}

/// Extremes of the validation trace. Epochs are counted across steps
/// (1-based), so step 2 epoch 1 of a 100+100 schedule is epoch 101.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub epoch_of_best_loss: usize,
    pub epoch_of_best_accuracy: usize,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: MetricRecord) -> Result<()> {
        if !self.keys.insert((record.step, record.epoch, record.split)) {
            return Err(Error::Data(format!(
                "duplicate metrics record for step {} epoch {} {}",
                record.step, record.epoch, record.split
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &MetricRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Minimum validation loss and maximum validation accuracy, taken
    /// independently; ties keep the earliest epoch.
    pub fn best_validation(&self) -> Option<BestMetrics> {
        let mut best: Option<BestMetrics> = None;
        for (i, r) in self.split(Split::Validation).enumerate() {
            let epoch = i + 1;
            let b = best.get_or_insert(BestMetrics {
                loss: r.loss,
                accuracy: r.accuracy,
                epoch_of_best_loss: epoch,
                epoch_of_best_accuracy: epoch,
            });
            if r.loss < b.loss {
                b.loss = r.loss;
                b.epoch_of_best_loss = epoch;
            }
            if r.accuracy > b.accuracy {
                b.accuracy = r.accuracy;
                b.epoch_of_best_accuracy = epoch;
            }
        }
        best
    }

    pub const CSV_HEADER: &'static str = "arm,step,epoch,split,loss,accuracy\n";

    /// Rows only, no header.
    pub fn csv_rows(&self, arm: &str) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!(
                "{arm},{},{},{},{},{}\n",
                r.step,
                r.epoch,
                r.split,
                format_sig(r.loss, METRIC_DIGITS),
                format_sig(r.accuracy, METRIC_DIGITS)
            ));
        }
        out
    }

    pub fn to_csv(&self, arm: &str) -> String {
        format!("{}{}", Self::CSV_HEADER, self.csv_rows(arm))
    }
}
