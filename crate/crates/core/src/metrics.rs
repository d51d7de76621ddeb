//! Confusion matrices and the scalar metrics reported by the experiments.
//!
//! Per-class F1 uses the conventional `2pr / (p + r)`. Zero denominators
//! yield 0 and raise a degeneracy flag instead of producing NaN.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Rows are true classes, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// TP + FP == 0
    pub precision_degenerate: bool,
    /// TP + FN == 0
    pub recall_degenerate: bool,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        ConfusionMatrix {
            class_names,
            counts: vec![0; c * c],
        }
    }

    pub fn from_counts(class_names: Vec<String>, rows: &[Vec<u64>]) -> Result<Self> {
        let c = class_names.len();
        if rows.len() != c || rows.iter().any(|r| r.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: format!("{c}x{c} counts"),
                actual: format!("{} rows", rows.len()),
            });
        }
        Ok(ConfusionMatrix {
            class_names,
            counts: rows.concat(),
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes() + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        let c = self.num_classes();
        if c == 0 {
            return Vec::new();
        }
        self.counts.chunks(c).map(<[u64]>::to_vec).collect()
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        self.class_names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn accumulate(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let (t, p) = (self.index_of(truth)?, self.index_of(predicted)?);
        self.accumulate_index(t, p)
    }

    pub fn accumulate_index(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let c = self.num_classes();
        if truth >= c || predicted >= c {
            return Err(Error::invalid(format!(
                "class index ({truth}, {predicted}) outside {c} classes"
            )));
        }
        self.counts[truth * c + predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.class_names != other.class_names {
            return Err(Error::invalid("cannot merge matrices over different class sets"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_positives(&self, i: usize) -> u64 {
        self.count(i, i)
    }

    pub fn false_positives(&self, i: usize) -> u64 {
        (0..self.num_classes()).map(|r| self.count(r, i)).sum::<u64>() - self.count(i, i)
    }

    pub fn false_negatives(&self, i: usize) -> u64 {
        (0..self.num_classes()).map(|c| self.count(i, c)).sum::<u64>() - self.count(i, i)
    }

    fn row_sum(&self, i: usize) -> u64 {
        (0..self.num_classes()).map(|c| self.count(i, c)).sum()
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn precision_recall(cm: &ConfusionMatrix) -> Vec<ClassScores> {
    (0..cm.num_classes())
        .map(|i| {
            let tp = cm.true_positives(i);
            let (precision, precision_degenerate) = ratio(tp, tp + cm.false_positives(i));
            let (recall, recall_degenerate) = ratio(tp, tp + cm.false_negatives(i));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScores {
                precision,
                recall,
                f1,
                precision_degenerate,
                recall_degenerate,
            }
        })
        .collect()
}

pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let scores = precision_recall(cm);
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64
}

pub fn unweighted_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("accuracy of an empty confusion matrix"));
    }
    let trace: u64 = (0..cm.num_classes()).map(|i| cm.count(i, i)).sum();
    Ok(trace as f64 / total as f64)
}

/// Mean per-class recall. Every class must have at least one true sample.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.num_classes() == 0 {
        return Err(Error::invalid("balanced accuracy over zero classes"));
    }
    let mut sum = 0.0;
    for i in 0..cm.num_classes() {
        let row = cm.row_sum(i);
        if row == 0 {
            return Err(Error::EmptyClass(cm.class_names[i].clone()));
        }
        sum += cm.count(i, i) as f64 / row as f64;
    }
    Ok(sum / cm.num_classes() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouScore {
    pub value: f64,
    /// Both masks empty; value is defined as 1.
    pub degenerate: bool,
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<IouScore> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            actual: format!("{}x{}", b.width(), b.height()),
        });
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        inter += (x & y) as u64;
        union += (x | y) as u64;
    }
    Ok(if union == 0 {
        IouScore {
            value: 1.0,
            degenerate: true,
        }
    } else {
        IouScore {
            value: inter as f64 / union as f64,
            degenerate: false,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub per_class: std::collections::BTreeMap<String, PerClassReport>,
    pub macro_f1: f64,
    pub unweighted_accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub degeneracy_flags: Vec<String>,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let scores = precision_recall(cm);
        let mut flags = Vec::new();
        let mut per_class = std::collections::BTreeMap::new();
        for (name, s) in cm.class_names().iter().zip(&scores) {
            if s.precision_degenerate {
                flags.push(format!("{name}: precision undefined (never predicted)"));
            }
            if s.recall_degenerate {
                flags.push(format!("{name}: recall undefined (no true samples)"));
            }
            per_class.insert(
                name.clone(),
                PerClassReport {
                    precision: s.precision,
                    recall: s.recall,
                    f1: s.f1,
                },
            );
        }
        let balanced = balanced_accuracy(cm).ok();
        if balanced.is_none() {
            flags.push("balanced_accuracy undefined: a class has no true samples".into());
        }
        MetricsReport {
            class_names: cm.class_names().to_vec(),
            counts: cm.rows(),
            per_class,
            macro_f1: macro_f1(cm),
            unweighted_accuracy: unweighted_accuracy(cm).ok(),
            balanced_accuracy: balanced,
            degeneracy_flags: flags,
        }
    }
}
