//! Confusion matrices and per-class precision / recall / F1 reports.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::Serialize;

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn true_positives(&self, c: usize) -> usize {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> usize {
        (0..self.classes.len())
            .filter(|&r| r != c)
            .map(|r| self.counts[r][c])
            .sum()
    }

    pub fn false_negatives(&self, c: usize) -> usize {
        (0..self.classes.len())
            .filter(|&p| p != c)
            .map(|p| self.counts[c][p])
            .sum()
    }

    pub fn support(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }
}

pub fn confusion<S: AsRef<str>, T: AsRef<str>>(
    truth: &[S],
    predicted: &[T],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    let index: IndexMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let lookup = |l: &str| {
        index
            .get(l)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let mut counts = vec![vec![0usize; classes.len()]; classes.len()];
    for (t, p) in truth.iter().zip(predicted) {
        counts[lookup(t.as_ref())?][lookup(p.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when a metric had a zero denominator and was reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub classes: IndexMap<String, ClassMetrics>,
    pub accuracy: f64,
    pub total: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn report(m: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = m.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let classes = m
        .classes
        .iter()
        .enumerate()
        .map(|(c, label)| {
            let tp = m.true_positives(c);
            let precision = ratio(tp, tp + m.false_positives(c));
            let recall = ratio(tp, tp + m.false_negatives(c));
            let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
            let f1_defined = p + r > 0.0;
            let metrics = ClassMetrics {
                precision: p,
                recall: r,
                f1: f1_score(p, r),
                support: m.support(c),
                undefined: precision.is_none() || recall.is_none() || !f1_defined,
            };
            (label.clone(), metrics)
        })
        .collect();
    Ok(ClassificationReport {
        classes,
        accuracy: m.trace() as f64 / total as f64,
        total,
    })
}

impl ClassificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table with two-decimal metrics.
    pub fn to_table(&self) -> String {
        let width = self
            .classes
            .keys()
            .map(|k| k.chars().count())
            .chain(["accuracy".len()])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "", "precision", "recall", "f1-score", "support"
        );
        for (label, m) in &self.classes {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>9}",
                label, m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9.2}  {:>9}",
            "accuracy", "", "", self.accuracy, self.total
        );
        out
    }
}
