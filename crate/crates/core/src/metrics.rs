//! Accuracy, per-class precision/recall/F1 and macro-F1.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of cells with this true label.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Unweighted mean F1 over the labels present in the truth.
    pub macro_f1: f64,
    /// One entry per label in `labels`, same order.
    pub per_class: Vec<ClassMetrics>,
    /// Sorted union of true and predicted labels; indexes `confusion`.
    pub labels: Vec<String>,
    /// `confusion[truth][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    /// Seconds spent predicting, or 0 when not measured.
    pub predict_wall_time: f64,
    pub n_cells: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores predicted labels against the truth.
///
/// A precision, recall or F1 whose denominator is zero counts as 0.
pub fn score<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            context: "predicted vs true labels",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("cannot score an empty prediction set"));
    }
    let labels: Vec<String> = truth
        .iter()
        .chain(predicted)
        .map(|s| s.as_ref())
        .collect::<BTreeSet<&str>>()
        .into_iter()
        .map(String::from)
        .collect();
    let index = |s: &str| labels.binary_search_by(|l| l.as_str().cmp(s)).expect("label collected above");
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[index(t.as_ref())][index(p.as_ref())] += 1;
    }

    let n = truth.len();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let mut per_class = Vec::with_capacity(k);
    let mut f1_sum = 0.0;
    let mut present = 0;
    for (c, label) in labels.iter().enumerate() {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted_c);
        let recall = ratio(tp, support);
        // 2PR/(P+R) = 2tp / (support + predicted)
        let f1 = ratio(2 * tp, support + predicted_c);
        if support > 0 {
            f1_sum += f1;
            present += 1;
        }
        per_class.push(ClassMetrics {
            label: label.clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(EvalReport {
        accuracy: ratio(correct, n),
        macro_f1: f1_sum / present as f64,
        per_class,
        labels,
        confusion,
        predict_wall_time: 0.0,
        n_cells: n,
    })
}
