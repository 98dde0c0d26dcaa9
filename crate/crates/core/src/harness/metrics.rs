use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result, Stage};

/// Classification metrics over one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: String,
    pub class_names: Vec<String>,
    pub n_examples: usize,
    pub accuracy: f64,
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub macro_f1: f64,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<u64>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
}

fn check(probs: &[Vec<f64>], labels: &[usize]) -> Result<usize> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(HarnessError::new(
            Stage::Eval,
            format!("{} predictions for {} labels", probs.len(), labels.len()),
        ));
    }
    let n = probs[0].len();
    for (row, &l) in probs.iter().zip(labels) {
        if row.len() != n || l >= n {
            return Err(HarnessError::new(
                Stage::Eval,
                format!("label {l} or row width {} inconsistent with {n} classes", row.len()),
            ));
        }
    }
    Ok(n)
}

/// Index of the largest probability; ties go to the lower class.
pub fn predicted_class(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Zero-based rank of `label` when classes are ordered by descending
/// probability with ties broken by lower index.
fn rank_of(row: &[f64], label: usize) -> usize {
    let p = row[label];
    row.iter()
        .enumerate()
        .filter(|&(i, &q)| q > p || (q == p && i < label))
        .count()
}

pub fn accuracy(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    top_k_accuracy(probs, labels, 1)
}

pub fn top_k_accuracy(probs: &[Vec<f64>], labels: &[usize], k: usize) -> Result<f64> {
    check(probs, labels)?;
    let hits = probs.iter().zip(labels).filter(|(row, &l)| rank_of(row, l) < k).count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn confusion(probs: &[Vec<f64>], labels: &[usize]) -> Result<Vec<Vec<u64>>> {
    let n = check(probs, labels)?;
    let mut m = vec![vec![0u64; n]; n];
    for (row, &l) in probs.iter().zip(labels) {
        m[l][predicted_class(row)] += 1;
    }
    Ok(m)
}

/// Per-class (precision, recall, F1). Undefined ratios are 0.
pub fn per_class(confusion: &[Vec<u64>]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = confusion.len();
    let mut p = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut f = vec![0.0; n];
    for c in 0..n {
        let tp = confusion[c][c] as f64;
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        if predicted > 0 {
            p[c] = tp / predicted as f64;
        }
        if support > 0 {
            r[c] = tp / support as f64;
        }
        if p[c] + r[c] > 0.0 {
            f[c] = 2.0 * p[c] * r[c] / (p[c] + r[c]);
        }
    }
    (p, r, f)
}

pub fn macro_f1(confusion: &[Vec<u64>]) -> f64 {
    let (_, _, f) = per_class(confusion);
    if f.is_empty() {
        0.0
    } else {
        f.iter().sum::<f64>() / f.len() as f64
    }
}

impl EvalReport {
    pub fn compute(scheme: &str, class_names: &[String], probs: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        let n = check(probs, labels)?;
        if n != class_names.len() {
            return Err(HarnessError::new(
                Stage::Eval,
                format!("{n} probability columns for {} classes", class_names.len()),
            ));
        }
        let confusion = confusion(probs, labels)?;
        let mut report = Self::from_confusion(scheme, class_names, confusion)?;
        for k in [2, 3, 5] {
            if k < n {
                report.top_k_accuracy.insert(k, top_k_accuracy(probs, labels, k)?);
            }
        }
        Ok(report)
    }

    /// Rebuild the count-derived metrics from a confusion matrix. Top-k for
    /// k > 1 needs the probabilities and is left out.
    pub fn from_confusion(scheme: &str, class_names: &[String], confusion: Vec<Vec<u64>>) -> Result<Self> {
        let n = class_names.len();
        if confusion.len() != n || confusion.iter().any(|r| r.len() != n) {
            return Err(HarnessError::new(Stage::Eval, format!("confusion matrix is not {n}×{n}")));
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(HarnessError::new(Stage::Eval, "empty confusion matrix"));
        }
        let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
        let accuracy = trace as f64 / total as f64;
        let (precision, recall, f1) = per_class(&confusion);
        let macro_f1 = f1.iter().sum::<f64>() / n as f64;
        Ok(EvalReport {
            scheme: scheme.to_string(),
            class_names: class_names.to_vec(),
            n_examples: total as usize,
            accuracy,
            top_k_accuracy: BTreeMap::from([(1, accuracy)]),
            macro_f1,
            confusion,
            precision,
            recall,
            f1,
        })
    }

    pub fn top_k(&self, k: usize) -> Option<f64> {
        self.top_k_accuracy.get(&k).copied()
    }

    /// CSV with a header row of predicted class names and one row per true class.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_confusion_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<u64>>)> {
        let bad = |msg: String| HarnessError::new(Stage::Eval, msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty confusion CSV".into()))?;
        let names: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .skip(1)
                .map(|v| v.parse::<u64>().map_err(|e| bad(format!("confusion entry `{v}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok((names, rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, Strategy};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_hot(preds: &[usize], n: usize) -> Vec<Vec<f64>> {
        preds
            .iter()
            .map(|&p| (0..n).map(|i| if i == p { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn hand_case() {
        let probs = one_hot(&[0, 1, 1, 2], 3);
        let labels = [0, 0, 1, 2];
        let r = EvalReport::compute("t", &names(3), &probs, &labels).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert!((r.f1[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.f1[2], 1.0);
        assert!((r.macro_f1 - 7.0 / 9.0).abs() < 1e-12);
        assert_eq!(r.confusion, vec![vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(r.precision[1], 0.5);
        assert_eq!(r.recall[0], 0.5);
    }

    #[test]
    fn all_correct_is_diagonal() {
        let labels = [0, 1, 2, 2, 1];
        let r = EvalReport::compute("t", &names(3), &one_hot(&labels, 3), &labels).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r.confusion[i][j] > 0, i == j);
            }
        }
    }

    #[test]
    fn third_ranked_counts_for_top3_only() {
        let probs = vec![vec![0.4, 0.3, 0.2, 0.1]];
        assert_eq!(top_k_accuracy(&probs, &[2], 2).unwrap(), 0.0);
        assert_eq!(top_k_accuracy(&probs, &[2], 3).unwrap(), 1.0);
    }

    #[test]
    fn ties_favour_lower_index() {
        let probs = vec![vec![0.25; 4]];
        assert_eq!(accuracy(&probs, &[0]).unwrap(), 1.0);
        assert_eq!(accuracy(&probs, &[1]).unwrap(), 0.0);
        assert_eq!(top_k_accuracy(&probs, &[1], 2).unwrap(), 1.0);
        assert_eq!(top_k_accuracy(&probs, &[3], 3).unwrap(), 0.0);
    }

    #[test]
    fn zero_support_class_contributes_zero() {
        let labels = [0, 0, 1];
        let r = EvalReport::compute("t", &names(3), &one_hot(&labels, 3), &labels).unwrap();
        assert_eq!(r.f1[2], 0.0);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_inputs_fail() {
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&one_hot(&[0], 2), &[0, 1]).is_err());
        assert!(accuracy(&one_hot(&[0], 2), &[2]).is_err());
        assert!(EvalReport::compute("t", &names(3), &one_hot(&[0], 2), &[0]).is_err());
    }

    #[test]
    fn confusion_csv_round_trip() {
        let probs = one_hot(&[0, 1, 1, 2, 2, 0], 3);
        let labels = [0, 0, 1, 2, 1, 0];
        let r = EvalReport::compute("t", &names(3), &probs, &labels).unwrap();
        let (n, m) = EvalReport::parse_confusion_csv(&r.confusion_csv()).unwrap();
        let back = EvalReport::from_confusion("t", &n, m).unwrap();
        assert_eq!(back.accuracy, r.accuracy);
        assert_eq!(back.macro_f1, r.macro_f1);
        assert_eq!(back.confusion, r.confusion);
    }

    fn prediction_set() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (2usize..6).prop_flat_map(|n| {
            prop::collection::vec((prop::collection::vec(0.0f64..1.0, n), 0..n), 1..40)
                .prop_map(|rows: Vec<(Vec<f64>, usize)>| rows.into_iter().unzip())
        })
    }

    proptest! {
        #[test]
        fn invariants((probs, labels) in prediction_set(), seed in 0u64..1000) {
            let n = probs[0].len();
            let r = EvalReport::compute("t", &names(n), &probs, &labels).unwrap();
            let total: u64 = r.confusion.iter().flatten().sum();
            prop_assert_eq!(total as usize, labels.len());
            prop_assert_eq!(r.top_k(1).unwrap(), r.accuracy);
            for v in r.precision.iter().chain(&r.recall).chain(&r.f1).chain(r.top_k_accuracy.values()) {
                prop_assert!((0.0..=1.0).contains(v));
            }
            let back = EvalReport::from_confusion("t", &names(n), r.confusion.clone()).unwrap();
            prop_assert_eq!(back.accuracy, r.accuracy);
            prop_assert_eq!(back.macro_f1, r.macro_f1);

            let mut order: Vec<usize> = (0..labels.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let sp: Vec<Vec<f64>> = order.iter().map(|&i| probs[i].clone()).collect();
            let sl: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
            let shuffled = EvalReport::compute("t", &names(n), &sp, &sl).unwrap();
            prop_assert_eq!(shuffled, r);
        }
    }
}
