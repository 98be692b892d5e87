//! Confusion matrices and per-class / mean F1 scores.
//!
//! The headline metric is the unweighted macro mean
//! `F_m = (1/C) Σ_i 2·P_i·R_i / (P_i + R_i)` over all `C` classes. A
//! support-weighted mean is reported alongside it. Undefined ratios (`0/0`)
//! are taken as 0, so a class absent from both truth and predictions scores
//! `F1 = 0` and still counts towards `F_m`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[i][j]`: windows of true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 || counts.iter().any(|r| r.len() != c) {
            return Err(Error::arg("confusion matrix must be square and non-empty"));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn accumulate(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let c = self.classes();
        if truth >= c || predicted >= c {
            return Err(Error::arg(format!(
                "class pair ({truth}, {predicted}) outside {c} classes"
            )));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    /// Entrywise sum, for combining partial evaluations.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes() != self.classes() {
            return Err(Error::arg("cannot merge confusion matrices of different sizes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn report(&self) -> Result<EvalReport> {
        report(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassScores>,
    /// Unweighted mean of per-class F1.
    pub mean_f1: f64,
    /// Support-weighted mean of per-class F1.
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<EvalReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::arg("cannot report on an empty confusion matrix"));
    }
    let c = cm.classes();
    let per_class: Vec<ClassScores> = (0..c)
        .map(|i| {
            let tp = cm.get(i, i);
            let predicted: u64 = (0..c).map(|r| cm.get(r, i)).sum();
            let support: u64 = cm.counts[i].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScores {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let mean_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / c as f64;
    let weighted_f1 = per_class
        .iter()
        .map(|s| s.support as f64 / total as f64 * s.f1)
        .sum();
    let correct: u64 = (0..c).map(|i| cm.get(i, i)).sum();
    Ok(EvalReport {
        per_class,
        mean_f1,
        weighted_f1,
        accuracy: correct as f64 / total as f64,
        total,
        confusion: cm.clone(),
    })
}

impl EvalReport {
    /// Human-readable per-class table followed by the summary.
    pub fn to_text(&self, class_names: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
        for (i, c) in self.per_class.iter().enumerate() {
            let name = class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
            let _ = writeln!(
                s,
                "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                name, c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "mean_f1      {:.6}", self.mean_f1);
        let _ = writeln!(s, "weighted_f1  {:.6}", self.weighted_f1);
        let _ = writeln!(s, "accuracy     {:.6}", self.accuracy);
        let _ = writeln!(s, "windows      {}", self.total);
        s
    }

    /// Flat `key=value` lines for scripts.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mean_f1={:?}", self.mean_f1);
        let _ = writeln!(s, "weighted_f1={:?}", self.weighted_f1);
        let _ = writeln!(s, "accuracy={:?}", self.accuracy);
        let _ = writeln!(s, "total={}", self.total);
        for (i, c) in self.per_class.iter().enumerate() {
            let _ = writeln!(s, "class{i}.precision={:?}", c.precision);
            let _ = writeln!(s, "class{i}.recall={:?}", c.recall);
            let _ = writeln!(s, "class{i}.f1={:?}", c.f1);
            let _ = writeln!(s, "class{i}.support={}", c.support);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accumulate_examples() {
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(0, 0).unwrap();
        assert_eq!(cm.total(), 1);
        assert_eq!(cm.get(0, 0), 1);

        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(0, 1).unwrap();
        cm.accumulate(1, 0).unwrap();
        assert_eq!(cm.report().unwrap().accuracy, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cm = ConfusionMatrix::new(4);
        for _ in 0..1000 {
            cm.accumulate(rng.random_range(0..4), rng.random_range(0..4)).unwrap();
        }
        assert_eq!(cm.total(), 1000);
        assert!(cm.accumulate(4, 0).is_err());
    }

    #[test]
    fn perfect_diagonal() {
        let cm = ConfusionMatrix::from_counts(vec![vec![5, 0, 0], vec![0, 2, 0], vec![0, 0, 9]]).unwrap();
        let r = cm.report().unwrap();
        assert_eq!(r.mean_f1, 1.0);
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn two_class_hand_example() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 1], vec![2, 4]]).unwrap();
        let r = cm.report().unwrap();
        // precision: 3/5, 4/5; recall: 3/4, 4/6
        assert!((r.per_class[0].precision - 0.6).abs() < 1e-15);
        assert!((r.per_class[1].precision - 0.8).abs() < 1e-15);
        assert!((r.per_class[0].recall - 0.75).abs() < 1e-15);
        assert!((r.per_class[1].recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[1].f1 - 8.0 / 11.0).abs() < 1e-12);
        assert!((r.mean_f1 - (2.0 / 3.0 + 8.0 / 11.0) / 2.0).abs() < 1e-12);
        assert!((r.weighted_f1 - (0.4 * 2.0 / 3.0 + 0.6 * 8.0 / 11.0)).abs() < 1e-12);
        assert!((r.accuracy - 0.7).abs() < 1e-15);
    }

    #[test]
    fn absent_class_scores_zero_and_counts() {
        let cm = ConfusionMatrix::from_counts(vec![vec![4, 0, 0], vec![0, 6, 0], vec![0, 0, 0]]).unwrap();
        let r = cm.report().unwrap();
        assert_eq!(r.per_class[2].f1, 0.0);
        assert!((r.mean_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.weighted_f1, 1.0);
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(ConfusionMatrix::new(3).report().is_err());
    }

    #[test]
    fn merge_adds_entrywise() {
        let mut a = ConfusionMatrix::from_counts(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let b = ConfusionMatrix::from_counts(vec![vec![1, 0], vec![0, 1]]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.counts(), &[vec![2, 2], vec![3, 5]]);
        assert!(a.merge(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn text_outputs_mention_summary() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 1], vec![2, 4]]).unwrap();
        let r = cm.report().unwrap();
        let t = r.to_text(&["walk".into(), "run".into()]);
        assert!(t.contains("walk") && t.contains("mean_f1"));
        assert!(r.to_key_values().contains("class1.support=6"));
    }

    proptest::proptest! {
        #[test]
        fn permutation_equivariance(
            seed in 0u64..1000,
            c in 2usize..6,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cm = ConfusionMatrix::new(c);
            for _ in 0..200 {
                cm.accumulate(rng.random_range(0..c), rng.random_range(0..c)).unwrap();
            }
            let mut perm: Vec<usize> = (0..c).collect();
            for i in (1..c).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let mut permuted = ConfusionMatrix::new(c);
            for i in 0..c {
                for j in 0..c {
                    permuted.counts[perm[i]][perm[j]] = cm.get(i, j);
                }
            }
            let (a, b) = (cm.report().unwrap(), permuted.report().unwrap());
            proptest::prop_assert!((a.mean_f1 - b.mean_f1).abs() < 1e-12);
            for i in 0..c {
                proptest::prop_assert!((a.per_class[i].f1 - b.per_class[perm[i]].f1).abs() < 1e-12);
            }
            proptest::prop_assert!(a.mean_f1 >= 0.0 && a.mean_f1 <= 1.0);
            proptest::prop_assert!(a.weighted_f1 >= 0.0 && a.weighted_f1 <= 1.0);
        }
    }
}
