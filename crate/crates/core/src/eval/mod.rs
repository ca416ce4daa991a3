//! Micro-F1, the multi-seed task runner and report rendering.

mod report;
mod runner;

pub use report::{render_report, ReportFormat, ReportRow, ReportTable};
pub use runner::{
    baseline_seed, config_hash, run_seed, run_task, source_only_baseline, Method, MetricsReport, SeedResult,
};

use crate::error::{Error, Result};

/// Micro-averaged F1 from pooled per-class TP/FP/FN counts.
///
/// For single-label multiclass data this is plain accuracy; both are
/// computed and checked against each other.
pub fn micro_f1(y_true: &[u16], y_pred: &[u16], n_classes: usize) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!(
            "micro-F1 needs equal lengths, got {} truths and {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::shape("micro-F1 of an empty label vector"));
    }
    if let Some(l) = y_true.iter().chain(y_pred).find(|&&l| l as usize >= n_classes) {
        return Err(Error::shape(format!("label {l} out of range for {n_classes} classes")));
    }
    let (mut tp, mut fp, mut fn_) = (vec![0u64; n_classes], vec![0u64; n_classes], vec![0u64; n_classes]);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t as usize] += 1;
        } else {
            fp[p as usize] += 1;
            fn_[t as usize] += 1;
        }
    }
    let tp: u64 = tp.iter().sum();
    let fp: u64 = fp.iter().sum();
    let fn_: u64 = fn_.iter().sum();
    let f1 = tp as f64 / (tp as f64 + 0.5 * (fp + fn_) as f64);
    let acc = accuracy(y_true, y_pred);
    assert_eq!(f1, acc, "micro-F1 and accuracy disagree");
    Ok(f1)
}

pub fn accuracy(y_true: &[u16], y_pred: &[u16]) -> f64 {
    let correct = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    correct as f64 / y_true.len() as f64
}

/// Arithmetic mean and sample standard deviation (zero for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(micro_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(micro_f1(&[0, 1, 2], &[1, 2, 0], 3).unwrap(), 0.0);
        assert_eq!(micro_f1(&[0, 0, 1, 2], &[0, 1, 1, 2], 3).unwrap(), 0.75);
        assert!(micro_f1(&[0], &[0, 1], 3).is_err());
        assert!(micro_f1(&[], &[], 3).is_err());
        assert!(micro_f1(&[3], &[0], 3).is_err());
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn equals_accuracy_and_is_permutation_invariant(
            pairs in prop::collection::vec((0u16..6, 0u16..6), 1..200),
            rot in 0usize..200,
        ) {
            let t: Vec<u16> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<u16> = pairs.iter().map(|p| p.1).collect();
            let f = micro_f1(&t, &p, 6).unwrap();
            prop_assert_eq!(f, accuracy(&t, &p));
            let k = rot % t.len();
            let (mut t2, mut p2) = (t.clone(), p.clone());
            t2.rotate_left(k);
            p2.rotate_left(k);
            t2.reverse();
            p2.reverse();
            prop_assert_eq!(micro_f1(&t2, &p2, 6).unwrap(), f);
        }
    }
}
