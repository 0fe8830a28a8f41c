//! Per-time-point recovery metrics against known states.

use crate::error::{Error, Result};
use crate::states::StateMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimepointMetrics {
    pub t: usize,
    /// `tp / (tp + fn)`; NaN when the truth has no DE cell at `t`.
    pub sensitivity: f64,
    /// `tn / (tn + fp)`; NaN when the truth has no EE cell at `t`.
    pub specificity: f64,
    /// `fp / (tp + fp)`, and 0 when nothing is called DE.
    pub fdr: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion_metrics(estimated: &StateMatrix, truth: &StateMatrix) -> Result<Vec<TimepointMetrics>> {
    if estimated.genes() != truth.genes() || estimated.times() != truth.times() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {}x{}, truth is {}x{}",
            estimated.genes(),
            estimated.times(),
            truth.genes(),
            truth.times()
        )));
    }
    let ratio = |a: usize, b: usize| if b > 0 { a as f64 / b as f64 } else { f64::NAN };
    Ok((0..truth.times())
        .map(|t| {
            let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
            for (&e, &x) in estimated.column(t).iter().zip(truth.column(t)) {
                match (e, x) {
                    (1, 1) => tp += 1,
                    (1, _) => fp += 1,
                    (_, 1) => fn_ += 1,
                    _ => tn += 1,
                }
            }
            TimepointMetrics {
                t,
                sensitivity: ratio(tp, tp + fn_),
                specificity: ratio(tn, tn + fp),
                fdr: if tp + fp > 0 { fp as f64 / (tp + fp) as f64 } else { 0.0 },
                tp,
                fp,
                tn,
                fn_,
            }
        })
        .collect())
}

/// Mean and standard error (sample SD / √R) of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub t: usize,
    pub replicates: usize,
    pub sensitivity: MeanSe,
    pub specificity: MeanSe,
    pub fdr: MeanSe,
}

fn mean_se(values: impl Iterator<Item = f64>) -> MeanSe {
    // undefined ratios (NaN) are left out
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return MeanSe { mean: f64::NAN, se: f64::NAN };
    }
    let r = v.len() as f64;
    let mean = v.iter().sum::<f64>() / r;
    let se = if v.len() < 2 {
        0.0
    } else {
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    };
    MeanSe { mean, se }
}

/// Averages per-replicate metric lists time point by time point.
pub fn aggregate_replicates(metrics: &[Vec<TimepointMetrics>]) -> Result<Vec<MetricSummary>> {
    let first = metrics.first().ok_or(Error::EmptyInput("no replicates to aggregate"))?;
    if metrics.iter().any(|m| m.len() != first.len()) {
        return Err(Error::DimensionMismatch("replicates have different numbers of time points".into()));
    }
    Ok((0..first.len())
        .map(|i| MetricSummary {
            t: first[i].t,
            replicates: metrics.len(),
            sensitivity: mean_se(metrics.iter().map(|m| m[i].sensitivity)),
            specificity: mean_se(metrics.iter().map(|m| m[i].specificity)),
            fdr: mean_se(metrics.iter().map(|m| m[i].fdr)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_matrix(cols: &[Vec<u8>]) -> StateMatrix {
        StateMatrix::from_columns(cols).unwrap()
    }

    #[test]
    fn perfect_recovery() {
        let truth = column_matrix(&[vec![1, 0, 0, 1], vec![0, 0, 1, 1]]);
        for m in confusion_metrics(&truth, &truth).unwrap() {
            assert_eq!((m.sensitivity, m.specificity, m.fdr), (1.0, 1.0, 0.0));
        }
    }

    #[test]
    fn empty_calls() {
        let truth = column_matrix(&[vec![1, 0, 1, 0]]);
        let est = column_matrix(&[vec![0, 0, 0, 0]]);
        let m = confusion_metrics(&est, &truth).unwrap()[0];
        assert_eq!((m.sensitivity, m.specificity, m.fdr), (0.0, 1.0, 0.0));
    }

    #[test]
    fn hand_counted_table() {
        let mut truth = vec![0u8; 100];
        let mut est = vec![0u8; 100];
        truth[..10].iter_mut().for_each(|b| *b = 1);
        est[..8].iter_mut().for_each(|b| *b = 1);
        est[50] = 1;
        est[51] = 1;
        let m = confusion_metrics(&column_matrix(&[est]), &column_matrix(&[truth])).unwrap()[0];
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (8, 2, 88, 2));
        assert!((m.sensitivity - 0.8).abs() < 1e-15);
        assert!((m.specificity - 88.0 / 90.0).abs() < 1e-15);
        assert!((m.fdr - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let a = StateMatrix::zeros(3, 2);
        let b = StateMatrix::zeros(3, 3);
        assert!(confusion_metrics(&a, &b).is_err());
    }

    fn with_sen(s: f64) -> Vec<TimepointMetrics> {
        vec![TimepointMetrics { t: 0, sensitivity: s, specificity: 1.0, fdr: 0.0, tp: 0, fp: 0, tn: 0, fn_: 0 }]
    }

    #[test]
    fn aggregation_rules() {
        let one = aggregate_replicates(&[with_sen(0.6)]).unwrap()[0];
        assert_eq!((one.sensitivity.mean, one.sensitivity.se), (0.6, 0.0));
        let two = aggregate_replicates(&[with_sen(0.6), with_sen(0.8)]).unwrap()[0];
        assert!((two.sensitivity.mean - 0.7).abs() < 1e-15);
        assert!((two.sensitivity.se - 0.1).abs() < 1e-12);
        let flat = aggregate_replicates(&[with_sen(0.4), with_sen(0.4), with_sen(0.4)]).unwrap()[0];
        assert_eq!(flat.specificity.se, 0.0);
        assert!(flat.sensitivity.se.abs() < 1e-15);
        assert!(aggregate_replicates(&[]).is_err());
    }
}
