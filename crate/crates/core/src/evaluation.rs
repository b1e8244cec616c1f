//! Classification metrics and linear boundary extraction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::solvers::Model;

fn check_pair(y_true: &[u8], y_pred: &[u8]) -> Result<()> {
    if y_true.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// `(1/T) Σ_t 1[y_t = ŷ_t] v_t`.
pub fn vac(y_true: &[u8], y_pred: &[u8], v: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    if v.len() != y_true.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: v.len(),
        });
    }
    if let Some(bad) = v.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "test weights must be non-negative, got {bad}"
        )));
    }
    let total: f64 = y_true
        .iter()
        .zip(y_pred)
        .zip(v)
        .filter(|((a, b), _)| a == b)
        .map(|(_, w)| w)
        .sum();
    Ok(total / y_true.len() as f64)
}

/// Confusion counts with class 1 as positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn new(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        check_pair(y_true, y_pred)?;
        let mut c = Confusion::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == 1, p == 1) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    /// Zero when either class is absent from the truth.
    pub fn gmean(&self) -> f64 {
        if self.tp + self.fn_ == 0 || self.tn + self.fp == 0 {
            return 0.0;
        }
        (self.sensitivity() * self.specificity()).sqrt()
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Geometric mean of sensitivity and specificity.
pub fn gmean(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    Ok(Confusion::new(y_true, y_pred)?.gmean())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub vac: f64,
    pub gmean: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub confusion: Confusion,
    pub v_provenance: String,
}

impl EvalReport {
    /// Without test weights `vac` equals `acc`.
    pub fn new(y_true: &[u8], y_pred: &[u8], v: Option<(&[f64], &str)>) -> Result<Self> {
        let confusion = Confusion::new(y_true, y_pred)?;
        let acc = accuracy(y_true, y_pred)?;
        let (vac, v_provenance) = match v {
            Some((w, prov)) => (vac(y_true, y_pred, w)?, prov.to_string()),
            None => (acc, "ones".to_string()),
        };
        Ok(EvalReport {
            acc,
            vac,
            gmean: confusion.gmean(),
            sensitivity: confusion.sensitivity(),
            specificity: confusion.specificity(),
            confusion,
            v_provenance,
        })
    }

    pub const CSV_HEADER: &'static str = "acc,vac,gmean,sensitivity,specificity,tp,fp,tn,fn,v_provenance";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},\"{}\"",
            self.acc,
            self.vac,
            self.gmean,
            self.sensitivity,
            self.specificity,
            self.confusion.tp,
            self.confusion.fp,
            self.confusion.tn,
            self.confusion.fn_,
            self.v_provenance.replace('"', "'")
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy     {:.4}", self.acc)?;
        writeln!(f, "vac          {:.4}", self.vac)?;
        writeln!(f, "g-mean       {:.4}", self.gmean)?;
        writeln!(f, "sensitivity  {:.4}", self.sensitivity)?;
        writeln!(f, "specificity  {:.4}", self.specificity)?;
        writeln!(
            f,
            "confusion    tp={} fp={} tn={} fn={}",
            self.confusion.tp, self.confusion.fp, self.confusion.tn, self.confusion.fn_
        )?;
        write!(f, "weights      {}", self.v_provenance)
    }
}

/// `x2 = slope * x1 + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLine {
    pub slope: f64,
    pub intercept: f64,
}

/// Level set `score = threshold` of a 2-D linear model, in the raw
/// coordinates the model's scaler was fitted on.
pub fn boundary_from_linear(model: &Model, threshold: f64) -> Result<BoundaryLine> {
    let w = model.linear_weights()?;
    if w.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: w.len(),
        });
    }
    boundary_from_weights(&w, model.offset(), model.scaler(), threshold)
}

/// As [`boundary_from_linear`] for an explicit weight vector and offset.
pub fn boundary_from_weights(
    w: &[f64],
    offset: f64,
    scaler: &Scaler,
    threshold: f64,
) -> Result<BoundaryLine> {
    if w.len() != 2 || scaler.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: w.len().max(scaler.dim()),
        });
    }
    let (s1, t1) = scaler.affine(0);
    let (s2, t2) = scaler.affine(1);
    let u1 = w[0] * s1;
    let u2 = w[1] * s2;
    if !(u2.abs() > 1e-12 * (u1.abs() + u2.abs())) || u2 == 0.0 {
        return Err(Error::DegenerateBoundary(format!(
            "weight on x2 vanishes (w = [{}, {}]); the boundary is vertical",
            w[0], w[1]
        )));
    }
    let slope = -u1 / u2;
    let intercept = (threshold - offset - w[0] * t1 - w[1] * t2) / u2;
    if !(slope.is_finite() && intercept.is_finite()) {
        return Err(Error::NonFinite(if slope.is_finite() { intercept } else { slope }));
    }
    Ok(BoundaryLine { slope, intercept })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Summary of a set of fitted lines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineStats {
    pub slope_mean: f64,
    pub slope_sd: f64,
    pub intercept_mean: f64,
    pub intercept_sd: f64,
    pub dist: f64,
}

/// `|mean(k) - k0| sd(k) + |mean(q) - q0| sd(q)` with sample standard
/// deviations.
pub fn dist_to_bayes(ks: &[f64], qs: &[f64], k0: f64, q0: f64) -> Result<f64> {
    Ok(line_stats(ks, qs, k0, q0)?.dist)
}

pub fn line_stats(ks: &[f64], qs: &[f64], k0: f64, q0: f64) -> Result<LineStats> {
    if ks.len() != qs.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            got: qs.len(),
        });
    }
    if ks.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 runs, got {}",
            ks.len()
        )));
    }
    if let Some(bad) = ks.iter().chain(qs).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(*bad));
    }
    let (km, ks_) = mean_sd(ks);
    let (qm, qs_) = mean_sd(qs);
    Ok(LineStats {
        slope_mean: km,
        slope_sd: ks_,
        intercept_mean: qm,
        intercept_sd: qs_,
        dist: (km - k0).abs() * ks_ + (qm - q0).abs() * qs_,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::kernels::{gram, KernelSpec};
    use crate::solvers::fit_lssvm;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 1], &[1, 0, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn vac_examples() {
        let y = [1, 0, 1, 1];
        let p = [1, 0, 0, 1];
        assert_eq!(vac(&y, &p, &[1.0; 4]).unwrap(), accuracy(&y, &p).unwrap());
        assert_eq!(vac(&[1, 0], &[0, 1], &[0.3, 0.7]).unwrap(), 0.0);
        let v = vac(&[1, 1, 1], &[1, 0, 1], &[0.2, 0.9, 0.4]).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
        assert!(vac(&[1], &[1], &[0.1, 0.2]).is_err());
        assert!(vac(&[1], &[1], &[-1.0]).is_err());
    }

    #[test]
    fn gmean_examples() {
        assert_eq!(gmean(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(gmean(&[0, 1, 1, 0], &[1, 1, 1, 1]).unwrap(), 0.0);
        // 4 of 5 positives, 1 of 2 negatives
        let y = [1, 1, 1, 1, 1, 0, 0];
        let p = [1, 1, 1, 1, 0, 0, 1];
        assert!((gmean(&y, &p).unwrap() - 0.4f64.sqrt()).abs() < 1e-15);
        assert_eq!(gmean(&[1, 1], &[1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn report_is_consistent() {
        let y = [1, 0, 1, 0, 1];
        let p = [1, 1, 0, 0, 1];
        let r = EvalReport::new(&y, &p, Some((&[0.5; 5], "test"))).unwrap();
        let c = r.confusion;
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (2, 1, 1, 1));
        assert_eq!(r.acc, 3.0 / 5.0);
        assert!((r.vac - 0.3).abs() < 1e-15);
        assert!((r.gmean - (r.sensitivity * r.specificity).sqrt()).abs() < 1e-15);
        assert_eq!(r.csv_row().split(',').count(), EvalReport::CSV_HEADER.split(',').count());
    }

    #[test]
    fn boundary_examples() {
        let id = Scaler {
            ranges: vec![(0.0, 1.0), (0.0, 1.0)],
        };
        let line = boundary_from_weights(&[2.0, -1.0], 0.5, &id, 0.5).unwrap();
        assert_eq!(line, BoundaryLine { slope: 2.0, intercept: 0.0 });
        let line = boundary_from_weights(&[0.0, 1.0], 0.5, &id, 0.5).unwrap();
        assert_eq!(line.slope, 0.0);
        assert_eq!(line.intercept, 0.0);
        assert!(matches!(
            boundary_from_weights(&[1.0, 0.0], 0.5, &id, 0.5),
            Err(Error::DegenerateBoundary(_))
        ));
    }

    #[test]
    fn boundary_points_score_threshold() {
        let raw = DMatrix::from_row_slice(
            6,
            2,
            &[-3.0, 1.0, -1.0, 4.0, 0.5, 2.0, 2.0, -2.0, 3.0, 0.0, 1.0, -3.5],
        );
        let data = Dataset::from_raw("lin", raw, vec![1, 1, 1, 0, 0, 0]).unwrap();
        let k = gram(&KernelSpec::Linear, &data.features).unwrap();
        let model: Model = fit_lssvm(&data, &k, 1.5).unwrap().into();
        let line = boundary_from_linear(&model, 0.5).unwrap();
        for x1 in [-2.0, -0.3, 0.0, 1.7] {
            let x2 = line.slope * x1 + line.intercept;
            // score via the model's own (unclipped) affine coordinates
            let w = model.linear_weights().unwrap();
            let sc = model.scaler();
            let (s1, t1) = sc.affine(0);
            let (s2, t2) = sc.affine(1);
            let score = w[0] * (s1 * x1 + t1) + w[1] * (s2 * x2 + t2) + model.offset();
            assert!((score - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist_to_bayes(&[2.0, 2.0, 2.0], &[0.0; 3], 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(dist_to_bayes(&[1.0, 3.0], &[0.0, 0.0], 2.0, 0.0).unwrap(), 0.0);
        // hand computation: |1.5 - 2| * sqrt(0.5) + |1 - 0| * 0
        let d = dist_to_bayes(&[1.0, 2.0], &[1.0, 1.0], 2.0, 0.0).unwrap();
        assert!((d - 0.5 * 0.5f64.sqrt()).abs() < 1e-15);
        assert!((d - 0.353_553_390_593_273_8).abs() < 1e-12);
        assert!(dist_to_bayes(&[1.0], &[1.0], 2.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn vac_bounded_by_accuracy(
            pairs in prop::collection::vec((0u8..2, 0u8..2, 0.0f64..=1.0), 1..40)
        ) {
            let y: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let v: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let a = accuracy(&y, &p).unwrap();
            let w = vac(&y, &p, &v).unwrap();
            prop_assert!(w >= 0.0 && w <= a + 1e-15);
        }

        #[test]
        fn complementation_invariance(
            pairs in prop::collection::vec((0u8..2, 0u8..2), 1..40)
        ) {
            let y: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let yc: Vec<u8> = y.iter().map(|v| 1 - v).collect();
            let pc: Vec<u8> = p.iter().map(|v| 1 - v).collect();
            prop_assert_eq!(accuracy(&y, &p).unwrap(), accuracy(&yc, &pc).unwrap());
            prop_assert!((gmean(&y, &p).unwrap() - gmean(&yc, &pc).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn dist_permutation_invariant(
            runs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..20),
            rot in 0usize..20
        ) {
            let ks: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let qs: Vec<f64> = runs.iter().map(|r| r.1).collect();
            let mut kr = ks.clone();
            let mut qr = qs.clone();
            let r = rot % ks.len();
            kr.rotate_left(r);
            qr.rotate_left(r);
            kr.reverse();
            qr.reverse();
            let a = dist_to_bayes(&ks, &qs, 2.0, 0.0).unwrap();
            let b = dist_to_bayes(&kr, &qr, 2.0, 0.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
