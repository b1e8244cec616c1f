//! Datasets, min-max scaling and the 0.5-threshold decision rule.
//!
//! Labels are always stored in `{0, 1}`. Sources that use `±1` are remapped
//! on ingestion (`-1 -> 0`, `+1 -> 1`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decision threshold on the conditional-probability scale.
pub const THRESHOLD: f64 = 0.5;

/// Per-dimension `(min, max)` pairs. A dimension with `min == max` is constant
/// and maps to 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub ranges: Vec<(f64, f64)>,
}

impl Scaler {
    /// Fits column ranges over every row of `raw`.
    pub fn fit(raw: &DMatrix<f64>) -> Self {
        let ranges = raw
            .column_iter()
            .map(|col| {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        Scaler { ranges }
    }

    pub fn identity(d: usize) -> Self {
        Scaler {
            ranges: vec![(0.0, 1.0); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    /// Maps one raw value of dimension `k` into `[0, 1]`, clipping values
    /// outside the fitted range.
    pub fn scale_value(&self, k: usize, value: f64) -> f64 {
        let (lo, hi) = self.ranges[k];
        if hi > lo {
            ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    /// Returns `(slope, offset)` with `scaled = slope * raw + offset` inside
    /// the fitted range. Constant dimensions have slope 0.
    pub fn affine(&self, k: usize) -> (f64, f64) {
        let (lo, hi) = self.ranges[k];
        if hi > lo {
            let s = 1.0 / (hi - lo);
            (s, -lo * s)
        } else {
            (0.0, 0.5)
        }
    }

    pub fn transform(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: raw.ncols(),
            });
        }
        Ok(DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, k| {
            self.scale_value(k, raw[(i, k)])
        }))
    }
}

/// Min-max scales every column into `[0, 1]`.
///
/// Without a scaler the ranges are fitted on `raw` itself. With one, values
/// outside its range are clipped.
pub fn normalize(raw: &DMatrix<f64>, scaler: Option<&Scaler>) -> Result<(DMatrix<f64>, Scaler)> {
    if raw.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let scaler = match scaler {
        Some(s) => s.clone(),
        None => Scaler::fit(raw),
    };
    let scaled = scaler.transform(raw)?;
    Ok((scaled, scaler))
}

/// Maps a score to a class label: 1 iff `score > 0.5`. A tie goes to 0.
pub fn decide(score: f64) -> Result<u8> {
    if !score.is_finite() {
        return Err(Error::NonFinite(score));
    }
    Ok(u8::from(score > THRESHOLD))
}

/// Remaps an external label value to `{0, 1}`. Accepts `{0, 1}` and `{-1, +1}`.
pub fn label_from_signed(value: f64) -> Result<u8> {
    if value == 1.0 {
        Ok(1)
    } else if value == 0.0 || value == -1.0 {
        Ok(0)
    } else {
        Err(Error::InvalidData(format!("label {value} is not in {{-1, 0, 1}}")))
    }
}

/// Labelled samples with features scaled into `[0, 1]^d`.
///
/// The unscaled matrix is retained so the data can be written back out
/// without round-tripping through the scaler.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: DMatrix<f64>,
    pub labels: Vec<u8>,
    pub scaler: Scaler,
    pub raw: DMatrix<f64>,
}

impl Dataset {
    /// Builds a dataset from raw features, fitting the scaler on all rows.
    pub fn from_raw(name: impl Into<String>, raw: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        Self::from_raw_with_scaler(name, raw, labels, None)
    }

    pub fn from_raw_with_scaler(
        name: impl Into<String>,
        raw: DMatrix<f64>,
        labels: Vec<u8>,
        scaler: Option<&Scaler>,
    ) -> Result<Self> {
        if raw.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: raw.nrows(),
                got: labels.len(),
            });
        }
        if raw.ncols() == 0 {
            return Err(Error::InvalidData("dataset has no feature columns".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidData(format!("label {bad} is not in {{0, 1}}")));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        let (features, scaler) = normalize(&raw, scaler)?;
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            scaler,
            raw,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Labels as `f64` values in `{0, 1}`, the regression targets.
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&y| f64::from(y)).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (self.len() - pos, pos)
    }

    /// Errors unless the dataset has at least two rows and both classes.
    pub fn check_fit_ready(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 samples, got {}",
                self.len()
            )));
        }
        let (neg, pos) = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::InvalidData("both classes must be present".into()));
        }
        Ok(())
    }

    /// Rows selected by `indices`, keeping this dataset's scaler.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: select_rows(&self.features, indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            scaler: self.scaler.clone(),
            raw: select_rows(&self.raw, indices),
        }
    }
}

pub(crate) fn select_rows(m: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), m.ncols(), |r, c| m[(indices[r], c)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_affine_column() {
        let raw = DMatrix::from_column_slice(3, 1, &[2.0, 4.0, 6.0]);
        let (x, _) = normalize(&raw, None).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_column() {
        let raw = DMatrix::from_column_slice(3, 1, &[3.0, 3.0, 3.0]);
        let (x, _) = normalize(&raw, None).unwrap();
        assert_eq!(x.as_slice(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn normalize_with_given_scaler() {
        let raw = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let scaler = Scaler {
            ranges: vec![(0.0, 2.0)],
        };
        let (x, _) = normalize(&raw, Some(&scaler)).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.5]);
    }

    #[test]
    fn normalize_clips_outside_range() {
        let raw = DMatrix::from_column_slice(2, 1, &[-1.0, 5.0]);
        let scaler = Scaler {
            ranges: vec![(0.0, 2.0)],
        };
        let (x, _) = normalize(&raw, Some(&scaler)).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn normalize_rejects_mismatched_scaler() {
        let raw = DMatrix::zeros(2, 2);
        let scaler = Scaler::identity(3);
        assert!(matches!(
            normalize(&raw, Some(&scaler)),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0.9).unwrap(), 1);
        assert_eq!(decide(0.1).unwrap(), 0);
        assert_eq!(decide(0.5).unwrap(), 0);
        assert!(decide(f64::NAN).is_err());
        assert!(decide(f64::INFINITY).is_err());
    }

    #[test]
    fn signed_labels_remap() {
        assert_eq!(label_from_signed(-1.0).unwrap(), 0);
        assert_eq!(label_from_signed(1.0).unwrap(), 1);
        assert_eq!(label_from_signed(0.0).unwrap(), 0);
        assert!(label_from_signed(2.0).is_err());
    }

    #[test]
    fn fit_ready_requires_both_classes() {
        let raw = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let ds = Dataset::from_raw("one-class", raw.clone(), vec![1, 1, 1]).unwrap();
        assert!(ds.check_fit_ready().is_err());
        let ds = Dataset::from_raw("ok", raw, vec![0, 1, 1]).unwrap();
        ds.check_fit_ready().unwrap();
        assert_eq!(ds.class_counts(), (1, 2));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(values in proptest::collection::vec(-1e3f64..1e3, 6..30)) {
            let raw = DMatrix::from_column_slice(values.len() / 2, 2, &values[..values.len() / 2 * 2]);
            let (once, _) = normalize(&raw, None).unwrap();
            let own = Scaler::fit(&once);
            let (twice, _) = normalize(&once, Some(&own)).unwrap();
            prop_assert_eq!(once.as_slice(), twice.as_slice());
            prop_assert!(once.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn decide_is_antisymmetric(s in -5.0f64..5.0) {
            prop_assume!(s != 0.5 && (1.0 - s) != 0.5);
            prop_assert_eq!(decide(1.0 - s).unwrap(), 1 - decide(s).unwrap());
        }
    }
}
