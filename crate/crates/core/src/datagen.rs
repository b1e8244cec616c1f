//! Synthetic generators, the Gaussian Bayes posterior and CSV ingestion.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Scaler};
use crate::error::{Error, Result};

/// Diagonal Gaussian class-conditional density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl GaussianClass {
    pub fn validate(&self) -> Result<()> {
        if self.mean.is_empty() || self.mean.len() != self.var.len() {
            return Err(Error::InvalidParameter(
                "mean and variance must be non-empty and of equal length".into(),
            ));
        }
        if let Some(v) = self.var.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "variances must be positive, got {v}"
            )));
        }
        if let Some(m) = self.mean.iter().find(|m| !m.is_finite()) {
            return Err(Error::NonFinite(*m));
        }
        Ok(())
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.var)
            .zip(x)
            .map(|((m, v), x)| -0.5 * (x - m).powi(2) / v - 0.5 * v.ln())
            .sum()
    }

    fn sampler(&self) -> Result<Vec<Normal<f64>>> {
        self.validate()?;
        self.mean
            .iter()
            .zip(&self.var)
            .map(|(m, v)| {
                Normal::new(*m, v.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))
            })
            .collect()
    }
}

/// `p1(x) / (p1(x) + p0(x))` for equal priors, evaluated in log space.
pub fn bayes_posterior(x: &[f64], class1: &GaussianClass, class0: &GaussianClass) -> Result<f64> {
    class1.validate()?;
    class0.validate()?;
    if x.len() != class1.mean.len() || x.len() != class0.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: class1.mean.len(),
            got: x.len(),
        });
    }
    let diff = class0.log_density(x) - class1.log_density(x);
    Ok(logistic(-diff))
}

/// `P(y = 0 | x)`, computed independently of [`bayes_posterior`].
pub fn bayes_posterior_complement(
    x: &[f64],
    class1: &GaussianClass,
    class0: &GaussianClass,
) -> Result<f64> {
    bayes_posterior(x, class0, class1)
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Two bivariate Gaussians `N(mu, Sigma)` (class 1) and `N(-mu, Sigma)`
/// (class 0) with diagonal `Sigma` and equal priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec2D {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub n: usize,
    pub seed: u64,
}

impl Default for GaussianSpec2D {
    fn default() -> Self {
        GaussianSpec2D {
            mu: [1.0, -2.0],
            sigma: [0.5, 2.0],
            n: 200,
            seed: 0,
        }
    }
}

impl GaussianSpec2D {
    pub fn classes(&self) -> (GaussianClass, GaussianClass) {
        (
            GaussianClass {
                mean: self.mu.to_vec(),
                var: self.sigma.to_vec(),
            },
            GaussianClass {
                mean: self.mu.iter().map(|m| -m).collect(),
                var: self.sigma.to_vec(),
            },
        )
    }

    /// Bayes boundary `x2 = k0 x1 + q0`. The classes are mirror images, so
    /// the boundary passes through the origin with normal `Sigma^-1 mu`.
    pub fn bayes_line(&self) -> Result<(f64, f64)> {
        let w = [self.mu[0] / self.sigma[0], self.mu[1] / self.sigma[1]];
        if w[1] == 0.0 {
            return Err(Error::DegenerateBoundary(
                "the Bayes boundary is vertical".into(),
            ));
        }
        Ok((-w[0] / w[1], 0.0))
    }

    /// Misclassification rate of the Bayes rule: `Phi(-||Sigma^-1/2 mu||)`.
    pub fn bayes_error(&self) -> f64 {
        let r = (self.mu[0].powi(2) / self.sigma[0] + self.mu[1].powi(2) / self.sigma[1]).sqrt();
        crate::distribution::normal_cdf(-r)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "sample count must be even and at least 4, got {n}"
        )));
    }
    Ok(())
}

/// Draws `n/2` rows from each class; the first half is class 1.
fn draw_balanced(
    name: &str,
    class1: &GaussianClass,
    class0: &GaussianClass,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    check_n(n)?;
    let s1 = class1.sampler()?;
    let s0 = class0.sampler()?;
    let d = s1.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (s, y) = if i < n / 2 { (&s1, 1) } else { (&s0, 0) };
        for (k, dist) in s.iter().enumerate() {
            raw[(i, k)] = dist.sample(&mut rng);
        }
        labels.push(y);
    }
    Dataset::from_raw(name, raw, labels)
}

pub fn gen_gaussian_2d(spec: &GaussianSpec2D) -> Result<Dataset> {
    let (c1, c0) = spec.classes();
    draw_balanced("gaussian2d", &c1, &c0, spec.n, spec.seed)
}

/// Two one-dimensional Gaussians; `spread` is the variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Robustness1DSpec {
    /// Means of class 1 and class 0.
    pub centers: [f64; 2],
    pub spread: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for Robustness1DSpec {
    fn default() -> Self {
        Robustness1DSpec {
            centers: [-3.0, 3.0],
            spread: 3.0,
            n: 200,
            seed: 0,
        }
    }
}

impl Robustness1DSpec {
    pub fn classes(&self) -> (GaussianClass, GaussianClass) {
        (
            GaussianClass {
                mean: vec![self.centers[0]],
                var: vec![self.spread],
            },
            GaussianClass {
                mean: vec![self.centers[1]],
                var: vec![self.spread],
            },
        )
    }
}

pub fn gen_robustness_1d(spec: &Robustness1DSpec) -> Result<Dataset> {
    let (c1, c0) = spec.classes();
    draw_balanced("robustness1d", &c1, &c0, spec.n, spec.seed)
}

/// All 432 attribute combinations of the MONK's problems, in lexicographic
/// order. Attribute ranges are 3, 3, 2, 3, 4, 2.
pub fn monks_inputs() -> Vec<[u8; 6]> {
    let mut rows = Vec::with_capacity(432);
    for a1 in 1..=3 {
        for a2 in 1..=3 {
            for a3 in 1..=2 {
                for a4 in 1..=3 {
                    for a5 in 1..=4 {
                        for a6 in 1..=2 {
                            rows.push([a1, a2, a3, a4, a5, a6]);
                        }
                    }
                }
            }
        }
    }
    rows
}

/// Third MONK's target concept: `(a5 = 3 and a4 = 1) or (a5 != 4 and a2 != 3)`.
pub fn monks3_rule(a: &[u8; 6]) -> u8 {
    u8::from((a[4] == 3 && a[3] == 1) || (a[4] != 4 && a[1] != 3))
}

fn monks_dataset(name: &str, rows: &[[u8; 6]], labels: Vec<u8>) -> Result<Dataset> {
    let raw = DMatrix::from_fn(rows.len(), 6, |i, k| f64::from(rows[i][k]));
    Dataset::from_raw(name, raw, labels)
}

/// The full noise-free MONK-3 domain (432 samples).
pub fn gen_monks_full() -> Result<Dataset> {
    let rows = monks_inputs();
    let labels = rows.iter().map(monks3_rule).collect();
    monks_dataset("monkst", &rows, labels)
}

/// A seeded sample of `n` distinct MONK-3 inputs with a fraction `noise` of
/// labels flipped.
pub fn gen_monks3_sample(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if !(2..=432).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "sample size must lie in [2, 432], got {n}"
        )));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::InvalidParameter(format!(
            "noise must lie in [0, 0.5), got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = monks_inputs();
    rows.shuffle(&mut rng);
    rows.truncate(n);
    let mut labels: Vec<u8> = rows.iter().map(monks3_rule).collect();
    let flips = (noise * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    for &i in &idx[..flips] {
        labels[i] = 1 - labels[i];
    }
    monks_dataset("monks3", &rows, labels)
}

/// CSV reading options.
#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    /// Zero-based label column; `None` selects the last column.
    pub label_column: Option<usize>,
    /// Token mapped to class 1. Without it numeric tokens map by sign and
    /// other tokens by sort order (the larger one is class 1).
    pub positive: Option<String>,
    /// Scaler to apply instead of fitting one on the file.
    pub scaler: Option<Scaler>,
}

/// Raw rows read from a CSV file before normalization.
#[derive(Clone, Debug)]
pub struct RawTable {
    pub features: DMatrix<f64>,
    pub tokens: Vec<String>,
    pub header: Option<Vec<String>>,
}

fn read_table(path: &Path, label_column: Option<usize>) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut tokens = Vec::new();
    let mut width = None;
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(n as u64 + 1, |p| p.line()) as usize;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let cols = record.len();
        if cols < 2 {
            return Err(Error::Parse {
                line,
                msg: "need at least one feature and a label".into(),
            });
        }
        let label_at = label_column.unwrap_or(cols - 1);
        if label_at >= cols {
            return Err(Error::Parse {
                line,
                msg: format!("label column {label_at} out of range ({cols} columns)"),
            });
        }
        let parsed: Vec<std::result::Result<f64, _>> = record
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != label_at)
            .map(|(_, c)| c.parse::<f64>())
            .collect();
        if n == 0 && header.is_none() && parsed.iter().any(|p| p.is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            width = Some(cols);
            continue;
        }
        if let Some(w) = width {
            if w != cols {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {w} columns, found {cols}"),
                });
            }
        }
        width = Some(cols);
        let mut row = Vec::with_capacity(cols - 1);
        for (k, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    let col = if k >= label_at { k + 1 } else { k };
                    return Err(Error::Parse {
                        line,
                        msg: format!("non-numeric feature in column {col}: {:?}", &record[col]),
                    });
                }
            }
        }
        rows.push(row);
        tokens.push(record[label_at].to_string());
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = rows[0].len();
    let features = DMatrix::from_fn(rows.len(), d, |i, k| rows[i][k]);
    Ok(RawTable {
        features,
        tokens,
        header,
    })
}

fn map_labels(tokens: &[String], positive: Option<&str>) -> Result<Vec<u8>> {
    let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
    if distinct.len() > 2 {
        return Err(Error::InvalidData(format!(
            "expected two label values, found {}: {:?}",
            distinct.len(),
            distinct.iter().take(5).collect::<Vec<_>>()
        )));
    }
    if let Some(p) = positive {
        return Ok(tokens.iter().map(|t| u8::from(t == p)).collect());
    }
    let numeric: Option<Vec<f64>> = tokens.iter().map(|t| t.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        if values.iter().all(|v| *v == 0.0 || *v == 1.0 || *v == -1.0) {
            return Ok(values.iter().map(|v| u8::from(*v == 1.0)).collect());
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(values.iter().map(|v| u8::from(*v == max && distinct.len() == 2)).collect());
    }
    let top = distinct.iter().next_back().copied();
    Ok(tokens
        .iter()
        .map(|t| u8::from(distinct.len() == 2 && Some(t.as_str()) == top))
        .collect())
}

/// Reads a comma-separated file (optional header, `#` comments) into a
/// normalized dataset.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let table = read_table(path, opts.label_column)?;
    let labels = map_labels(&table.tokens, opts.positive.as_deref())?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::from_raw_with_scaler(name, table.features, labels, opts.scaler.as_ref())
}

/// Feature rows for prediction. Rows with `dim` columns are all features;
/// rows with `dim + 1` columns carry a label that is returned separately.
pub fn read_features(
    path: &Path,
    dim: usize,
    opts: &CsvOptions,
) -> Result<(DMatrix<f64>, Option<Vec<u8>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut first_width = None;
    for record in reader.records() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        first_width = Some(record.len());
        break;
    }
    match first_width {
        None => Err(Error::EmptyDataset),
        Some(w) if w == dim + 1 => {
            let table = read_table(path, opts.label_column)?;
            let labels = map_labels(&table.tokens, opts.positive.as_deref())?;
            Ok((table.features, Some(labels)))
        }
        Some(w) if w == dim => {
            let mut rows: Vec<f64> = Vec::new();
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .comment(Some(b'#'))
                .trim(csv::Trim::All)
                .flexible(true)
                .from_path(path)?;
            let mut m = 0;
            for (n, record) in reader.records().enumerate() {
                let record = record?;
                let line = record.position().map_or(n as u64 + 1, |p| p.line()) as usize;
                if record.iter().all(|c| c.is_empty()) {
                    continue;
                }
                let parsed: Vec<Option<f64>> = record
                    .iter()
                    .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect();
                if m == 0 && rows.is_empty() && parsed.iter().any(Option::is_none) {
                    // header
                    continue;
                }
                if record.len() != dim {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected {dim} columns, found {}", record.len()),
                    });
                }
                for (k, v) in parsed.into_iter().enumerate() {
                    rows.push(v.ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("non-numeric feature in column {k}: {:?}", &record[k]),
                    })?);
                }
                m += 1;
            }
            if m == 0 {
                return Err(Error::EmptyDataset);
            }
            Ok((DMatrix::from_row_slice(m, dim, &rows), None))
        }
        Some(w) => Err(Error::DimensionMismatch {
            expected: dim,
            got: w,
        }),
    }
}

/// Writes raw features and `{0,1}` labels, preceded by `# ` comment lines.
pub fn write_csv_to<W: Write>(out: &mut W, data: &Dataset, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let d = data.dim();
    let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["label".into()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..data.len() {
        let mut line = String::new();
        for k in 0..d {
            line.push_str(&format!("{},", data.raw[(i, k)]));
        }
        line.push_str(&data.labels[i].to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_csv(path: &Path, data: &Dataset, comments: &[String]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv_to(&mut out, data, comments)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn gaussian_is_deterministic_and_balanced() {
        let spec = GaussianSpec2D { n: 4, seed: 9, ..Default::default() };
        let a = gen_gaussian_2d(&spec).unwrap();
        let b = gen_gaussian_2d(&spec).unwrap();
        assert_eq!(a.raw, b.raw);
        assert_eq!(a.labels, vec![1, 1, 0, 0]);
        assert!(gen_gaussian_2d(&GaussianSpec2D { n: 5, ..spec.clone() }).is_err());
        assert!(gen_gaussian_2d(&GaussianSpec2D { sigma: [0.0, 1.0], ..spec }).is_err());
    }

    #[test]
    fn class_one_mean_matches() {
        let spec = GaussianSpec2D { n: 10_000, seed: 1, ..Default::default() };
        let data = gen_gaussian_2d(&spec).unwrap();
        let half = spec.n / 2;
        for k in 0..2 {
            let mean = (0..half).map(|i| data.raw[(i, k)]).sum::<f64>() / half as f64;
            let band = 3.0 * spec.sigma[k].sqrt() / (half as f64).sqrt();
            assert!((mean - spec.mu[k]).abs() < band, "dim {k}: {mean}");
        }
    }

    #[test]
    fn default_bayes_line_and_error() {
        let spec = GaussianSpec2D::default();
        assert_eq!(spec.bayes_line().unwrap(), (2.0, 0.0));
        assert!((spec.bayes_error() - 0.022_750_131_948_179_2).abs() < 1e-10);
    }

    #[test]
    fn posterior_examples() {
        let spec = GaussianSpec2D::default();
        let (c1, c0) = spec.classes();
        // any point on x2 = 2 x1 is equidistant in the Mahalanobis sense
        assert!((bayes_posterior(&[0.7, 1.4], &c1, &c0).unwrap() - 0.5).abs() < 1e-12);
        assert!(bayes_posterior(&[1.0, -2.0], &c1, &c0).unwrap() > 0.99);
        let r = Robustness1DSpec::default();
        let (c1, c0) = r.classes();
        for x in [-4.0, -1.0, -0.1, 0.0, 0.3, 2.5, 6.0] {
            let p = bayes_posterior(&[x], &c1, &c0).unwrap();
            assert!((p - 1.0 / (1.0 + (2.0 * x).exp())).abs() < 1e-12);
        }
        assert!(bayes_posterior(&[0.0], &c1, &c0).is_ok());
        assert!(bayes_posterior(&[0.0, 1.0], &c1, &c0).is_err());
    }

    #[test]
    fn robustness_generator() {
        let spec = Robustness1DSpec { seed: 4, ..Default::default() };
        let a = gen_robustness_1d(&spec).unwrap();
        assert_eq!(a.raw, gen_robustness_1d(&spec).unwrap().raw);
        assert_eq!(a.class_counts(), (100, 100));
        assert_eq!(a.dim(), 1);
    }

    #[test]
    fn monks_domain() {
        let rows = monks_inputs();
        assert_eq!(rows.len(), 432);
        let full = gen_monks_full().unwrap();
        let (neg, pos) = full.class_counts();
        assert_eq!(neg + pos, 432);
        assert_eq!(pos, 228);
        let s = gen_monks3_sample(121, 0.05, 3).unwrap();
        assert_eq!(s.len(), 121);
        let flipped = (0..121)
            .filter(|&i| {
                let a: [u8; 6] = std::array::from_fn(|k| s.raw[(i, k)] as u8);
                monks3_rule(&a) != s.labels[i]
            })
            .count();
        assert_eq!(flipped, 6);
    }

    #[test]
    fn load_signed_labels() {
        let f = write_tmp("1.0,2.0,-1\n3.0,5.0,1\n2.0,4.0,-1\n");
        let d = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert!(d.features.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(d.features[(2, 0)], 0.5);
    }

    #[test]
    fn load_header_only_is_empty() {
        let f = write_tmp("a,b,label\n");
        let err = load_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        let f = write_tmp("a,b,label\n1,2,x\n1,oops,y\n");
        match load_csv(f.path(), &CsvOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("1,2,a\n1,3,b\n2,2,c\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::default()),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn label_column_and_positive_token() {
        let f = write_tmp("# note\nlabel,x\nsick,0.5\nwell,0.7\nsick,0.1\n");
        let opts = CsvOptions {
            label_column: Some(0),
            positive: Some("sick".into()),
            scaler: None,
        };
        let d = load_csv(f.path(), &opts).unwrap();
        assert_eq!(d.labels, vec![1, 0, 1]);
        assert_eq!(d.dim(), 1);
    }

    #[test]
    fn round_trip() {
        let data = gen_gaussian_2d(&GaussianSpec2D { n: 20, seed: 2, ..Default::default() }).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(f.path(), &data, &["seed=2".into()]).unwrap();
        let back = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(back.labels, data.labels);
        for (a, b) in back.raw.iter().zip(data.raw.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.features.iter().zip(data.features.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn read_features_with_and_without_labels() {
        let opts = CsvOptions::default();
        let f = write_tmp("a,b\n1,2\n3,4\n");
        let (x, y) = read_features(f.path(), 2, &opts).unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(y.is_none());
        let f = write_tmp("1,2,0\n3,4,1\n");
        let (x, y) = read_features(f.path(), 2, &opts).unwrap();
        assert_eq!(x.nrows(), 2);
        assert_eq!(y.unwrap(), vec![0, 1]);
        let f = write_tmp("1,2,3,4\n");
        assert!(matches!(
            read_features(f.path(), 2, &opts),
            Err(Error::DimensionMismatch { expected: 2, got: 4 })
        ));
        let f = write_tmp("1,2\n3,x\n");
        assert!(matches!(read_features(f.path(), 2, &opts), Err(Error::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn posterior_complement_sums_to_one(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            let (c1, c0) = GaussianSpec2D::default().classes();
            let p = bayes_posterior(&[x, y], &c1, &c0).unwrap();
            let q = bayes_posterior_complement(&[x, y], &c1, &c0).unwrap();
            prop_assert!((p + q - 1.0).abs() < 1e-12);
        }
    }
}
