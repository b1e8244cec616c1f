//! Location weights of samples inside the input distribution.
//!
//! For a kernel `G` and a measure `mu` over the input space, the weight of a
//! sample is `v(x) = ∫ G(u - x) dmu(u)` and the pairwise weight is
//! `v(x, x') = ∫ G(u - x) G(u - x') dmu(u)`. Parametric measures are product
//! measures, so both integrals factor over dimensions and have closed forms.
//! The empirical measure is a plain average over a reference set.
//!
//! `G = step` combined with a Gaussian measure uses the lower-tail
//! orientation, i.e. the weight is the normal CDF at `x`. Every other
//! combination uses `G(u - x) = [u >= x]`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::kernels::{rows_of, GKernelSpec};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Concrete measure `mu` the weights are integrated against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Uniform on the box `[center_k - half_width_k, center_k + half_width_k]`.
    UniformBox {
        center: Vec<f64>,
        half_width: Vec<f64>,
    },
    /// Independent normals per dimension.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Empirical measure of a reference set (one row per point).
    Empirical { references: DMatrix<f64> },
    /// Each sample measured against a point mass at itself, so every weight
    /// is `G(0) = 1`.
    PointMass,
}

impl MeasureSpec {
    /// The box `[0, 1]^d` that normalized data lives in.
    pub fn unit_box(d: usize) -> Self {
        MeasureSpec::UniformBox {
            center: vec![0.5; d],
            half_width: vec![0.5; d],
        }
    }

    /// Per-dimension maximum-likelihood normal fit (population std).
    pub fn gaussian_fit(samples: &DMatrix<f64>) -> Result<Self> {
        let m = samples.nrows();
        if m == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut mean = Vec::with_capacity(samples.ncols());
        let mut std = Vec::with_capacity(samples.ncols());
        for col in samples.column_iter() {
            let mu = col.sum() / m as f64;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m as f64;
            mean.push(mu);
            std.push(var.sqrt().max(1e-12));
        }
        Ok(MeasureSpec::Gaussian { mean, std })
    }

    pub fn empirical(references: DMatrix<f64>) -> Result<Self> {
        let spec = MeasureSpec::Empirical { references };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::UniformBox { center, half_width } => {
                if center.len() != half_width.len() {
                    return Err(Error::InvalidParameter("box center/width lengths differ".into()));
                }
                if let Some(a) = half_width.iter().find(|a| !(**a > 0.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "box half-width must be positive, got {a}"
                    )));
                }
            }
            MeasureSpec::Gaussian { mean, std } => {
                if mean.len() != std.len() {
                    return Err(Error::InvalidParameter("gaussian mean/std lengths differ".into()));
                }
                if let Some(b) = std.iter().find(|b| !(**b > 0.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian std must be positive, got {b}"
                    )));
                }
            }
            MeasureSpec::Empirical { references } => {
                if references.nrows() == 0 {
                    return Err(Error::InvalidParameter("empty reference set".into()));
                }
            }
            MeasureSpec::PointMass => {}
        }
        Ok(())
    }

    fn dim(&self) -> Option<usize> {
        match self {
            MeasureSpec::UniformBox { center, .. } => Some(center.len()),
            MeasureSpec::Gaussian { mean, .. } => Some(mean.len()),
            MeasureSpec::Empirical { references } => Some(references.ncols()),
            MeasureSpec::PointMass => None,
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(md) if md != d => Err(Error::DimensionMismatch {
                expected: md,
                got: d,
            }),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeasureSpec::UniformBox { .. } => "uniform_box".into(),
            MeasureSpec::Gaussian { .. } => "gaussian".into(),
            MeasureSpec::Empirical { references } => {
                format!("empirical(N={})", references.nrows())
            }
            MeasureSpec::PointMass => "point_mass".into(),
        }
    }
}

/// How per-dimension integrals are combined into one weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// Joint kernel (product over dimensions).
    #[default]
    Product,
    /// Mean over dimensions of the one-dimensional weights; stays well
    /// scaled in high dimension.
    Additive,
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combine::Product => f.write_str("product"),
            Combine::Additive => f.write_str("additive"),
        }
    }
}

impl std::str::FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "product" => Ok(Combine::Product),
            "additive" => Ok(Combine::Additive),
            _ => Err(Error::InvalidParameter(format!("unknown combine rule {s:?}"))),
        }
    }
}

/// Per-sample weights together with the `(G, mu)` pair that produced them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VWeights {
    pub values: Vec<f64>,
    pub combine: Combine,
    pub g_spec: GKernelSpec,
    pub mu: String,
    /// Multiplier applied to the raw integrals.
    pub scale: f64,
}

impl VWeights {
    /// All-ones weights (no distribution information).
    pub fn ones(m: usize) -> Self {
        VWeights {
            values: vec![1.0; m],
            combine: Combine::Product,
            g_spec: GKernelSpec::Step,
            mu: MeasureSpec::PointMass.label(),
            scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> VWeights {
        VWeights {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            ..self.clone()
        }
    }

    pub fn provenance(&self) -> String {
        format!(
            "G={} mu={} combine={} scale={}",
            self.g_spec.label(),
            self.mu,
            self.combine,
            self.scale
        )
    }

    /// Writes `index,v` rows after a provenance comment.
    pub fn write_csv_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# {}", self.provenance())?;
        writeln!(out, "index,v")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// Pairwise weights `v(x_i, x_j)`.
#[derive(Clone, Debug)]
pub struct VMatrix {
    pub values: DMatrix<f64>,
    pub g_spec: GKernelSpec,
    pub mu: String,
}

impl VMatrix {
    /// Rescales so the largest entry is 1.
    pub fn normalized(&self) -> Result<VMatrix> {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::ZeroWeights);
        }
        Ok(VMatrix {
            values: &self.values / max,
            ..self.clone()
        })
    }

    pub fn subset(&self, indices: &[usize]) -> VMatrix {
        VMatrix {
            values: DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
                self.values[(indices[r], indices[c])]
            }),
            ..self.clone()
        }
    }
}

/// `∏_k Φ((x_k - a_k) / b_k)`: the step-kernel weight under a normal measure.
pub fn v_gaussian_step(mu: &MeasureSpec, x: &[f64]) -> Result<f64> {
    let MeasureSpec::Gaussian { mean, std } = mu else {
        return Err(Error::InvalidParameter("expected a gaussian measure".into()));
    };
    mu.validate()?;
    mu.check_dim(x.len())?;
    Ok(x
        .iter()
        .zip(mean.iter().zip(std))
        .map(|(&xk, (&a, &b))| normal_cdf((xk - a) / b))
        .product())
}

/// `(1 / 2a) ∫_{-a}^{a} exp(-(u - x)^2 / (2 sigma^2)) du`.
pub fn uniform_gaussian_1d(a: f64, sigma: f64, x: f64) -> f64 {
    let s = sigma * SQRT_2;
    sigma * (2.0 * PI).sqrt() / (4.0 * a) * (erf((a - x) / s) + erf((a + x) / s))
}

/// Gaussian-kernel weight under a uniform box measure, product over
/// dimensions.
pub fn v_uniform_gaussian(mu: &MeasureSpec, g: &GKernelSpec, x: &[f64]) -> Result<f64> {
    let (MeasureSpec::UniformBox { center, half_width }, GKernelSpec::Gaussian { sigma }) = (mu, g)
    else {
        return Err(Error::InvalidParameter(
            "expected a uniform box measure and a gaussian G".into(),
        ));
    };
    mu.validate()?;
    g.validate()?;
    mu.check_dim(x.len())?;
    Ok(x
        .iter()
        .zip(center.iter().zip(half_width))
        .map(|(&xk, (&c, &a))| uniform_gaussian_1d(a, *sigma, xk - c))
        .product())
}

/// `(1/N) Σ_s G(x̂_s - x)` over the reference set.
pub fn v_empirical(mu: &MeasureSpec, g: &GKernelSpec, x: &[f64]) -> Result<f64> {
    let MeasureSpec::Empirical { references } = mu else {
        return Err(Error::InvalidParameter("expected an empirical measure".into()));
    };
    mu.validate()?;
    g.validate()?;
    mu.check_dim(x.len())?;
    let refs = rows_of(references);
    let total: f64 = refs.iter().map(|r| g.eval_unchecked(r, x)).sum();
    Ok(total / refs.len() as f64)
}

/// One-dimensional weight for dimension `k` under a product measure.
fn weight_1d(mu: &MeasureSpec, g: &GKernelSpec, k: usize, x: f64) -> f64 {
    match (mu, g) {
        (MeasureSpec::UniformBox { center, half_width }, GKernelSpec::Gaussian { sigma }) => {
            uniform_gaussian_1d(half_width[k], *sigma, x - center[k])
        }
        (MeasureSpec::UniformBox { center, half_width }, GKernelSpec::Step) => {
            let a = half_width[k];
            let t = x - center[k];
            ((a - t.max(-a)) / (2.0 * a)).max(0.0)
        }
        (MeasureSpec::Gaussian { mean, std }, GKernelSpec::Step) => {
            normal_cdf((x - mean[k]) / std[k])
        }
        (MeasureSpec::Gaussian { mean, std }, GKernelSpec::Gaussian { sigma }) => {
            let s2 = sigma * sigma + std[k] * std[k];
            sigma / s2.sqrt() * (-(x - mean[k]) * (x - mean[k]) / (2.0 * s2)).exp()
        }
        _ => unreachable!("weight_1d only serves product measures"),
    }
}

/// One-dimensional pairwise weight for dimension `k` under a product measure.
fn pair_weight_1d(mu: &MeasureSpec, g: &GKernelSpec, k: usize, xi: f64, xj: f64) -> f64 {
    match (mu, g) {
        (MeasureSpec::UniformBox { center, half_width }, GKernelSpec::Gaussian { sigma }) => {
            let a = half_width[k];
            let (ti, tj) = (xi - center[k], xj - center[k]);
            let mid = 0.5 * (ti + tj);
            let gap = ti - tj;
            let integral =
                sigma * PI.sqrt() / 2.0 * (erf((a - mid) / sigma) + erf((a + mid) / sigma));
            (-gap * gap / (4.0 * sigma * sigma)).exp() * integral / (2.0 * a)
        }
        (MeasureSpec::UniformBox { .. }, GKernelSpec::Step) => {
            weight_1d(mu, g, k, xi.max(xj))
        }
        (MeasureSpec::Gaussian { .. }, GKernelSpec::Step) => weight_1d(mu, g, k, xi.min(xj)),
        (MeasureSpec::Gaussian { mean, std }, GKernelSpec::Gaussian { sigma }) => {
            let gap = xi - xj;
            let mid = 0.5 * (xi + xj);
            let s2 = 0.5 * sigma * sigma + std[k] * std[k];
            let inner = (0.5f64).sqrt() * sigma / s2.sqrt()
                * (-(mid - mean[k]) * (mid - mean[k]) / (2.0 * s2)).exp();
            (-gap * gap / (4.0 * sigma * sigma)).exp() * inner
        }
        _ => unreachable!("pair_weight_1d only serves product measures"),
    }
}

fn raw_weight(mu: &MeasureSpec, g: &GKernelSpec, combine: Combine, x: &[f64], refs: &[Vec<f64>]) -> f64 {
    let d = x.len();
    match mu {
        MeasureSpec::PointMass => 1.0,
        MeasureSpec::Empirical { .. } => match combine {
            Combine::Product => {
                refs.iter().map(|r| g.eval_unchecked(r, x)).sum::<f64>() / refs.len() as f64
            }
            Combine::Additive => {
                let per_dim: f64 = refs
                    .iter()
                    .map(|r| (0..d).map(|k| g.eval_1d(r[k], x[k])).sum::<f64>())
                    .sum();
                per_dim / (refs.len() * d) as f64
            }
        },
        _ => {
            let parts = (0..d).map(|k| weight_1d(mu, g, k, x[k]));
            match combine {
                Combine::Product => parts.product(),
                Combine::Additive => parts.sum::<f64>() / d as f64,
            }
        }
    }
}

/// Raw weights for every row of `samples`, multiplied by `scale`.
pub fn v_vector_scaled(
    samples: &DMatrix<f64>,
    g: &GKernelSpec,
    mu: &MeasureSpec,
    combine: Combine,
    scale: f64,
) -> Result<VWeights> {
    g.validate()?;
    mu.validate()?;
    mu.check_dim(samples.ncols())?;
    let refs = match mu {
        MeasureSpec::Empirical { references } => rows_of(references),
        _ => Vec::new(),
    };
    let values = rows_of(samples)
        .iter()
        .map(|x| scale * raw_weight(mu, g, combine, x, &refs))
        .collect();
    Ok(VWeights {
        values,
        combine,
        g_spec: *g,
        mu: mu.label(),
        scale,
    })
}

/// Weights of every row of `samples`. With `normalize`, the vector is divided
/// by its maximum so the largest weight is exactly 1.
pub fn v_vector(
    samples: &DMatrix<f64>,
    g: &GKernelSpec,
    mu: &MeasureSpec,
    combine: Combine,
    normalize: bool,
) -> Result<VWeights> {
    let mut w = v_vector_scaled(samples, g, mu, combine, 1.0)?;
    let max = w.values.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::ZeroWeights);
    }
    if normalize {
        w.scale = 1.0 / max;
        for v in &mut w.values {
            *v /= max;
        }
    }
    Ok(w)
}

/// Pairwise weight matrix over the rows of `samples`.
pub fn v_matrix(
    samples: &DMatrix<f64>,
    g: &GKernelSpec,
    mu: &MeasureSpec,
    combine: Combine,
) -> Result<VMatrix> {
    g.validate()?;
    mu.validate()?;
    mu.check_dim(samples.ncols())?;
    let m = samples.nrows();
    let d = samples.ncols();
    let rows = rows_of(samples);
    let mut values = DMatrix::zeros(m, m);
    match mu {
        MeasureSpec::PointMass => values.fill_with_identity(),
        MeasureSpec::Empirical { references } => {
            let refs = rows_of(references);
            let n = refs.len() as f64;
            match combine {
                Combine::Product => {
                    // G(x̂_s - x_i) for every reference s (rows) and sample i (cols)
                    let gk = DMatrix::from_fn(refs.len(), m, |s, i| {
                        g.eval_unchecked(&refs[s], &rows[i])
                    });
                    values = gk.tr_mul(&gk) / n;
                }
                Combine::Additive => {
                    for k in 0..d {
                        let gk = DMatrix::from_fn(refs.len(), m, |s, i| {
                            g.eval_1d(refs[s][k], rows[i][k])
                        });
                        values += gk.tr_mul(&gk) / n;
                    }
                    values /= d as f64;
                }
            }
        }
        _ => {
            for i in 0..m {
                for j in i..m {
                    let parts =
                        (0..d).map(|k| pair_weight_1d(mu, g, k, rows[i][k], rows[j][k]));
                    let v = match combine {
                        Combine::Product => parts.product(),
                        Combine::Additive => parts.sum::<f64>() / d as f64,
                    };
                    values[(i, j)] = v;
                    values[(j, i)] = v;
                }
            }
        }
    }
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(VMatrix {
        values,
        g_spec: *g,
        mu: mu.label(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn midpoint(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    fn gauss_measure_1d(a: f64, b: f64) -> MeasureSpec {
        MeasureSpec::Gaussian {
            mean: vec![a],
            std: vec![b],
        }
    }

    fn box_1d(a: f64) -> MeasureSpec {
        MeasureSpec::UniformBox {
            center: vec![0.0],
            half_width: vec![a],
        }
    }

    #[test]
    fn gaussian_step_at_mean_and_tail() {
        let mu = gauss_measure_1d(0.3, 0.2);
        assert!((v_gaussian_step(&mu, &[0.3]).unwrap() - 0.5).abs() < 1e-12);
        assert!((v_gaussian_step(&mu, &[1e6]).unwrap() - 1.0).abs() < 1e-15);
        let mu2 = MeasureSpec::Gaussian {
            mean: vec![0.1, -2.0],
            std: vec![1.0, 3.0],
        };
        assert!((v_gaussian_step(&mu2, &[0.1, -2.0]).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gaussian_step_rejects_bad_std() {
        assert!(v_gaussian_step(&gauss_measure_1d(0.0, 0.0), &[0.0]).is_err());
        assert!(v_gaussian_step(&gauss_measure_1d(0.0, -1.0), &[0.0]).is_err());
    }

    #[test]
    fn uniform_gaussian_matches_quadrature() {
        let g = GKernelSpec::gaussian(1.0).unwrap();
        let v = v_uniform_gaussian(&box_1d(1.0), &g, &[0.0]).unwrap();
        let q = midpoint(|u| (-(u * u) / 2.0).exp(), -1.0, 1.0, 100_000) / 2.0;
        assert!((v - q).abs() < 1e-6, "{v} vs {q}");
    }

    #[test]
    fn uniform_gaussian_center_heavier_and_flat_limit() {
        for sigma in [0.1, 0.5, 1.0, 4.0] {
            let g = GKernelSpec::gaussian(sigma).unwrap();
            let c = v_uniform_gaussian(&box_1d(1.0), &g, &[0.0]).unwrap();
            let e = v_uniform_gaussian(&box_1d(1.0), &g, &[1.0]).unwrap();
            assert!(c > e);
        }
        let g = GKernelSpec::gaussian(1e4).unwrap();
        let c = v_uniform_gaussian(&box_1d(1.0), &g, &[0.0]).unwrap();
        let e = v_uniform_gaussian(&box_1d(1.0), &g, &[1.0]).unwrap();
        assert!((c / e - 1.0).abs() < 1e-6);
        assert!((c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uniform_gaussian_rejects_degenerate_box() {
        let g = GKernelSpec::gaussian(1.0).unwrap();
        assert!(v_uniform_gaussian(&box_1d(0.0), &g, &[0.0]).is_err());
    }

    #[test]
    fn empirical_examples() {
        let g = GKernelSpec::gaussian(1.0).unwrap();
        let mu = MeasureSpec::empirical(DMatrix::from_row_slice(1, 2, &[0.2, 0.3])).unwrap();
        assert_eq!(v_empirical(&mu, &g, &[0.2, 0.3]).unwrap(), 1.0);

        let refs = DMatrix::from_row_slice(3, 2, &[0.5, 0.5, 0.9, 0.6, 0.4, 1.0]);
        let mu = MeasureSpec::empirical(refs.clone()).unwrap();
        assert_eq!(v_empirical(&mu, &GKernelSpec::Step, &[0.1, 0.1]).unwrap(), 1.0);
        assert!((v_empirical(&mu, &GKernelSpec::Step, &[0.45, 0.55]).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let refs = DMatrix::from_fn(5, 3, |_, _| rng.gen::<f64>());
        let x = [0.3, 0.6, 0.1];
        let mu = MeasureSpec::empirical(refs.clone()).unwrap();
        let mut direct = 0.0;
        for s in 0..5 {
            let mut prod = 1.0;
            for k in 0..3 {
                let d = refs[(s, k)] - x[k];
                prod *= (-d * d / 2.0).exp();
            }
            direct += prod;
        }
        assert!((v_empirical(&mu, &g, &x).unwrap() - direct / 5.0).abs() < 1e-15);
        assert!(MeasureSpec::empirical(DMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn vector_point_mass_is_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(7, 2, |_, _| rng.gen::<f64>());
        for g in [GKernelSpec::Step, GKernelSpec::gaussian(0.3).unwrap()] {
            let w = v_vector(&x, &g, &MeasureSpec::PointMass, Combine::Product, true).unwrap();
            assert!(w.values.iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn vector_identical_samples_equal_weights() {
        let x = DMatrix::from_row_slice(4, 2, &[0.3, 0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.7]);
        let g = GKernelSpec::gaussian(0.5).unwrap();
        for mu in [MeasureSpec::unit_box(2), MeasureSpec::empirical(x.clone()).unwrap()] {
            let w = v_vector(&x, &g, &mu, Combine::Product, false).unwrap();
            assert!(w.values.iter().all(|&v| v == w.values[0]));
        }
    }

    #[test]
    fn vector_matches_empirical_per_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DMatrix::from_fn(3, 2, |_, _| rng.gen::<f64>());
        let refs = DMatrix::from_fn(6, 2, |_, _| rng.gen::<f64>());
        let g = GKernelSpec::gaussian(0.4).unwrap();
        let mu = MeasureSpec::empirical(refs).unwrap();
        let w = v_vector(&x, &g, &mu, Combine::Product, false).unwrap();
        for i in 0..3 {
            let xi: Vec<f64> = x.row(i).iter().copied().collect();
            assert_eq!(w.values[i], v_empirical(&mu, &g, &xi).unwrap());
        }
    }

    #[test]
    fn vector_normalization_and_additive_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(20, 5, |_, _| rng.gen::<f64>());
        let g = GKernelSpec::gaussian(0.25).unwrap();
        for combine in [Combine::Product, Combine::Additive] {
            let w = v_vector(&x, &g, &MeasureSpec::unit_box(5), combine, true).unwrap();
            let max = w.values.iter().copied().fold(0.0, f64::max);
            assert_eq!(max, 1.0);
            assert!(w.values.iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn vector_additive_is_mean_of_dimensions() {
        let x = DMatrix::from_row_slice(1, 2, &[0.2, 0.9]);
        let g = GKernelSpec::gaussian(0.5).unwrap();
        let w = v_vector(&x, &g, &MeasureSpec::unit_box(2), Combine::Additive, false).unwrap();
        let expected = 0.5 * (uniform_gaussian_1d(0.5, 0.5, -0.3) + uniform_gaussian_1d(0.5, 0.5, 0.4));
        assert!((w.values[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn vector_all_zero_is_error() {
        // every sample sits on the upper edge, where P(u >= x) = 0
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            v_vector(&x, &GKernelSpec::Step, &MeasureSpec::unit_box(1), Combine::Product, true),
            Err(Error::ZeroWeights)
        ));
    }

    #[test]
    fn matrix_step_diagonal_matches_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(5, 2, |_, _| rng.gen::<f64>());
        let mus = [
            MeasureSpec::unit_box(2),
            MeasureSpec::gaussian_fit(&x).unwrap(),
            MeasureSpec::empirical(x.clone()).unwrap(),
        ];
        for mu in &mus {
            let v = v_vector(&x, &GKernelSpec::Step, mu, Combine::Product, false).unwrap();
            let vm = v_matrix(&x, &GKernelSpec::Step, mu, Combine::Product).unwrap();
            for i in 0..5 {
                assert!((vm.values[(i, i)] - v.values[i]).abs() < 1e-15, "{}", mu.label());
            }
        }
    }

    #[test]
    fn matrix_empirical_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DMatrix::from_fn(4, 2, |_, _| rng.gen::<f64>());
        let refs = DMatrix::from_fn(7, 2, |_, _| rng.gen::<f64>());
        let g = GKernelSpec::gaussian(0.3).unwrap();
        let vm = v_matrix(&x, &g, &MeasureSpec::empirical(refs.clone()).unwrap(), Combine::Product)
            .unwrap();
        assert_eq!(vm.values, vm.values.transpose());
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for s in 0..7 {
                    let r: Vec<f64> = refs.row(s).iter().copied().collect();
                    let xi: Vec<f64> = x.row(i).iter().copied().collect();
                    let xj: Vec<f64> = x.row(j).iter().copied().collect();
                    acc += g_eval_pair(&g, &r, &xi) * g_eval_pair(&g, &r, &xj);
                }
                assert!((vm.values[(i, j)] - acc / 7.0).abs() < 1e-15);
            }
        }
    }

    fn g_eval_pair(g: &GKernelSpec, u: &[f64], x: &[f64]) -> f64 {
        crate::kernels::g_eval(g, u, x).unwrap()
    }

    #[test]
    fn matrix_parametric_closed_forms_match_quadrature() {
        let (xi, xj) = (0.2, -0.35);
        // uniform box, gaussian G
        let g = GKernelSpec::gaussian(0.4).unwrap();
        let mu = box_1d(0.5);
        let vm = v_matrix(&DMatrix::from_row_slice(2, 1, &[xi, xj]), &g, &mu, Combine::Product)
            .unwrap();
        let q = midpoint(
            |u| g.eval_1d(u, xi) * g.eval_1d(u, xj),
            -0.5,
            0.5,
            200_000,
        ) / 1.0;
        assert!((vm.values[(0, 1)] - q).abs() < 1e-9);
        // gaussian measure, gaussian G
        let mu = gauss_measure_1d(0.1, 0.3);
        let vm = v_matrix(&DMatrix::from_row_slice(2, 1, &[xi, xj]), &g, &mu, Combine::Product)
            .unwrap();
        let pdf = |u: f64| (-(u - 0.1) * (u - 0.1) / (2.0 * 0.09)).exp() / (0.3 * (2.0 * PI).sqrt());
        let q = midpoint(|u| pdf(u) * g.eval_1d(u, xi) * g.eval_1d(u, xj), -5.0, 5.0, 200_000);
        assert!((vm.values[(0, 1)] - q).abs() < 1e-9);
        let v = v_vector(&DMatrix::from_row_slice(1, 1, &[xi]), &g, &mu, Combine::Product, false)
            .unwrap();
        let q = midpoint(|u| pdf(u) * g.eval_1d(u, xi), -5.0, 5.0, 200_000);
        assert!((v.values[0] - q).abs() < 1e-9);
    }

    #[test]
    fn empirical_matrix_converges_to_quadrature() {
        // references drawn uniformly on [-0.5, 0.5]
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let refs = DMatrix::from_fn(10_000, 1, |_, _| rng.gen::<f64>() - 0.5);
        let x = DMatrix::from_row_slice(3, 1, &[-0.3, 0.0, 0.25]);
        let g = GKernelSpec::gaussian(0.3).unwrap();
        let emp = v_matrix(&x, &g, &MeasureSpec::empirical(refs).unwrap(), Combine::Product).unwrap();
        let exact = v_matrix(&x, &g, &box_1d(0.5), Combine::Product).unwrap();
        for (e, q) in emp.values.iter().zip(exact.values.iter()) {
            assert!(((e - q) / q).abs() < 0.02, "{e} vs {q}");
        }
    }

    #[test]
    fn point_mass_matrix_is_identity() {
        let x = DMatrix::from_row_slice(3, 1, &[0.1, 0.2, 0.3]);
        let vm = v_matrix(&x, &GKernelSpec::Step, &MeasureSpec::PointMass, Combine::Product).unwrap();
        assert_eq!(vm.values, DMatrix::identity(3, 3));
    }

    proptest! {
        #[test]
        fn gaussian_step_is_monotone(a in -2.0f64..2.0, b in 0.1f64..3.0, x in -5.0f64..5.0, dx in 0.0f64..3.0) {
            let mu = gauss_measure_1d(a, b);
            let lo = v_gaussian_step(&mu, &[x]).unwrap();
            let hi = v_gaussian_step(&mu, &[x + dx]).unwrap();
            prop_assert!(lo <= hi);
        }

        #[test]
        fn uniform_gaussian_symmetric_and_peaked(a in 0.1f64..3.0, sigma in 0.05f64..5.0, t in 0.0f64..1.0) {
            let g = GKernelSpec::gaussian(sigma).unwrap();
            let mu = box_1d(a);
            let x = t * a;
            let left = v_uniform_gaussian(&mu, &g, &[-x]).unwrap();
            let right = v_uniform_gaussian(&mu, &g, &[x]).unwrap();
            let center = v_uniform_gaussian(&mu, &g, &[0.0]).unwrap();
            prop_assert!((left - right).abs() < 1e-12);
            prop_assert!(center >= right - 1e-15);
        }
    }
}
