//! Solution kernels `K(x, x')`, Fredholm kernels `G(u - x)` and Gram matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel of the function space the classifiers are expanded in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-|x - x'|^2 / (2 delta^2))`
    Rbf { delta: f64 },
    Linear,
}

impl KernelSpec {
    pub fn rbf(delta: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { delta } if !(delta > 0.0 && delta.is_finite()) => Err(
                Error::InvalidParameter(format!("rbf delta must be positive, got {delta}")),
            ),
            _ => Ok(()),
        }
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { delta } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * delta * delta)).exp()
            }
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Kernel `G` inside the Fredholm integral, evaluated as `G(u - x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GKernelSpec {
    /// Product of one-dimensional `exp(-(u_k - x_k)^2 / (2 sigma^2))`.
    Gaussian { sigma: f64 },
    /// Product of one-dimensional indicators `u_k >= x_k`.
    Step,
}

impl GKernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let spec = GKernelSpec::Gaussian { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GKernelSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                Error::InvalidParameter(format!("G sigma must be positive, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    /// One-dimensional factor `G_k(u_k - x_k)`.
    #[inline]
    pub fn eval_1d(&self, u: f64, x: f64) -> f64 {
        match *self {
            GKernelSpec::Gaussian { sigma } => (-(u - x) * (u - x) / (2.0 * sigma * sigma)).exp(),
            GKernelSpec::Step => {
                if u >= x {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn eval_unchecked(&self, u: &[f64], x: &[f64]) -> f64 {
        match *self {
            GKernelSpec::Gaussian { sigma } => {
                let d2: f64 = u.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            GKernelSpec::Step => f64::from(u.iter().zip(x).all(|(a, b)| a >= b)),
        }
    }

    /// Short label used in reports and file headers.
    pub fn label(&self) -> String {
        match *self {
            GKernelSpec::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            GKernelSpec::Step => "step".to_string(),
        }
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

pub fn k_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    spec.validate()?;
    Ok(spec.eval_unchecked(x, y))
}

pub fn g_eval(spec: &GKernelSpec, u: &[f64], x: &[f64]) -> Result<f64> {
    check_dims(u.len(), x.len())?;
    spec.validate()?;
    Ok(spec.eval_unchecked(u, x))
}

/// Symmetric `m x m` kernel matrix over a set of rows.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub spec: KernelSpec,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Principal submatrix on `indices` (in that order).
    pub fn subset(&self, indices: &[usize]) -> GramMatrix {
        GramMatrix {
            values: DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
                self.values[(indices[r], indices[c])]
            }),
            spec: self.spec,
        }
    }

    /// Rectangular block `K[rows, cols]`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
            self.values[(rows[r], cols[c])]
        })
    }
}

pub(crate) fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter()
        .map(|r| r.iter().copied().collect::<Vec<_>>())
        .collect()
}

/// Builds the Gram matrix of `spec` over the rows of `x`. Only the upper
/// triangle is evaluated; the lower one is mirrored.
pub fn gram(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<GramMatrix> {
    spec.validate()?;
    let rows = rows_of(x);
    let m = rows.len();
    let mut values = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let k = spec.eval_unchecked(&rows[i], &rows[j]);
            values[(i, j)] = k;
            values[(j, i)] = k;
        }
    }
    Ok(GramMatrix {
        values,
        spec: *spec,
    })
}

/// Cross-kernel `K(a_i, b_j)` between two row sets.
pub fn cross_kernel(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(a.ncols(), b.ncols())?;
    spec.validate()?;
    let ra = rows_of(a);
    let rb = rows_of(b);
    Ok(DMatrix::from_fn(ra.len(), rb.len(), |i, j| {
        spec.eval_unchecked(&ra[i], &rb[j])
    }))
}
