//! The six classifiers and their fitted models.
//!
//! | method       | loss                        | fit                         |
//! |--------------|-----------------------------|-----------------------------|
//! | `eps-l1vsvm` | v-weighted eps-insensitive  | pairwise decomposition      |
//! | `eps-l1svm`  | eps-insensitive             | pairwise decomposition      |
//! | `csvm`       | hinge                       | pairwise decomposition      |
//! | `vsvm`       | V-matrix weighted squares   | closed form                 |
//! | `lssvm`      | squares                     | bordered linear system      |
//! | `idlssvm`    | density-weighted squares    | bordered linear system      |
//!
//! Every model scores on the conditional-probability scale and is turned
//! into a label by [`crate::data::decide`].

mod closed_form;
mod csvm;
mod eps_l1;
pub mod smo;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{decide, Dataset, Scaler};
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, GramMatrix, KernelSpec};

pub use closed_form::{density_weights, fit_idlssvm, fit_lssvm, fit_vsvm, vsvm_objective};
pub use csvm::{fit_csvm, fit_csvm_with};
pub use eps_l1::{eps_dual_objective, fit_eps_l1_svm, fit_eps_l1_vsvm};

/// Classifier family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "csvm")]
    Csvm,
    #[serde(rename = "lssvm")]
    Lssvm,
    #[serde(rename = "vsvm")]
    Vsvm,
    #[serde(rename = "idlssvm")]
    Idlssvm,
    #[serde(rename = "eps-l1svm")]
    EpsL1Svm,
    #[serde(rename = "eps-l1vsvm")]
    EpsL1Vsvm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Csvm,
        Method::Lssvm,
        Method::Vsvm,
        Method::Idlssvm,
        Method::EpsL1Svm,
        Method::EpsL1Vsvm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Csvm => "csvm",
            Method::Lssvm => "lssvm",
            Method::Vsvm => "vsvm",
            Method::Idlssvm => "idlssvm",
            Method::EpsL1Svm => "eps-l1svm",
            Method::EpsL1Vsvm => "eps-l1vsvm",
        }
    }

    /// Whether the fit takes an epsilon parameter.
    pub fn uses_epsilon(&self) -> bool {
        matches!(self, Method::EpsL1Svm | Method::EpsL1Vsvm)
    }

    /// Whether the fit depends on distribution weights.
    pub fn uses_weights(&self) -> bool {
        matches!(self, Method::Vsvm | Method::EpsL1Vsvm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Parameters of the pairwise decomposition solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Tradeoff `gamma` (the `C` of the grids).
    pub gamma: f64,
    pub epsilon: f64,
    /// Stop once the maximal KKT violation is below this.
    pub tolerance: f64,
    /// Cap on pair updates.
    pub max_iter: usize,
    /// Reserved for randomized tie-breaking; the current working-set rule is
    /// deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 1.0,
            epsilon: 0.25,
            tolerance: 1e-3,
            max_iter: 100_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn new(gamma: f64, epsilon: f64) -> Self {
        SolverConfig {
            gamma,
            epsilon,
            ..Default::default()
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Kernel expansion `f(x) = Σ a_i K(x_i, x) + b` fitted by a dual solver.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualModel {
    pub method: Method,
    /// `a_i = alpha*_i - alpha_i`
    pub coefficients: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub support: DMatrix<f64>,
    pub kernel: KernelSpec,
    /// Per-sample bound on `|a_i|`.
    pub caps: Vec<f64>,
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective at the solution (maximisation form).
    pub objective: f64,
    pub scaler: Scaler,
    pub v_provenance: String,
}

impl DualModel {
    /// Assembles a model from multiplier pairs. Pairs that are both
    /// positive are netted so that `min(alpha_i, alpha*_i) == 0` holds
    /// exactly; this keeps `a_i` and the equality constraint unchanged.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_pairs(
        method: Method,
        mut alpha: Vec<f64>,
        mut alpha_star: Vec<f64>,
        bias: f64,
        data: &Dataset,
        kernel: KernelSpec,
        caps: Vec<f64>,
        epsilon: f64,
        converged: bool,
        iterations: usize,
        objective: f64,
        v_provenance: String,
    ) -> Self {
        for (a, s) in alpha.iter_mut().zip(alpha_star.iter_mut()) {
            let common = a.min(*s);
            if common > 0.0 {
                *a -= common;
                *s -= common;
            }
        }
        let coefficients: Vec<f64> = alpha_star.iter().zip(&alpha).map(|(s, a)| s - a).collect();
        debug_assert!(alpha.iter().zip(&alpha_star).all(|(a, s)| a.min(*s) == 0.0));
        DualModel {
            method,
            coefficients,
            alpha,
            alpha_star,
            bias,
            support: data.features.clone(),
            kernel,
            caps,
            epsilon,
            converged,
            iterations,
            objective,
            scaler: data.scaler.clone(),
            v_provenance,
        }
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.coefficients.iter().sum()
    }
}

/// Kernel expansion `f(x) = Σ A_i K(x_i, x) + c` from a linear system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosedFormModel {
    pub method: Method,
    pub coefficients: Vec<f64>,
    pub offset: f64,
    pub support: DMatrix<f64>,
    pub kernel: KernelSpec,
    /// Relative residual of the defining linear system.
    pub residual: f64,
    pub scaler: Scaler,
    pub v_provenance: String,
}

/// Any fitted classifier.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Dual(DualModel),
    ClosedForm(ClosedFormModel),
}

impl From<DualModel> for Model {
    fn from(m: DualModel) -> Self {
        Model::Dual(m)
    }
}

impl From<ClosedFormModel> for Model {
    fn from(m: ClosedFormModel) -> Self {
        Model::ClosedForm(m)
    }
}

impl Model {
    pub fn method(&self) -> Method {
        match self {
            Model::Dual(m) => m.method,
            Model::ClosedForm(m) => m.method,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        match self {
            Model::Dual(m) => &m.coefficients,
            Model::ClosedForm(m) => &m.coefficients,
        }
    }

    pub fn offset(&self) -> f64 {
        match self {
            Model::Dual(m) => m.bias,
            Model::ClosedForm(m) => m.offset,
        }
    }

    pub fn support(&self) -> &DMatrix<f64> {
        match self {
            Model::Dual(m) => &m.support,
            Model::ClosedForm(m) => &m.support,
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        match self {
            Model::Dual(m) => m.kernel,
            Model::ClosedForm(m) => m.kernel,
        }
    }

    pub fn scaler(&self) -> &Scaler {
        match self {
            Model::Dual(m) => &m.scaler,
            Model::ClosedForm(m) => &m.scaler,
        }
    }

    pub fn v_provenance(&self) -> &str {
        match self {
            Model::Dual(m) => &m.v_provenance,
            Model::ClosedForm(m) => &m.v_provenance,
        }
    }

    /// Scores for the rows of `x` (already scaled).
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        predict(self, x)
    }

    pub fn predict_labels(&self, x: &DMatrix<f64>) -> Result<Vec<u8>> {
        self.predict(x)?.into_iter().map(decide).collect()
    }

    /// Weight vector `w = Σ a_i x_i` of a linear-kernel model.
    pub fn linear_weights(&self) -> Result<Vec<f64>> {
        if self.kernel() != KernelSpec::Linear {
            return Err(Error::InvalidParameter(
                "linear weights need a linear kernel".into(),
            ));
        }
        let a = DVector::from_column_slice(self.coefficients());
        Ok((self.support().transpose() * a).iter().copied().collect())
    }
}

/// `scores_t = Σ_i coeff_i K(x_i, x_t) + offset`.
pub fn predict(model: &Model, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let support = model.support();
    if x.ncols() != support.ncols() {
        return Err(Error::DimensionMismatch {
            expected: support.ncols(),
            got: x.ncols(),
        });
    }
    let cross = cross_kernel(&model.kernel(), x, support)?;
    let a = DVector::from_column_slice(model.coefficients());
    let b = model.offset();
    Ok((cross * a).iter().map(|s| s + b).collect())
}

/// Serialized model file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model: Model,
}

impl ModelDocument {
    pub const VERSION: u32 = 1;

    pub fn new(model: Model) -> Self {
        ModelDocument {
            format_version: Self::VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format_version != Self::VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn check_gram(data: &Dataset, gram: &GramMatrix) -> Result<()> {
    if gram.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: gram.len(),
        });
    }
    Ok(())
}
