//! Weighted epsilon-insensitive kernel machine.
//!
//! Dual problem, with `a = alpha* - alpha`:
//!
//! ```text
//! max  a'Y - eps (alpha* + alpha)'1 - 1/2 a'Ka
//! s.t. a'1 = 0,   0 <= alpha_i, alpha*_i <= gamma v_i
//! ```
//!
//! `alpha_i` belongs to the constraint `f(x_i) - y_i <= eps + xi_i` and
//! `alpha*_i` to `y_i - f(x_i) <= eps + xi*_i`.

use nalgebra::{DMatrix, DVector};

use super::smo::{BoxQp, PairwiseSolver};
use super::{check_gram, DualModel, Method, SolverConfig};
use crate::data::Dataset;
use crate::distribution::VWeights;
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;

/// Dual objective in maximisation form.
pub fn eps_dual_objective(
    kernel: &DMatrix<f64>,
    targets: &[f64],
    epsilon: f64,
    alpha: &[f64],
    alpha_star: &[f64],
) -> f64 {
    let a = DVector::from_iterator(
        alpha.len(),
        alpha_star.iter().zip(alpha).map(|(s, a)| s - a),
    );
    let linear: f64 = a.iter().zip(targets).map(|(a, y)| a * y).sum();
    let l1: f64 = alpha.iter().chain(alpha_star).sum();
    linear - epsilon * l1 - 0.5 * a.dot(&(kernel * &a))
}

/// Fits the v-weighted machine; per-sample caps are `gamma * v_i`.
pub fn fit_eps_l1_vsvm(
    data: &Dataset,
    gram: &GramMatrix,
    v: &VWeights,
    cfg: &SolverConfig,
) -> Result<DualModel> {
    fit_weighted(Method::EpsL1Vsvm, data, gram, v, cfg)
}

/// Unweighted special case, `v = 1`.
pub fn fit_eps_l1_svm(data: &Dataset, gram: &GramMatrix, cfg: &SolverConfig) -> Result<DualModel> {
    fit_weighted(Method::EpsL1Svm, data, gram, &VWeights::ones(data.len()), cfg)
}

fn fit_weighted(
    method: Method,
    data: &Dataset,
    gram: &GramMatrix,
    v: &VWeights,
    cfg: &SolverConfig,
) -> Result<DualModel> {
    cfg.validate()?;
    data.check_fit_ready()?;
    check_gram(data, gram)?;
    let m = data.len();
    if v.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: v.len(),
        });
    }
    if let Some(bad) = v.values.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "distribution weights must be positive, got {bad}"
        )));
    }
    let y = data.targets();
    let caps: Vec<f64> = v.values.iter().map(|w| cfg.gamma * w).collect();

    // variables 0..m are alpha*, m..2m are alpha
    let mut index: Vec<usize> = (0..m).collect();
    index.extend(0..m);
    let mut sign = vec![1.0; m];
    sign.extend(std::iter::repeat(-1.0).take(m));
    let mut linear: Vec<f64> = y.iter().map(|yi| cfg.epsilon - yi).collect();
    linear.extend(y.iter().map(|yi| cfg.epsilon + yi));
    let mut upper = caps.clone();
    upper.extend_from_slice(&caps);

    let mut solver = PairwiseSolver::new(BoxQp {
        kernel: &gram.values,
        index,
        sign,
        linear,
        upper,
    });
    let converged = solver.solve(cfg.tolerance, cfg.max_iter);
    let bias = solver.bias();
    let z = solver.solution();
    let alpha_star = z[..m].to_vec();
    let alpha = z[m..].to_vec();
    let objective = eps_dual_objective(&gram.values, &y, cfg.epsilon, &alpha, &alpha_star);
    Ok(DualModel::from_pairs(
        method,
        alpha,
        alpha_star,
        bias,
        data,
        gram.spec,
        caps,
        cfg.epsilon,
        converged,
        solver.iterations(),
        objective,
        v.provenance(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelSpec};
    use crate::solvers::Model;

    fn line_data(xs: &[f64], ys: &[u8]) -> Dataset {
        let raw = DMatrix::from_column_slice(xs.len(), 1, xs);
        Dataset::from_raw("line", raw, ys.to_vec()).unwrap()
    }

    #[test]
    fn wide_tube_gives_empty_active_set() {
        let data = line_data(&[0.0, 0.3, 0.6, 1.0], &[0, 1, 0, 1]);
        let k = gram(&KernelSpec::rbf(0.5).unwrap(), &data.features).unwrap();
        let model = fit_eps_l1_svm(&data, &k, &SolverConfig::new(4.0, 1.0)).unwrap();
        assert!(model.coefficients.iter().all(|&a| a == 0.0));
        // any b in [max(y) - eps, min(y) + eps] = [0, 1]; the midpoint is chosen
        assert!((model.bias - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_points_land_on_tube_boundary() {
        let data = line_data(&[0.0, 1.0], &[0, 1]);
        let k = gram(&KernelSpec::Linear, &data.features).unwrap();
        let cfg = SolverConfig::new(100.0, 0.25).with_tolerance(1e-12);
        let model = fit_eps_l1_svm(&data, &k, &cfg).unwrap();
        let scores = Model::Dual(model.clone()).predict(&data.features).unwrap();
        assert!((scores[0] - 0.25).abs() < 1e-9, "{scores:?}");
        assert!((scores[1] - 0.75).abs() < 1e-9, "{scores:?}");
        // w = 0.5 from a_2 = 0.5, a_1 = -0.5; objective 0.5 - 0.25 - 0.125
        assert!((model.objective - 0.125).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_weights_and_single_class() {
        let data = line_data(&[0.0, 0.5, 1.0], &[0, 1, 1]);
        let k = gram(&KernelSpec::Linear, &data.features).unwrap();
        let mut v = VWeights::ones(3);
        v.values[1] = 0.0;
        assert!(fit_eps_l1_vsvm(&data, &k, &v, &SolverConfig::default()).is_err());
        v.values.pop();
        assert!(fit_eps_l1_vsvm(&data, &k, &v, &SolverConfig::default()).is_err());
        let one = line_data(&[0.0, 0.5, 1.0], &[1, 1, 1]);
        assert!(fit_eps_l1_svm(&one, &k, &SolverConfig::default()).is_err());
        assert!(fit_eps_l1_svm(&data, &k, &SolverConfig::new(0.0, 0.1)).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let ys: Vec<u8> = (0..20).map(|i| (i % 3 == 0) as u8).collect();
        let data = line_data(&xs, &ys);
        let k = gram(&KernelSpec::rbf(0.1).unwrap(), &data.features).unwrap();
        let mut cfg = SolverConfig::new(10.0, 0.0625).with_tolerance(1e-12);
        cfg.max_iter = 2;
        let model = fit_eps_l1_svm(&data, &k, &cfg).unwrap();
        assert!(!model.converged);
        assert_eq!(model.iterations, 2);
    }
}
