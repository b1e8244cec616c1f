//! Hinge-loss SVM on the shared pairwise engine.
//!
//! The raw decision function `g(x) = Σ alpha_i y_i K(x_i, x) + b` (labels
//! `±1`, threshold 0) is reported as `f = (g + 1) / 2` so that the common
//! 0.5 threshold applies.

use super::smo::{BoxQp, PairwiseSolver};
use super::{check_gram, DualModel, Method, SolverConfig};
use crate::data::Dataset;
use crate::error::Result;
use crate::kernels::GramMatrix;

pub fn fit_csvm(data: &Dataset, gram: &GramMatrix, gamma: f64) -> Result<DualModel> {
    fit_csvm_with(data, gram, &SolverConfig::new(gamma, 0.0))
}

/// As [`fit_csvm`] with explicit solver settings; `cfg.epsilon` is unused.
pub fn fit_csvm_with(data: &Dataset, gram: &GramMatrix, cfg: &SolverConfig) -> Result<DualModel> {
    cfg.validate()?;
    let gamma = cfg.gamma;
    data.check_fit_ready()?;
    check_gram(data, gram)?;
    let m = data.len();
    let sign: Vec<f64> = data
        .labels
        .iter()
        .map(|&y| if y == 1 { 1.0 } else { -1.0 })
        .collect();
    let mut solver = PairwiseSolver::new(BoxQp {
        kernel: &gram.values,
        index: (0..m).collect(),
        sign: sign.clone(),
        linear: vec![-1.0; m],
        upper: vec![gamma; m],
    });
    let converged = solver.solve(cfg.tolerance, cfg.max_iter);
    let raw_bias = solver.bias();
    let objective = -solver.objective();
    let z = solver.solution();
    let coeffs: Vec<f64> = z.iter().zip(&sign).map(|(a, s)| 0.5 * a * s).collect();
    let alpha_star = coeffs.iter().map(|c| c.max(0.0)).collect();
    let alpha = coeffs.iter().map(|c| (-c).max(0.0)).collect();
    Ok(DualModel::from_pairs(
        Method::Csvm,
        alpha,
        alpha_star,
        0.5 * (raw_bias + 1.0),
        data,
        gram.spec,
        vec![0.5 * gamma; m],
        0.0,
        converged,
        solver.iterations(),
        objective,
        String::new(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelSpec};
    use crate::solvers::Model;
    use nalgebra::DMatrix;

    #[test]
    fn separable_pair_splits_in_the_middle() {
        let raw = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let data = Dataset::from_raw("pair", raw, vec![0, 1]).unwrap();
        let k = gram(&KernelSpec::Linear, &data.features).unwrap();
        let model: Model = fit_csvm_with(&data, &k, &SolverConfig::new(1e3, 0.0).with_tolerance(1e-12)).unwrap().into();
        let labels = model.predict_labels(&data.features).unwrap();
        assert_eq!(labels, vec![0, 1]);
        let mid = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!((model.predict(&mid).unwrap()[0] - 0.5).abs() < 1e-9);
        // margin points score exactly 0 and 1 on the mapped scale
        let s = model.predict(&data.features).unwrap();
        assert!((s[0]).abs() < 1e-9 && (s[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coefficients_sum_to_zero_and_respect_caps() {
        let raw = DMatrix::from_row_slice(6, 1, &[0.0, 0.1, 0.5, 0.45, 0.9, 1.0]);
        let data = Dataset::from_raw("six", raw, vec![0, 0, 1, 0, 1, 1]).unwrap();
        let k = gram(&KernelSpec::rbf(0.3).unwrap(), &data.features).unwrap();
        let model = fit_csvm(&data, &k, 2.0).unwrap();
        assert!(model.coefficient_sum().abs() < 1e-12);
        assert!(model.coefficients.iter().all(|a| a.abs() <= 1.0 + 1e-12));
    }
}
