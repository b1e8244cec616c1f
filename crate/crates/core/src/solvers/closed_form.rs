//! Least-squares family: VSVM, LSSVM and the density-weighted LSSVM.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use super::{check_gram, ClosedFormModel, Method};
use crate::data::Dataset;
use crate::distribution::VMatrix;
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;

const MAX_CONDITION: f64 = 1e14;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

fn relative(residual: f64, rhs: f64) -> f64 {
    residual / rhs.max(f64::MIN_POSITIVE)
}

/// `(KA + c1 - Y)' V (KA + c1 - Y) + gamma A'KA`
pub fn vsvm_objective(
    k: &DMatrix<f64>,
    v: &DMatrix<f64>,
    y: &[f64],
    gamma: f64,
    a: &[f64],
    c: f64,
) -> f64 {
    let a = DVector::from_column_slice(a);
    let ka = k * &a;
    let r = DVector::from_iterator(y.len(), ka.iter().zip(y).map(|(f, y)| f + c - y));
    r.dot(&(v * &r)) + gamma * a.dot(&ka)
}

fn lu_solve(lu: &LU<f64, Dyn, Dyn>, m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let mut x = lu.solve(rhs)?;
    // one round of iterative refinement
    let r = rhs - m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Some(x)
}

/// Closed-form VSVM: `A = A_b - c A_c` with `A_b = (VK + gamma I)^-1 V Y`,
/// `A_c = (VK + gamma I)^-1 V 1` and
/// `c = 1'V(K A_b - Y) / 1'V(K A_c - 1)`.
pub fn fit_vsvm(
    data: &Dataset,
    gram: &GramMatrix,
    v: &VMatrix,
    gamma: f64,
) -> Result<ClosedFormModel> {
    check_gamma(gamma)?;
    check_gram(data, gram)?;
    let m = data.len();
    if v.values.nrows() != m || v.values.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: v.values.nrows(),
        });
    }
    let k = &gram.values;
    let vm = &v.values;
    let system = vm * k + DMatrix::identity(m, m) * gamma;
    let lu = system.clone().lu();
    let diag = lu.u().diagonal();
    let dmax = diag.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let dmin = diag.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
    let condition = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let y = DVector::from_vec(data.targets());
    let ones = DVector::from_element(m, 1.0);
    let vy = vm * &y;
    let v1 = vm * &ones;
    let a_b = lu_solve(&lu, &system, &vy).ok_or(Error::Singular { condition })?;
    let a_c = lu_solve(&lu, &system, &v1).ok_or(Error::Singular { condition })?;
    let num = ones.dot(&(vm * (k * &a_b - &y)));
    let den = ones.dot(&(vm * (k * &a_c - &ones)));
    if !(den.abs() > f64::EPSILON * (1.0 + num.abs())) {
        return Err(Error::Singular { condition });
    }
    let c = num / den;
    let a = &a_b - &a_c * c;
    let rhs = vm * (&y - &ones * c);
    let residual = relative((&system * &a - &rhs).norm(), rhs.norm().max(vy.norm()));
    if !(residual < 1e-8) || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { condition });
    }
    Ok(ClosedFormModel {
        method: Method::Vsvm,
        coefficients: a.iter().copied().collect(),
        offset: c,
        support: data.features.clone(),
        kernel: gram.spec,
        residual,
        scaler: data.scaler.clone(),
        v_provenance: format!("V-matrix G={} mu={}", v.g_spec.label(), v.mu),
    })
}

/// Solves `(K + diag(reg)) alpha + b 1 = Y`, `1'alpha = 0` through the
/// Cholesky factor of the regularized kernel.
fn bordered_solve(
    method: Method,
    data: &Dataset,
    gram: &GramMatrix,
    reg: &[f64],
) -> Result<ClosedFormModel> {
    let m = data.len();
    let mut h = gram.values.clone();
    for (i, r) in reg.iter().enumerate() {
        h[(i, i)] += r;
    }
    let chol = Cholesky::new(h.clone()).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let y = DVector::from_vec(data.targets());
    let ones = DVector::from_element(m, 1.0);
    let eta = chol.solve(&ones);
    let nu = chol.solve(&y);
    let s = ones.dot(&eta);
    if !(s > 0.0) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let b = ones.dot(&nu) / s;
    let alpha = &nu - &eta * b;
    let r = &h * &alpha + &ones * b - &y;
    let residual = relative(
        (r.norm_squared() + alpha.sum().powi(2)).sqrt(),
        y.norm(),
    );
    if !(residual < 1e-8) || alpha.iter().any(|v| !v.is_finite()) {
        let l = chol.l();
        let d = l.diagonal();
        let dmax = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let dmin = d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        return Err(Error::Singular {
            condition: (dmax / dmin).powi(2),
        });
    }
    Ok(ClosedFormModel {
        method,
        coefficients: alpha.iter().copied().collect(),
        offset: b,
        support: data.features.clone(),
        kernel: gram.spec,
        residual,
        scaler: data.scaler.clone(),
        v_provenance: String::new(),
    })
}

/// Least-squares SVM: `(K + I/gamma) alpha + b 1 = Y`, `1'alpha = 0`.
pub fn fit_lssvm(data: &Dataset, gram: &GramMatrix, gamma: f64) -> Result<ClosedFormModel> {
    check_gamma(gamma)?;
    data.check_fit_ready()?;
    check_gram(data, gram)?;
    bordered_solve(Method::Lssvm, data, gram, &vec![1.0 / gamma; data.len()])
}

/// Density weight of each sample: `exp(-mean_sq_knn / d)` where the mean runs
/// over the squared distances to its `k` nearest neighbours of the same
/// class.
pub fn density_weights(data: &Dataset, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("neighbour count must be positive".into()));
    }
    let (neg, pos) = data.class_counts();
    if neg <= k || pos <= k {
        return Err(Error::InvalidData(format!(
            "each class needs more than {k} samples, got {neg} and {pos}"
        )));
    }
    let d = data.dim() as f64;
    let x = &data.features;
    let m = data.len();
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let mut dists: Vec<f64> = (0..m)
            .filter(|&j| j != i && data.labels[j] == data.labels[i])
            .map(|j| (x.row(i) - x.row(j)).norm_squared())
            .collect();
        dists.sort_by(f64::total_cmp);
        let mean = dists[..k].iter().sum::<f64>() / k as f64;
        weights.push((-mean / d).exp());
    }
    Ok(weights)
}

/// Density-weighted LSSVM: `(K + diag(1/(gamma rho))) alpha + b 1 = Y`.
pub fn fit_idlssvm(
    data: &Dataset,
    gram: &GramMatrix,
    gamma: f64,
    k: usize,
) -> Result<ClosedFormModel> {
    check_gamma(gamma)?;
    data.check_fit_ready()?;
    check_gram(data, gram)?;
    let rho = density_weights(data, k)?;
    let reg: Vec<f64> = rho.iter().map(|r| 1.0 / (gamma * r)).collect();
    bordered_solve(Method::Idlssvm, data, gram, &reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{v_matrix, Combine, MeasureSpec};
    use crate::kernels::{gram, GKernelSpec, KernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, m: usize, d: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(m, d, |_, _| rng.gen::<f64>());
        let labels = (0..m).map(|i| (i % 2) as u8).collect();
        Dataset::from_raw("rand", raw, labels).unwrap()
    }

    fn identity_v(m: usize) -> VMatrix {
        VMatrix {
            values: DMatrix::identity(m, m),
            g_spec: GKernelSpec::Step,
            mu: "point_mass".into(),
        }
    }

    #[test]
    fn vsvm_all_one_class_fits_constant() {
        let mut data = random_data(1, 5, 2);
        data.labels = vec![1; 5];
        let k = gram(&KernelSpec::rbf(0.5).unwrap(), &data.features).unwrap();
        let model = fit_vsvm(&data, &k, &identity_v(5), 0.1).unwrap();
        assert!((model.offset - 1.0).abs() < 1e-12);
        assert!(model.coefficients.iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn vsvm_is_stationary() {
        for seed in 0..5 {
            let data = random_data(seed, 5, 2);
            let k = gram(&KernelSpec::rbf(0.7).unwrap(), &data.features).unwrap();
            let vm = v_matrix(
                &data.features,
                &GKernelSpec::gaussian(0.5).unwrap(),
                &MeasureSpec::unit_box(2),
                Combine::Product,
            )
            .unwrap()
            .normalized()
            .unwrap();
            let gamma = 0.3;
            let model = fit_vsvm(&data, &k, &vm, gamma).unwrap();
            let y = data.targets();
            let f = |a: &[f64], c: f64| vsvm_objective(&k.values, &vm.values, &y, gamma, a, c);
            let h = 1e-5;
            let mut a = model.coefficients.clone();
            for i in 0..a.len() {
                let orig = a[i];
                a[i] = orig + h;
                let up = f(&a, model.offset);
                a[i] = orig - h;
                let down = f(&a, model.offset);
                a[i] = orig;
                assert!(((up - down) / (2.0 * h)).abs() < 1e-6);
            }
            let dc = (f(&a, model.offset + h) - f(&a, model.offset - h)) / (2.0 * h);
            assert!(dc.abs() < 1e-6);
        }
    }

    #[test]
    fn lssvm_symmetric_pair() {
        let raw = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let data = Dataset::from_raw("pair", raw, vec![0, 1]).unwrap();
        let k = gram(&KernelSpec::rbf(1.0).unwrap(), &data.features).unwrap();
        let model = fit_lssvm(&data, &k, 3.0).unwrap();
        assert!((model.offset - 0.5).abs() < 1e-12);
        assert!((model.coefficients[0] + model.coefficients[1]).abs() < 1e-12);
    }

    #[test]
    fn lssvm_large_gamma_interpolates() {
        let data = random_data(4, 8, 2);
        let k = gram(&KernelSpec::rbf(0.3).unwrap(), &data.features).unwrap();
        let model = fit_lssvm(&data, &k, 1e9).unwrap();
        let scores = crate::solvers::Model::ClosedForm(model)
            .predict(&data.features)
            .unwrap();
        for (s, y) in scores.iter().zip(data.targets()) {
            assert!((s - y).abs() < 1e-6);
        }
    }

    #[test]
    fn lssvm_residual_small() {
        let data = random_data(6, 6, 3);
        let k = gram(&KernelSpec::rbf(0.5).unwrap(), &data.features).unwrap();
        let model = fit_lssvm(&data, &k, 2.0).unwrap();
        // recompute the bordered residual independently
        let mut big = DMatrix::zeros(7, 7);
        for i in 0..6 {
            big[(0, i + 1)] = 1.0;
            big[(i + 1, 0)] = 1.0;
            for j in 0..6 {
                big[(i + 1, j + 1)] = k.values[(i, j)] + if i == j { 0.5 } else { 0.0 };
            }
        }
        let mut sol = vec![model.offset];
        sol.extend(&model.coefficients);
        let mut rhs = vec![0.0];
        rhs.extend(data.targets());
        let r = big * DVector::from_vec(sol) - DVector::from_vec(rhs);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn idlssvm_simplex_matches_lssvm() {
        let m = 12;
        let raw = DMatrix::identity(m, m);
        let labels = (0..m).map(|i| u8::from(i >= 6)).collect();
        let data = Dataset::from_raw("simplex", raw, labels).unwrap();
        let rho = density_weights(&data, 5).unwrap();
        assert!(rho.iter().all(|&r| (r - rho[0]).abs() < 1e-15));
        let k = gram(&KernelSpec::rbf(1.0).unwrap(), &data.features).unwrap();
        let id = fit_idlssvm(&data, &k, 2.0, 5).unwrap();
        let ls = fit_lssvm(&data, &k, 2.0 * rho[0]).unwrap();
        for (a, b) in id.coefficients.iter().zip(&ls.coefficients) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((id.offset - ls.offset).abs() < 1e-12);
    }

    #[test]
    fn idlssvm_outlier_has_lowest_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut raw = DMatrix::from_fn(12, 2, |_, _| 0.4 + 0.1 * rng.gen::<f64>());
        raw[(3, 0)] = 5.0;
        raw[(3, 1)] = 5.0;
        // pin the scaler so the outlier does not squash the rest
        let labels: Vec<u8> = (0..12).map(|i| u8::from(i >= 6)).collect();
        let data = Dataset::from_raw("outlier", raw, labels).unwrap();
        let rho = density_weights(&data, 5).unwrap();
        let min = (0..12).min_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap();
        assert_eq!(min, 3);
    }

    #[test]
    fn idlssvm_random_residual_and_errors() {
        let data = random_data(12, 12, 2);
        let k = gram(&KernelSpec::rbf(0.5).unwrap(), &data.features).unwrap();
        let model = fit_idlssvm(&data, &k, 4.0, 5).unwrap();
        assert!(model.residual < 1e-10);
        let small = random_data(3, 10, 2);
        let ks = gram(&KernelSpec::Linear, &small.features).unwrap();
        assert!(fit_idlssvm(&small, &ks, 1.0, 5).is_err());
    }
}
