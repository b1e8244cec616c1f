//! Stratified k-fold splitting and cross-validated grid search.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{decide, select_rows, Dataset};
use crate::distribution::{
    v_matrix, v_vector, v_vector_scaled, Combine, MeasureSpec, VMatrix, VWeights,
};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, gmean, vac};
use crate::kernels::{gram, GKernelSpec, GramMatrix, KernelSpec};
use crate::solvers::{
    fit_csvm_with, fit_eps_l1_svm, fit_eps_l1_vsvm, fit_idlssvm, fit_lssvm, fit_vsvm, Method,
    Model, SolverConfig,
};

/// Fitting weights are floored at this value after normalization so that
/// boundary samples with a vanishing integral keep a (tiny) box.
pub const MIN_WEIGHT: f64 = 1e-6;

/// Model-selection criterion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    #[default]
    Acc,
    Vac,
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Indicator::Acc => "acc",
            Indicator::Vac => "vac",
        })
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "acc" => Ok(Indicator::Acc),
            "vac" => Ok(Indicator::Vac),
            _ => Err(Error::InvalidParameter(format!("unknown indicator {s:?}"))),
        }
    }
}

/// Family of the measure `mu`; concrete parameters come from the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuKind {
    /// Empirical distribution of the reference samples.
    #[default]
    Empirical,
    /// Uniform on the unit box.
    Uniform,
    /// Diagonal Gaussian fitted to the reference samples.
    Gaussian,
    /// Degenerate measure giving every sample weight 1.
    PointMass,
}

impl MuKind {
    pub fn measure(&self, references: &DMatrix<f64>) -> Result<MeasureSpec> {
        match self {
            MuKind::Empirical => MeasureSpec::empirical(references.clone()),
            MuKind::Uniform => Ok(MeasureSpec::unit_box(references.ncols())),
            MuKind::Gaussian => MeasureSpec::gaussian_fit(references),
            MuKind::PointMass => Ok(MeasureSpec::PointMass),
        }
    }
}

impl fmt::Display for MuKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MuKind::Empirical => "empirical",
            MuKind::Uniform => "uniform",
            MuKind::Gaussian => "gaussian",
            MuKind::PointMass => "point_mass",
        })
    }
}

impl FromStr for MuKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" => Ok(MuKind::Empirical),
            "uniform" => Ok(MuKind::Uniform),
            "gaussian" => Ok(MuKind::Gaussian),
            "point_mass" | "pointmass" | "ones" => Ok(MuKind::PointMass),
            _ => Err(Error::InvalidParameter(format!("unknown measure {s:?}"))),
        }
    }
}

/// Measure and combination rule used to turn a `G` kernel into weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub mu: MuKind,
    pub combine: Combine,
}

impl WeightSpec {
    /// Normalized weights of all rows of `samples` with `samples` as
    /// references.
    pub fn weights(&self, samples: &DMatrix<f64>, g: &GKernelSpec) -> Result<VWeights> {
        let mu = self.mu.measure(samples)?;
        v_vector(samples, g, &mu, self.combine, true)
    }

    /// Weights of `targets` sharing the normalization constant of
    /// `references`.
    pub fn weights_for(
        &self,
        references: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        g: &GKernelSpec,
    ) -> Result<VWeights> {
        let base = self.weights(references, g)?;
        let mu = self.mu.measure(references)?;
        v_vector_scaled(targets, g, &mu, self.combine, base.scale)
    }

    /// Max-normalized V-matrix of the rows of `samples`.
    pub fn matrix(&self, samples: &DMatrix<f64>, g: &GKernelSpec) -> Result<VMatrix> {
        let mu = self.mu.measure(samples)?;
        v_matrix(samples, g, &mu, self.combine)?.normalized()
    }
}

fn floor_weights(mut w: VWeights) -> VWeights {
    for v in &mut w.values {
        *v = v.max(MIN_WEIGHT);
    }
    w
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Rbf,
    Linear,
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" => Ok(KernelKind::Rbf),
            "linear" => Ok(KernelKind::Linear),
            _ => Err(Error::InvalidParameter(format!("unknown kernel {s:?}"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Linear => "linear",
        })
    }
}

/// `{2^lo, ..., 2^hi}`.
pub fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

/// Parameter grids and the cross-validation protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kernel: KernelKind,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Adds the step kernel to the `G` choices (ordered before all sigmas).
    pub include_step: bool,
    pub folds: usize,
    pub indicator: Indicator,
    pub seed: u64,
    /// How fitting weights (v-vector, V-matrix) are built.
    pub weights: WeightSpec,
    /// `G` kernel and measure for the test weights behind Vac.
    pub eval_g: GKernelSpec,
    pub eval_weights: WeightSpec,
    /// Restrict every weight reference set to the training fold.
    pub strict: bool,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Neighbour count of the density-weighted LSSVM.
    pub neighbours: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            kernel: KernelKind::Rbf,
            gammas: powers_of_two(-8, 8),
            deltas: powers_of_two(-4, 4),
            epsilons: powers_of_two(-4, -2),
            sigmas: powers_of_two(-4, 4),
            include_step: true,
            folds: 10,
            indicator: Indicator::Acc,
            seed: 0,
            weights: WeightSpec::default(),
            eval_g: GKernelSpec::Step,
            eval_weights: WeightSpec {
                mu: MuKind::Gaussian,
                combine: Combine::Product,
            },
            strict: false,
            tolerance: 1e-3,
            max_iter: 100_000,
            neighbours: 5,
        }
    }
}

fn check_axis(name: &str, values: &[f64], allow_zero: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    for v in values {
        let ok = v.is_finite() && (*v > 0.0 || (allow_zero && *v == 0.0));
        if !ok {
            return Err(Error::InvalidParameter(format!("{name} grid holds invalid value {v}")));
        }
    }
    Ok(())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        check_axis("gamma", &self.gammas, false)?;
        if self.kernel == KernelKind::Rbf {
            check_axis("delta", &self.deltas, false)?;
        }
        check_axis("epsilon", &self.epsilons, true)?;
        if !self.include_step {
            check_axis("sigma", &self.sigmas, false)?;
        } else if !self.sigmas.is_empty() {
            check_axis("sigma", &self.sigmas, false)?;
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("solver tolerance and cap must be positive".into()));
        }
        self.eval_g.validate()
    }

    /// `G` choices in tie-break order: step first, then ascending sigma.
    pub fn g_choices(&self) -> Vec<GKernelSpec> {
        let mut out = Vec::new();
        if self.include_step {
            out.push(GKernelSpec::Step);
        }
        out.extend(sorted(&self.sigmas).into_iter().map(|sigma| GKernelSpec::Gaussian { sigma }));
        out
    }

    fn kernels(&self) -> Vec<KernelSpec> {
        match self.kernel {
            KernelKind::Linear => vec![KernelSpec::Linear],
            KernelKind::Rbf => sorted(&self.deltas)
                .into_iter()
                .map(|delta| KernelSpec::Rbf { delta })
                .collect(),
        }
    }

    /// Cells relevant to `method`, ordered so that the first maximum wins
    /// ties by smaller gamma, then delta, epsilon and sigma.
    pub fn cells(&self, method: Method) -> Vec<Cell> {
        let eps = if method.uses_epsilon() {
            sorted(&self.epsilons)
        } else {
            vec![0.0]
        };
        let gs: Vec<Option<GKernelSpec>> = if method.uses_weights() {
            self.g_choices().into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let mut cells = Vec::new();
        for &gamma in &sorted(&self.gammas) {
            for kernel in self.kernels() {
                for &epsilon in &eps {
                    for g in &gs {
                        cells.push(Cell {
                            gamma,
                            kernel,
                            epsilon,
                            g: *g,
                        });
                    }
                }
            }
        }
        cells
    }

    /// Short human-readable summary for provenance headers.
    pub fn describe(&self) -> String {
        let fmt_axis = |v: &[f64]| {
            v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
        };
        format!(
            "kernel={} gammas={} deltas={} epsilons={} sigmas={} step={} folds={} indicator={} seed={} mu={} combine={} eval_g={} eval_mu={} strict={}",
            self.kernel,
            fmt_axis(&self.gammas),
            fmt_axis(&self.deltas),
            fmt_axis(&self.epsilons),
            fmt_axis(&self.sigmas),
            self.include_step,
            self.folds,
            self.indicator,
            self.seed,
            self.weights.mu,
            self.weights.combine,
            self.eval_g.label(),
            self.eval_weights.mu,
            self.strict
        )
    }

    /// Grid holding only `cell`, with every other setting kept.
    pub fn single(&self, cell: &Cell) -> GridSpec {
        let (include_step, sigmas) = match cell.g {
            Some(GKernelSpec::Step) => (true, Vec::new()),
            Some(GKernelSpec::Gaussian { sigma }) => (false, vec![sigma]),
            None => (self.include_step, self.sigmas.clone()),
        };
        GridSpec {
            kernel: match cell.kernel {
                KernelSpec::Linear => KernelKind::Linear,
                KernelSpec::Rbf { .. } => KernelKind::Rbf,
            },
            gammas: vec![cell.gamma],
            deltas: cell.delta().map_or_else(|| self.deltas.clone(), |d| vec![d]),
            epsilons: vec![cell.epsilon],
            sigmas,
            include_step,
            ..self.clone()
        }
    }

    pub fn solver_config(&self, cell: &Cell) -> SolverConfig {
        SolverConfig {
            gamma: cell.gamma,
            epsilon: cell.epsilon,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

/// One point of the parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub gamma: f64,
    pub kernel: KernelSpec,
    /// Zero for methods without a tube.
    pub epsilon: f64,
    /// `None` for methods without distribution weights.
    pub g: Option<GKernelSpec>,
}

impl Cell {
    pub fn delta(&self) -> Option<f64> {
        match self.kernel {
            KernelSpec::Rbf { delta } => Some(delta),
            KernelSpec::Linear => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma={}", self.gamma)?;
        if let Some(d) = self.delta() {
            write!(f, " delta={d}")?;
        }
        write!(f, " epsilon={}", self.epsilon)?;
        if let Some(g) = &self.g {
            write!(f, " G={}", g.label())?;
        }
        Ok(())
    }
}

/// Stratified k-fold split. Indices of each class are shuffled and dealt
/// round-robin with one counter running across classes, so fold sizes
/// differ by at most one.
pub fn kfold_split(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let m = labels.len();
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if folds > m {
        return Err(Error::InvalidParameter(format!(
            "cannot split {m} samples into {folds} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; m];
    let mut counter = 0usize;
    for class in [1u8, 0u8] {
        let mut idx: Vec<usize> = (0..m).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = counter % folds;
            counter += 1;
        }
    }
    Ok((0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect())
}

/// Stratified holdout split. Both parts keep the scaler of `data` unless
/// `train_only_scaler` is set, in which case it is refitted on the training rows.
pub fn train_test_split(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
    train_only_scaler: bool,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [1u8, 0u8] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::InvalidData(format!(
                "class {class} has {} samples; need 2 to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let pick = |rows: &[usize]| -> (DMatrix<f64>, Vec<u8>) {
        (
            select_rows(&data.raw, rows),
            rows.iter().map(|&i| data.labels[i]).collect(),
        )
    };
    let (raw, labels) = pick(&train);
    let shared = (!train_only_scaler).then_some(&data.scaler);
    let train_set =
        Dataset::from_raw_with_scaler(format!("{}-train", data.name), raw, labels, shared)?;
    let (raw, labels) = pick(&test);
    let test_set = Dataset::from_raw_with_scaler(
        format!("{}-test", data.name),
        raw,
        labels,
        Some(&train_set.scaler),
    )?;
    Ok((train_set, test_set))
}

/// Solver settings shared by every cell.
#[derive(Clone, Copy, Debug)]
pub struct FitSettings {
    pub tolerance: f64,
    pub max_iter: usize,
    pub neighbours: usize,
}

impl From<&GridSpec> for FitSettings {
    fn from(g: &GridSpec) -> Self {
        FitSettings {
            tolerance: g.tolerance,
            max_iter: g.max_iter,
            neighbours: g.neighbours,
        }
    }
}

/// Fits `method` at `cell`. `weights` must be given for the weighted
/// epsilon machine and `vmatrix` for VSVM.
pub fn fit_cell(
    method: Method,
    data: &Dataset,
    gram: &GramMatrix,
    cell: &Cell,
    weights: Option<&VWeights>,
    vmatrix: Option<&VMatrix>,
    settings: FitSettings,
) -> Result<Model> {
    let cfg = SolverConfig {
        gamma: cell.gamma,
        epsilon: cell.epsilon,
        tolerance: settings.tolerance,
        max_iter: settings.max_iter,
        seed: 0,
    };
    let missing = |what: &str| Error::InvalidParameter(format!("{method} needs {what}"));
    Ok(match method {
        Method::Csvm => fit_csvm_with(data, gram, &cfg)?.into(),
        Method::Lssvm => fit_lssvm(data, gram, cell.gamma)?.into(),
        Method::Idlssvm => fit_idlssvm(data, gram, cell.gamma, settings.neighbours)?.into(),
        Method::Vsvm => fit_vsvm(data, gram, vmatrix.ok_or_else(|| missing("a V-matrix"))?, cell.gamma)?.into(),
        Method::EpsL1Svm => fit_eps_l1_svm(data, gram, &cfg)?.into(),
        Method::EpsL1Vsvm => {
            fit_eps_l1_vsvm(data, gram, weights.ok_or_else(|| missing("a v-vector"))?, &cfg)?.into()
        }
    })
}

/// Fitting weights for the whole dataset and `G`, floored and normalized.
pub fn full_weights(features: &DMatrix<f64>, spec: &WeightSpec, g: &GKernelSpec) -> Result<VWeights> {
    spec.weights(features, g).map(floor_weights)
}

/// Scores from a precomputed kernel block `K(test, train)`.
pub fn scores_from_block(model: &Model, block: &DMatrix<f64>) -> Vec<f64> {
    let a = DVector::from_column_slice(model.coefficients());
    let b = model.offset();
    (block * a).iter().map(|s| s + b).collect()
}

/// Acc and Vac of one fold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub acc: f64,
    pub vac: f64,
    pub gmean: f64,
}

impl FoldScore {
    pub fn get(&self, indicator: Indicator) -> f64 {
        match indicator {
            Indicator::Acc => self.acc,
            Indicator::Vac => self.vac,
        }
    }
}

/// Cross-validation outcome of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    /// Per fold score or the error that invalidated the fold.
    pub folds: Vec<std::result::Result<FoldScore, String>>,
}

impl CellResult {
    pub fn is_valid(&self) -> bool {
        self.folds.iter().all(|f| f.is_ok())
    }

    /// Mean over folds; `None` for invalid cells.
    pub fn mean(&self, indicator: Indicator) -> Option<f64> {
        if !self.is_valid() {
            return None;
        }
        let n = self.folds.len() as f64;
        Some(
            self.folds
                .iter()
                .map(|f| f.as_ref().map(|s| s.get(indicator)).unwrap_or(0.0))
                .sum::<f64>()
                / n,
        )
    }
}

/// Grid-search result: the selected cell and the full score table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchResult {
    pub method: Method,
    pub indicator: Indicator,
    pub best: Cell,
    pub best_score: f64,
    pub table: Vec<CellResult>,
}

impl SearchResult {
    /// First cell with the maximal mean score under `indicator`.
    pub fn select(table: &[CellResult], indicator: Indicator) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in table.iter().enumerate() {
            if let Some(s) = r.mean(indicator) {
                if best.map_or(true, |(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
        }
        best
    }

    /// Re-selects from the same table under another indicator.
    pub fn reselect(&self, indicator: Indicator) -> Result<SearchResult> {
        let (i, s) = Self::select(&self.table, indicator).ok_or_else(all_invalid)?;
        Ok(SearchResult {
            indicator,
            best: self.table[i].cell,
            best_score: s,
            ..self.clone()
        })
    }

    pub const CSV_HEADER: &'static str = "cell,gamma,delta,epsilon,g,fold,acc,vac,gmean,status";

    /// One row per cell per fold.
    pub fn write_table<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for (i, r) in self.table.iter().enumerate() {
            let delta = r.cell.delta().map(|d| d.to_string()).unwrap_or_default();
            let g = r.cell.g.map(|g| g.label()).unwrap_or_default();
            for (f, s) in r.folds.iter().enumerate() {
                match s {
                    Ok(s) => writeln!(
                        out,
                        "{i},{},{delta},{},{g},{f},{},{},{},ok",
                        r.cell.gamma, r.cell.epsilon, s.acc, s.vac, s.gmean
                    )?,
                    Err(e) => writeln!(
                        out,
                        "{i},{},{delta},{},{g},{f},,,,\"invalid: {}\"",
                        r.cell.gamma,
                        r.cell.epsilon,
                        e.replace('"', "'")
                    )?,
                }
            }
        }
        Ok(())
    }
}

fn all_invalid() -> Error {
    Error::InvalidData("every grid cell failed".into())
}

struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
    eval_v: Vec<f64>,
}

/// Test weights for Vac, sharing the normalization constant of their
/// reference set.
fn eval_weights(data: &Dataset, grid: &GridSpec, train: &[usize], test: &[usize]) -> Result<Vec<f64>> {
    let x_test = select_rows(&data.features, test);
    let refs = if grid.strict {
        select_rows(&data.features, train)
    } else {
        data.features.clone()
    };
    Ok(grid
        .eval_weights
        .weights_for(&refs, &x_test, &grid.eval_g)?
        .values)
}

/// Cross-validated grid search.
pub fn grid_search(data: &Dataset, method: Method, grid: &GridSpec) -> Result<SearchResult> {
    grid.validate()?;
    data.check_fit_ready()?;
    let splits = kfold_split(&data.labels, grid.folds, grid.seed)?;
    let folds: Vec<Fold> = splits
        .into_iter()
        .map(|(train, test)| {
            let eval_v = eval_weights(data, grid, &train, &test)?;
            Ok(Fold { train, test, eval_v })
        })
        .collect::<Result<_>>()?;

    let kernels = grid.kernels();
    let grams: Vec<GramMatrix> = kernels
        .par_iter()
        .map(|k| gram(k, &data.features))
        .collect::<Result<_>>()?;
    let cells = grid.cells(method);
    let g_axis: Vec<Option<GKernelSpec>> = if method.uses_weights() {
        grid.g_choices().into_iter().map(Some).collect()
    } else {
        vec![None]
    };

    // transductive weights are shared by all folds
    let shared: Vec<std::result::Result<(Option<VWeights>, Option<VMatrix>), String>> =
        if grid.strict {
            Vec::new()
        } else {
            g_axis
                .par_iter()
                .map(|g| weights_for_method(method, &data.features, &grid.weights, g.as_ref()))
                .map(|r| r.map_err(|e| e.to_string()))
                .collect()
        };

    let settings = FitSettings::from(grid);
    let units: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..g_axis.len()).map(move |g| (f, g)))
        .collect();
    let outcomes: Vec<Vec<(usize, usize, std::result::Result<FoldScore, String>)>> = units
        .par_iter()
        .map(|&(f, gi)| {
            let fold = &folds[f];
            let g = g_axis[gi];
            let train_data = data.subset(&fold.train);
            let weights = if grid.strict {
                weights_for_method(method, &train_data.features, &grid.weights, g.as_ref())
                    .map_err(|e| e.to_string())
            } else {
                shared[gi].clone().map(|(v, vm)| {
                    (
                        v.map(|v| v.select(&fold.train)),
                        vm.map(|vm| vm.subset(&fold.train)),
                    )
                })
            };
            let mut out = Vec::new();
            for (ci, cell) in cells.iter().enumerate().filter(|(_, c)| c.g == g) {
                let ki = kernels.iter().position(|k| *k == cell.kernel).unwrap_or(0);
                let result = match &weights {
                    Err(e) => Err(e.clone()),
                    Ok((v, vm)) => evaluate_fold(
                        method,
                        data,
                        &train_data,
                        &grams[ki],
                        fold,
                        cell,
                        v.as_ref(),
                        vm.as_ref(),
                        settings,
                    )
                    .map_err(|e| e.to_string()),
                };
                out.push((ci, f, result));
            }
            out
        })
        .collect();

    let mut table: Vec<CellResult> = cells
        .iter()
        .map(|c| CellResult {
            cell: *c,
            folds: vec![Err("not evaluated".into()); folds.len()],
        })
        .collect();
    for (ci, f, r) in outcomes.into_iter().flatten() {
        table[ci].folds[f] = r;
    }
    let (i, s) = SearchResult::select(&table, grid.indicator).ok_or_else(all_invalid)?;
    Ok(SearchResult {
        method,
        indicator: grid.indicator,
        best: table[i].cell,
        best_score: s,
        table,
    })
}

/// Fitting weights needed by `method` for the rows of `features`.
pub fn weights_for_method(
    method: Method,
    features: &DMatrix<f64>,
    spec: &WeightSpec,
    g: Option<&GKernelSpec>,
) -> Result<(Option<VWeights>, Option<VMatrix>)> {
    let Some(g) = g else {
        return Ok((None, None));
    };
    match method {
        Method::EpsL1Vsvm => Ok((Some(full_weights(features, spec, g)?), None)),
        Method::Vsvm => Ok((None, Some(spec.matrix(features, g)?))),
        _ => Ok((None, None)),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_fold(
    method: Method,
    data: &Dataset,
    train_data: &Dataset,
    full_gram: &GramMatrix,
    fold: &Fold,
    cell: &Cell,
    v: Option<&VWeights>,
    vm: Option<&VMatrix>,
    settings: FitSettings,
) -> Result<FoldScore> {
    let k_train = full_gram.subset(&fold.train);
    let model = fit_cell(method, train_data, &k_train, cell, v, vm, settings)?;
    let block = full_gram.block(&fold.test, &fold.train);
    let predicted: Vec<u8> = scores_from_block(&model, &block)
        .into_iter()
        .map(decide)
        .collect::<Result<_>>()?;
    let truth: Vec<u8> = fold.test.iter().map(|&i| data.labels[i]).collect();
    Ok(FoldScore {
        acc: accuracy(&truth, &predicted)?,
        vac: vac(&truth, &predicted, &fold.eval_v)?,
        gmean: gmean(&truth, &predicted)?,
    })
}
