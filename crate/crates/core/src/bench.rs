//! Experiment drivers: Bayes-boundary recovery, benchmark tables and the
//! one-dimensional robustness curves.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::datagen::{
    bayes_posterior, gen_gaussian_2d, gen_robustness_1d, GaussianSpec2D, Robustness1DSpec,
};
use crate::error::{Error, Result};
use crate::evaluation::{boundary_from_linear, line_stats, BoundaryLine, LineStats};
use crate::kernels::gram;
use crate::modelsel::{
    fit_cell, grid_search, weights_for_method, Cell, FitSettings, GridSpec, Indicator, KernelKind,
};
use crate::solvers::{Method, Model};
use crate::THRESHOLD;

/// Per-repetition seeds drawn from one master seed.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.gen()).collect()
}

/// Fits `method` at `cell` on the whole dataset, building weights from all
/// of its samples.
pub fn fit_selected(data: &Dataset, method: Method, cell: &Cell, grid: &GridSpec) -> Result<Model> {
    let k = gram(&cell.kernel, &data.features)?;
    let (v, vm) = weights_for_method(method, &data.features, &grid.weights, cell.g.as_ref())?;
    fit_cell(method, data, &k, cell, v.as_ref(), vm.as_ref(), FitSettings::from(grid))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BayesBenchConfig {
    pub spec: GaussianSpec2D,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub indicators: Vec<Indicator>,
    /// Adds a column holding the analytic Bayes line.
    pub include_oracle: bool,
    /// Must use the linear kernel.
    pub grid: GridSpec,
    pub seed: u64,
}

impl Default for BayesBenchConfig {
    fn default() -> Self {
        BayesBenchConfig {
            spec: GaussianSpec2D::default(),
            repetitions: 100,
            methods: Method::ALL.to_vec(),
            indicators: vec![Indicator::Acc, Indicator::Vac],
            include_oracle: false,
            grid: GridSpec {
                kernel: KernelKind::Linear,
                ..GridSpec::default()
            },
            seed: 0,
        }
    }
}

/// One fitted line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BayesRun {
    pub column: String,
    pub indicator: Indicator,
    pub rep: usize,
    pub seed: u64,
    pub line: std::result::Result<BoundaryLine, String>,
    pub cell: Option<Cell>,
}

/// Summary of one (method, indicator) column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BayesColumn {
    pub column: String,
    pub indicator: Indicator,
    pub stats: Option<LineStats>,
    pub succeeded: usize,
    pub failed: usize,
    pub first_error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BayesReport {
    pub bayes_line: (f64, f64),
    pub runs: Vec<BayesRun>,
    pub columns: Vec<BayesColumn>,
}

impl BayesReport {
    pub fn column(&self, name: &str, indicator: Indicator) -> Option<&BayesColumn> {
        self.columns
            .iter()
            .find(|c| c.column == name && c.indicator == indicator)
    }

    /// Aligned text table: one row per column with Dist, slope and intercept.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:<5} {:>9} {:>16} {:>18} {:>6}",
            "method", "ind", "dist", "slope", "intercept", "fails"
        );
        for c in &self.columns {
            match &c.stats {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{:<12} {:<5} {:>9.4} {:>16} {:>18} {:>6}",
                        c.column,
                        c.indicator,
                        s.dist,
                        format!("{:.2}±{:.2}", s.slope_mean, s.slope_sd),
                        format!("{:.4}±{:.2}", s.intercept_mean, s.intercept_sd),
                        c.failed
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{:<12} {:<5} {:>9} {:>16} {:>18} {:>6}  aborted: {}",
                        c.column,
                        c.indicator,
                        "-",
                        "-",
                        "-",
                        c.failed,
                        c.first_error.as_deref().unwrap_or("too few runs")
                    );
                }
            }
        }
        out
    }

    /// Per-repetition `(k, q)` pairs.
    pub fn write_runs<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "method,indicator,rep,seed,slope,intercept,cell,status")?;
        for r in &self.runs {
            let cell = r.cell.map(|c| c.to_string()).unwrap_or_default();
            match &r.line {
                Ok(l) => writeln!(
                    out,
                    "{},{},{},{},{},{},\"{}\",ok",
                    r.column, r.indicator, r.rep, r.seed, l.slope, l.intercept, cell
                )?,
                Err(e) => writeln!(
                    out,
                    "{},{},{},{},,,\"{}\",\"failed: {}\"",
                    r.column,
                    r.indicator,
                    r.rep,
                    r.seed,
                    cell,
                    e.replace('"', "'")
                )?,
            }
        }
        Ok(())
    }
}

/// Label of the analytic Bayes column.
pub const ORACLE: &str = "bayes";

fn bayes_rep(
    cfg: &BayesBenchConfig,
    rep: usize,
    seed: u64,
) -> Vec<BayesRun> {
    let mut runs = Vec::new();
    let spec = GaussianSpec2D {
        seed,
        ..cfg.spec.clone()
    };
    if cfg.include_oracle {
        let line = spec
            .bayes_line()
            .map(|(slope, intercept)| BoundaryLine { slope, intercept })
            .map_err(|e| e.to_string());
        for &indicator in &cfg.indicators {
            runs.push(BayesRun {
                column: ORACLE.into(),
                indicator,
                rep,
                seed,
                line: line.clone(),
                cell: None,
            });
        }
    }
    let data = match gen_gaussian_2d(&spec) {
        Ok(d) => d,
        Err(e) => {
            for &m in &cfg.methods {
                for &indicator in &cfg.indicators {
                    runs.push(BayesRun {
                        column: m.name().into(),
                        indicator,
                        rep,
                        seed,
                        line: Err(e.to_string()),
                        cell: None,
                    });
                }
            }
            return runs;
        }
    };
    let grid = GridSpec {
        seed,
        ..cfg.grid.clone()
    };
    for &method in &cfg.methods {
        let search = grid_search(&data, method, &grid);
        for &indicator in &cfg.indicators {
            let chosen = search
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|s| s.reselect(indicator).map_err(|e| e.to_string()));
            let (line, cell) = match chosen {
                Ok(sel) => {
                    let line = fit_selected(&data, method, &sel.best, &grid)
                        .and_then(|m| boundary_from_linear(&m, THRESHOLD))
                        .map_err(|e| e.to_string());
                    (line, Some(sel.best))
                }
                Err(e) => (Err(e), None),
            };
            runs.push(BayesRun {
                column: method.name().into(),
                indicator,
                rep,
                seed,
                line,
                cell,
            });
        }
    }
    runs
}

/// Repeats sampling, cross-validated selection and a full fit, and
/// summarizes the fitted lines against the Bayes line.
pub fn bench_bayes(cfg: &BayesBenchConfig) -> Result<BayesReport> {
    if cfg.grid.kernel != KernelKind::Linear {
        return Err(Error::InvalidParameter(
            "the boundary benchmark needs the linear kernel".into(),
        ));
    }
    if cfg.repetitions < 2 {
        return Err(Error::InvalidParameter("need at least 2 repetitions".into()));
    }
    if cfg.indicators.is_empty() {
        return Err(Error::InvalidParameter("no indicator requested".into()));
    }
    cfg.grid.validate()?;
    let bayes_line = cfg.spec.bayes_line()?;
    let seeds = derive_seeds(cfg.seed, cfg.repetitions);
    let runs: Vec<BayesRun> = seeds
        .par_iter()
        .enumerate()
        .map(|(rep, &seed)| bayes_rep(cfg, rep, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut names: Vec<String> = Vec::new();
    if cfg.include_oracle {
        names.push(ORACLE.into());
    }
    names.extend(cfg.methods.iter().map(|m| m.name().to_string()));
    let mut columns = Vec::new();
    for name in &names {
        for &indicator in &cfg.indicators {
            let mine: Vec<&BayesRun> = runs
                .iter()
                .filter(|r| &r.column == name && r.indicator == indicator)
                .collect();
            let ok: Vec<BoundaryLine> = mine.iter().filter_map(|r| r.line.clone().ok()).collect();
            let failed = mine.len() - ok.len();
            let first_error = mine.iter().find_map(|r| r.line.clone().err());
            // a column with a majority of failed repetitions is abandoned
            let stats = if ok.len() >= 2 && failed * 2 <= mine.len() {
                let ks: Vec<f64> = ok.iter().map(|l| l.slope).collect();
                let qs: Vec<f64> = ok.iter().map(|l| l.intercept).collect();
                line_stats(&ks, &qs, bayes_line.0, bayes_line.1).ok()
            } else {
                None
            };
            columns.push(BayesColumn {
                column: name.clone(),
                indicator,
                stats,
                succeeded: ok.len(),
                failed,
                first_error,
            });
        }
    }
    Ok(BayesReport {
        bayes_line,
        runs,
        columns,
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Result of one (dataset, method) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchCell {
    pub method: Method,
    pub best: Option<Cell>,
    pub gmean: (f64, f64),
    pub acc: (f64, f64),
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub cells: Vec<BenchCell>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<Method>,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn push_warning(&mut self, dataset: &str, msg: &str) {
        self.rows.push(BenchRow {
            dataset: dataset.into(),
            cells: Vec::new(),
            warning: Some(msg.into()),
        });
    }

    pub fn cell(&self, dataset: &str, method: Method) -> Option<&BenchCell> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset)?
            .cells
            .iter()
            .find(|c| c.method == method)
    }

    /// `G-mean±sd(Acc)` in percent, one row per dataset.
    pub fn table(&self) -> String {
        let width = 22;
        let mut out = format!("{:<14}", "dataset");
        for m in &self.methods {
            let _ = write!(out, " {:>width$}", m.name());
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<14}", r.dataset);
            if let Some(w) = &r.warning {
                let _ = writeln!(out, " skipped: {w}");
                continue;
            }
            for c in &r.cells {
                let text = match &c.error {
                    Some(_) => "failed".to_string(),
                    None => format!(
                        "{:.2}±{:.2}({:.2})",
                        100.0 * c.gmean.0,
                        100.0 * c.gmean.1,
                        100.0 * c.acc.0
                    ),
                };
                let _ = write!(out, " {text:>width$}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "dataset,method,gmean,gmean_sd,acc,acc_sd,cell,status")?;
        for r in &self.rows {
            if let Some(w) = &r.warning {
                writeln!(out, "{},,,,,,,\"skipped: {}\"", r.dataset, w.replace('"', "'"))?;
                continue;
            }
            for c in &r.cells {
                let cell = c.best.map(|c| c.to_string()).unwrap_or_default();
                match &c.error {
                    None => writeln!(
                        out,
                        "{},{},{},{},{},{},\"{}\",ok",
                        r.dataset, c.method, c.gmean.0, c.gmean.1, c.acc.0, c.acc.1, cell
                    )?,
                    Some(e) => writeln!(
                        out,
                        "{},{},,,,,\"{}\",\"failed: {}\"",
                        r.dataset,
                        c.method,
                        cell,
                        e.replace('"', "'")
                    )?,
                }
            }
        }
        Ok(())
    }
}

/// Grid search followed by a fresh k-fold evaluation of the chosen cell.
pub fn bench_dataset(data: &Dataset, method: Method, grid: &GridSpec) -> BenchCell {
    let run = || -> Result<(Cell, Vec<crate::modelsel::FoldScore>)> {
        let search = grid_search(data, method, grid)?;
        let eval_grid = GridSpec {
            seed: grid.seed.wrapping_add(1),
            ..grid.single(&search.best)
        };
        let eval = grid_search(data, method, &eval_grid)?;
        let scores = eval.table[0]
            .folds
            .iter()
            .map(|f| f.clone().map_err(Error::InvalidData))
            .collect::<Result<Vec<_>>>()?;
        Ok((search.best, scores))
    };
    match run() {
        Ok((best, scores)) => {
            let g: Vec<f64> = scores.iter().map(|s| s.gmean).collect();
            let a: Vec<f64> = scores.iter().map(|s| s.acc).collect();
            BenchCell {
                method,
                best: Some(best),
                gmean: mean_sd(&g),
                acc: mean_sd(&a),
                error: None,
            }
        }
        Err(e) => BenchCell {
            method,
            best: None,
            gmean: (f64::NAN, f64::NAN),
            acc: (f64::NAN, f64::NAN),
            error: Some(e.to_string()),
        },
    }
}

/// Benchmark table over datasets and methods.
pub fn bench_uci(datasets: &[Dataset], methods: &[Method], grid: &GridSpec) -> BenchReport {
    let mut report = BenchReport {
        methods: methods.to_vec(),
        rows: Vec::new(),
    };
    for data in datasets {
        let cells = methods.iter().map(|&m| bench_dataset(data, m, grid)).collect();
        report.rows.push(BenchRow {
            dataset: data.name.clone(),
            cells,
            warning: None,
        });
    }
    report
}

/// `Σ |y_{i+1} - y_i|`.
pub fn total_variation(ys: &[f64]) -> f64 {
    ys.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `n` equally spaced points spanning `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Scores of a model fitted on one-dimensional data at raw positions `xs`.
pub fn score_curve(model: &Model, xs: &[f64]) -> Result<Vec<f64>> {
    let scaler = model.scaler();
    if scaler.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: scaler.dim(),
        });
    }
    let raw = DMatrix::from_column_slice(xs.len(), 1, xs);
    model.predict(&scaler.transform(&raw)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub spec: Robustness1DSpec,
    pub methods: Vec<Method>,
    /// Must use the rbf kernel.
    pub grid: GridSpec,
    pub points: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            spec: Robustness1DSpec::default(),
            methods: Method::ALL.to_vec(),
            grid: GridSpec::default(),
            points: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub method: Method,
    pub cell: Option<Cell>,
    pub scores: std::result::Result<Vec<f64>, String>,
    pub total_variation: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub xs: Vec<f64>,
    pub posterior: Vec<f64>,
    pub curves: Vec<RobustnessCurve>,
}

impl RobustnessReport {
    pub fn curve(&self, method: Method) -> Option<&RobustnessCurve> {
        self.curves.iter().find(|c| c.method == method)
    }

    /// Plot-ready columns: `x`, the analytic posterior, then one per method.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut header = vec!["x".to_string(), "posterior".to_string()];
        header.extend(self.curves.iter().map(|c| c.method.name().to_string()));
        writeln!(out, "{}", header.join(","))?;
        for (i, x) in self.xs.iter().enumerate() {
            let mut row = vec![x.to_string(), self.posterior[i].to_string()];
            for c in &self.curves {
                row.push(match &c.scores {
                    Ok(s) => s[i].to_string(),
                    Err(_) => String::new(),
                });
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Fits each method on one draw of the one-dimensional generator and
/// records its score curve over the sample range.
pub fn bench_robustness(cfg: &RobustnessConfig) -> Result<RobustnessReport> {
    if cfg.points < 2 {
        return Err(Error::InvalidParameter("need at least 2 curve points".into()));
    }
    let data = gen_robustness_1d(&cfg.spec)?;
    let lo = data.raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xs = linspace(lo, hi, cfg.points);
    let (c1, c0) = cfg.spec.classes();
    let posterior = xs
        .iter()
        .map(|&x| bayes_posterior(&[x], &c1, &c0))
        .collect::<Result<Vec<_>>>()?;
    let grid = GridSpec {
        seed: cfg.spec.seed,
        ..cfg.grid.clone()
    };
    let curves = cfg
        .methods
        .par_iter()
        .map(|&method| {
            let result = grid_search(&data, method, &grid).and_then(|s| {
                let model = fit_selected(&data, method, &s.best, &grid)?;
                Ok((s.best, score_curve(&model, &xs)?))
            });
            match result {
                Ok((cell, scores)) => RobustnessCurve {
                    method,
                    cell: Some(cell),
                    total_variation: Some(total_variation(&scores)),
                    scores: Ok(scores),
                },
                Err(e) => RobustnessCurve {
                    method,
                    cell: None,
                    scores: Err(e.to_string()),
                    total_variation: None,
                },
            }
        })
        .collect();
    Ok(RobustnessReport {
        xs,
        posterior,
        curves,
    })
}
