//! Subcommand implementations. Results go to stdout and the output
//! directory; diagnostics go to stderr.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cdf_svm::bench::{
    bench_bayes, bench_dataset, bench_robustness, fit_selected, BayesBenchConfig, BenchReport,
    BenchRow, RobustnessConfig,
};
use cdf_svm::datagen::{
    gen_gaussian_2d, gen_monks3_sample, gen_monks_full, gen_robustness_1d, load_csv,
    read_features, write_csv_to, CsvOptions, GaussianSpec2D, Robustness1DSpec,
};
use cdf_svm::evaluation::EvalReport;
use cdf_svm::modelsel::{
    grid_search, train_test_split, weights_for_method, Cell, GridSpec, Indicator, KernelKind,
    MuKind,
};
use cdf_svm::solvers::ModelDocument;
use cdf_svm::{Dataset, KernelSpec, Method, Scaler};
use nalgebra::DMatrix;

use crate::config::RunConfig;
use crate::output::Outputs;

/// How much of the requested work finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Complete,
    Partial,
}

fn csv_options(cfg: &RunConfig, scaler: Option<Scaler>) -> CsvOptions {
    CsvOptions {
        label_column: cfg.label_column,
        positive: cfg.positive.clone(),
        scaler,
    }
}

/// A CSV path or one of the generated MONK sets.
pub fn load_dataset(cfg: &RunConfig, name: &str) -> Result<Dataset> {
    match name {
        "builtin:monkst" => Ok(gen_monks_full()?),
        "builtin:monks3" => Ok(gen_monks3_sample(
            cfg.n.unwrap_or(121),
            cfg.noise.unwrap_or(0.05),
            cfg.seed(),
        )?),
        path => load_csv(Path::new(path), &csv_options(cfg, None))
            .with_context(|| format!("loading {path}")),
    }
}

fn single_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let names = cfg.datasets()?;
    match names.as_slice() {
        [one] => load_dataset(cfg, one),
        _ => bail!("expected one dataset, got {}", names.len()),
    }
}

fn header(command: &str, cfg: &RunConfig) -> String {
    format!("cdf-svm {command} seed={}", cfg.seed())
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn fmt_coef(x: f64) -> String {
    // avoids printing "-0"
    format!("{}", x + 0.0)
}

pub fn synth(cfg: &RunConfig) -> Result<Status> {
    let generator = cfg.generator.as_deref().unwrap_or("gaussian2d");
    let seed = cfg.seed();
    let (data, notes) = match generator {
        "gaussian2d" => {
            let spec = GaussianSpec2D {
                n: cfg.n.unwrap_or(200),
                seed,
                ..Default::default()
            };
            let data = gen_gaussian_2d(&spec)?;
            let (k, q) = spec.bayes_line()?;
            let notes = vec![
                format!(
                    "class 1 ~ N(({}, {}), diag({}, {})), class 0 ~ N(({}, {}), diag({}, {}))",
                    spec.mu[0], spec.mu[1], spec.sigma[0], spec.sigma[1],
                    -spec.mu[0], -spec.mu[1], spec.sigma[0], spec.sigma[1]
                ),
                format!("Bayes line: x2 = {}*x1 + {}", fmt_coef(k), fmt_coef(q)),
                format!("Bayes error: {:.6}", spec.bayes_error()),
            ];
            (data, notes)
        }
        "robust1d" => {
            let spec = Robustness1DSpec {
                n: cfg.n.unwrap_or(200),
                seed,
                ..Default::default()
            };
            let data = gen_robustness_1d(&spec)?;
            let [m1, m0] = spec.centers;
            let s2 = spec.spread;
            let a = (m0 - m1) / s2;
            let b = (m1 * m1 - m0 * m0) / (2.0 * s2);
            let notes = vec![
                format!("class 1 ~ N({m1}, {s2}), class 0 ~ N({m0}, {s2})"),
                format!(
                    "posterior: P(y=1|x) = 1/(1+exp({}*x + {}))",
                    fmt_coef(a),
                    fmt_coef(b)
                ),
            ];
            (data, notes)
        }
        "monks3" => {
            let n = cfg.n.unwrap_or(121);
            let noise = cfg.noise.unwrap_or(0.05);
            let data = gen_monks3_sample(n, noise, seed)?;
            (data, vec![format!("monks3 sample n={n} noise={noise}")])
        }
        "monkst" => (gen_monks_full()?, vec!["monks3 rule on all 432 inputs".to_string()]),
        other => bail!("unknown generator {other:?} (gaussian2d, robust1d, monks3, monkst)"),
    };
    let path = cfg
        .output
        .clone()
        .unwrap_or_else(|| cfg.out_dir().join(format!("{}.csv", data.name)));
    let mut comments = vec![format!("{} generator={generator} n={}", header("synth", cfg), data.len())];
    comments.extend(notes.iter().cloned());
    let mut body = Vec::new();
    write_csv_to(&mut body, &data, &comments)?;
    let mut out = Outputs::default();
    out.add(path, body);
    for line in &notes {
        println!("{line}");
    }
    report_written(&out.commit()?);
    Ok(Status::Complete)
}

/// Cell of a single fit from `--gamma/--delta/--epsilon` and the G flags.
fn fit_cell_from(cfg: &RunConfig, method: Method, grid: &GridSpec) -> Result<Cell> {
    let kernel = match grid.kernel {
        KernelKind::Linear => KernelSpec::Linear,
        KernelKind::Rbf => KernelSpec::rbf(cfg.delta.unwrap_or(1.0))?,
    };
    Ok(Cell {
        gamma: cfg.gamma.unwrap_or(1.0),
        kernel,
        epsilon: if method.uses_epsilon() {
            cfg.epsilon.unwrap_or(0.125)
        } else {
            0.0
        },
        g: if method.uses_weights() {
            Some(cfg.g_spec()?)
        } else {
            None
        },
    })
}

pub fn fit(cfg: &RunConfig) -> Result<Status> {
    let method = cfg.method()?;
    let data = single_dataset(cfg)?;
    let train_only = cfg.strict.unwrap_or(false);
    let (train, test) = match &cfg.test {
        Some(path) => {
            let test = load_csv(path, &csv_options(cfg, Some(data.scaler.clone())))
                .with_context(|| format!("loading {}", path.display()))?;
            if train_only {
                (data, test)
            } else {
                let scaler = Scaler::fit(&stack_rows(&data.raw, &test.raw)?);
                (
                    Dataset::from_raw_with_scaler(data.name, data.raw, data.labels, Some(&scaler))?,
                    Dataset::from_raw_with_scaler(test.name, test.raw, test.labels, Some(&scaler))?,
                )
            }
        }
        None => train_test_split(&data, cfg.test_fraction.unwrap_or(0.2), cfg.seed(), train_only)?,
    };
    let grid = cfg.grid(KernelKind::Rbf, MuKind::Empirical)?;
    let cell = fit_cell_from(cfg, method, &grid)?;
    let model = fit_selected(&train, method, &cell, &grid)?;
    let predicted = model.predict_labels(&test.features)?;
    let eval_v = grid
        .eval_weights
        .weights_for(&train.features, &test.features, &grid.eval_g)?;
    let report = EvalReport::new(
        &test.labels,
        &predicted,
        Some((&eval_v.values, &eval_v.provenance())),
    )?;

    let dir = cfg.out_dir();
    let provenance = vec![
        format!(
            "{} method={method} cell=[{cell}] train={} test={}",
            header("fit", cfg),
            train.len(),
            test.len()
        ),
        format!("grid: {}", grid.describe()),
        format!("fit weights: {}", model.v_provenance()),
    ];
    let mut out = Outputs::default();
    out.add(dir.join("model.json"), ModelDocument::new(model.clone()).to_json()?.into_bytes());
    let body = format!("{}\n{}\n", EvalReport::CSV_HEADER, report.csv_row());
    out.add_text(dir.join("report.csv"), &provenance, body.as_bytes());
    if let (Some(v), _) = weights_for_method(method, &train.features, &grid.weights, cell.g.as_ref())? {
        let mut body = Vec::new();
        v.write_csv_to(&mut body)?;
        out.add(dir.join("v_values.csv"), body);
    }
    println!("method       {method}");
    println!("cell         {cell}");
    println!("{report}");
    report_written(&out.commit()?);
    Ok(Status::Complete)
}

pub fn predict(cfg: &RunConfig) -> Result<Status> {
    let model_path = cfg.model.as_ref().ok_or_else(|| anyhow!("--model is required"))?;
    let doc = ModelDocument::load(model_path)
        .with_context(|| format!("loading {}", model_path.display()))?;
    let model = doc.model;
    let names = cfg.datasets()?;
    let [path] = names.as_slice() else {
        bail!("expected one dataset, got {}", names.len());
    };
    let scaler = model.scaler().clone();
    let (raw, labels) = read_features(Path::new(path), scaler.dim(), &csv_options(cfg, None))
        .with_context(|| format!("loading {path}"))?;
    let features = scaler.transform(&raw)?;
    let scores = model.predict(&features)?;
    let predicted = model.predict_labels(&features)?;
    let mut body = String::from("score,label\n");
    for (s, l) in scores.iter().zip(&predicted) {
        body.push_str(&format!("{s},{l}\n"));
    }
    let provenance = vec![format!(
        "cdf-svm predict model={} method={} rows={}",
        model_path.display(),
        model.method(),
        scores.len()
    )];
    let mut out = Outputs::default();
    out.add_text(cfg.out_dir().join("predictions.csv"), &provenance, body.as_bytes());
    if let Some(labels) = labels {
        println!("{}", EvalReport::new(&labels, &predicted, None)?);
    } else {
        println!("predicted {} rows", scores.len());
    }
    report_written(&out.commit()?);
    Ok(Status::Complete)
}

pub fn cv(cfg: &RunConfig) -> Result<Status> {
    let method = cfg.method()?;
    let data = single_dataset(cfg)?;
    let grid = cfg.grid(KernelKind::Rbf, MuKind::Empirical)?;
    let search = grid_search(&data, method, &grid)?;
    let other = match search.indicator {
        Indicator::Acc => Indicator::Vac,
        Indicator::Vac => Indicator::Acc,
    };
    let best_cell = &search.table.iter().find(|r| r.cell == search.best);
    let invalid = search.table.iter().filter(|r| !r.is_valid()).count();
    let provenance = vec![
        format!("{} method={method} dataset={} m={}", header("cv", cfg), data.name, data.len()),
        format!("grid: {}", grid.describe()),
        format!(
            "best: [{}] {}={}",
            search.best, search.indicator, search.best_score
        ),
    ];
    let mut body = Vec::new();
    search.write_table(&mut body)?;
    let mut out = Outputs::default();
    out.add_text(cfg.out_dir().join("cv_table.csv"), &provenance, &body);
    println!("best cell    {}", search.best);
    println!("{:<12} {:.4}", search.indicator.to_string(), search.best_score);
    if let Some(r) = best_cell {
        if let Some(v) = r.mean(other) {
            println!("{:<12} {:.4}", other.to_string(), v);
        }
    }
    if invalid > 0 {
        eprintln!("{invalid} of {} cells failed in at least one fold", search.table.len());
    }
    report_written(&out.commit()?);
    Ok(if invalid > 0 { Status::Partial } else { Status::Complete })
}

pub fn bench_bayes_cmd(cfg: &RunConfig) -> Result<Status> {
    if cfg.kernel.as_deref().is_some_and(|k| k != "linear") {
        bail!("bench-bayes compares straight lines and needs --kernel linear");
    }
    let grid = cfg.grid(KernelKind::Linear, MuKind::Uniform)?;
    let indicators = match cfg.indicator()? {
        Some(i) => vec![i],
        None => vec![Indicator::Acc, Indicator::Vac],
    };
    let bench = BayesBenchConfig {
        spec: GaussianSpec2D {
            n: cfg.n.unwrap_or(200),
            ..Default::default()
        },
        repetitions: cfg.repetitions.unwrap_or(100),
        methods: match &cfg.method {
            Some(_) => cfg.methods()?,
            None if cfg.oracle.unwrap_or(false) => Vec::new(),
            None => Method::ALL.to_vec(),
        },
        indicators,
        include_oracle: cfg.oracle.unwrap_or(false),
        grid: grid.clone(),
        seed: cfg.seed(),
    };
    let report = bench_bayes(&bench)?;
    let provenance = vec![
        format!(
            "{} n={} repetitions={} bayes_line=({}, {})",
            header("bench-bayes", cfg),
            bench.spec.n,
            bench.repetitions,
            report.bayes_line.0,
            report.bayes_line.1
        ),
        format!("grid: {}", grid.describe()),
    ];
    let table = report.table();
    let mut runs = Vec::new();
    report.write_runs(&mut runs)?;
    let dir = cfg.out_dir();
    let mut out = Outputs::default();
    out.add_text(dir.join("bayes_table.txt"), &provenance, table.as_bytes());
    out.add_text(dir.join("bayes_runs.csv"), &provenance, &runs);
    print!("{table}");
    let failed: usize = report.columns.iter().map(|c| c.failed).sum();
    for c in report.columns.iter().filter(|c| c.failed > 0) {
        eprintln!(
            "{} ({}): {} failed repetitions, first error: {}",
            c.column,
            c.indicator,
            c.failed,
            c.first_error.as_deref().unwrap_or("-")
        );
    }
    report_written(&out.commit()?);
    Ok(if failed > 0 { Status::Partial } else { Status::Complete })
}

pub fn bench_uci_cmd(cfg: &RunConfig) -> Result<Status> {
    let grid = cfg.grid(KernelKind::Rbf, MuKind::Empirical)?;
    let methods = cfg.methods()?;
    let mut report = BenchReport {
        methods: methods.clone(),
        rows: Vec::new(),
    };
    for name in cfg.datasets()? {
        match load_dataset(cfg, &name) {
            Ok(data) => {
                let cells = methods.iter().map(|&m| bench_dataset(&data, m, &grid)).collect();
                report.rows.push(BenchRow {
                    dataset: data.name.clone(),
                    cells,
                    warning: None,
                });
            }
            Err(e) => {
                eprintln!("warning: skipping {name}: {e:#}");
                report.push_warning(&name, &format!("{e:#}"));
            }
        }
    }
    let provenance = vec![
        header("bench-uci", cfg),
        format!("grid: {}", grid.describe()),
        "cells: G-mean±sd (accuracy), percent, 10-fold evaluation of the selected cell".into(),
    ];
    let table = report.table();
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let dir = cfg.out_dir();
    let mut out = Outputs::default();
    out.add_text(dir.join("uci_table.txt"), &provenance, table.as_bytes());
    out.add_text(dir.join("uci_table.csv"), &provenance, &csv);
    print!("{table}");
    let mut partial = false;
    for row in &report.rows {
        partial |= row.warning.is_some();
        for c in &row.cells {
            if let Some(e) = &c.error {
                eprintln!("{} / {}: {e}", row.dataset, c.method);
                partial = true;
            }
        }
    }
    report_written(&out.commit()?);
    Ok(if partial { Status::Partial } else { Status::Complete })
}

pub fn robustness(cfg: &RunConfig) -> Result<Status> {
    let grid = cfg.grid(KernelKind::Rbf, MuKind::Uniform)?;
    let rc = RobustnessConfig {
        spec: Robustness1DSpec {
            n: cfg.n.unwrap_or(200),
            seed: cfg.seed(),
            ..Default::default()
        },
        methods: cfg.methods()?,
        grid: grid.clone(),
        points: cfg.points.unwrap_or(200),
    };
    let report = bench_robustness(&rc)?;
    let provenance = vec![
        format!("{} n={} points={}", header("robustness", cfg), rc.spec.n, rc.points),
        format!("grid: {}", grid.describe()),
    ];
    let mut body = Vec::new();
    report.write_csv(&mut body)?;
    let mut out = Outputs::default();
    out.add_text(cfg.out_dir().join("robustness_curves.csv"), &provenance, &body);
    println!("{:<12} {:>16}  cell", "method", "total variation");
    let mut partial = false;
    for c in &report.curves {
        match (&c.scores, c.total_variation) {
            (Ok(_), Some(tv)) => println!(
                "{:<12} {:>16.4}  {}",
                c.method.name(),
                tv,
                c.cell.map(|c| c.to_string()).unwrap_or_default()
            ),
            _ => {
                let msg = c.scores.as_ref().err().map(String::as_str).unwrap_or("no curve");
                eprintln!("{}: {msg}", c.method);
                partial = true;
            }
        }
    }
    report_written(&out.commit()?);
    Ok(if partial { Status::Partial } else { Status::Complete })
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        bail!("train has {} features but test has {}", a.ncols(), b.ncols());
    }
    Ok(DMatrix::from_fn(a.nrows() + b.nrows(), a.ncols(), |i, j| {
        if i < a.nrows() {
            a[(i, j)]
        } else {
            b[(i - a.nrows(), j)]
        }
    }))
}
