//! Run configuration: command-line flags merged over a flat `key = value`
//! file. Every flag has a file key (the flag name without dashes; `_` and
//! `-` are interchangeable).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cdf_svm::distribution::Combine;
use cdf_svm::modelsel::{powers_of_two, GridSpec, Indicator, KernelKind, MuKind, WeightSpec};
use cdf_svm::{GKernelSpec, Method};
use clap::Parser;

#[derive(Parser, Clone, Debug, Default)]
pub struct RunConfig {
    /// Flat key=value file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Method, or comma list for the benchmarks:
    /// csvm, lssvm, vsvm, idlssvm, eps-l1svm, eps-l1vsvm.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// CSV path, or comma list for bench-uci. `builtin:monkst` and
    /// `builtin:monks3` select the generated MONK sets.
    #[arg(long, global = true)]
    pub dataset: Option<String>,
    /// Separate test file for `fit`.
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    /// Fraction held out by `fit` when no test file is given.
    #[arg(long, global = true)]
    pub test_fraction: Option<f64>,
    /// Model JSON for `predict`.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output file for `synth`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// gaussian2d, robust1d, monks3 or monkst.
    #[arg(long, global = true)]
    pub generator: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Label noise of the generated monks3 sample.
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    #[arg(long, global = true)]
    pub repetitions: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// acc or vac.
    #[arg(long, global = true)]
    pub indicator: Option<String>,
    /// rbf or linear.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// gaussian or step.
    #[arg(long, global = true)]
    pub g_kernel: Option<String>,
    /// empirical, uniform, gaussian or point_mass.
    #[arg(long, global = true)]
    pub mu: Option<String>,
    /// product or additive.
    #[arg(long, global = true)]
    pub combine: Option<String>,
    /// G of the Vac weights: gaussian or step.
    #[arg(long, global = true)]
    pub eval_g: Option<String>,
    #[arg(long, global = true)]
    pub eval_sigma: Option<f64>,
    /// Measure of the Vac weights.
    #[arg(long, global = true)]
    pub eval_mu: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub gammas: Option<String>,
    #[arg(long, global = true)]
    pub deltas: Option<String>,
    #[arg(long, global = true)]
    pub epsilons: Option<String>,
    #[arg(long, global = true)]
    pub sigmas: Option<String>,
    /// Adds the step G to the grid.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub include_step: Option<bool>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Uses all-ones distribution weights.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub v_ones: Option<bool>,
    /// Weight references and the `fit` scaler from training rows only.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub strict: Option<bool>,
    /// Adds the analytic Bayes column to bench-bayes.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub oracle: Option<bool>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Zero-based label column (default: last).
    #[arg(long, global = true)]
    pub label_column: Option<usize>,
    /// Label token mapped to class 1.
    #[arg(long, global = true)]
    pub positive: Option<String>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Neighbour count of the IDLSSVM density.
    #[arg(long, global = true)]
    pub neighbours: Option<usize>,
}

macro_rules! fill {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

/// Parses a config file into the same structure the flags produce.
pub fn parse_file(text: &str, origin: &Path) -> Result<RunConfig> {
    let mut args = vec!["config".to_string()];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            anyhow!("{}:{}: expected key = value", origin.display(), n + 1)
        })?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            bail!("{}:{}: nested config files are not supported", origin.display(), n + 1);
        }
        args.push(format!("--{key}={}", value.trim()));
    }
    RunConfig::try_parse_from(&args)
        .map_err(|e| anyhow!("{}: {}", origin.display(), e.to_string().trim()))
}

impl RunConfig {
    /// Fills unset fields from the config file, if one was given.
    pub fn resolve(mut self) -> Result<RunConfig> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file = parse_file(&text, &path)?;
        fill!(
            self, file, method, dataset, test, test_fraction, model, output, out_dir, generator,
            n, noise, repetitions, seed, indicator, kernel, g_kernel, mu, combine, eval_g,
            eval_sigma, eval_mu, gamma, delta, epsilon, sigma, gammas, deltas, epsilons, sigmas,
            include_step, folds, v_ones, strict, oracle, points, label_column, positive,
            tolerance, max_iter, neighbours
        );
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        match &self.method {
            None => Ok(Method::ALL.to_vec()),
            Some(list) => list
                .split(',')
                .map(|m| m.trim().parse::<Method>().map_err(Into::into))
                .collect(),
        }
    }

    pub fn method(&self) -> Result<Method> {
        let list = self.method.as_deref().ok_or_else(|| anyhow!("--method is required"))?;
        Ok(list.trim().parse::<Method>()?)
    }

    pub fn datasets(&self) -> Result<Vec<String>> {
        let list = self.dataset.as_deref().ok_or_else(|| anyhow!("--dataset is required"))?;
        Ok(list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    pub fn indicator(&self) -> Result<Option<Indicator>> {
        self.indicator
            .as_deref()
            .map(|s| s.parse::<Indicator>().map_err(Into::into))
            .transpose()
    }

    /// Distribution weights used for fitting; `v_ones` forces all-ones.
    pub fn weight_spec(&self, default_mu: MuKind) -> Result<WeightSpec> {
        let mu = if self.v_ones.unwrap_or(false) {
            MuKind::PointMass
        } else {
            match &self.mu {
                Some(s) => s.parse()?,
                None => default_mu,
            }
        };
        let combine = match &self.combine {
            Some(s) => s.parse::<Combine>()?,
            None => Combine::Product,
        };
        Ok(WeightSpec { mu, combine })
    }

    /// The G of a single fit.
    pub fn g_spec(&self) -> Result<GKernelSpec> {
        match self.g_kernel.as_deref().unwrap_or("gaussian") {
            "gaussian" => Ok(GKernelSpec::gaussian(self.sigma.unwrap_or(1.0))?),
            "step" => Ok(GKernelSpec::Step),
            other => bail!("unknown G kernel {other:?} (gaussian or step)"),
        }
    }

    /// Grid with every override applied on top of the library defaults.
    pub fn grid(&self, default_kernel: KernelKind, default_mu: MuKind) -> Result<GridSpec> {
        let mut grid = GridSpec {
            kernel: default_kernel,
            ..GridSpec::default()
        };
        if let Some(k) = &self.kernel {
            grid.kernel = k.parse()?;
        }
        if let Some(v) = &self.gammas {
            grid.gammas = parse_list("gammas", v)?;
        }
        if let Some(v) = &self.deltas {
            grid.deltas = parse_list("deltas", v)?;
        }
        if let Some(v) = &self.epsilons {
            grid.epsilons = parse_list("epsilons", v)?;
        }
        if let Some(v) = &self.sigmas {
            grid.sigmas = parse_list("sigmas", v)?;
        }
        match self.g_kernel.as_deref() {
            // a fixed G kind restricts the grid to it
            Some("step") => {
                grid.include_step = true;
                grid.sigmas.clear();
            }
            Some("gaussian") => grid.include_step = false,
            Some(other) => bail!("unknown G kernel {other:?} (gaussian or step)"),
            None => {}
        }
        if let Some(b) = self.include_step {
            grid.include_step = b;
        }
        if let Some(f) = self.folds {
            grid.folds = f;
        }
        if let Some(i) = self.indicator()? {
            grid.indicator = i;
        }
        grid.seed = self.seed();
        grid.weights = self.weight_spec(default_mu)?;
        match self.eval_g.as_deref() {
            Some("gaussian") => {
                grid.eval_g = GKernelSpec::gaussian(self.eval_sigma.unwrap_or(0.5))?
            }
            Some("step") => grid.eval_g = GKernelSpec::Step,
            Some(other) => bail!("unknown eval G {other:?} (gaussian or step)"),
            None => {}
        }
        if let Some(mu) = &self.eval_mu {
            grid.eval_weights.mu = mu.parse()?;
        }
        if let Some(s) = self.strict {
            grid.strict = s;
        }
        if let Some(t) = self.tolerance {
            grid.tolerance = t;
        }
        if let Some(m) = self.max_iter {
            grid.max_iter = m;
        }
        if let Some(k) = self.neighbours {
            grid.neighbours = k;
        }
        grid.validate()?;
        Ok(grid)
    }
}

/// Comma list of numbers; `2^a..b` expands to the powers of two in between.
pub fn parse_list(name: &str, text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if let Some(range) = text.strip_prefix("2^") {
        if let Some((lo, hi)) = range.split_once("..") {
            let lo: i32 = lo.trim().parse().with_context(|| format!("bad {name} range {text:?}"))?;
            let hi: i32 = hi.trim().parse().with_context(|| format!("bad {name} range {text:?}"))?;
            if lo > hi {
                bail!("empty {name} range {text:?}");
            }
            return Ok(powers_of_two(lo, hi));
        }
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad value {v:?} in --{name}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("g", "0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_list("g", "2^-1..1").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_list("g", "1,x").is_err());
        assert!(parse_list("g", "2^3..1").is_err());
    }

    #[test]
    fn file_keys_mirror_flags() {
        let file = parse_file(
            "# comment\nmethod = lssvm\nout_dir=/tmp/x\nv-ones = true\ngammas = 1,2\n",
            Path::new("c.cfg"),
        )
        .unwrap();
        assert_eq!(file.method.as_deref(), Some("lssvm"));
        assert_eq!(file.out_dir, Some(PathBuf::from("/tmp/x")));
        assert_eq!(file.v_ones, Some(true));
        assert!(parse_file("bogus = 1\n", Path::new("c.cfg")).is_err());
        assert!(parse_file("no equals sign\n", Path::new("c.cfg")).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "method = lssvm\nseed = 4\n").unwrap();
        let cfg = RunConfig {
            config: Some(path),
            seed: Some(9),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.method.as_deref(), Some("lssvm"));
    }

    #[test]
    fn grid_overrides() {
        let cfg = RunConfig {
            gammas: Some("1,4".into()),
            g_kernel: Some("step".into()),
            indicator: Some("vac".into()),
            v_ones: Some(true),
            ..Default::default()
        };
        let grid = cfg.grid(KernelKind::Linear, MuKind::Empirical).unwrap();
        assert_eq!(grid.gammas, vec![1.0, 4.0]);
        assert!(grid.include_step && grid.sigmas.is_empty());
        assert_eq!(grid.indicator, Indicator::Vac);
        assert_eq!(grid.weights.mu, MuKind::PointMass);
        assert_eq!(grid.kernel, KernelKind::Linear);
    }
}
