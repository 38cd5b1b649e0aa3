//! Run configuration: presets encoding the reference experiment setups, a
//! flat key-value TOML overlay, and CLI-flag overrides on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wosnn::geometry::Domain;
use wosnn::problems::PdeProblem;
use wosnn::trainer::TrainConfig;
use wosnn::{Error, Result};

pub const PRESET_NAMES: [&str; 4] = ["laplace2d", "poisson2d", "lshape", "poisson3d"];

/// Fully resolved configuration for one run. Every field has a preset default.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub preset: String,
    /// Built-in problem name; empty means a custom problem via `custom_g`/`custom_f`.
    pub problem_name: String,
    pub custom_g: String,
    pub custom_f: String,
    /// box2 | box3 | lshape2 (used by custom problems; built-ins carry their own domain).
    pub domain_kind: String,
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    pub domain_notch: Vec<f64>,
    pub eps: f64,
    pub max_steps: usize,
    pub n_starts: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub wos_paths_per_point: usize,
    pub grid_spacing: f64,
    pub baseline_learning_rate: f64,
    pub baseline_batch_size: usize,
    pub baseline_epochs: usize,
    pub fdm_tol: f64,
    pub fdm_max_iters: usize,
    pub fdm_omega: f64,
}

/// Partial configuration from a file; unknown keys are rejected so typos
/// surface as config errors naming the key.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    pub preset: Option<String>,
    pub problem_name: Option<String>,
    pub custom_g: Option<String>,
    pub custom_f: Option<String>,
    pub domain_kind: Option<String>,
    pub domain_lo: Option<Vec<f64>>,
    pub domain_hi: Option<Vec<f64>>,
    pub domain_notch: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub max_steps: Option<usize>,
    pub n_starts: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub shuffle: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub wos_paths_per_point: Option<usize>,
    pub grid_spacing: Option<f64>,
    pub baseline_learning_rate: Option<f64>,
    pub baseline_batch_size: Option<usize>,
    pub baseline_epochs: Option<usize>,
    pub fdm_tol: Option<f64>,
    pub fdm_max_iters: Option<usize>,
    pub fdm_omega: Option<f64>,
}

/// Overrides from command-line flags; they win over the config file.
#[derive(Clone, Debug, Default)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Base configuration for a named experiment preset.
    pub fn preset(name: &str) -> Result<Self> {
        let base_2d = |problem: &str, out: &str| RunConfig {
            preset: name.to_string(),
            problem_name: problem.to_string(),
            custom_g: String::new(),
            custom_f: String::new(),
            domain_kind: "box2".into(),
            domain_lo: vec![-1.0, -1.0],
            domain_hi: vec![1.0, 1.0],
            domain_notch: vec![0.0, 0.0],
            eps: 1e-3,
            max_steps: 20,
            n_starts: 40_000,
            hidden: vec![32, 64, 128],
            learning_rate: 3e-4,
            batch_size: 2048,
            epochs: 50,
            shuffle: true,
            seed: 7,
            out: PathBuf::from(out),
            workers: 0,
            wos_paths_per_point: 50,
            grid_spacing: 0.02,
            baseline_learning_rate: 1e-4,
            baseline_batch_size: 256,
            baseline_epochs: 50,
            fdm_tol: 1e-10,
            fdm_max_iters: 200_000,
            fdm_omega: 1.9,
        };
        match name {
            "laplace2d" => Ok(base_2d("laplace2d_xy", "runs/laplace2d")),
            "poisson2d" => Ok(base_2d("poisson2d_xy2", "runs/poisson2d")),
            "lshape" => {
                let mut cfg = base_2d("lshape_indicator", "runs/lshape");
                cfg.domain_kind = "lshape2".into();
                Ok(cfg)
            }
            "poisson3d" => {
                let mut cfg = base_2d("poisson3d_x2yz", "runs/poisson3d");
                cfg.domain_kind = "box3".into();
                cfg.domain_lo = vec![-1.0; 3];
                cfg.domain_hi = vec![1.0; 3];
                cfg.domain_notch = vec![0.0; 3];
                cfg.eps = 1e-2;
                cfg.max_steps = 80;
                cfg.n_starts = 60_000;
                cfg.hidden = vec![64, 128, 128];
                cfg.learning_rate = 2e-4;
                cfg.batch_size = 1024;
                // 0.05 keeps the full 3D evaluation lattice a manageable size.
                cfg.grid_spacing = 0.05;
                Ok(cfg)
            }
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {PRESET_NAMES:?}"
            ))),
        }
    }

    /// Preset base ← config file ← CLI flags.
    pub fn resolve(
        preset_flag: Option<&str>,
        config_file: Option<&Path>,
        cli: &CliOverrides,
    ) -> Result<Self> {
        let overlay = match config_file {
            None => ConfigOverlay::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io { path: path.into(), source: e })?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
        };
        let preset_name = preset_flag
            .map(str::to_string)
            .or_else(|| overlay.preset.clone())
            .unwrap_or_else(|| "laplace2d".to_string());
        let mut cfg = Self::preset(&preset_name)?;
        cfg.apply(&overlay);
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.out = out.clone();
        }
        if let Some(workers) = cli.workers {
            cfg.workers = workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &ConfigOverlay) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &o.$field { self.$field = v.clone(); })*
            };
        }
        take!(
            problem_name,
            custom_g,
            custom_f,
            domain_kind,
            domain_lo,
            domain_hi,
            domain_notch,
            eps,
            max_steps,
            n_starts,
            hidden,
            learning_rate,
            batch_size,
            epochs,
            shuffle,
            seed,
            out,
            workers,
            wos_paths_per_point,
            grid_spacing,
            baseline_learning_rate,
            baseline_batch_size,
            baseline_epochs,
            fdm_tol,
            fdm_max_iters,
            fdm_omega
        );
    }

    fn validate(&self) -> Result<()> {
        if self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.problem_name.is_empty() && self.custom_g.is_empty() {
            return Err(Error::Config(
                "either problem_name or custom_g must be set".into(),
            ));
        }
        Ok(())
    }

    /// Domain described by the domain_* keys (custom problems only).
    pub fn build_domain(&self) -> Result<Domain> {
        let need = |n: usize, what: &str, v: &[f64]| -> Result<()> {
            if v.len() < n {
                return Err(Error::Config(format!(
                    "{what} needs {n} components, got {}",
                    v.len()
                )));
            }
            Ok(())
        };
        match self.domain_kind.as_str() {
            "box2" => {
                need(2, "domain_lo", &self.domain_lo)?;
                need(2, "domain_hi", &self.domain_hi)?;
                Domain::box2(
                    [self.domain_lo[0], self.domain_lo[1]],
                    [self.domain_hi[0], self.domain_hi[1]],
                )
            }
            "box3" => {
                need(3, "domain_lo", &self.domain_lo)?;
                need(3, "domain_hi", &self.domain_hi)?;
                Domain::box3(
                    [self.domain_lo[0], self.domain_lo[1], self.domain_lo[2]],
                    [self.domain_hi[0], self.domain_hi[1], self.domain_hi[2]],
                )
            }
            "lshape2" => {
                need(2, "domain_lo", &self.domain_lo)?;
                need(2, "domain_hi", &self.domain_hi)?;
                need(2, "domain_notch", &self.domain_notch)?;
                Domain::lshape2(
                    [self.domain_lo[0], self.domain_lo[1]],
                    [self.domain_hi[0], self.domain_hi[1]],
                    [self.domain_notch[0], self.domain_notch[1]],
                )
            }
            other => Err(Error::Config(format!(
                "unknown domain_kind {other:?}; expected box2, box3, or lshape2"
            ))),
        }
    }

    /// The problem this run solves: a built-in by name, otherwise custom
    /// polynomials on the configured domain.
    pub fn build_problem(&self) -> Result<PdeProblem> {
        if !self.problem_name.is_empty() {
            return PdeProblem::builtin(&self.problem_name);
        }
        let f = if self.custom_f.is_empty() {
            None
        } else {
            Some(self.custom_f.as_str())
        };
        PdeProblem::custom(self.build_domain()?, &self.custom_g, f)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }

    pub fn baseline_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.baseline_learning_rate,
            batch_size: self.baseline_batch_size,
            epochs: self.baseline_epochs,
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }
}
