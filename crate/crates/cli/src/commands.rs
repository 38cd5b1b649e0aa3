//! Subcommand implementations. Every command writes deterministic artifacts
//! into the output directory plus a manifest echoing the effective config,
//! the relevant counts, and wall-clock timings.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use wosnn::fdm::solve_fdm_relaxed;
use wosnn::fields::{export_field, import_field, mean_error, mse, rrmse, FieldGrid};
use wosnn::nn::{load_checkpoint, save_checkpoint, CheckpointMeta, YzNet};
use wosnn::trainer::{
    predict_field, predict_scalar_field, train, train_wos_driven, vectorize,
};
use wosnn::wos::{
    read_paths, sample_dataset, uniform_starts, wos_grid_estimates, write_paths, PathFileHeader,
};
use wosnn::{Error, PdeProblem, Result};

use crate::config::RunConfig;

pub const PATHS_FILE: &str = "paths.bin";
pub const MODEL_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "loss_history.csv";

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::Io {
        path: cfg.out.clone(),
        source: e,
    })
}

fn write_manifest<R: Serialize>(cfg: &RunConfig, name: &str, result: &R) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a, R: Serialize> {
        config: &'a RunConfig,
        result: &'a R,
    }
    let path = cfg.out.join(name);
    let text = toml::to_string_pretty(&Manifest { config: cfg, result })
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::Io {
        path,
        source: e,
    })
}

fn manifest_result(cfg: &RunConfig, name: &str) -> Option<toml::Value> {
    let text = std::fs::read_to_string(cfg.out.join(name)).ok()?;
    let table: toml::Table = text.parse().ok()?;
    table.get("result").cloned()
}

fn result_f64(v: &Option<toml::Value>, key: &str) -> Option<f64> {
    v.as_ref()?.get(key)?.as_float()
}

fn result_i64(v: &Option<toml::Value>, key: &str) -> Option<i64> {
    v.as_ref()?.get(key)?.as_integer()
}

/// Evaluation lattice for the problem's own domain.
fn eval_grid(prob: &PdeProblem, spacing: f64) -> Result<FieldGrid> {
    FieldGrid::lattice(prob.domain(), spacing, 1)
}

pub fn cmd_sample(cfg: &RunConfig) -> Result<()> {
    if cfg.n_starts == 0 {
        return Err(Error::Config("n_starts must be at least 1".into()));
    }
    ensure_out(cfg)?;
    let prob = cfg.build_problem()?;
    let t0 = Instant::now();
    let starts = uniform_starts(prob.domain(), cfg.n_starts, cfg.seed);
    let paths = sample_dataset(&prob, &starts, cfg.eps, cfg.max_steps, cfg.seed)?;
    let sampling_seconds = t0.elapsed().as_secs_f64();

    let header = PathFileHeader {
        dim: prob.dim(),
        eps: cfg.eps,
        max_steps: cfg.max_steps,
        problem: prob.name().to_string(),
        seed: cfg.seed,
        n_paths: paths.len(),
    };
    write_paths(&cfg.out.join(PATHS_FILE), &header, &paths)?;

    #[derive(Serialize)]
    struct SampleResult {
        n_starts: usize,
        n_valid: usize,
        sampling_seconds: f64,
    }
    let result = SampleResult {
        n_starts: cfg.n_starts,
        n_valid: paths.len(),
        sampling_seconds,
    };
    write_manifest(cfg, "sample.manifest.toml", &result)?;
    println!(
        "sampled {} starts -> {} valid paths in {:.2}s ({})",
        cfg.n_starts,
        paths.len(),
        sampling_seconds,
        cfg.out.join(PATHS_FILE).display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, data: Option<&Path>) -> Result<()> {
    ensure_out(cfg)?;
    let data_path: PathBuf = data
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out.join(PATHS_FILE));
    let (header, paths) = read_paths(&data_path)?;
    let ds = vectorize(&paths)?;

    let t0 = Instant::now();
    let mut net = YzNet::init(header.dim, &cfg.hidden, cfg.seed);
    let history = train(&mut net, &ds, &cfg.train_config())?;
    let training_seconds = t0.elapsed().as_secs_f64();
    let final_loss = *history.last().unwrap();

    save_checkpoint(
        &cfg.out.join(MODEL_FILE),
        net.mlp(),
        &CheckpointMeta {
            seed: cfg.seed,
            epochs: cfg.epochs as u32,
            learning_rate: cfg.learning_rate,
            final_loss,
        },
    )?;
    let history_path = cfg.out.join(HISTORY_FILE);
    let mut text = String::from("epoch,loss\n");
    for (i, loss) in history.iter().enumerate() {
        text.push_str(&format!("{},{:.16e}\n", i + 1, loss));
    }
    std::fs::write(&history_path, text).map_err(|e| Error::Io {
        path: history_path,
        source: e,
    })?;

    #[derive(Serialize)]
    struct TrainResult {
        n_paths: usize,
        max_len: usize,
        epochs: usize,
        final_loss: f64,
        training_seconds: f64,
    }
    write_manifest(
        cfg,
        "train.manifest.toml",
        &TrainResult {
            n_paths: ds.n_paths(),
            max_len: ds.max_len(),
            epochs: cfg.epochs,
            final_loss,
            training_seconds,
        },
    )?;
    println!(
        "trained on {} paths for {} epochs in {:.2}s, final loss {final_loss:.6}",
        ds.n_paths(),
        cfg.epochs,
        training_seconds
    );
    Ok(())
}

#[derive(Serialize, Default, Clone, Copy)]
struct Metrics {
    mean_error_u: Option<f64>,
    mean_error_grad: Option<f64>,
    rrmse_u: Option<f64>,
    mse_vs_fdm: Option<f64>,
}

fn metrics_against_exact(
    prob: &PdeProblem,
    u: &FieldGrid,
    z: Option<&FieldGrid>,
) -> Result<Metrics> {
    let mut m = Metrics::default();
    if prob.has_exact() {
        let mut exact_u = FieldGrid::like(u, 1);
        exact_u.fill_scalar(|p| prob.exact_u(p).unwrap());
        m.mean_error_u = Some(mean_error(u, &exact_u)?);
        m.rrmse_u = Some(rrmse(u, &exact_u)?.value);
        if let (Some(z), Some(_)) = (z, prob.exact_grad(exact_u.nodes()[0])) {
            let mut exact_z = FieldGrid::like(z, z.arity());
            exact_z.fill_vector(|p| prob.exact_grad(p).unwrap());
            m.mean_error_grad = Some(mean_error(z, &exact_z)?);
        }
    }
    Ok(m)
}

pub fn cmd_eval(cfg: &RunConfig, model: Option<&Path>) -> Result<()> {
    ensure_out(cfg)?;
    let model_path: PathBuf = model
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out.join(MODEL_FILE));
    let (mlp, ckpt_meta) = load_checkpoint(&model_path)?;
    let prob = cfg.build_problem()?;

    let t0 = Instant::now();
    let grid = eval_grid(&prob, cfg.grid_spacing)?;
    let (u, z) = if mlp.output_dim() == mlp.input_dim() + 1 {
        let net = YzNet::from_mlp(mlp)?;
        let (u, z) = predict_field(&net, &grid)?;
        (u, Some(z))
    } else {
        (predict_scalar_field(&mlp, &grid)?, None)
    };
    export_field(&u, &cfg.out.join("u_field.csv"))?;
    if let Some(z) = &z {
        export_field(z, &cfg.out.join("grad_field.csv"))?;
    }
    let mut metrics = metrics_against_exact(&prob, &u, z.as_ref())?;
    // With no closed form, fall back to a finite-difference reference if one
    // has been produced in this output directory.
    if !prob.has_exact() {
        let fdm_path = cfg.out.join("fdm_field.csv");
        if fdm_path.exists() {
            let reference = import_field(&fdm_path)?;
            metrics.mse_vs_fdm = Some(mse(&u, &reference)?);
        }
    }
    let testing_seconds = t0.elapsed().as_secs_f64();

    #[derive(Serialize)]
    struct EvalResult {
        n_nodes: usize,
        testing_seconds: f64,
        metrics: Metrics,
    }
    write_manifest(
        cfg,
        "eval.manifest.toml",
        &EvalResult {
            n_nodes: grid.n_nodes(),
            testing_seconds,
            metrics,
        },
    )?;

    // Table-shaped summary line, merging sampling/training info when present.
    let sample_res = manifest_result(cfg, "sample.manifest.toml");
    let train_res = manifest_result(cfg, "train.manifest.toml");
    let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    println!(
        "method=wos-nn paths={} time={}/{:.2}/{:.2}s training_loss={} err_u={} err_grad={}",
        result_i64(&sample_res, "n_valid")
            .map_or("-".into(), |v| v.to_string()),
        result_f64(&sample_res, "sampling_seconds")
            .map_or("-".into(), |v| format!("{v:.2}")),
        result_f64(&train_res, "training_seconds").unwrap_or(0.0),
        testing_seconds,
        fmt_opt(result_f64(&train_res, "final_loss").or(Some(ckpt_meta.final_loss))),
        fmt_opt(metrics.mean_error_u),
        fmt_opt(metrics.mean_error_grad),
    );
    if let Some(v) = metrics.mse_vs_fdm {
        println!("mse_vs_fdm={v:.6e}");
    }
    Ok(())
}

pub fn cmd_wos(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let prob = cfg.build_problem()?;
    let grid = eval_grid(&prob, cfg.grid_spacing)?;
    let t0 = Instant::now();
    let estimates = wos_grid_estimates(
        &prob,
        grid.nodes(),
        cfg.wos_paths_per_point,
        cfg.eps,
        cfg.max_steps,
        cfg.seed,
    )?;
    let sampling_seconds = t0.elapsed().as_secs_f64();

    let mut u = FieldGrid::like(&grid, 1);
    let mut se = FieldGrid::like(&grid, 1);
    let mut total_valid = 0usize;
    for (i, est) in estimates.iter().enumerate() {
        u.values_mut()[[i, 0]] = est.estimate;
        se.values_mut()[[i, 0]] = est.stderr;
        total_valid += est.n_valid;
    }
    export_field(&u, &cfg.out.join("wos_field.csv"))?;
    export_field(&se, &cfg.out.join("wos_stderr.csv"))?;
    let metrics = metrics_against_exact(&prob, &u, None)?;

    #[derive(Serialize)]
    struct WosResult {
        n_nodes: usize,
        paths_per_point: usize,
        total_valid_paths: usize,
        sampling_seconds: f64,
        metrics: Metrics,
    }
    write_manifest(
        cfg,
        "wos.manifest.toml",
        &WosResult {
            n_nodes: grid.n_nodes(),
            paths_per_point: cfg.wos_paths_per_point,
            total_valid_paths: total_valid,
            sampling_seconds,
            metrics,
        },
    )?;
    println!(
        "method=wos paths={total_valid} time={sampling_seconds:.2}s err_u={}",
        metrics
            .mean_error_u
            .map_or("-".to_string(), |x| format!("{x:.6}"))
    );
    Ok(())
}

pub fn cmd_wos_nn_baseline(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let prob = cfg.build_problem()?;
    let grid = eval_grid(&prob, cfg.grid_spacing)?;
    let t0 = Instant::now();
    let estimates = wos_grid_estimates(
        &prob,
        grid.nodes(),
        cfg.wos_paths_per_point,
        cfg.eps,
        cfg.max_steps,
        cfg.seed,
    )?;
    let sampling_seconds = t0.elapsed().as_secs_f64();
    let total_valid: usize = estimates.iter().map(|e| e.n_valid).sum();
    let targets: Vec<f64> = estimates.iter().map(|e| e.estimate).collect();

    let t1 = Instant::now();
    let (net, history) = train_wos_driven(
        grid.nodes(),
        &targets,
        &cfg.hidden,
        &cfg.baseline_train_config(),
    )?;
    let training_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let u = predict_scalar_field(&net, &grid)?;
    export_field(&u, &cfg.out.join("baseline_field.csv"))?;
    let metrics = metrics_against_exact(&prob, &u, None)?;
    let testing_seconds = t2.elapsed().as_secs_f64();

    #[derive(Serialize)]
    struct BaselineResult {
        n_training_pairs: usize,
        total_valid_paths: usize,
        final_loss: f64,
        sampling_seconds: f64,
        training_seconds: f64,
        testing_seconds: f64,
        metrics: Metrics,
    }
    write_manifest(
        cfg,
        "baseline.manifest.toml",
        &BaselineResult {
            n_training_pairs: grid.n_nodes(),
            total_valid_paths: total_valid,
            final_loss: *history.last().unwrap(),
            sampling_seconds,
            training_seconds,
            testing_seconds,
            metrics,
        },
    )?;
    println!(
        "method=wos-driven-nn pairs={} paths={total_valid} time={sampling_seconds:.2}/{training_seconds:.2}/{testing_seconds:.2}s training_loss={:.6} err_u={}",
        grid.n_nodes(),
        history.last().unwrap(),
        metrics
            .mean_error_u
            .map_or("-".to_string(), |x| format!("{x:.6}"))
    );
    Ok(())
}

pub fn cmd_fdm(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let prob = cfg.build_problem()?;
    let t0 = Instant::now();
    let u = solve_fdm_relaxed(
        &prob,
        cfg.grid_spacing,
        cfg.fdm_tol,
        cfg.fdm_max_iters,
        cfg.fdm_omega,
    )?;
    let seconds = t0.elapsed().as_secs_f64();
    export_field(&u, &cfg.out.join("fdm_field.csv"))?;
    let metrics = metrics_against_exact(&prob, &u, None)?;

    #[derive(Serialize)]
    struct FdmResult {
        n_nodes: usize,
        seconds: f64,
        metrics: Metrics,
    }
    write_manifest(
        cfg,
        "fdm.manifest.toml",
        &FdmResult {
            n_nodes: u.n_nodes(),
            seconds,
            metrics,
        },
    )?;
    println!("method=fdm nodes={} time={seconds:.2}s", u.n_nodes());
    Ok(())
}
