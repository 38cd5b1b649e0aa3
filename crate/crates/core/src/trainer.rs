//! Path vectorization, the telescoped boundary-prediction loss, the training
//! loop, and the WoS-driven regression baseline.
//!
//! The per-path prediction is u(x_0) + Σ_{i<maxLen} z(x_i)·Δ_i against the
//! stored boundary target (source contributions already folded in by the
//! sampler). Padded steps repeat the final shell point, so their deltas are
//! exactly zero and contribute nothing to either the loss or the gradient;
//! the kernel therefore evaluates the network only at live positions, which
//! changes no bit of the result.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::fields::FieldGrid;
use crate::geometry::Point;
use crate::nn::{AdamState, Mlp, MlpGrads, YzNet};
use crate::rng::RngStream;
use crate::wos::WosPath;

/// Padded batch of trajectories with boundary targets.
#[derive(Clone, Debug)]
pub struct PathDataset {
    dim: usize,
    max_len: usize,
    /// N × (max_len + 1) × dim; rows past a path's length repeat its final
    /// shell point.
    centers: Array3<f64>,
    lengths: Vec<u32>,
    targets: Vec<f64>,
}

impl PathDataset {
    pub fn n_paths(&self) -> usize {
        self.lengths.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn centers(&self) -> &Array3<f64> {
        &self.centers
    }

    pub fn start(&self, row: usize) -> Point {
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = self.centers[[row, 0, a]];
        }
        Point::from_slice(&c[..self.dim])
    }
}

/// Pads every path to the longest retained length.
pub fn vectorize(paths: &[WosPath]) -> Result<PathDataset> {
    let max_len = paths.iter().map(|p| p.len()).max().unwrap_or(0);
    vectorize_with_max_len(paths, max_len)
}

/// Pads to an explicit length (at least the longest path); longer padding
/// must not change any loss value.
pub fn vectorize_with_max_len(paths: &[WosPath], max_len: usize) -> Result<PathDataset> {
    if paths.is_empty() {
        return Err(Error::Config("cannot vectorize an empty path set".into()));
    }
    if let Some(p) = paths.iter().find(|p| !p.valid) {
        return Err(Error::Input(format!(
            "invalid path (start {:?}) in dataset; filter before vectorizing",
            p.start()
        )));
    }
    let dim = paths[0].centers[0].dim();
    if paths.iter().any(|p| p.centers[0].dim() != dim) {
        return Err(Error::Input("paths mix dimensions".into()));
    }
    let longest = paths.iter().map(|p| p.len()).max().unwrap();
    if max_len < longest {
        return Err(Error::Config(format!(
            "max_len {max_len} is shorter than the longest path ({longest})"
        )));
    }

    let n = paths.len();
    let mut centers = Array3::zeros((n, max_len + 1, dim));
    let mut lengths = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for (row, path) in paths.iter().enumerate() {
        let k = path.len();
        for i in 0..=max_len {
            let c = path.centers[i.min(k)];
            for a in 0..dim {
                centers[[row, i, a]] = c[a];
            }
        }
        lengths.push(k as u32);
        targets.push(path.target);
    }
    Ok(PathDataset {
        dim,
        max_len,
        centers,
        lengths,
        targets,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    fn validate(&self, n_samples: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > n_samples {
            return Err(Error::Config(format!(
                "batch size must be in 1..={n_samples}, got {}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Loss and parameter gradients over the given dataset rows.
pub fn path_loss(net: &YzNet, ds: &PathDataset, rows: &[usize]) -> Result<(f64, MlpGrads)> {
    let (loss, grads) = eval_rows(net, ds, rows, true)?;
    Ok((loss, grads.unwrap()))
}

/// Loss only; bit-identical to the value returned by [`path_loss`].
pub fn path_loss_value(net: &YzNet, ds: &PathDataset, rows: &[usize]) -> Result<f64> {
    Ok(eval_rows(net, ds, rows, false)?.0)
}

fn eval_rows(
    net: &YzNet,
    ds: &PathDataset,
    rows: &[usize],
    with_grads: bool,
) -> Result<(f64, Option<MlpGrads>)> {
    if rows.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    if ds.dim != net.dim() {
        return Err(Error::Input(format!(
            "dataset dimension {} does not match network dimension {}",
            ds.dim,
            net.dim()
        )));
    }
    let b = rows.len();
    let dim = ds.dim;

    // Sort rows by length, longest first, so the rows still alive at step i
    // are exactly the prefix of the batch. The sort is stable, keeping the
    // evaluation order a function of the batch alone.
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&ra, &rb| ds.lengths[rb].cmp(&ds.lengths[ra]));
    let live_at = |step: usize| order.partition_point(|&r| ds.lengths[r] as usize > step);
    let k_max = ds.lengths[order[0]] as usize;

    let gather = |step: usize, n: usize| -> Array2<f64> {
        let mut x = Array2::zeros((n, dim));
        for (r, &row) in order[..n].iter().enumerate() {
            for a in 0..dim {
                x[[r, a]] = ds.centers[[row, step, a]];
            }
        }
        x
    };
    let delta = |step: usize, n: usize| -> Array2<f64> {
        let mut d = Array2::zeros((n, dim));
        for (r, &row) in order[..n].iter().enumerate() {
            for a in 0..dim {
                d[[r, a]] = ds.centers[[row, step + 1, a]] - ds.centers[[row, step, a]];
            }
        }
        d
    };

    // Forward: the solution head at the start, the gradient head dotted with
    // each live step vector.
    let mut preds = vec![0.0; b];
    let mut caches = Vec::with_capacity(k_max.max(1));
    let mut deltas = Vec::with_capacity(k_max);
    for step in 0..k_max.max(1) {
        let n = if step == 0 { b } else { live_at(step) };
        let cache = net.mlp().forward_cached(gather(step, n).view());
        let n_live = live_at(step);
        let d = delta(step, n_live);
        {
            let out = cache.output();
            if step == 0 {
                for r in 0..b {
                    preds[r] = out[[r, 0]];
                }
            }
            for r in 0..n_live {
                let mut dot = 0.0;
                for a in 0..dim {
                    dot += out[[r, a + 1]] * d[[r, a]];
                }
                preds[r] += dot;
            }
        }
        caches.push(cache);
        deltas.push(d);
    }

    let inv_b = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut dpred = vec![0.0; b];
    for (r, &row) in order.iter().enumerate() {
        let res = preds[r] - ds.targets[row];
        loss += res * res * inv_b;
        dpred[r] = 2.0 * res * inv_b;
    }

    if !with_grads {
        return Ok((loss, None));
    }

    // Backward through every shared-network evaluation along the paths, in
    // step order.
    let mut grads = MlpGrads::zeros_like(net.mlp());
    for (step, (cache, d)) in caches.iter().zip(&deltas).enumerate() {
        let n = if step == 0 { b } else { d.nrows() };
        let mut dout = Array2::zeros((n, dim + 1));
        if step == 0 {
            for r in 0..b {
                dout[[r, 0]] = dpred[r];
            }
        }
        for r in 0..d.nrows() {
            for a in 0..dim {
                dout[[r, a + 1]] = dpred[r] * d[[r, a]];
            }
        }
        net.mlp().backward_acc(cache, dout, &mut grads);
    }
    Ok((loss, Some(grads)))
}

/// Shuffled minibatch epochs with Adam. Returns the per-epoch mean loss
/// (batch-size weighted); deterministic given the seed.
pub fn train(net: &mut YzNet, ds: &PathDataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let n = ds.n_paths();
    cfg.validate(n)?;
    let mut adam = AdamState::new(net.mlp(), cfg.learning_rate);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            indices = (0..n).collect();
            RngStream::new(cfg.seed, epoch as u64).shuffle(&mut indices);
        }
        let mut acc = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            let (loss, grads) = path_loss(net, ds, batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch: epoch + 1 });
            }
            adam.step(net.mlp_mut(), &grads);
            acc += loss * batch.len() as f64;
        }
        history.push(acc / n as f64);
    }
    Ok(history)
}

/// Plain squared-error regression of a scalar-output network directly on WoS
/// point estimates; the baseline has no path structure.
pub fn train_wos_driven(
    points: &[Point],
    wos_estimates: &[f64],
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(Mlp, Vec<f64>)> {
    if points.len() != wos_estimates.len() {
        return Err(Error::Input(format!(
            "{} points but {} estimates",
            points.len(),
            wos_estimates.len()
        )));
    }
    if points.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    cfg.validate(points.len())?;
    let dim = points[0].dim();
    let mut xs = Array2::zeros((points.len(), dim));
    for (r, p) in points.iter().enumerate() {
        for a in 0..dim {
            xs[[r, a]] = p[a];
        }
    }

    let mut net = Mlp::init(dim, hidden, 1, cfg.seed);
    let mut adam = AdamState::new(&net, cfg.learning_rate);
    let mut indices: Vec<usize> = (0..points.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            indices = (0..points.len()).collect();
            RngStream::new(cfg.seed, epoch as u64).shuffle(&mut indices);
        }
        let mut acc = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            let nb = batch.len();
            let mut x = Array2::zeros((nb, dim));
            for (r, &row) in batch.iter().enumerate() {
                x.row_mut(r).assign(&xs.row(row));
            }
            let cache = net.forward_cached(x.view());
            let mut loss = 0.0;
            let mut dout = Array2::zeros((nb, 1));
            {
                let out = cache.output();
                let inv = 1.0 / nb as f64;
                for (r, &row) in batch.iter().enumerate() {
                    let res = out[[r, 0]] - wos_estimates[row];
                    loss += res * res * inv;
                    dout[[r, 0]] = 2.0 * res * inv;
                }
            }
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch: epoch + 1 });
            }
            let mut grads = MlpGrads::zeros_like(&net);
            net.backward_acc(&cache, dout, &mut grads);
            adam.step(&mut net, &grads);
            acc += loss * nb as f64;
        }
        history.push(acc / points.len() as f64);
    }
    Ok((net, history))
}

/// Evaluates both heads at every grid node in a single pass.
pub fn predict_field(net: &YzNet, grid: &FieldGrid) -> Result<(FieldGrid, FieldGrid)> {
    let dim = grid.dim();
    if dim != net.dim() {
        return Err(Error::Input("grid dimension does not match network".into()));
    }
    let n = grid.n_nodes();
    let mut xs = Array2::zeros((n, dim));
    for (r, p) in grid.nodes().iter().enumerate() {
        for a in 0..dim {
            xs[[r, a]] = p[a];
        }
    }
    let out = net.forward_batch(xs.view())?;
    let mut u = FieldGrid::like(grid, 1);
    let mut z = FieldGrid::like(grid, dim);
    for r in 0..n {
        u.values_mut()[[r, 0]] = out[[r, 0]];
        for a in 0..dim {
            z.values_mut()[[r, a]] = out[[r, a + 1]];
        }
    }
    Ok((u, z))
}

/// Scalar-network variant for the WoS-driven baseline.
pub fn predict_scalar_field(net: &Mlp, grid: &FieldGrid) -> Result<FieldGrid> {
    if net.output_dim() != 1 {
        return Err(Error::Input("expected a scalar-output network".into()));
    }
    if net.input_dim() != grid.dim() {
        return Err(Error::Input("grid dimension does not match network".into()));
    }
    let n = grid.n_nodes();
    let mut xs = Array2::zeros((n, grid.dim()));
    for (r, p) in grid.nodes().iter().enumerate() {
        for a in 0..grid.dim() {
            xs[[r, a]] = p[a];
        }
    }
    let out = net.forward(xs.view());
    let mut u = FieldGrid::like(grid, 1);
    for r in 0..n {
        u.values_mut()[[r, 0]] = out[[r, 0]];
    }
    Ok(u)
}
