//! A small fully connected network with rectifier hidden layers, manual
//! reverse-mode gradients, Adam, and a binary checkpoint format. The YzNet
//! variant emits d+1 outputs per point: component 0 is the solution head,
//! components 1..d the gradient head. The heads share every hidden layer and
//! are coupled only through the loss.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt, LE};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::rng::RngStream;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// fan_in × fan_out.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Feed-forward stack: affine + rectifier on hidden layers, affine output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    output_dim: usize,
    hidden: Vec<usize>,
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Variance-scaled init: weights ~ N(0, 2/fan_in), biases zero,
    /// reproducible from the seed.
    pub fn init(input_dim: usize, hidden: &[usize], output_dim: usize, seed: u64) -> Self {
        assert!(hidden.iter().all(|&w| w > 0), "hidden widths must be positive");
        assert!(input_dim > 0 && output_dim > 0);
        let mut rng = RngStream::new(seed, 0);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden.iter().chain(std::iter::once(&output_dim)) {
            let scale = (2.0 / fan_in as f64).sqrt();
            let weights =
                Array2::from_shape_fn((fan_in, width), |_| scale * rng.standard_normal());
            layers.push(DenseLayer {
                weights,
                bias: Array1::zeros(width),
            });
            fan_in = width;
        }
        Mlp {
            input_dim,
            output_dim,
            hidden: hidden.to_vec(),
            layers,
        }
    }

    /// All-zero parameters; a fixture for tests.
    pub fn zeros(input_dim: usize, hidden: &[usize], output_dim: usize) -> Self {
        let mut net = Self::init(input_dim, hidden, output_dim, 0);
        for layer in &mut net.layers {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Batched forward pass: rows are points.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        debug_assert_eq!(x.ncols(), self.input_dim);
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut pre = a.dot(&layer.weights);
            pre += &layer.bias;
            if l < last {
                pre.mapv_inplace(|v| v.max(0.0));
            }
            a = pre;
        }
        a
    }

    /// Forward pass retaining every activation for a later backward pass.
    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> MlpCache {
        debug_assert_eq!(x.ncols(), self.input_dim);
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut pre = activations[l].dot(&layer.weights);
            pre += &layer.bias;
            if l < last {
                pre.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(pre);
        }
        MlpCache { activations }
    }

    /// Accumulates parameter gradients for `dout = ∂L/∂output` into `grads`.
    pub fn backward_acc(&self, cache: &MlpCache, dout: Array2<f64>, grads: &mut MlpGrads) {
        self.backprop(cache, dout, Some(grads), false);
    }

    /// Gradient of the loss with respect to the network input.
    pub fn input_gradient(&self, cache: &MlpCache, dout: Array2<f64>) -> Array2<f64> {
        self.backprop(cache, dout, None, true).unwrap()
    }

    fn backprop(
        &self,
        cache: &MlpCache,
        dout: Array2<f64>,
        mut grads: Option<&mut MlpGrads>,
        want_dx: bool,
    ) -> Option<Array2<f64>> {
        debug_assert_eq!(cache.activations.len(), self.layers.len() + 1);
        let mut dpre = dout;
        for l in (0..self.layers.len()).rev() {
            if let Some(g) = grads.as_deref_mut() {
                let input = &cache.activations[l];
                g.layers[l].0 += &input.t().dot(&dpre);
                g.layers[l].1 += &dpre.sum_axis(Axis(0));
            }
            if l > 0 {
                let mut dx = dpre.dot(&self.layers[l].weights.t());
                // Rectifier mask: the post-activation is positive exactly
                // where the unit was active.
                dx.zip_mut_with(&cache.activations[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                dpre = dx;
            } else if want_dx {
                return Some(dpre.dot(&self.layers[0].weights.t()));
            }
        }
        None
    }
}

/// Activations from a cached forward pass; `output()` is the network output.
#[derive(Clone, Debug)]
pub struct MlpCache {
    activations: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().unwrap()
    }
}

/// Parameter-shaped gradient buffers.
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    (
                        Array2::zeros(l.weights.raw_dim()),
                        Array1::zeros(l.bias.raw_dim()),
                    )
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite()))
    }
}

/// Adam with bias correction; moments start at zero, `t` increments once per
/// applied update.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        let shape = MlpGrads::zeros_like(net);
        AdamState {
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            t: 0,
            m: shape.layers.clone(),
            v: shape.layers,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[l];
            let (mw, mb) = &mut self.m[l];
            let (vw, vb) = &mut self.v[l];
            mw.zip_mut_with(gw, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            vw.zip_mut_with(gw, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            mb.zip_mut_with(gb, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            vb.zip_mut_with(gb, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            ndarray::Zip::from(&mut layer.weights)
                .and(&*mw)
                .and(&*vw)
                .for_each(|p, &m, &v| {
                    *p -= self.learning_rate * (m / bc1) / ((v / bc2).sqrt() + self.epsilon);
                });
            ndarray::Zip::from(&mut layer.bias)
                .and(&*mb)
                .and(&*vb)
                .for_each(|p, &m, &v| {
                    *p -= self.learning_rate * (m / bc1) / ((v / bc2).sqrt() + self.epsilon);
                });
        }
    }
}

/// The integrated network: one shared stack, a scalar solution head at output
/// component 0 and a d-vector gradient head at components 1..d.
#[derive(Clone, Debug, PartialEq)]
pub struct YzNet {
    mlp: Mlp,
}

impl YzNet {
    pub fn init(dim: usize, hidden: &[usize], seed: u64) -> Self {
        assert!(dim == 2 || dim == 3);
        YzNet {
            mlp: Mlp::init(dim, hidden, dim + 1, seed),
        }
    }

    pub fn zeros(dim: usize, hidden: &[usize]) -> Self {
        YzNet {
            mlp: Mlp::zeros(dim, hidden, dim + 1),
        }
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        if mlp.output_dim() != mlp.input_dim() + 1 {
            return Err(Error::Input(format!(
                "network with {} inputs must have {} outputs, got {}",
                mlp.input_dim(),
                mlp.input_dim() + 1,
                mlp.output_dim()
            )));
        }
        Ok(YzNet { mlp })
    }

    pub fn dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    /// Solution and gradient heads at one point.
    pub fn forward(&self, p: Point) -> Result<(f64, Point)> {
        if p.dim() != self.dim() {
            return Err(Error::Input(format!(
                "point has dimension {}, network expects {}",
                p.dim(),
                self.dim()
            )));
        }
        let mut x = Array2::zeros((1, self.dim()));
        for a in 0..self.dim() {
            x[[0, a]] = p[a];
        }
        let out = self.mlp.forward(x.view());
        let mut z = [0.0; 3];
        for a in 0..self.dim() {
            z[a] = out[[0, a + 1]];
        }
        Ok((out[[0, 0]], Point::from_slice(&z[..self.dim()])))
    }

    /// Batched heads: rows are points, columns are (u, z_1..z_d).
    pub fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if xs.ncols() != self.dim() {
            return Err(Error::Input(format!(
                "batch has {} columns, network expects {}",
                xs.ncols(),
                self.dim()
            )));
        }
        Ok(self.mlp.forward(xs))
    }
}

const CKPT_MAGIC: &[u8; 8] = b"YZNNCKPT";
const CKPT_VERSION: u32 = 1;

/// Training metadata stored alongside the parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epochs: u32,
    pub learning_rate: f64,
    pub final_loss: f64,
}

/// Versioned header (dims, widths, seed, training metadata) followed by the
/// raw 64-bit parameter array in layer order, little-endian.
pub fn save_checkpoint(file: &Path, net: &Mlp, meta: &CheckpointMeta) -> Result<()> {
    let io_err = |e| Error::io(file, e);
    let mut w = BufWriter::new(File::create(file).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        w.write_all(CKPT_MAGIC)?;
        w.write_u32::<LE>(CKPT_VERSION)?;
        w.write_u32::<LE>(net.input_dim() as u32)?;
        w.write_u32::<LE>(net.output_dim() as u32)?;
        w.write_u32::<LE>(net.hidden().len() as u32)?;
        for &h in net.hidden() {
            w.write_u32::<LE>(h as u32)?;
        }
        w.write_u64::<LE>(meta.seed)?;
        w.write_u32::<LE>(meta.epochs)?;
        w.write_f64::<LE>(meta.learning_rate)?;
        w.write_f64::<LE>(meta.final_loss)?;
        for layer in net.layers() {
            for v in layer.weights.iter() {
                w.write_f64::<LE>(*v)?;
            }
            for v in layer.bias.iter() {
                w.write_f64::<LE>(*v)?;
            }
        }
        w.flush()
    })()
    .map_err(io_err)
}

pub fn load_checkpoint(file: &Path) -> Result<(Mlp, CheckpointMeta)> {
    let io_err = |e| Error::io(file, e);
    let mut r = BufReader::new(File::open(file).map_err(io_err)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != CKPT_MAGIC {
        return Err(Error::format(file, "not a checkpoint (bad magic)"));
    }
    let version = r.read_u32::<LE>().map_err(io_err)?;
    if version != CKPT_VERSION {
        return Err(Error::format(file, format!("unsupported version {version}")));
    }
    let input_dim = r.read_u32::<LE>().map_err(io_err)? as usize;
    let output_dim = r.read_u32::<LE>().map_err(io_err)? as usize;
    let n_hidden = r.read_u32::<LE>().map_err(io_err)? as usize;
    if input_dim == 0 || output_dim == 0 || n_hidden > 64 {
        return Err(Error::format(file, "implausible network shape"));
    }
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(r.read_u32::<LE>().map_err(io_err)? as usize);
    }
    let meta = CheckpointMeta {
        seed: r.read_u64::<LE>().map_err(io_err)?,
        epochs: r.read_u32::<LE>().map_err(io_err)?,
        learning_rate: r.read_f64::<LE>().map_err(io_err)?,
        final_loss: r.read_f64::<LE>().map_err(io_err)?,
    };
    let mut net = Mlp::zeros(input_dim, &hidden, output_dim);
    for layer in net.layers_mut() {
        for v in layer.weights.iter_mut() {
            *v = r.read_f64::<LE>().map_err(io_err)?;
        }
        for v in layer.bias.iter_mut() {
            *v = r.read_f64::<LE>().map_err(io_err)?;
        }
    }
    Ok((net, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn parameter_count_follows_layer_shapes() {
        let net = Mlp::init(2, &[32, 64, 128], 3, 1);
        let expected = (2 * 32 + 32) + (32 * 64 + 64) + (64 * 128 + 128) + (128 * 3 + 3);
        assert_eq!(expected, 10_915);
        assert_eq!(net.n_params(), expected);
    }

    #[test]
    fn yznet_output_dims() {
        let net = YzNet::init(3, &[64, 128, 128], 1);
        assert_eq!(net.mlp().output_dim(), 4);
        let net2 = YzNet::init(2, &[32], 1);
        assert_eq!(net2.mlp().output_dim(), 3);
    }

    #[test]
    fn init_is_reproducible() {
        let a = Mlp::init(2, &[16, 8], 3, 99);
        let b = Mlp::init(2, &[16, 8], 3, 99);
        assert_eq!(a, b);
        let c = Mlp::init(2, &[16, 8], 3, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_net_maps_everything_to_zero() {
        let net = YzNet::zeros(2, &[8, 8]);
        let (u, z) = net.forward(Point::new2(0.3, -0.9)).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(z, Point::new2(0.0, 0.0));
    }

    #[test]
    fn batch_forward_equals_single_forwards_bitwise() {
        let net = Mlp::init(2, &[16, 32], 3, 5);
        let mut rng = RngStream::new(6, 0);
        let xs = Array2::from_shape_fn((37, 2), |_| rng.uniform_in(-1.0, 1.0));
        let batch = net.forward(xs.view());
        for r in 0..xs.nrows() {
            let row = xs.row(r).insert_axis(ndarray::Axis(0)).to_owned();
            let single = net.forward(row.view());
            for c in 0..3 {
                assert_eq!(
                    batch[[r, c]].to_bits(),
                    single[[0, c]].to_bits(),
                    "row {r} col {c}"
                );
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let net = YzNet::init(2, &[8], 1);
        assert!(net.forward(Point::new3(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn solution_head_input_gradient_matches_central_differences() {
        let net = YzNet::init(2, &[16, 16], 7);
        let mut rng = RngStream::new(8, 0);
        let h = 1e-6;
        for _ in 0..10 {
            let p = Point::new2(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0));
            let mut x = Array2::zeros((1, 2));
            x[[0, 0]] = p[0];
            x[[0, 1]] = p[1];
            let cache = net.mlp().forward_cached(x.view());
            let mut dout = Array2::zeros((1, 3));
            dout[[0, 0]] = 1.0;
            let dx = net.mlp().input_gradient(&cache, dout);
            for axis in 0..2 {
                let up = net.forward(p.with_coord(axis, p[axis] + h)).unwrap().0;
                let dn = net.forward(p.with_coord(axis, p[axis] - h)).unwrap().0;
                let fd = (up - dn) / (2.0 * h);
                let rel = (dx[[0, axis]] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-4, "axis {axis}: analytic {} fd {fd}", dx[[0, axis]]);
            }
        }
    }

    #[test]
    fn forward_stays_bounded_on_the_unit_box() {
        let net = YzNet::init(3, &[64, 128, 128], 11);
        let mut rng = RngStream::new(12, 0);
        for _ in 0..100 {
            let p = Point::new3(
                rng.uniform_in(-1.0, 1.0),
                rng.uniform_in(-1.0, 1.0),
                rng.uniform_in(-1.0, 1.0),
            );
            let (u, z) = net.forward(p).unwrap();
            assert!(u.is_finite() && u.abs() < 1e3);
            assert!(z.norm().is_finite() && z.norm() < 1e3);
        }
    }

    #[test]
    fn adam_ignores_zero_gradients() {
        let mut net = Mlp::init(2, &[8], 1, 3);
        let before = net.clone();
        let mut adam = AdamState::new(&net, 1e-3);
        let grads = MlpGrads::zeros_like(&net);
        for _ in 0..5 {
            adam.step(&mut net, &grads);
        }
        assert_eq!(net, before);
    }

    #[test]
    fn adam_constant_gradient_update_approaches_learning_rate() {
        let mut net = Mlp::zeros(1, &[], 1);
        let lr = 1e-3;
        let mut adam = AdamState::new(&net, lr);
        let mut grads = MlpGrads::zeros_like(&net);
        grads.layers[0].0[[0, 0]] = 0.5;
        let mut prev = net.layers()[0].weights[[0, 0]];
        let mut last_step = 0.0;
        for _ in 0..200 {
            adam.step(&mut net, &grads);
            let cur = net.layers()[0].weights[[0, 0]];
            last_step = (prev - cur).abs();
            prev = cur;
        }
        assert!(
            (last_step - lr).abs() < 0.05 * lr,
            "step size {last_step} vs lr {lr}"
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = Mlp::init(2, &[32, 64, 128], 3, 21);
        let meta = CheckpointMeta {
            seed: 21,
            epochs: 50,
            learning_rate: 3e-4,
            final_loss: 0.0217,
        };
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("model.ckpt");
        save_checkpoint(&file, &net, &meta).unwrap();
        let (net2, meta2) = load_checkpoint(&file).unwrap();
        assert_eq!(net, net2);
        assert_eq!(meta, meta2);

        // Saving again is byte-identical.
        let file2 = dir.path().join("model2.ckpt");
        save_checkpoint(&file2, &net2, &meta2).unwrap();
        assert_eq!(
            std::fs::read(&file).unwrap(),
            std::fs::read(&file2).unwrap()
        );
    }

    #[test]
    fn corrupt_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("junk.ckpt");
        std::fs::write(&file, b"JUNKJUNKJUNK").unwrap();
        assert!(load_checkpoint(&file).is_err());
    }
}
