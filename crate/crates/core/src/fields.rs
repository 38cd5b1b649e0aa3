//! Evaluation lattices, error metrics, and delimited-text export — the
//! machinery behind every reported error number and field plot.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};

/// Robust margin for classifying lattice nodes: coordinates are i·h and may
/// sit a few ulps off an exact boundary.
pub(crate) const LATTICE_EPS: f64 = 1e-9;

/// A regular lattice of interior nodes carrying one scalar or one d-vector
/// per node. Nodes are integer multiples of the spacing, ordered
/// lexicographically by index, restricted to the domain interior.
#[derive(Clone, Debug)]
pub struct FieldGrid {
    dim: usize,
    spacing: f64,
    lo: Point,
    hi: Point,
    nodes: Vec<Point>,
    values: Array2<f64>,
}

impl FieldGrid {
    /// Lattice over the whole domain.
    pub fn lattice(dom: &Domain, spacing: f64, arity: usize) -> Result<Self> {
        let (lo, hi) = dom.bounds();
        Self::lattice_in(dom, lo, hi, spacing, arity)
    }

    /// Lattice clipped to the window `[lo, hi]`; a degenerate axis (lo == hi)
    /// yields a plane or line of nodes.
    pub fn lattice_in(
        dom: &Domain,
        lo: Point,
        hi: Point,
        spacing: f64,
        arity: usize,
    ) -> Result<Self> {
        if spacing <= 0.0 {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        if lo.dim() != dom.dim() || hi.dim() != dom.dim() {
            return Err(Error::Input("grid window dimension mismatch".into()));
        }
        if arity != 1 && arity != dom.dim() {
            return Err(Error::Config(format!(
                "value arity must be 1 or {}, got {arity}",
                dom.dim()
            )));
        }
        let dim = dom.dim();
        let mut ranges = Vec::with_capacity(dim);
        for a in 0..dim {
            if lo[a] > hi[a] {
                return Err(Error::Config("grid window requires lo <= hi".into()));
            }
            let i_min = ((lo[a] / spacing) - LATTICE_EPS).ceil() as i64;
            let i_max = ((hi[a] / spacing) + LATTICE_EPS).floor() as i64;
            ranges.push((i_min, i_max));
        }
        let mut nodes = Vec::new();
        let mut idx = vec![0i64; dim];
        collect_nodes(dom, spacing, &ranges, &mut idx, 0, &mut nodes);
        let values = Array2::zeros((nodes.len(), arity));
        Ok(FieldGrid {
            dim,
            spacing,
            lo,
            hi,
            nodes,
            values,
        })
    }

    /// A grid with the same node set but a different value arity.
    pub fn like(other: &FieldGrid, arity: usize) -> Self {
        FieldGrid {
            dim: other.dim,
            spacing: other.spacing,
            lo: other.lo,
            hi: other.hi,
            nodes: other.nodes.clone(),
            values: Array2::zeros((other.nodes.len(), arity)),
        }
    }

    pub(crate) fn from_parts(
        dim: usize,
        spacing: f64,
        lo: Point,
        hi: Point,
        nodes: Vec<Point>,
        values: Array2<f64>,
    ) -> Self {
        assert_eq!(nodes.len(), values.nrows());
        FieldGrid {
            dim,
            spacing,
            lo,
            hi,
            nodes,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn bounds(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    pub fn arity(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.values.view_mut()
    }

    /// Fills scalar values from a function of the node position.
    pub fn fill_scalar(&mut self, f: impl Fn(Point) -> f64) {
        assert_eq!(self.arity(), 1);
        for (i, &p) in self.nodes.iter().enumerate() {
            self.values[[i, 0]] = f(p);
        }
    }

    /// Fills vector values from a function of the node position.
    pub fn fill_vector(&mut self, f: impl Fn(Point) -> Point) {
        assert_eq!(self.arity(), self.dim);
        for (i, &p) in self.nodes.iter().enumerate() {
            let v = f(p);
            for a in 0..self.dim {
                self.values[[i, a]] = v[a];
            }
        }
    }

    /// Index of the node at `p`, if present (exact match up to LATTICE_EPS).
    pub fn find_node(&self, p: Point) -> Option<usize> {
        self.nodes
            .iter()
            .position(|q| q.dist(&p) < LATTICE_EPS * 10.0)
    }

    /// Same node set, spacing, and window.
    pub fn aligned_with(&self, other: &FieldGrid) -> bool {
        self.dim == other.dim
            && self.spacing == other.spacing
            && self.nodes.len() == other.nodes.len()
            && self.nodes == other.nodes
    }
}

fn collect_nodes(
    dom: &Domain,
    spacing: f64,
    ranges: &[(i64, i64)],
    idx: &mut [i64],
    axis: usize,
    out: &mut Vec<Point>,
) {
    if axis == ranges.len() {
        let mut c = [0.0; 3];
        for a in 0..ranges.len() {
            c[a] = idx[a] as f64 * spacing;
        }
        let p = Point::from_slice(&c[..ranges.len()]);
        if dom.signed_distance(p) > LATTICE_EPS {
            out.push(p);
        }
        return;
    }
    for i in ranges[axis].0..=ranges[axis].1 {
        idx[axis] = i;
        collect_nodes(dom, spacing, ranges, idx, axis + 1, out);
    }
}

fn check_aligned(a: &FieldGrid, b: &FieldGrid) -> Result<()> {
    if !a.aligned_with(b) {
        return Err(Error::Input("grids are not aligned".into()));
    }
    Ok(())
}

/// Mean over nodes of the Euclidean distance between values — the absolute
/// difference for scalars, the vector norm for gradients. Symmetric.
pub fn mean_error(a: &FieldGrid, b: &FieldGrid) -> Result<f64> {
    check_aligned(a, b)?;
    if a.arity() != b.arity() {
        return Err(Error::Input("grids carry different value arities".into()));
    }
    let n = a.n_nodes();
    if n == 0 {
        return Err(Error::Input("empty grid".into()));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let mut d2 = 0.0;
        for j in 0..a.arity() {
            let d = a.values[[i, j]] - b.values[[i, j]];
            d2 += d * d;
        }
        acc += d2.sqrt();
    }
    Ok(acc / n as f64)
}

/// Root-mean-square error normalized by the rms of the truth. Not symmetric.
#[derive(Clone, Copy, Debug)]
pub struct Rrmse {
    pub value: f64,
    /// True when the truth field was identically zero and `value` is the
    /// plain rms error instead.
    pub truth_norm_zero: bool,
}

pub fn rrmse(estimate: &FieldGrid, truth: &FieldGrid) -> Result<Rrmse> {
    check_aligned(estimate, truth)?;
    if estimate.arity() != 1 || truth.arity() != 1 {
        return Err(Error::Input("rrmse expects scalar grids".into()));
    }
    let n = estimate.n_nodes();
    if n == 0 {
        return Err(Error::Input("empty grid".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let d = estimate.values[[i, 0]] - truth.values[[i, 0]];
        num += d * d;
        den += truth.values[[i, 0]] * truth.values[[i, 0]];
    }
    if den == 0.0 {
        Ok(Rrmse {
            value: (num / n as f64).sqrt(),
            truth_norm_zero: true,
        })
    } else {
        Ok(Rrmse {
            value: (num / den).sqrt(),
            truth_norm_zero: false,
        })
    }
}

/// Mean of squared differences between scalar grids.
pub fn mse(a: &FieldGrid, b: &FieldGrid) -> Result<f64> {
    check_aligned(a, b)?;
    if a.arity() != 1 || b.arity() != 1 {
        return Err(Error::Input("mse expects scalar grids".into()));
    }
    let n = a.n_nodes();
    if n == 0 {
        return Err(Error::Input("empty grid".into()));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let d = a.values[[i, 0]] - b.values[[i, 0]];
        acc += d * d;
    }
    Ok(acc / n as f64)
}

const COORD_NAMES: [&str; 3] = ["x", "y", "z"];
const GRAD_NAMES: [&str; 3] = ["zx", "zy", "zz"];

/// Writes the grid as delimited text: a metadata comment, a header row naming
/// the columns, then one node per row with 17-significant-digit decimals in
/// canonical node order.
pub fn export_field(g: &FieldGrid, file: &Path) -> Result<()> {
    let io_err = |e| Error::io(file, e);
    let mut w = BufWriter::new(File::create(file).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        write!(
            w,
            "# wosnn-field v1 dim={} arity={} spacing={:.16e} lo=",
            g.dim,
            g.arity(),
            g.spacing
        )?;
        for a in 0..g.dim {
            write!(w, "{}{:.16e}", if a > 0 { "," } else { "" }, g.lo[a])?;
        }
        write!(w, " hi=")?;
        for a in 0..g.dim {
            write!(w, "{}{:.16e}", if a > 0 { "," } else { "" }, g.hi[a])?;
        }
        writeln!(w)?;
        let mut cols: Vec<&str> = COORD_NAMES[..g.dim].to_vec();
        if g.arity() == 1 {
            cols.push("u");
        } else {
            cols.extend_from_slice(&GRAD_NAMES[..g.arity()]);
        }
        writeln!(w, "{}", cols.join(","))?;
        for (i, p) in g.nodes.iter().enumerate() {
            for a in 0..g.dim {
                write!(w, "{}{:.16e}", if a > 0 { "," } else { "" }, p[a])?;
            }
            for j in 0..g.arity() {
                write!(w, ",{:.16e}", g.values[[i, j]])?;
            }
            writeln!(w)?;
        }
        w.flush()
    })()
    .map_err(io_err)
}

/// Reads a field written by [`export_field`].
pub fn import_field(file: &Path) -> Result<FieldGrid> {
    let io_err = |e| Error::io(file, e);
    let reader = BufReader::new(File::open(file).map_err(io_err)?);
    let mut lines = reader.lines();

    let meta = lines
        .next()
        .ok_or_else(|| Error::format(file, "empty file"))?
        .map_err(io_err)?;
    let meta = meta
        .strip_prefix("# wosnn-field v1 ")
        .ok_or_else(|| Error::format(file, "missing field metadata line"))?;
    let mut dim = 0usize;
    let mut arity = 0usize;
    let mut spacing = 0.0f64;
    let mut lo = vec![];
    let mut hi = vec![];
    for part in meta.split_whitespace() {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Error::format(file, format!("bad metadata entry {part:?}")))?;
        let parse_list = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::format(file, format!("bad number {s:?}")))
                })
                .collect()
        };
        match key {
            "dim" => dim = val.parse().map_err(|_| Error::format(file, "bad dim"))?,
            "arity" => arity = val.parse().map_err(|_| Error::format(file, "bad arity"))?,
            "spacing" => {
                spacing = val
                    .parse()
                    .map_err(|_| Error::format(file, "bad spacing"))?
            }
            "lo" => lo = parse_list(val)?,
            "hi" => hi = parse_list(val)?,
            _ => return Err(Error::format(file, format!("unknown metadata key {key:?}"))),
        }
    }
    if !(dim == 2 || dim == 3) || lo.len() != dim || hi.len() != dim || arity == 0 {
        return Err(Error::format(file, "inconsistent metadata"));
    }

    let _header = lines
        .next()
        .ok_or_else(|| Error::format(file, "missing header row"))?
        .map_err(io_err)?;

    let mut nodes = Vec::new();
    let mut flat = Vec::new();
    for line in lines {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::format(file, format!("bad number {s:?}")))
            })
            .collect::<Result<_>>()?;
        if fields.len() != dim + arity {
            return Err(Error::format(
                file,
                format!("expected {} columns, got {}", dim + arity, fields.len()),
            ));
        }
        nodes.push(Point::from_slice(&fields[..dim]));
        flat.extend_from_slice(&fields[dim..]);
    }
    let values = Array2::from_shape_vec((nodes.len(), arity), flat)
        .map_err(|e| Error::format(file, e.to_string()))?;
    Ok(FieldGrid::from_parts(
        dim,
        spacing,
        Point::from_slice(&lo),
        Point::from_slice(&hi),
        nodes,
        values,
    ))
}
