//! Walk-on-Spheres path generation and the classic point estimator. Each step
//! jumps to a uniform sample on the largest boundary-touching sphere; for
//! Poisson problems one extra Green-weighted sample per step accumulates the
//! source contribution. Walks terminate in the ε-shell and project to the
//! nearest boundary point; walks that exceed the step cap are discarded.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt, LE};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::greens::{sample_in_ball, shared_table, uniform_unit_vector};
use crate::problems::PdeProblem;
use crate::rng::RngStream;

/// Stream id reserved for generating starting places, so it never collides
/// with the per-path ids 0..n.
pub const STARTS_STREAM_ID: u64 = u64::MAX;

/// One recorded discretized trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct WosPath {
    /// Sphere centers x_0..x_k; x_k lies in the ε-shell.
    pub centers: Vec<Point>,
    /// Per-step weighted source values Ḡ(R_i)·f(y_i); empty for Laplace.
    pub source_steps: Vec<f64>,
    /// Boundary projection x̄ of the final center.
    pub exit_projection: Point,
    /// Σ Ḡ(R_i)·f(y_i).
    pub source_sum: f64,
    /// g(x̄) − source_sum; an unbiased estimate of u(x_0). NaN when invalid.
    pub target: f64,
    /// False when the walk exceeded the step cap before reaching the shell.
    pub valid: bool,
}

impl WosPath {
    /// Number of steps k (one less than the number of centers).
    pub fn len(&self) -> usize {
        self.centers.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> Point {
        self.centers[0]
    }

    /// Step vector Δ_i = x_{i+1} − x_i.
    pub fn delta(&self, i: usize) -> Point {
        self.centers[i + 1] - self.centers[i]
    }
}

/// Samples one walk from `x0`. Draw order per step is fixed: the in-ball
/// source sample (radius, then direction) when the problem has a source, then
/// the sphere direction.
pub fn sample_path(
    prob: &PdeProblem,
    x0: Point,
    eps: f64,
    max_steps: usize,
    rng: &mut RngStream,
) -> Result<WosPath> {
    if x0.dim() != prob.dim() {
        return Err(Error::Input(format!(
            "start point has dimension {}, problem expects {}",
            x0.dim(),
            prob.dim()
        )));
    }
    if prob.domain().signed_distance(x0) <= 0.0 {
        return Err(Error::Input(format!("start point {x0:?} is not interior")));
    }
    debug_assert!(eps > 0.0 && max_steps >= 1);

    let dom = prob.domain();
    let dim = prob.dim();
    let has_source = prob.has_source();
    let table = if has_source { Some(shared_table(dim)) } else { None };

    let mut centers = vec![x0];
    let mut source_steps = Vec::new();
    let mut x = x0;
    loop {
        if dom.in_epsilon_shell(x, eps) {
            break;
        }
        if centers.len() - 1 == max_steps {
            return Ok(WosPath {
                centers,
                source_steps,
                exit_projection: x,
                source_sum: f64::NAN,
                target: f64::NAN,
                valid: false,
            });
        }
        let r = dom.signed_distance(x);
        if let Some(table) = table {
            let s = sample_in_ball(x, r, table, rng);
            source_steps.push(s.weight * prob.source(s.y));
        }
        x = x + uniform_unit_vector(dim, rng) * r;
        centers.push(x);
    }

    let exit_projection = dom.closest_boundary_point(x);
    let source_sum: f64 = source_steps.iter().sum();
    let target = prob.boundary_value(exit_projection) - source_sum;
    Ok(WosPath {
        centers,
        source_steps,
        exit_projection,
        source_sum,
        target,
        valid: true,
    })
}

/// Point estimate from repeated walks at `x`.
#[derive(Clone, Copy, Debug)]
pub struct WosEstimate {
    pub estimate: f64,
    /// Standard error from the unbiased sample variance; zero for one path.
    pub stderr: f64,
    pub n_valid: usize,
}

pub fn wos_estimate(
    prob: &PdeProblem,
    x: Point,
    n_paths: usize,
    eps: f64,
    max_steps: usize,
    rng: &mut RngStream,
) -> Result<WosEstimate> {
    debug_assert!(n_paths >= 1);
    let mut n_valid = 0usize;
    let (mut acc, mut acc2) = (0.0, 0.0);
    for _ in 0..n_paths {
        let path = sample_path(prob, x, eps, max_steps, rng)?;
        if path.valid {
            n_valid += 1;
            acc += path.target;
            acc2 += path.target * path.target;
        }
    }
    if n_valid == 0 {
        return Err(Error::Estimation(format!(
            "no valid path out of {n_paths} at {x:?}; raise max_steps"
        )));
    }
    let n = n_valid as f64;
    let mean = acc / n;
    let stderr = if n_valid > 1 {
        let var = ((acc2 - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(WosEstimate {
        estimate: mean,
        stderr,
        n_valid,
    })
}

/// One walk per start, stream id = index. Invalid walks are dropped, so the
/// result length is the valid count. Workers own disjoint streams and the
/// merge order is the start order, independent of scheduling.
pub fn sample_dataset(
    prob: &PdeProblem,
    starts: &[Point],
    eps: f64,
    max_steps: usize,
    base_seed: u64,
) -> Result<Vec<WosPath>> {
    let paths: Vec<WosPath> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &x0)| {
            let mut rng = RngStream::new(base_seed, i as u64);
            sample_path(prob, x0, eps, max_steps, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(paths.into_iter().filter(|p| p.valid).collect())
}

/// Uniform starting places strictly inside the domain, by rejection from the
/// bounding box.
pub fn uniform_starts(dom: &Domain, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = RngStream::new(seed, STARTS_STREAM_ID);
    let (lo, hi) = dom.bounds();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut c = [0.0; 3];
        for (i, ci) in c.iter_mut().take(dom.dim()).enumerate() {
            *ci = rng.uniform_in(lo[i], hi[i]);
        }
        let p = Point::from_slice(&c[..dom.dim()]);
        if dom.is_interior(p) {
            out.push(p);
        }
    }
    out
}

/// Classic-WoS estimates at every node, stream id = node index.
pub fn wos_grid_estimates(
    prob: &PdeProblem,
    nodes: &[Point],
    paths_per_point: usize,
    eps: f64,
    max_steps: usize,
    base_seed: u64,
) -> Result<Vec<WosEstimate>> {
    nodes
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut rng = RngStream::new(base_seed, i as u64);
            wos_estimate(prob, x, paths_per_point, eps, max_steps, &mut rng)
        })
        .collect()
}

const PATH_FILE_MAGIC: &[u8; 8] = b"WOSNNPTH";
const PATH_FILE_VERSION: u32 = 1;

/// Header of a persisted path dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFileHeader {
    pub dim: usize,
    pub eps: f64,
    pub max_steps: usize,
    pub problem: String,
    pub seed: u64,
    pub n_paths: usize,
}

/// Writes valid paths to a flat binary file: magic + header, then one record
/// per path (step count, centers, per-step weighted source values, exit
/// projection, target). All integers and floats are little-endian.
pub fn write_paths(
    file: &Path,
    header: &PathFileHeader,
    paths: &[WosPath],
) -> Result<()> {
    let io_err = |e| Error::io(file, e);
    debug_assert_eq!(header.n_paths, paths.len());
    let mut w = BufWriter::new(File::create(file).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        w.write_all(PATH_FILE_MAGIC)?;
        w.write_u32::<LE>(PATH_FILE_VERSION)?;
        w.write_u32::<LE>(header.dim as u32)?;
        w.write_f64::<LE>(header.eps)?;
        w.write_u32::<LE>(header.max_steps as u32)?;
        w.write_u64::<LE>(header.seed)?;
        let name = header.problem.as_bytes();
        w.write_u32::<LE>(name.len() as u32)?;
        w.write_all(name)?;
        w.write_u64::<LE>(paths.len() as u64)?;
        for path in paths {
            debug_assert!(path.valid);
            w.write_u32::<LE>(path.len() as u32)?;
            for c in &path.centers {
                for a in 0..header.dim {
                    w.write_f64::<LE>(c[a])?;
                }
            }
            if path.source_steps.is_empty() {
                for _ in 0..path.len() {
                    w.write_f64::<LE>(0.0)?;
                }
            } else {
                for s in &path.source_steps {
                    w.write_f64::<LE>(*s)?;
                }
            }
            for a in 0..header.dim {
                w.write_f64::<LE>(path.exit_projection[a])?;
            }
            w.write_f64::<LE>(path.target)?;
        }
        w.flush()
    })()
    .map_err(io_err)
}

pub fn read_paths(file: &Path) -> Result<(PathFileHeader, Vec<WosPath>)> {
    let io_err = |e| Error::io(file, e);
    let mut r = BufReader::new(File::open(file).map_err(io_err)?);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != PATH_FILE_MAGIC {
        return Err(Error::format(file, "not a path dataset (bad magic)"));
    }
    let version = r.read_u32::<LE>().map_err(io_err)?;
    if version != PATH_FILE_VERSION {
        return Err(Error::format(file, format!("unsupported version {version}")));
    }
    let dim = r.read_u32::<LE>().map_err(io_err)? as usize;
    if dim != 2 && dim != 3 {
        return Err(Error::format(file, format!("bad dimension {dim}")));
    }
    let eps = r.read_f64::<LE>().map_err(io_err)?;
    let max_steps = r.read_u32::<LE>().map_err(io_err)? as usize;
    let seed = r.read_u64::<LE>().map_err(io_err)?;
    let name_len = r.read_u32::<LE>().map_err(io_err)? as usize;
    if name_len > 4096 {
        return Err(Error::format(file, "unreasonable problem-name length"));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name).map_err(io_err)?;
    let problem = String::from_utf8(name)
        .map_err(|_| Error::format(file, "problem name is not utf-8"))?;
    let n_paths = r.read_u64::<LE>().map_err(io_err)? as usize;

    let mut paths = Vec::with_capacity(n_paths);
    let mut coords = [0.0; 3];
    for _ in 0..n_paths {
        let k = r.read_u32::<LE>().map_err(io_err)? as usize;
        if k > max_steps {
            return Err(Error::format(file, format!("path length {k} > max_steps")));
        }
        let mut centers = Vec::with_capacity(k + 1);
        for _ in 0..=k {
            for c in coords.iter_mut().take(dim) {
                *c = r.read_f64::<LE>().map_err(io_err)?;
            }
            centers.push(Point::from_slice(&coords[..dim]));
        }
        let mut source_steps = Vec::with_capacity(k);
        for _ in 0..k {
            source_steps.push(r.read_f64::<LE>().map_err(io_err)?);
        }
        for c in coords.iter_mut().take(dim) {
            *c = r.read_f64::<LE>().map_err(io_err)?;
        }
        let exit_projection = Point::from_slice(&coords[..dim]);
        let target = r.read_f64::<LE>().map_err(io_err)?;
        let source_sum = source_steps.iter().sum();
        if source_steps.iter().all(|s| *s == 0.0) {
            source_steps.clear();
        }
        paths.push(WosPath {
            centers,
            source_steps,
            exit_projection,
            source_sum,
            target,
            valid: true,
        });
    }
    Ok((
        PathFileHeader {
            dim,
            eps,
            max_steps,
            problem,
            seed,
            n_paths,
        },
        paths,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace() -> PdeProblem {
        PdeProblem::builtin("laplace2d_xy").unwrap()
    }

    fn poisson() -> PdeProblem {
        PdeProblem::builtin("poisson2d_xy2").unwrap()
    }

    #[test]
    fn steps_land_on_sphere_and_shell() {
        let prob = laplace();
        let mut rng = RngStream::new(41, 0);
        for trial in 0..200 {
            let x0 = Point::new2(rng.uniform_in(-0.9, 0.9), rng.uniform_in(-0.9, 0.9));
            let mut path_rng = RngStream::new(41, 1000 + trial);
            let path = sample_path(&prob, x0, 1e-3, 200, &mut path_rng).unwrap();
            assert!(path.valid);
            for i in 0..path.len() {
                let r = prob.domain().signed_distance(path.centers[i]);
                assert!(
                    (path.delta(i).norm() - r).abs() < 1e-12,
                    "step {i} leaves the largest sphere"
                );
            }
            let last = *path.centers.last().unwrap();
            assert!(prob.domain().in_epsilon_shell(last, 1e-3));
            assert!(prob.domain().signed_distance(path.exit_projection).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_paths_have_no_source_steps() {
        let prob = laplace();
        let mut rng = RngStream::new(42, 0);
        let path = sample_path(&prob, Point::new2(0.0, 0.0), 1e-3, 200, &mut rng).unwrap();
        assert!(path.source_steps.is_empty());
        assert_eq!(path.source_sum, 0.0);
    }

    #[test]
    fn non_interior_start_is_an_input_error() {
        let prob = laplace();
        let mut rng = RngStream::new(43, 0);
        assert!(matches!(
            sample_path(&prob, Point::new2(1.5, 0.0), 1e-3, 20, &mut rng),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            sample_path(&prob, Point::new2(1.0, 0.0), 1e-3, 20, &mut rng),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn determinism_same_seed_same_path() {
        let prob = poisson();
        let a = sample_path(
            &prob,
            Point::new2(0.3, -0.2),
            1e-3,
            50,
            &mut RngStream::new(7, 99),
        )
        .unwrap();
        let b = sample_path(
            &prob,
            Point::new2(0.3, -0.2),
            1e-3,
            50,
            &mut RngStream::new(7, 99),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimator_is_unbiased_at_symmetric_and_generic_points() {
        let prob = laplace();
        // Odd symmetry of g = xy: expectation 0 at the center.
        let est = wos_estimate(
            &prob,
            Point::new2(0.0, 0.0),
            10_000,
            1e-3,
            20,
            &mut RngStream::new(44, 0),
        )
        .unwrap();
        assert!(
            est.estimate.abs() < 3.0 * est.stderr,
            "estimate {} stderr {}",
            est.estimate,
            est.stderr
        );

        // Harmonic u = xy is recovered exactly in expectation.
        let est = wos_estimate(
            &prob,
            Point::new2(0.3, 0.4),
            20_000,
            1e-3,
            20,
            &mut RngStream::new(44, 1),
        )
        .unwrap();
        assert!(
            (est.estimate - 0.12).abs() < 3.0 * est.stderr + 2e-3,
            "estimate {} stderr {}",
            est.estimate,
            est.stderr
        );
    }

    #[test]
    fn poisson_target_estimates_exact_solution() {
        let prob = poisson();
        let x = Point::new2(0.5, 0.5);
        let exact = prob.exact_u(x).unwrap();
        let est = wos_estimate(&prob, x, 20_000, 1e-3, 20, &mut RngStream::new(45, 0)).unwrap();
        assert!(
            (est.estimate - exact).abs() < 3.0 * est.stderr + 2e-3,
            "estimate {} vs exact {exact} (stderr {})",
            est.estimate,
            est.stderr
        );
    }

    #[test]
    fn dataset_excludes_invalid_and_is_deterministic() {
        let prob = laplace();
        let starts = uniform_starts(prob.domain(), 2000, 5);
        let a = sample_dataset(&prob, &starts, 1e-3, 20, 5).unwrap();
        let b = sample_dataset(&prob, &starts, 1e-3, 20, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.len() < starts.len(), "some paths should hit the cap");
        assert!(a.len() > starts.len() * 9 / 10, "validity rate too low");
        assert!(a.iter().all(|p| p.valid && p.source_steps.is_empty()));
    }

    #[test]
    fn mean_steps_grow_with_shrinking_eps() {
        let prob = laplace();
        let starts = uniform_starts(prob.domain(), 400, 6);
        let mut pts = Vec::new();
        for (j, eps) in [1e-2, 1e-3, 1e-4, 1e-5].into_iter().enumerate() {
            let mut total = 0usize;
            for (i, &x0) in starts.iter().enumerate() {
                let mut rng = RngStream::new(60 + j as u64, i as u64);
                let p = sample_path(&prob, x0, eps, 100_000, &mut rng).unwrap();
                total += p.len();
            }
            pts.push(((1.0 / eps).ln(), total as f64 / starts.len() as f64));
        }
        let (slope, r2) = linear_fit(&pts);
        assert!(slope > 0.0, "slope {slope}");
        assert!(r2 > 0.95, "r² {r2}");
    }

    pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let mean_y = sy / n;
        let ss_res: f64 = pts
            .iter()
            .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
            .sum();
        let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
        (slope, 1.0 - ss_res / ss_tot)
    }

    #[test]
    fn path_file_round_trip() {
        let prob = poisson();
        let starts = uniform_starts(prob.domain(), 200, 8);
        let paths = sample_dataset(&prob, &starts, 1e-3, 20, 8).unwrap();
        let header = PathFileHeader {
            dim: 2,
            eps: 1e-3,
            max_steps: 20,
            problem: prob.name().to_string(),
            seed: 8,
            n_paths: paths.len(),
        };
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.bin");
        write_paths(&file, &header, &paths).unwrap();
        let (h2, paths2) = read_paths(&file).unwrap();
        assert_eq!(header, h2);
        assert_eq!(paths, paths2);

        // Same seed twice: byte-identical files.
        let file2 = dir.path().join("paths2.bin");
        let paths_again = sample_dataset(&prob, &starts, 1e-3, 20, 8).unwrap();
        write_paths(&file2, &header, &paths_again).unwrap();
        assert_eq!(
            std::fs::read(&file).unwrap(),
            std::fs::read(&file2).unwrap()
        );
    }

    #[test]
    fn truncated_file_is_a_format_or_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.bin");
        std::fs::write(&file, b"WOSNNPTH\x01\x00").unwrap();
        assert!(read_paths(&file).is_err());
        std::fs::write(&file, b"NOTMAGIC_________").unwrap();
        assert!(matches!(read_paths(&file), Err(Error::Format { .. })));
    }
}
