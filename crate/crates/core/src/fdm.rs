//! Finite-difference Dirichlet reference solver: 5-point (2D) / 7-point (3D)
//! stencil with successive over-relaxation. Used to validate the stochastic
//! solver where no closed form exists.

use crate::error::{Error, Result};
use crate::fields::FieldGrid;
use crate::problems::PdeProblem;

const GEOM_EPS: f64 = 1e-9;
pub const DEFAULT_OMEGA: f64 = 1.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

/// Full lattice (boundary nodes included) backing one relaxation solve.
#[derive(Clone, Debug)]
pub struct FdmGrid {
    dim: usize,
    h: f64,
    base: [i64; 3],
    counts: [usize; 3],
    class: Vec<NodeClass>,
    values: Vec<f64>,
}

impl FdmGrid {
    fn build(prob: &PdeProblem, h: f64) -> Result<Self> {
        let dom = prob.domain();
        let dim = dom.dim();
        let (lo, hi) = dom.bounds();
        let mut base = [0i64; 3];
        let mut counts = [1usize; 3];
        for a in 0..dim {
            for bound in [lo[a], hi[a]] {
                let q = bound / h;
                if (q - q.round()).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "grid spacing {h} does not divide the domain bound {bound}"
                    )));
                }
            }
            base[a] = (lo[a] / h).round() as i64;
            counts[a] = ((hi[a] / h).round() as i64 - base[a]) as usize + 1;
        }

        let total: usize = counts[..dim].iter().product();
        let mut grid = FdmGrid {
            dim,
            h,
            base,
            counts,
            class: vec![NodeClass::Exterior; total],
            values: vec![0.0; total],
        };
        for flat in 0..total {
            let p = grid.node_point(flat);
            let sd = dom.signed_distance(p);
            grid.class[flat] = if sd > GEOM_EPS {
                NodeClass::Interior
            } else if sd > -GEOM_EPS {
                NodeClass::Boundary
            } else {
                NodeClass::Exterior
            };
            if grid.class[flat] == NodeClass::Boundary {
                grid.values[flat] = prob.boundary_value(p);
            }
        }
        // Every interior node needs all 2d stencil neighbors present.
        for flat in 0..total {
            if grid.class[flat] != NodeClass::Interior {
                continue;
            }
            for a in 0..dim {
                for nb in [grid.neighbor(flat, a, -1), grid.neighbor(flat, a, 1)] {
                    match nb {
                        Some(n) if grid.class[n] != NodeClass::Exterior => {}
                        _ => {
                            return Err(Error::Numerical(format!(
                                "interior node {:?} lacks a stencil neighbor",
                                grid.node_point(flat)
                            )))
                        }
                    }
                }
            }
        }
        Ok(grid)
    }

    fn node_point(&self, flat: usize) -> crate::geometry::Point {
        let idx = self.unflatten(flat);
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = (self.base[a] + idx[a] as i64) as f64 * self.h;
        }
        crate::geometry::Point::from_slice(&c[..self.dim])
    }

    fn unflatten(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rest % self.counts[a];
            rest /= self.counts[a];
        }
        idx
    }

    fn neighbor(&self, flat: usize, axis: usize, step: i64) -> Option<usize> {
        let idx = self.unflatten(flat);
        let moved = idx[axis] as i64 + step;
        if moved < 0 || moved as usize >= self.counts[axis] {
            return None;
        }
        let stride: usize = self.counts[axis + 1..self.dim].iter().product();
        Some((flat as i64 + step * stride as i64) as usize)
    }
}

/// Solves Δ_h u = f with Dirichlet data g by SOR with the default
/// over-relaxation factor, until the max residual drops below `tol`.
pub fn solve_fdm(
    prob: &PdeProblem,
    h: f64,
    tol: f64,
    max_iters: usize,
) -> Result<FieldGrid> {
    solve_fdm_relaxed(prob, h, tol, max_iters, DEFAULT_OMEGA)
}

pub fn solve_fdm_relaxed(
    prob: &PdeProblem,
    h: f64,
    tol: f64,
    max_iters: usize,
    omega: f64,
) -> Result<FieldGrid> {
    if tol <= 0.0 {
        return Err(Error::Config("fdm tolerance must be positive".into()));
    }
    if !(0.0 < omega && omega < 2.0) {
        return Err(Error::Config(format!(
            "over-relaxation factor must be in (0, 2), got {omega}"
        )));
    }
    let mut grid = FdmGrid::build(prob, h)?;
    let dim = grid.dim;
    let h2 = h * h;
    let diag = 2.0 * dim as f64;

    let interior: Vec<usize> = (0..grid.class.len())
        .filter(|&i| grid.class[i] == NodeClass::Interior)
        .collect();
    let source: Vec<f64> = interior
        .iter()
        .map(|&i| prob.source(grid.node_point(i)))
        .collect();
    let neighbors: Vec<[usize; 6]> = interior
        .iter()
        .map(|&i| {
            let mut nb = [0usize; 6];
            for a in 0..dim {
                nb[2 * a] = grid.neighbor(i, a, -1).unwrap();
                nb[2 * a + 1] = grid.neighbor(i, a, 1).unwrap();
            }
            nb
        })
        .collect();

    let mut residual = f64::INFINITY;
    for _sweep in 0..max_iters {
        for (j, &i) in interior.iter().enumerate() {
            let mut s = 0.0;
            for a in 0..2 * dim {
                s += grid.values[neighbors[j][a]];
            }
            let gauss = (s - h2 * source[j]) / diag;
            grid.values[i] += omega * (gauss - grid.values[i]);
        }
        residual = 0.0f64;
        for (j, &i) in interior.iter().enumerate() {
            let mut s = 0.0;
            for a in 0..2 * dim {
                s += grid.values[neighbors[j][a]];
            }
            let r = (s - diag * grid.values[i]) / h2 - source[j];
            residual = residual.max(r.abs());
        }
        if residual < tol {
            let mut out = FieldGrid::lattice(prob.domain(), h, 1)?;
            let nodes: Vec<_> = out.nodes().to_vec();
            for (row, p) in nodes.iter().enumerate() {
                let mut flat = 0usize;
                for a in 0..dim {
                    let idx = ((p[a] / h).round() as i64 - grid.base[a]) as usize;
                    flat = flat * grid.counts[a] + idx;
                }
                debug_assert_eq!(grid.class[flat], NodeClass::Interior);
                out.values_mut()[[row, 0]] = grid.values[flat];
            }
            return Ok(out);
        }
    }
    Err(Error::Numerical(format!(
        "relaxation did not reach tol {tol} within {max_iters} sweeps (residual {residual:.3e})"
    )))
}
