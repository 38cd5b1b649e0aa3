//! Green's-function machinery for a ball: total mass, the radial cdf of the
//! Green-proportional density, tabulated inverse-cdf sampling, and the
//! per-step source weight used by the path sampler.
//!
//! Conventions: G ≥ 0 solves ΔG = −δ inside B(c, r) with G = 0 on ∂B. A source
//! sample y is drawn with density ∝ G and carries the constant weight
//! Ḡ(r) = ∫_B G dy, so weight·f(y) is an unbiased estimate of ∫_B G f dy.
//! For Δu = f the single-ball identity is
//! u(c) = mean_{∂B} u − Ḡ(r)·E[f(y)], which fixes the sign the sampler uses.

use std::sync::OnceLock;

use crate::geometry::Point;
use crate::rng::RngStream;

/// Granularity of the inverse-cdf table in the cdf argument.
pub const TABLE_RESOLUTION: f64 = 1e-5;

/// Total Green mass Ḡ(r) = ∫_B G(c, y) dy of a ball of radius `r`.
/// Closed forms: r²/4 in 2D, r²/6 in 3D.
pub fn green_total_mass(r: f64, dim: usize) -> f64 {
    debug_assert!(r > 0.0);
    match dim {
        2 => r * r / 4.0,
        3 => r * r / 6.0,
        _ => panic!("green_total_mass: dimension must be 2 or 3, got {dim}"),
    }
}

/// Cdf of the normalized sample radius t = ρ/r under the Green-proportional
/// density: t²(1 − 2 ln t) in 2D and 3t² − 2t³ in 3D.
pub fn radial_cdf(t: f64, dim: usize) -> f64 {
    debug_assert!((0.0..=1.0).contains(&t));
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    match dim {
        2 => t * t * (1.0 - 2.0 * t.ln()),
        3 => t * t * (3.0 - 2.0 * t),
        _ => panic!("radial_cdf: dimension must be 2 or 3, got {dim}"),
    }
}

/// Monotone map from cdf values in [0, 1] to normalized radius t in [0, 1],
/// tabulated at `TABLE_RESOLUTION` and interpolated linearly between entries.
#[derive(Clone, Debug)]
pub struct InverseCdfTable {
    dim: usize,
    resolution: f64,
    entries: Vec<f64>,
}

impl InverseCdfTable {
    pub fn build(dim: usize) -> Self {
        Self::with_resolution(dim, TABLE_RESOLUTION)
    }

    pub fn with_resolution(dim: usize, resolution: f64) -> Self {
        assert!(dim == 2 || dim == 3);
        assert!(resolution > 0.0 && resolution < 1.0);
        let n = (1.0 / resolution).round() as usize;
        let mut entries = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let u = j as f64 * resolution;
            entries.push(invert_radial_cdf(u, dim));
        }
        entries[0] = 0.0;
        entries[n] = 1.0;
        InverseCdfTable {
            dim,
            resolution,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Normalized radius for cdf value `u`, by lookup and linear interpolation.
    #[inline]
    pub fn sample_t(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let pos = u / self.resolution;
        let idx = (pos as usize).min(self.entries.len() - 2);
        let frac = pos - idx as f64;
        let a = self.entries[idx];
        let b = self.entries[idx + 1];
        a + (b - a) * frac
    }
}

fn invert_radial_cdf(u: f64, dim: usize) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if radial_cdf(mid, dim) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Shared immutable table per dimension; built on first use.
pub fn shared_table(dim: usize) -> &'static InverseCdfTable {
    static TABLE_2D: OnceLock<InverseCdfTable> = OnceLock::new();
    static TABLE_3D: OnceLock<InverseCdfTable> = OnceLock::new();
    match dim {
        2 => TABLE_2D.get_or_init(|| InverseCdfTable::build(2)),
        3 => TABLE_3D.get_or_init(|| InverseCdfTable::build(3)),
        _ => panic!("shared_table: dimension must be 2 or 3, got {dim}"),
    }
}

/// A source sample inside a ball together with the ball's total Green mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InBallSample {
    pub y: Point,
    /// Ḡ(r); depends only on the radius and dimension.
    pub weight: f64,
}

/// Uniform direction on the unit sphere via normalized Gaussians.
#[inline]
pub fn uniform_unit_vector(dim: usize, rng: &mut RngStream) -> Point {
    loop {
        let mut c = [0.0; 3];
        for ci in c.iter_mut().take(dim) {
            *ci = rng.standard_normal();
        }
        let p = Point::from_slice(&c[..dim]);
        let n = p.norm();
        if n > 1e-12 {
            return p * (1.0 / n);
        }
    }
}

/// Draws y ∈ B(center, r) with density proportional to the ball's Green
/// function: radius via inverse-cdf lookup, direction uniform on the sphere.
pub fn sample_in_ball(
    center: Point,
    r: f64,
    table: &InverseCdfTable,
    rng: &mut RngStream,
) -> InBallSample {
    debug_assert!(r > 0.0);
    debug_assert_eq!(center.dim(), table.dim());
    let t = table.sample_t(rng.uniform());
    let dir = uniform_unit_vector(center.dim(), rng);
    InBallSample {
        y: center + dir * (r * t),
        weight: green_total_mass(r, center.dim()),
    }
}
