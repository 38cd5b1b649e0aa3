//! Domains with exact distance queries — the geometric primitives the
//! sphere-walk sampler needs: signed distance, boundary projection, and the
//! ε-shell termination test.

use std::ops::{Add, AddAssign, Index, Mul, Sub};

use crate::error::{Error, Result};

/// A point in 2 or 3 dimensions. The third coordinate is zero when `dim == 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 3],
    dim: usize,
}

impl Point {
    pub fn new2(x: f64, y: f64) -> Self {
        Point {
            coords: [x, y, 0.0],
            dim: 2,
        }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Point {
            coords: [x, y, z],
            dim: 3,
        }
    }

    /// Builds a point from a slice of length 2 or 3.
    pub fn from_slice(c: &[f64]) -> Self {
        match c {
            [x, y] => Point::new2(*x, *y),
            [x, y, z] => Point::new3(*x, *y, *z),
            _ => panic!("point must have 2 or 3 coordinates, got {}", c.len()),
        }
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        Point {
            coords: [0.0; 3],
            dim,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.coords[i] * other.coords[i];
        }
        s
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    /// Returns a copy with coordinate `axis` replaced by `value`.
    pub fn with_coord(mut self, axis: usize, value: f64) -> Self {
        assert!(axis < self.dim);
        self.coords[axis] = value;
        self
    }
}

impl Index<usize> for Point {
    type Output = f64;

    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim);
        &self.coords[i]
    }
}

impl Add for Point {
    type Output = Point;

    #[inline]
    fn add(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.coords[i] += rhs.coords[i];
        }
        self
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, rhs: Point) {
        *self = *self + rhs;
    }
}

impl Sub for Point {
    type Output = Point;

    #[inline]
    fn sub(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.coords[i] -= rhs.coords[i];
        }
        self
    }
}

impl Mul<f64> for Point {
    type Output = Point;

    #[inline]
    fn mul(mut self, s: f64) -> Point {
        for i in 0..self.dim {
            self.coords[i] *= s;
        }
        self
    }
}

/// Closed-form analytic domains. Signed distance is positive strictly inside,
/// zero on the boundary, and the negative Euclidean distance outside.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Axis-aligned box `[lo, hi]` in 2 or 3 dimensions.
    Box { lo: Point, hi: Point },
    /// 2D box with the quadrant `(notch, hi]` removed; the removed box shares
    /// the outer box's `hi` corner. The two notch edges belong to the boundary.
    LShape2D { lo: Point, hi: Point, notch: Point },
}

impl Domain {
    pub fn box2(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Self::axis_box(Point::new2(lo[0], lo[1]), Point::new2(hi[0], hi[1]))
    }

    pub fn box3(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        Self::axis_box(
            Point::new3(lo[0], lo[1], lo[2]),
            Point::new3(hi[0], hi[1], hi[2]),
        )
    }

    pub fn axis_box(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::Config("box corners have mismatched dimensions".into()));
        }
        for i in 0..lo.dim() {
            if !(lo[i] < hi[i]) {
                return Err(Error::Config(format!(
                    "box requires lo < hi componentwise, got lo[{i}]={} hi[{i}]={}",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(Domain::Box { lo, hi })
    }

    pub fn lshape2(lo: [f64; 2], hi: [f64; 2], notch: [f64; 2]) -> Result<Self> {
        let (lo, hi) = (Point::new2(lo[0], lo[1]), Point::new2(hi[0], hi[1]));
        let notch = Point::new2(notch[0], notch[1]);
        for i in 0..2 {
            if !(lo[i] < hi[i]) {
                return Err(Error::Config("l-shape requires lo < hi componentwise".into()));
            }
            if !(lo[i] < notch[i] && notch[i] < hi[i]) {
                return Err(Error::Config(
                    "l-shape notch corner must lie strictly inside the outer box".into(),
                ));
            }
        }
        Ok(Domain::LShape2D { lo, hi, notch })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.dim(),
            Domain::LShape2D { .. } => 2,
        }
    }

    /// Bounding box of the domain.
    pub fn bounds(&self) -> (Point, Point) {
        match self {
            Domain::Box { lo, hi } | Domain::LShape2D { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// Exact Euclidean distance to the boundary: positive strictly inside,
    /// zero on the boundary, negative outside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Domain::Box { lo, hi } => {
                debug_assert_eq!(p.dim(), lo.dim());
                let mut min_face = f64::INFINITY;
                let mut out_sq = 0.0;
                for i in 0..lo.dim() {
                    let dl = p[i] - lo[i];
                    let dh = hi[i] - p[i];
                    min_face = min_face.min(dl).min(dh);
                    let q = (-dl).max(-dh).max(0.0);
                    out_sq += q * q;
                }
                if out_sq > 0.0 {
                    -out_sq.sqrt()
                } else {
                    min_face
                }
            }
            Domain::LShape2D { .. } => {
                let mut d = f64::INFINITY;
                for (a, b) in self.lshape_segments() {
                    d = d.min(p.dist(&closest_point_on_segment(p, a, b)));
                }
                if self.lshape_is_interior(p) {
                    d
                } else {
                    -d
                }
            }
        }
    }

    /// Projects `p` onto the boundary, minimizing distance. Ties are broken by
    /// the lowest coordinate axis first (boxes) or fixed segment order
    /// (L-shape), so the result is deterministic.
    pub fn closest_boundary_point(&self, p: Point) -> Point {
        match self {
            Domain::Box { lo, hi } => {
                let mut clamped = p;
                let mut inside = true;
                for i in 0..lo.dim() {
                    if p[i] < lo[i] {
                        clamped = clamped.with_coord(i, lo[i]);
                        inside = false;
                    } else if p[i] > hi[i] {
                        clamped = clamped.with_coord(i, hi[i]);
                        inside = false;
                    }
                }
                if !inside {
                    return clamped;
                }
                // Interior: snap to the nearest face, scanning axes in order
                // and the lo side before the hi side.
                let mut best = f64::INFINITY;
                let mut axis = 0;
                let mut value = lo[0];
                for i in 0..lo.dim() {
                    let dl = p[i] - lo[i];
                    if dl < best {
                        best = dl;
                        axis = i;
                        value = lo[i];
                    }
                    let dh = hi[i] - p[i];
                    if dh < best {
                        best = dh;
                        axis = i;
                        value = hi[i];
                    }
                }
                p.with_coord(axis, value)
            }
            Domain::LShape2D { .. } => {
                let mut best = f64::INFINITY;
                let mut proj = p;
                for (a, b) in self.lshape_segments() {
                    let q = closest_point_on_segment(p, a, b);
                    let d = p.dist(&q);
                    if d < best {
                        best = d;
                        proj = q;
                    }
                }
                proj
            }
        }
    }

    /// True iff the point is within `eps` of the boundary (or outside).
    pub fn in_epsilon_shell(&self, p: Point, eps: f64) -> bool {
        debug_assert!(eps > 0.0);
        self.signed_distance(p) < eps
    }

    pub fn is_interior(&self, p: Point) -> bool {
        self.signed_distance(p) > 0.0
    }

    /// Boundary polygon of the L-shape as six directed segments, counter-
    /// clockwise from the lo corner.
    fn lshape_segments(&self) -> [(Point, Point); 6] {
        let Domain::LShape2D { lo, hi, notch } = self else {
            unreachable!("lshape_segments on a box");
        };
        let (lo, hi, n) = (*lo, *hi, *notch);
        [
            (Point::new2(lo[0], lo[1]), Point::new2(hi[0], lo[1])),
            (Point::new2(hi[0], lo[1]), Point::new2(hi[0], n[1])),
            (Point::new2(hi[0], n[1]), Point::new2(n[0], n[1])),
            (Point::new2(n[0], n[1]), Point::new2(n[0], hi[1])),
            (Point::new2(n[0], hi[1]), Point::new2(lo[0], hi[1])),
            (Point::new2(lo[0], hi[1]), Point::new2(lo[0], lo[1])),
        ]
    }

    fn lshape_is_interior(&self, p: Point) -> bool {
        let Domain::LShape2D { lo, hi, notch } = self else {
            unreachable!();
        };
        let in_outer = p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1];
        let in_removed_closure = p[0] >= notch[0] && p[1] >= notch[1];
        in_outer && !in_removed_closure
    }
}

/// Closest point to `p` on the segment `[a, b]` (2D).
fn closest_point_on_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_sq()).clamp(0.0, 1.0);
    a + ab * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn unit_box2() -> Domain {
        Domain::box2([-1.0, -1.0], [1.0, 1.0]).unwrap()
    }

    fn unit_box3() -> Domain {
        Domain::box3([-1.0; 3], [1.0; 3]).unwrap()
    }

    fn paper_lshape() -> Domain {
        Domain::lshape2([-1.0, -1.0], [1.0, 1.0], [0.0, 0.0]).unwrap()
    }

    /// Distance to a segment by ternary search over the parameter — an
    /// independent route used as the oracle for the closed-form projection.
    fn segment_distance_ternary(p: Point, a: Point, b: Point) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let eval = |t: f64| p.dist(&(a + (b - a) * t));
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if eval(m1) < eval(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        eval(0.5 * (lo + hi))
    }

    fn lshape_oracle_distance(dom: &Domain, p: Point) -> f64 {
        dom.lshape_segments()
            .iter()
            .map(|(a, b)| segment_distance_ternary(p, *a, *b))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn box_signed_distance_examples() {
        let b = unit_box2();
        assert_eq!(b.signed_distance(Point::new2(0.0, 0.0)), 1.0);
        assert_eq!(b.signed_distance(Point::new2(0.5, -0.2)), 0.5);
        // Outside: negative Euclidean distance.
        assert!((b.signed_distance(Point::new2(2.0, 0.0)) + 1.0).abs() < 1e-15);
        assert!((b.signed_distance(Point::new2(2.0, 2.0)) + f64::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn lshape_signed_distance_examples() {
        let l = paper_lshape();
        assert!((l.signed_distance(Point::new2(-0.1, 0.1)) - 0.1).abs() < 1e-15);
        // Removed quadrant is outside.
        assert!(l.signed_distance(Point::new2(0.5, 0.5)) < 0.0);
        // Notch edges are boundary.
        assert_eq!(l.signed_distance(Point::new2(0.0, 0.5)), 0.0);
        assert_eq!(l.signed_distance(Point::new2(0.5, 0.0)), 0.0);
        // Deep interior of the leg.
        assert!((l.signed_distance(Point::new2(-0.5, -0.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closest_boundary_point_examples() {
        let b2 = unit_box2();
        assert_eq!(
            b2.closest_boundary_point(Point::new2(0.999, 0.0)),
            Point::new2(1.0, 0.0)
        );
        let b3 = unit_box3();
        assert_eq!(
            b3.closest_boundary_point(Point::new3(0.0, 0.0, -0.995)),
            Point::new3(0.0, 0.0, -1.0)
        );
        let l = paper_lshape();
        let q = l.closest_boundary_point(Point::new2(0.3, -0.002));
        assert!((q[0] - 0.3).abs() < 1e-15 && q[1] == 0.0);
    }

    #[test]
    fn epsilon_shell_examples() {
        let b = unit_box2();
        assert!(b.in_epsilon_shell(Point::new2(0.9995, 0.0), 1e-3));
        assert!(!b.in_epsilon_shell(Point::new2(0.0, 0.0), 1e-3));
        let l = paper_lshape();
        assert!(l.in_epsilon_shell(Point::new2(-0.0005, 0.5), 1e-3));
    }

    #[test]
    fn corner_tie_break_is_axis_ordered() {
        let b = unit_box2();
        // Equidistant to the x=-1 and y=-1 faces: axis 0, lo side wins.
        assert_eq!(
            b.closest_boundary_point(Point::new2(-0.5, -0.5)),
            Point::new2(-1.0, -0.5)
        );
    }

    fn random_interior(dom: &Domain, rng: &mut RngStream) -> Point {
        let (lo, hi) = dom.bounds();
        loop {
            let mut c = [0.0; 3];
            for (i, ci) in c.iter_mut().take(dom.dim()).enumerate() {
                *ci = lo[i] + (hi[i] - lo[i]) * rng.uniform();
            }
            let p = Point::from_slice(&c[..dom.dim()]);
            if dom.is_interior(p) {
                return p;
            }
        }
    }

    #[test]
    fn projection_distance_matches_signed_distance() {
        let mut rng = RngStream::new(11, 0);
        for dom in [unit_box2(), unit_box3(), paper_lshape()] {
            for _ in 0..10_000 {
                let p = random_interior(&dom, &mut rng);
                let q = dom.closest_boundary_point(p);
                let sd = dom.signed_distance(p);
                assert!(
                    (p.dist(&q) - sd).abs() < 1e-12,
                    "|p-cbp| != sd at {p:?}: {} vs {sd}",
                    p.dist(&q)
                );
                assert!(dom.signed_distance(q).abs() < 1e-12, "cbp not on boundary");
            }
        }
    }

    /// Boundary samples for the empty-ball check: uniform over faces/segments.
    fn boundary_samples(dom: &Domain, n: usize, rng: &mut RngStream) -> Vec<Point> {
        let mut out = Vec::with_capacity(n);
        match dom {
            Domain::Box { lo, hi } => {
                let d = lo.dim();
                for _ in 0..n {
                    let axis = rng.index(d);
                    let side = if rng.uniform() < 0.5 { lo[axis] } else { hi[axis] };
                    let mut c = [0.0; 3];
                    for (i, ci) in c.iter_mut().take(d).enumerate() {
                        *ci = lo[i] + (hi[i] - lo[i]) * rng.uniform();
                    }
                    let p = Point::from_slice(&c[..d]).with_coord(axis, side);
                    out.push(p);
                }
            }
            Domain::LShape2D { .. } => {
                let segs = dom.lshape_segments();
                for _ in 0..n {
                    let (a, b) = segs[rng.index(segs.len())];
                    out.push(a + (b - a) * rng.uniform());
                }
            }
        }
        out
    }

    #[test]
    fn largest_ball_is_empty_of_boundary() {
        let mut rng = RngStream::new(12, 0);
        for dom in [unit_box2(), unit_box3(), paper_lshape()] {
            let boundary = boundary_samples(&dom, 1000, &mut rng);
            for _ in 0..100 {
                let p = random_interior(&dom, &mut rng);
                let r = dom.signed_distance(p);
                for bpt in &boundary {
                    assert!(
                        p.dist(bpt) >= r - 1e-12,
                        "boundary point {bpt:?} inside B({p:?}, {r})"
                    );
                }
            }
        }
    }

    #[test]
    fn invalid_constructions_rejected() {
        assert!(Domain::box2([1.0, -1.0], [-1.0, 1.0]).is_err());
        assert!(Domain::lshape2([-1.0, -1.0], [1.0, 1.0], [1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn lshape_distance_matches_segment_oracle(
            x in -1.5_f64..1.5, y in -1.5_f64..1.5
        ) {
            let l = paper_lshape();
            let p = Point::new2(x, y);
            let d = l.signed_distance(p).abs();
            let oracle = lshape_oracle_distance(&l, p);
            prop_assert!((d - oracle).abs() < 1e-9, "d={d} oracle={oracle}");
        }

        #[test]
        fn box3_projection_consistent(
            x in -0.999_f64..0.999, y in -0.999_f64..0.999, z in -0.999_f64..0.999
        ) {
            let b = unit_box3();
            let p = Point::new3(x, y, z);
            let q = b.closest_boundary_point(p);
            prop_assert!((p.dist(&q) - b.signed_distance(p)).abs() < 1e-12);
            prop_assert!(b.signed_distance(q).abs() < 1e-12);
        }
    }
}
