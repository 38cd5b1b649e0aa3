//! Problem definitions: a domain bundled with boundary data, a source term,
//! and — when one is known — the closed-form solution used for error
//! measurement.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};

type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// A Dirichlet problem Δu = f on Ω, u = g on ∂Ω. `f` is absent for Laplace
/// problems so samplers can skip in-ball work entirely.
#[derive(Clone)]
pub struct PdeProblem {
    name: String,
    domain: Domain,
    g: ScalarField,
    f: Option<ScalarField>,
    exact_u: Option<ScalarField>,
    exact_grad: Option<VectorField>,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("PdeProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("has_source", &self.f.is_some())
            .field("has_exact", &self.exact_u.is_some())
            .finish()
    }
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "laplace2d_xy",
    "poisson2d_xy2",
    "lshape_indicator",
    "poisson3d_x2yz",
];

impl PdeProblem {
    /// Looks up one of the built-in test problems by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "laplace2d_xy" => Ok(PdeProblem {
                name: name.into(),
                domain: Domain::box2([-1.0, -1.0], [1.0, 1.0])?,
                g: Arc::new(|p| p[0] * p[1]),
                f: None,
                exact_u: Some(Arc::new(|p| p[0] * p[1])),
                exact_grad: Some(Arc::new(|p| Point::new2(p[1], p[0]))),
            }),
            "poisson2d_xy2" => Ok(PdeProblem {
                name: name.into(),
                domain: Domain::box2([-1.0, -1.0], [1.0, 1.0])?,
                g: Arc::new(|p| p[0] * p[1] * p[1]),
                f: Some(Arc::new(|p| 2.0 * p[0])),
                exact_u: Some(Arc::new(|p| p[0] * p[1] * p[1])),
                exact_grad: Some(Arc::new(|p| Point::new2(p[1] * p[1], 2.0 * p[0] * p[1]))),
            }),
            "lshape_indicator" => Ok(PdeProblem {
                name: name.into(),
                domain: Domain::lshape2([-1.0, -1.0], [1.0, 1.0], [0.0, 0.0])?,
                // Closure convention: the reentrant corner itself carries 1.
                g: Arc::new(|p| if p[0] >= 0.0 && p[1] >= 0.0 { 1.0 } else { 0.0 }),
                f: None,
                exact_u: None,
                exact_grad: None,
            }),
            "poisson3d_x2yz" => Ok(PdeProblem {
                name: name.into(),
                domain: Domain::box3([-1.0; 3], [1.0; 3])?,
                g: Arc::new(|p| p[0] * p[0] * p[1] * p[2]),
                f: Some(Arc::new(|p| 2.0 * p[1] * p[2])),
                exact_u: Some(Arc::new(|p| p[0] * p[0] * p[1] * p[2])),
                exact_grad: Some(Arc::new(|p| {
                    Point::new3(2.0 * p[0] * p[1] * p[2], p[0] * p[0] * p[2], p[0] * p[0] * p[1])
                })),
            }),
            other => Err(Error::Config(format!(
                "unknown problem {other:?}; expected one of {BUILTIN_NAMES:?} or a custom definition"
            ))),
        }
    }

    /// A user-defined problem from polynomial expressions in x, y, z.
    /// An `f` that is identically zero (or absent) makes this a Laplace problem.
    pub fn custom(domain: Domain, g_expr: &str, f_expr: Option<&str>) -> Result<Self> {
        let g = Polynomial::parse(g_expr)?;
        let f = match f_expr {
            None => None,
            Some(expr) => {
                let p = Polynomial::parse(expr)?;
                if p.is_zero() {
                    None
                } else {
                    Some(p)
                }
            }
        };
        Ok(PdeProblem {
            name: format!("custom(g={g_expr})"),
            domain,
            g: Arc::new(move |p| g.eval(p)),
            f: f.map(|poly| -> ScalarField { Arc::new(move |p| poly.eval(p)) }),
            exact_u: None,
            exact_grad: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Boundary value g at a boundary point.
    pub fn boundary_value(&self, p: Point) -> f64 {
        (self.g)(p)
    }

    /// Source term f; identically zero for Laplace problems.
    pub fn source(&self, p: Point) -> f64 {
        self.f.as_ref().map_or(0.0, |f| f(p))
    }

    pub fn has_source(&self) -> bool {
        self.f.is_some()
    }

    pub fn exact_u(&self, p: Point) -> Option<f64> {
        self.exact_u.as_ref().map(|u| u(p))
    }

    pub fn exact_grad(&self, p: Point) -> Option<Point> {
        self.exact_grad.as_ref().map(|g| g(p))
    }

    pub fn has_exact(&self) -> bool {
        self.exact_u.is_some()
    }
}

/// A polynomial in x, y, z as a sum of monomials. This is the whole expression
/// language for config-defined problems; it keeps evaluation fast and portable.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    monomials: Vec<(f64, [u32; 3])>,
}

impl Polynomial {
    /// Parses expressions like `2*x^2*y - 1.5*z + 2`. Terms are separated by
    /// `+`/`-`, factors within a term by `*`; a factor is a number or a
    /// variable with an optional integer power.
    pub fn parse(input: &str) -> Result<Self> {
        let mut monomials = Vec::new();
        let bad = |what: &str| Error::Config(format!("cannot parse polynomial {input:?}: {what}"));

        let s: Vec<char> = input.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(bad("empty expression"));
        }
        let mut i = 0;
        while i < s.len() {
            let mut sign = 1.0;
            while i < s.len() && (s[i] == '+' || s[i] == '-') {
                if s[i] == '-' {
                    sign = -sign;
                }
                i += 1;
            }
            if i == s.len() {
                return Err(bad("dangling sign"));
            }
            let mut coef = sign;
            let mut pows = [0u32; 3];
            loop {
                match s[i] {
                    'x' | 'y' | 'z' => {
                        let axis = (s[i] as u8 - b'x') as usize;
                        i += 1;
                        let mut power = 1u32;
                        if i < s.len() && s[i] == '^' {
                            i += 1;
                            let start = i;
                            while i < s.len() && s[i].is_ascii_digit() {
                                i += 1;
                            }
                            if start == i {
                                return Err(bad("expected integer exponent after '^'"));
                            }
                            let digits: String = s[start..i].iter().collect();
                            power = digits
                                .parse()
                                .map_err(|_| bad("exponent out of range"))?;
                        }
                        pows[axis] += power;
                    }
                    c if c.is_ascii_digit() || c == '.' => {
                        let start = i;
                        while i < s.len()
                            && (s[i].is_ascii_digit()
                                || s[i] == '.'
                                || s[i] == 'e'
                                || s[i] == 'E'
                                || ((s[i] == '+' || s[i] == '-')
                                    && matches!(s[i - 1], 'e' | 'E')))
                        {
                            i += 1;
                        }
                        let digits: String = s[start..i].iter().collect();
                        let value: f64 = digits
                            .parse()
                            .map_err(|_| bad(&format!("bad number {digits:?}")))?;
                        coef *= value;
                    }
                    c => return Err(bad(&format!("unexpected character {c:?}"))),
                }
                if i < s.len() && s[i] == '*' {
                    i += 1;
                    if i == s.len() {
                        return Err(bad("dangling '*'"));
                    }
                } else {
                    break;
                }
            }
            monomials.push((coef, pows));
        }
        Ok(Polynomial { monomials })
    }

    pub fn eval(&self, p: Point) -> f64 {
        let mut total = 0.0;
        for (coef, pows) in &self.monomials {
            let mut term = *coef;
            for axis in 0..3 {
                for _ in 0..pows[axis] {
                    let c = if axis < p.dim() { p[axis] } else { 0.0 };
                    term *= c;
                }
            }
            total += term;
        }
        total
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.iter().all(|(c, _)| *c == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn builtin_examples() {
        let lap = PdeProblem::builtin("laplace2d_xy").unwrap();
        assert_eq!(lap.exact_u(Point::new2(0.5, 0.5)), Some(0.25));
        assert!(!lap.has_source());

        let poi = PdeProblem::builtin("poisson2d_xy2").unwrap();
        assert!((poi.source(Point::new2(0.3, -0.7)) - 0.6).abs() < 1e-15);
        let grad = poi.exact_grad(Point::new2(0.3, 0.4)).unwrap();
        assert!((grad[0] - 0.16).abs() < 1e-15);
        assert!((grad[1] - 0.24).abs() < 1e-15);

        let p3 = PdeProblem::builtin("poisson3d_x2yz").unwrap();
        assert!((p3.source(Point::new3(0.5, 0.2, 0.1)) - 0.04).abs() < 1e-15);

        assert!(PdeProblem::builtin("nope").is_err());
    }

    #[test]
    fn indicator_boundary_values() {
        let prob = PdeProblem::builtin("lshape_indicator").unwrap();
        assert_eq!(prob.boundary_value(Point::new2(0.5, 0.0)), 1.0);
        assert_eq!(prob.boundary_value(Point::new2(0.0, 0.5)), 1.0);
        assert_eq!(prob.boundary_value(Point::new2(0.0, 0.0)), 1.0);
        assert_eq!(prob.boundary_value(Point::new2(1.0, 0.0)), 1.0);
        assert_eq!(prob.boundary_value(Point::new2(-0.5, 1.0)), 0.0);
        assert_eq!(prob.boundary_value(Point::new2(1.0, -0.3)), 0.0);
        assert_eq!(prob.boundary_value(Point::new2(-1.0, -1.0)), 0.0);
    }

    fn random_interior_with_margin(prob: &PdeProblem, margin: f64, rng: &mut RngStream) -> Point {
        let (lo, hi) = prob.domain().bounds();
        loop {
            let mut c = [0.0; 3];
            for (i, ci) in c.iter_mut().take(prob.dim()).enumerate() {
                *ci = lo[i] + (hi[i] - lo[i]) * rng.uniform();
            }
            let p = Point::from_slice(&c[..prob.dim()]);
            if prob.domain().signed_distance(p) > margin {
                return p;
            }
        }
    }

    /// Five/seven-point finite-difference Laplacian of exact_u — independent of
    /// every closed-form derivative used elsewhere.
    fn fd_laplacian(prob: &PdeProblem, p: Point, h: f64) -> f64 {
        let u = |q: Point| prob.exact_u(q).unwrap();
        let mut total = 0.0;
        for axis in 0..prob.dim() {
            let plus = u(p.with_coord(axis, p[axis] + h));
            let minus = u(p.with_coord(axis, p[axis] - h));
            total += (plus + minus - 2.0 * u(p)) / (h * h);
        }
        total
    }

    #[test]
    fn exact_solutions_are_consistent_with_sources() {
        let mut rng = RngStream::new(21, 0);
        for name in BUILTIN_NAMES {
            let prob = PdeProblem::builtin(name).unwrap();
            if !prob.has_exact() {
                continue;
            }
            let h = 1e-3;
            for _ in 0..100 {
                let p = random_interior_with_margin(&prob, 2.0 * h, &mut rng);
                let lap = fd_laplacian(&prob, p, h);
                assert!(
                    (lap - prob.source(p)).abs() < 1e-4,
                    "{name}: Δu={lap} vs f={} at {p:?}",
                    prob.source(p)
                );
            }
        }
    }

    #[test]
    fn boundary_data_agrees_with_exact_solution() {
        let mut rng = RngStream::new(22, 0);
        for name in BUILTIN_NAMES {
            let prob = PdeProblem::builtin(name).unwrap();
            if !prob.has_exact() {
                continue;
            }
            for _ in 0..1000 {
                let p = random_interior_with_margin(&prob, 0.0, &mut rng);
                let b = prob.domain().closest_boundary_point(p);
                let diff = (prob.boundary_value(b) - prob.exact_u(b).unwrap()).abs();
                assert!(diff < 1e-12, "{name}: |g-u|={diff} at {b:?}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(23, 0);
        let h = 1e-5;
        for name in BUILTIN_NAMES {
            let prob = PdeProblem::builtin(name).unwrap();
            let Some(_) = prob.exact_grad(Point::zero(prob.dim())) else {
                continue;
            };
            for _ in 0..50 {
                let p = random_interior_with_margin(&prob, 2.0 * h, &mut rng);
                let grad = prob.exact_grad(p).unwrap();
                for axis in 0..prob.dim() {
                    let plus = prob.exact_u(p.with_coord(axis, p[axis] + h)).unwrap();
                    let minus = prob.exact_u(p.with_coord(axis, p[axis] - h)).unwrap();
                    let fd = (plus - minus) / (2.0 * h);
                    assert!((grad[axis] - fd).abs() < 1e-6, "{name} axis {axis}");
                }
            }
        }
    }

    #[test]
    fn polynomial_parse_and_eval() {
        let p = Polynomial::parse("2*x^2*y - 1.5*z + 2").unwrap();
        let v = p.eval(Point::new3(2.0, 3.0, 4.0));
        assert!((v - (2.0 * 4.0 * 3.0 - 6.0 + 2.0)).abs() < 1e-15);

        let q = Polynomial::parse("x*y^2").unwrap();
        assert!((q.eval(Point::new2(0.5, 0.4)) - 0.08).abs() < 1e-15);

        assert!(Polynomial::parse("0").unwrap().is_zero());
        assert!(Polynomial::parse("x - x").is_ok());
        assert!(Polynomial::parse("").is_err());
        assert!(Polynomial::parse("x^").is_err());
        assert!(Polynomial::parse("2 ** x").is_err());
        assert!(Polynomial::parse("w + 1").is_err());

        // Scientific-notation coefficients.
        let r = Polynomial::parse("3e-4*x").unwrap();
        assert!((r.eval(Point::new2(10.0, 0.0)) - 3e-3).abs() < 1e-18);
    }

    #[test]
    fn custom_problem_zero_source_is_laplace() {
        let dom = Domain::box2([-1.0, -1.0], [1.0, 1.0]).unwrap();
        let prob = PdeProblem::custom(dom.clone(), "x*y", Some("0")).unwrap();
        assert!(!prob.has_source());
        let prob2 = PdeProblem::custom(dom, "x*y^2", Some("2*x")).unwrap();
        assert!(prob2.has_source());
        assert!((prob2.source(Point::new2(0.3, 0.9)) - 0.6).abs() < 1e-15);
    }
}
