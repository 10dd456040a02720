//! Piecewise monotone interval maps with explicit branch structure.
//!
//! A [`PiecewiseMap`] is a list of increasing [`Branch`]es whose domains
//! partition `[0, 1]`. Which branch owns a shared endpoint is recorded in the
//! open/closed flags of the domains, so alternative conventions are a matter
//! of constructing the intervals differently.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Index of a branch inside its map.
pub type Symbol = usize;

/// Forward/derivative pair used for user-composed branches.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const ENDPOINT_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-15;
const INVERSE_RESIDUAL_TOL: f64 = 1e-12;
const INVERSE_MAX_ITER: usize = 200;

#[derive(Clone)]
pub enum BranchFn {
    /// `slope * x + offset`
    Affine {
        slope: f64,
        offset: f64,
    },
    /// The intermittent left branch `x (1 + (2x)^alpha)`.
    Intermittent {
        alpha: f64,
    },
    Custom {
        forward: RealFn,
        derivative: RealFn,
    },
}

impl BranchFn {
    #[inline]
    fn forward(&self, x: f64) -> f64 {
        match self {
            BranchFn::Affine { slope, offset } => slope * x + offset,
            BranchFn::Intermittent { alpha } => x * (1.0 + (2.0 * x).powf(*alpha)),
            BranchFn::Custom { forward, .. } => forward(x),
        }
    }

    #[inline]
    fn derivative(&self, x: f64) -> f64 {
        match self {
            BranchFn::Affine { slope, .. } => *slope,
            BranchFn::Intermittent { alpha } => 1.0 + (1.0 + alpha) * (2.0 * x).powf(*alpha),
            BranchFn::Custom { derivative, .. } => derivative(x),
        }
    }
}

impl fmt::Debug for BranchFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchFn::Affine { slope, offset } => write!(f, "Affine({slope} x + {offset})"),
            BranchFn::Intermittent { alpha } => write!(f, "Intermittent(alpha = {alpha})"),
            BranchFn::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// One increasing branch of a piecewise map.
#[derive(Debug, Clone)]
pub struct Branch {
    label: String,
    domain: Interval,
    image: Interval,
    func: BranchFn,
}

impl Branch {
    /// Builds a branch and derives its image from the endpoint values.
    ///
    /// The branch must be strictly increasing (checked on the sign of the
    /// derivative at 257 points) and map into `[0, 1]`.
    pub fn new(label: impl Into<String>, domain: Interval, func: BranchFn) -> Result<Self> {
        let label = label.into();
        if domain.is_empty() || domain.length() <= 0.0 {
            return Err(Error::Structural(format!("branch `{label}` has an empty domain")));
        }
        for i in 0..=256 {
            let x = domain.lerp(i as f64 / 256.0);
            let d = func.derivative(x);
            if !(d > 0.0) {
                return Err(Error::Structural(format!("branch `{label}` is not increasing at {x} (derivative {d})")));
            }
        }
        let snap = |v: f64| {
            if v < 0.0 && v > -ENDPOINT_TOL {
                0.0
            } else if v > 1.0 && v < 1.0 + ENDPOINT_TOL {
                1.0
            } else {
                v
            }
        };
        let lo = snap(func.forward(domain.lo));
        let hi = snap(func.forward(domain.hi));
        if !(lo >= 0.0 && hi <= 1.0 && lo < hi) {
            return Err(Error::Structural(format!(
                "branch `{label}` maps {domain} to [{lo}, {hi}], not inside [0, 1]"
            )));
        }
        let image = Interval { lo, hi, lo_closed: domain.lo_closed, hi_closed: domain.hi_closed };
        Ok(Self { label, domain, image, func })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &Interval {
        &self.domain
    }

    pub fn image(&self) -> &Interval {
        &self.image
    }

    pub fn func(&self) -> &BranchFn {
        &self.func
    }

    /// Branch formula, also valid at the endpoints of the closure.
    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        self.func.forward(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.func.derivative(x)
    }

    /// The unique `x` in the closed domain with `forward(x) = y`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        self.inverse_from(y, None)
    }

    /// Safeguarded Newton iteration with bisection fallback, optionally
    /// started from `guess`.
    pub fn inverse_from(&self, y: f64, guess: Option<f64>) -> Result<f64> {
        let img = &self.image;
        if !(y >= img.lo - ENDPOINT_TOL && y <= img.hi + ENDPOINT_TOL) {
            return Err(Error::Range { label: self.label.clone(), y });
        }
        let y = y.clamp(img.lo, img.hi);
        if y == img.lo {
            return Ok(self.domain.lo);
        }
        if y == img.hi {
            return Ok(self.domain.hi);
        }
        if let BranchFn::Affine { slope, offset } = self.func {
            let x = ((y - offset) / slope).clamp(self.domain.lo, self.domain.hi);
            return self.polish(x, y);
        }

        let (mut lo, mut hi) = (self.domain.lo, self.domain.hi);
        let mut x = match guess {
            Some(g) if g > lo && g < hi => g,
            _ => lo + (y - img.lo) / (img.hi - img.lo) * (hi - lo),
        };
        for _ in 0..INVERSE_MAX_ITER {
            let r = self.forward(x) - y;
            if r == 0.0 {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = x - r / self.derivative(x);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let converged = (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE)
                || hi - lo <= 2.0 * f64::EPSILON * hi.abs();
            x = next;
            if converged {
                return self.polish(x, y);
            }
        }
        Err(Error::Numeric(format!(
            "inverse of branch `{}` at {y} did not converge in {INVERSE_MAX_ITER} iterations",
            self.label
        )))
    }

    fn polish(&self, x: f64, y: f64) -> Result<f64> {
        let residual = (self.forward(x) - y).abs();
        if residual <= INVERSE_RESIDUAL_TOL {
            Ok(x)
        } else {
            Err(Error::Numeric(format!("inverse of branch `{}` at {y} left residual {residual:e}", self.label)))
        }
    }
}

/// A piecewise increasing self-map of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PiecewiseMap {
    name: String,
    branches: Vec<Branch>,
    alpha: Option<f64>,
}

impl PiecewiseMap {
    /// Checks that the branch domains partition `[0, 1]` exactly, with each
    /// shared endpoint owned by exactly one side.
    pub fn new(name: impl Into<String>, mut branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Structural("a map needs at least one branch".into()));
        }
        branches.sort_by(|a, b| a.domain.lo.total_cmp(&b.domain.lo));
        let first = &branches[0].domain;
        let last = &branches[branches.len() - 1].domain;
        if first.lo != 0.0 || !first.lo_closed || last.hi != 1.0 || !last.hi_closed {
            return Err(Error::Structural("branch domains must cover [0, 1]".into()));
        }
        for w in branches.windows(2) {
            let (a, b) = (&w[0].domain, &w[1].domain);
            if a.hi != b.lo {
                return Err(Error::Structural(format!("gap or overlap between {a} and {b}")));
            }
            if a.hi_closed == b.lo_closed {
                return Err(Error::Structural(format!("endpoint {} must belong to exactly one of {a} and {b}", a.hi)));
            }
        }
        Ok(Self { name: name.into(), branches, alpha: None })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, symbol: Symbol) -> &Branch {
        &self.branches[symbol]
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Intermittency exponent of LSV maps.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn symbol(&self, label: &str) -> Option<Symbol> {
        self.branches.iter().position(|b| b.label == label)
    }

    pub fn label(&self, symbol: Symbol) -> &str {
        &self.branches[symbol].label
    }

    /// Branch owning `x`.
    #[inline]
    pub fn locate(&self, x: f64) -> Result<Symbol> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { x });
        }
        self.branches
            .iter()
            .position(|b| b.domain.contains(x))
            .ok_or_else(|| Error::Consistency(format!("no branch owns {x}")))
    }

    /// `T(x)`, together with the owning branch.
    #[inline]
    pub fn step(&self, x: f64) -> Result<(Symbol, f64)> {
        let s = self.locate(x)?;
        let y = self.branches[s].forward(x);
        if (0.0..=1.0).contains(&y) {
            return Ok((s, y));
        }
        let overshoot = if y < 0.0 { -y } else { y - 1.0 };
        if overshoot < CLAMP_TOL {
            Ok((s, y.clamp(0.0, 1.0)))
        } else {
            Err(Error::Consistency(format!("T({x}) = {y} leaves [0, 1]")))
        }
    }

    #[inline]
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.step(x).map(|(_, y)| y)
    }

    /// `T'(x)` on the owning branch.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let s = self.locate(x)?;
        Ok(self.branches[s].derivative(x))
    }

    pub fn inverse_branch(&self, symbol: Symbol, y: f64) -> Result<f64> {
        self.branch(symbol).inverse(y)
    }

    pub fn orbit(&self, x0: f64, n: usize) -> Result<Orbit> {
        let mut points = Vec::with_capacity(n + 1);
        let mut itinerary = Vec::with_capacity(n);
        let mut x = x0;
        self.locate(x0)?;
        points.push(x);
        for _ in 0..n {
            let (s, y) = self.step(x)?;
            itinerary.push(s);
            points.push(y);
            x = y;
        }
        Ok(Orbit { points, itinerary })
    }

    /// Whether every branch maps onto all of `[0, 1]` up to null sets.
    pub fn is_full_branched(&self) -> bool {
        self.branches.iter().all(|b| b.image.lo == 0.0 && b.image.hi == 1.0)
    }
}

/// Points `x, Tx, …, T^n x` and the branches visited.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub points: Vec<f64>,
    pub itinerary: Vec<Symbol>,
}

/// The intermittent map `x (1 + (2x)^alpha)` on `[0, 1/2]`, `2x - 1` on
/// `(1/2, 1]`, with a neutral fixed point at 0.
pub fn lsv_map(alpha: f64) -> Result<PiecewiseMap> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("LSV exponent must lie in (0, 1), got {alpha}")));
    }
    let left = Branch::new("L", Interval::closed(0.0, 0.5), BranchFn::Intermittent { alpha })?;
    let right = Branch::new("R", Interval::left_open(0.5, 1.0), BranchFn::Affine { slope: 2.0, offset: -1.0 })?;
    let mut map = PiecewiseMap::new(format!("lsv(alpha={alpha})"), vec![left, right])?;
    map.alpha = Some(alpha);
    Ok(map)
}

/// `2x` on `[0, 1/2]`, `2x - 1` on `(1/2, 1]`.
pub fn doubling_map() -> PiecewiseMap {
    let left = Branch::new("L", Interval::closed(0.0, 0.5), BranchFn::Affine { slope: 2.0, offset: 0.0 })
        .expect("doubling left branch");
    let right = Branch::new("R", Interval::left_open(0.5, 1.0), BranchFn::Affine { slope: 2.0, offset: -1.0 })
        .expect("doubling right branch");
    PiecewiseMap::new("doubling", vec![left, right]).expect("doubling partition")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lsv_values() {
        let t = lsv_map(0.5).unwrap();
        assert_eq!(t.evaluate(0.5).unwrap(), 1.0);
        assert_eq!(t.evaluate(0.0).unwrap(), 0.0);
        assert_eq!(t.derivative(0.0).unwrap(), 1.0);
        // 0.25 (1 + sqrt(1/2))
        assert!(close(t.evaluate(0.25).unwrap(), 0.426_776_695_296_636_9, 1e-15));
        assert!(close(t.evaluate(0.7).unwrap(), 0.4, 1e-15));
        // 0.4 (1 + sqrt(2) sqrt(0.4))
        assert!(close(t.evaluate(0.4).unwrap(), 0.757_770_876_399_966_3, 1e-15));
        assert_eq!(t.alpha(), Some(0.5));
    }

    #[test]
    fn lsv_rejects_bad_alpha() {
        for a in [0.0, 1.0, -0.3, 1.5, f64::NAN] {
            assert!(matches!(lsv_map(a), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn doubling_values() {
        let t = doubling_map();
        assert!(close(t.evaluate(1.0 / 3.0).unwrap(), 2.0 / 3.0, 1e-16));
        assert_eq!(t.evaluate(1.0).unwrap(), 1.0);
        assert!(close(t.evaluate(0.3).unwrap(), 0.6, 1e-16));
        assert!(t.is_full_branched());
    }

    #[test]
    fn domain_errors() {
        let t = doubling_map();
        assert!(matches!(t.evaluate(1.5), Err(Error::Domain { .. })));
        assert!(matches!(t.evaluate(-1e-300), Err(Error::Domain { .. })));
        assert!(matches!(t.evaluate(f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn overshoot_beyond_rounding_is_an_error() {
        let f: RealFn = Arc::new(|x| 1.2 * x);
        let d: RealFn = Arc::new(|_| 1.2);
        // image check happens at construction
        let err = Branch::new("X", Interval::UNIT, BranchFn::Custom { forward: f, derivative: d });
        assert!(matches!(err, Err(Error::Structural(_))));
    }

    #[test]
    fn inverse_examples() {
        let lsv = lsv_map(0.5).unwrap();
        assert!(close(lsv.inverse_branch(1, 0.4).unwrap(), 0.7, 1e-15));
        let x2 = lsv.inverse_branch(0, 0.5).unwrap();
        // independent bracketed root of x (1 + sqrt(2x)) = 1/2
        assert!(close(x2, 0.284_920_145_499_026_7, 1e-12), "{x2}");
        assert!(close(doubling_map().inverse_branch(0, 0.9).unwrap(), 0.45, 1e-16));
        assert!(matches!(lsv.inverse_branch(0, 1.2), Err(Error::Range { .. })));
    }

    #[test]
    fn orbit_examples() {
        let t = doubling_map();
        let o = t.orbit(1.0 / 3.0, 3).unwrap();
        let expect = [1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
        for (a, b) in o.points.iter().zip(expect) {
            assert!(close(*a, b, 1e-15));
        }
        assert_eq!(o.itinerary, vec![0, 1, 0]);

        let o = t.orbit(1.0, 5).unwrap();
        assert!(o.points.iter().all(|&p| p == 1.0));

        let lsv = lsv_map(0.5).unwrap();
        let o = lsv.orbit(0.9, 2).unwrap();
        assert!(close(o.points[1], 0.8, 1e-15) && close(o.points[2], 0.6, 1e-15));
        assert_eq!(lsv.orbit(0.0, 5).unwrap().points, vec![0.0; 6]);
    }

    #[test]
    fn partition_must_be_exact() {
        let a = Branch::new("A", Interval::closed(0.0, 0.5), BranchFn::Affine { slope: 2.0, offset: 0.0 }).unwrap();
        let b = Branch::new("B", Interval::closed(0.5, 1.0), BranchFn::Affine { slope: 2.0, offset: -1.0 }).unwrap();
        assert!(matches!(PiecewiseMap::new("bad", vec![a, b]), Err(Error::Structural(_))));
    }

    #[test]
    fn round_trip_inverse_branches() {
        for map in [lsv_map(0.25).unwrap(), lsv_map(0.5).unwrap(), lsv_map(0.75).unwrap(), doubling_map()] {
            for (s, b) in map.branches().iter().enumerate() {
                let img = *b.image();
                for i in 0..10_000 {
                    let y = img.lerp((i as f64 + 0.5) / 10_000.0);
                    let x = map.inverse_branch(s, y).unwrap();
                    assert!(b.domain().contains_approx(x, 0.0));
                    assert!((b.forward(x) - y).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn branches_are_increasing_and_derivatives_match_finite_differences() {
        for map in [lsv_map(0.25).unwrap(), lsv_map(0.5).unwrap(), doubling_map()] {
            for b in map.branches() {
                let d = b.domain();
                let mut prev = f64::NEG_INFINITY;
                for i in 1..=1000 {
                    let x = d.lerp(i as f64 / 1001.0);
                    let fx = b.forward(x);
                    assert!(fx > prev);
                    prev = fx;
                    let h = 1e-6 * d.length();
                    let fd = (b.forward(x + h) - b.forward(x - h)) / (2.0 * h);
                    let rel = (fd - b.derivative(x)).abs() / b.derivative(x);
                    assert!(rel <= 1e-6, "x={x} fd={fd} d={}", b.derivative(x));
                    assert!(b.derivative(x) >= 1.0);
                }
            }
        }
    }

    #[test]
    fn neutral_fixed_point() {
        for alpha in [0.25, 0.5, 0.75] {
            let t = lsv_map(alpha).unwrap();
            assert_eq!(t.derivative(0.0).unwrap(), 1.0);
            let gaps: Vec<f64> = (1..=12).map(|k| t.derivative(10f64.powi(-k)).unwrap() - 1.0).collect();
            assert!(gaps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
            let expected = (1.0 + alpha) * (2e-12f64).powf(alpha);
            assert!(close(gaps[11], expected, 1e-6 * expected));
        }
        // within 1e-6 of 1 at x = 1e-12 once alpha is large enough for that
        assert!(lsv_map(0.75).unwrap().derivative(1e-12).unwrap() - 1.0 < 1e-6);
    }
}
