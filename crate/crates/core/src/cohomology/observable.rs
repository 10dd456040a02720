use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::{BranchFn, PiecewiseMap};
use crate::sampling::sample_pair;

pub type ObservableFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Hölder seminorm of an observable on one partition element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seminorm {
    pub label: String,
    pub element: Interval,
    /// Recorded value: supplied, a chain bound, or the dense-grid estimate.
    pub value: f64,
    /// Independent sampled estimate, when one was computed.
    pub sampled: Option<f64>,
}

/// A real function on a subinterval of `[0, 1]`, Hölder with exponent
/// `exponent` on each element of some partition.
#[derive(Clone)]
pub struct Observable {
    eval: ObservableFn,
    domain: Interval,
    exponent: f64,
    seminorms: Vec<Seminorm>,
    descriptor: String,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("descriptor", &self.descriptor)
            .field("domain", &self.domain)
            .field("exponent", &self.exponent)
            .field("seminorms", &self.seminorms)
            .finish()
    }
}

impl Observable {
    pub fn new(descriptor: impl Into<String>, exponent: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            domain: Interval::UNIT,
            exponent,
            seminorms: Vec::new(),
            descriptor: descriptor.into(),
        }
    }

    pub fn on(mut self, domain: Interval) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_seminorms(mut self, seminorms: Vec<Seminorm>) -> Self {
        self.seminorms = seminorms;
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant:{c}"), 1.0, move |_| c)
    }

    /// `a x + b`
    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(format!("affine:{a},{b}"), 1.0, move |x| a * x + b)
    }

    pub fn indicator(set: Interval) -> Self {
        Self::new(format!("indicator:{set}"), 1.0, move |x| if set.contains(x) { 1.0 } else { 0.0 })
    }

    /// `log T'`, Hölder with exponent `alpha` for LSV maps and Lipschitz for
    /// maps with affine branches.
    pub fn log_derivative(map: &PiecewiseMap) -> Self {
        let exponent = map
            .branches()
            .iter()
            .map(|b| match b.func() {
                BranchFn::Intermittent { alpha } => *alpha,
                _ => 1.0,
            })
            .fold(1.0, f64::min);
        let m = map.clone();
        Self::new("log-derivative", exponent, move |x| {
            let Ok(s) = m.locate(x) else { return f64::NAN };
            match m.branch(s).func() {
                // ln(1 + small) loses the small part near the neutral point.
                BranchFn::Intermittent { alpha } => ((1.0 + alpha) * (2.0 * x).powf(*alpha)).ln_1p(),
                _ => m.branch(s).derivative(x).ln(),
            }
        })
    }

    /// `g - g∘T`.
    pub fn coboundary_of(
        map: &PiecewiseMap,
        name: &str,
        exponent: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let m = map.clone();
        Self::new(format!("coboundary-of:{name}"), exponent, move |x| match m.evaluate(x) {
            Ok(tx) => g(x) - g(tx),
            Err(_) => f64::NAN,
        })
    }

    /// Piecewise-linear interpolation through `(points[i], values[i])`.
    pub fn from_table(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() || points.len() < 2 {
            return Err(Error::InsufficientData("a table needs at least two (x, value) rows".into()));
        }
        if !points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parameter("table abscissae must be strictly increasing".into()));
        }
        let domain = Interval::closed(points[0], points[points.len() - 1]);
        Ok(Self::new("table", 1.0, move |x| {
            let i = points.partition_point(|&p| p <= x).clamp(1, points.len() - 1);
            let (x0, x1) = (points[i - 1], points[i]);
            let t = (x - x0) / (x1 - x0);
            values[i - 1] + t * (values[i] - values[i - 1])
        })
        .on(domain))
    }

    /// `f - c`, keeping the seminorms.
    pub fn minus_constant(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |x| inner(x) - c),
            domain: self.domain,
            exponent: self.exponent,
            seminorms: self.seminorms.clone(),
            descriptor: format!("{} - {c}", self.descriptor),
        }
    }

    #[inline]
    pub fn evaluate(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn function(&self) -> ObservableFn {
        self.eval.clone()
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn seminorms(&self) -> &[Seminorm] {
        &self.seminorms
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    /// Seminorm recorded for the element containing `x`.
    pub fn seminorm_at(&self, x: f64) -> Option<f64> {
        self.seminorms.iter().find(|s| s.element.contains(x)).map(|s| s.value)
    }

    /// Records per-branch Hölder seminorms estimated on a dense grid that
    /// also probes both ends of each branch geometrically.
    pub fn with_estimated_seminorms(mut self, map: &PiecewiseMap) -> Self {
        self.seminorms = map
            .branches()
            .iter()
            .map(|b| Seminorm {
                label: b.label().to_string(),
                element: *b.domain(),
                value: grid_seminorm(&*self.eval, b.domain(), self.exponent),
                sampled: None,
            })
            .collect();
        self
    }

    /// Largest ratio between a sampled Hölder quotient and the recorded
    /// seminorm of its element; values up to 1.05 count as consistent.
    pub fn seminorm_consistency(&self, pairs_per_element: usize, seed: u64) -> f64 {
        let mut worst: f64 = 0.0;
        for (e, s) in self.seminorms.iter().enumerate() {
            for id in 0..pairs_per_element as u64 {
                let (x, y) = sample_pair(&s.element, seed ^ (e as u64) << 32, id);
                let q = holder_quotient(&*self.eval, x, y, self.exponent);
                if q == 0.0 {
                    continue;
                }
                worst = worst.max(if s.value > 0.0 { q / s.value } else { f64::INFINITY });
            }
        }
        worst
    }
}

pub(crate) fn holder_quotient(f: &dyn Fn(f64) -> f64, x: f64, y: f64, exponent: f64) -> f64 {
    let d = (x - y).abs();
    if d == 0.0 {
        return 0.0;
    }
    (f(x) - f(y)).abs() / d.powf(exponent)
}

fn grid_seminorm(f: &dyn Fn(f64) -> f64, element: &Interval, exponent: f64) -> f64 {
    let mut xs = Vec::with_capacity(1200);
    let n = 1024;
    for i in 0..=n {
        let x = element.lerp(i as f64 / n as f64);
        if element.contains(x) {
            xs.push(x);
        }
    }
    for k in 1..=80 {
        let off = element.length() * (-(k as f64)).exp2();
        for x in [element.lo + off, element.hi - off] {
            if element.contains(x) {
                xs.push(x);
            }
        }
    }
    if element.lo_closed {
        xs.push(element.lo);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best: f64 = 0.0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let q = (vals[i] - vals[j]).abs() / (xs[j] - xs[i]).powf(exponent);
            if q.is_finite() {
                best = best.max(q);
            }
        }
    }
    best
}
