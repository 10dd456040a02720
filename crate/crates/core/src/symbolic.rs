//! Markov-partition combinatorics: separation times, symbolic metrics,
//! cylinders and periodic orbits.
//!
//! Periodic orbits are located through inverse branches. For a word
//! `w_0 … w_{n-1}` the periodic point is the fixed point of
//! `v_{w_0} ∘ … ∘ v_{w_{n-1}}`, where `v_a` inverts branch `a`; for expanding
//! words that composition is a contraction.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::{BranchFn, PiecewiseMap, Symbol};

const SUBSET_TOL: f64 = 1e-12;
/// Largest residual `|T p_k - p_{k+1}|` accepted for a periodic orbit.
pub const ORBIT_RESIDUAL_TOL: f64 = 1e-10;
/// Word-cycle budget for the inverse contraction.
pub const CONTRACTION_BUDGET: usize = 100_000;
pub const MAX_PERIOD: usize = 20;

/// Result of a separation-time query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Separation {
    /// First `n` with `T^n x`, `T^n y` in different elements.
    At(usize),
    /// Not separated within the cap.
    NotWithin(usize),
}

impl Separation {
    pub fn steps(&self) -> Option<usize> {
        match *self {
            Separation::At(n) => Some(n),
            Separation::NotWithin(_) => None,
        }
    }
}

/// `s(x, y) = min{ n ≥ 0 : T^n x and T^n y lie in different branches }`.
pub fn separation_time(map: &PiecewiseMap, x: f64, y: f64, cap: usize) -> Result<Separation> {
    let (mut x, mut y) = (x, y);
    map.locate(x)?;
    map.locate(y)?;
    if x == y {
        return Ok(Separation::NotWithin(cap));
    }
    for n in 0..cap {
        let (sx, tx) = map.step(x)?;
        let (sy, ty) = map.step(y)?;
        if sx != sy {
            return Ok(Separation::At(n));
        }
        x = tx;
        y = ty;
    }
    Ok(Separation::NotWithin(cap))
}

/// The branch partition of a map together with its transition matrix and
/// the base `tau` of the symbolic metric.
#[derive(Debug, Clone)]
pub struct MarkovPartition {
    map: PiecewiseMap,
    adjacency: Vec<Vec<bool>>,
    tau: f64,
}

impl MarkovPartition {
    pub fn new(map: &PiecewiseMap, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Parameter(format!("tau must lie in (0, 1), got {tau}")));
        }
        let adjacency = adjacency(map);
        if let Some(row) = adjacency.iter().position(|r| !r.iter().any(|&b| b)) {
            return Err(Error::Structural(format!("branch `{}` has no admissible successor", map.label(row))));
        }
        Ok(Self { map: map.clone(), adjacency, tau })
    }

    pub fn map(&self) -> &PiecewiseMap {
        &self.map
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        word_is_admissible(&self.adjacency, word)
    }

    /// `tau^{s(x,y)}`, or 0 when the points are not separated within `cap`.
    pub fn symbolic_metric(&self, x: f64, y: f64, cap: usize) -> Result<f64> {
        Ok(match separation_time(&self.map, x, y, cap)? {
            Separation::At(n) => self.tau.powi(n as i32),
            Separation::NotWithin(_) => 0.0,
        })
    }
}

/// `adjacency[a][b]` is true iff branch `b`'s domain lies in `T(a)` up to
/// null sets.
pub fn adjacency(map: &PiecewiseMap) -> Vec<Vec<bool>> {
    map.branches()
        .iter()
        .map(|a| map.branches().iter().map(|b| b.domain().is_subset_mod0(a.image(), SUBSET_TOL)).collect())
        .collect()
}

fn word_is_admissible(adjacency: &[Vec<bool>], word: &[Symbol]) -> bool {
    word.iter().all(|&s| s < adjacency.len()) && word.windows(2).all(|w| adjacency[w[0]][w[1]])
}

/// The cylinder `[w_0, …, w_{n-1}] = ∩ T^{-i}(w_i)`.
///
/// Built from the last symbol backwards by pulling the interval through each
/// inverse branch. An empty cylinder is returned as an empty interval.
pub fn cylinder(map: &PiecewiseMap, word: &[Symbol]) -> Result<Interval> {
    if word.is_empty() {
        return Err(Error::Combinatorial("empty word".into()));
    }
    let adj = adjacency(map);
    if !word_is_admissible(&adj, word) {
        return Err(Error::Combinatorial(format!("word {} is not admissible", word_labels(map, word))));
    }
    let mut current = *map.branch(word[word.len() - 1]).domain();
    for &s in word[..word.len() - 1].iter().rev() {
        let b = map.branch(s);
        let target = current.intersect(b.image());
        if target.is_empty() {
            return Ok(Interval::empty());
        }
        let pre = Interval {
            lo: b.inverse(target.lo)?,
            hi: b.inverse(target.hi)?,
            lo_closed: target.lo_closed,
            hi_closed: target.hi_closed,
        };
        current = pre.intersect(b.domain());
        if current.is_empty() {
            return Ok(Interval::empty());
        }
    }
    Ok(current)
}

/// Human-readable form of a word, e.g. `LRR`.
pub fn word_labels(map: &PiecewiseMap, word: &[Symbol]) -> String {
    word.iter().map(|&s| map.branches().get(s).map_or("?", |b| b.label())).collect::<Vec<_>>().join("")
}

/// Lyndon words (primitive words that are strictly smaller than all their
/// rotations) of length 1..=n over `k` letters, in lexicographic order.
pub fn lyndon_words(k: usize, n: usize) -> Vec<Vec<Symbol>> {
    let mut out = Vec::new();
    if k == 0 || n == 0 {
        return out;
    }
    let mut w: Vec<isize> = vec![-1];
    while !w.is_empty() {
        *w.last_mut().unwrap() += 1;
        out.push(w.iter().map(|&c| c as usize).collect());
        let m = w.len();
        while w.len() < n {
            w.push(w[w.len() - m]);
        }
        while w.last() == Some(&(k as isize - 1)) {
            w.pop();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitFlag {
    /// Fixed point with derivative exactly 1, evaluated in closed form.
    Neutral,
    /// The inverse contraction did not settle within its budget.
    NeutralDegenerate,
}

/// A primitive periodic orbit starting at the point whose itinerary is the
/// lexicographically least rotation of `word`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub word: Vec<Symbol>,
    pub points: Vec<f64>,
    pub period: usize,
    pub residual: f64,
    pub flags: Vec<OrbitFlag>,
}

impl PeriodicOrbit {
    pub fn is_neutral(&self) -> bool {
        self.flags.contains(&OrbitFlag::Neutral)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedOrbit {
    pub word: Vec<Symbol>,
    pub residual: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicPoints {
    /// Sorted by period, then lexicographically by word.
    pub orbits: Vec<PeriodicOrbit>,
    pub rejected: Vec<RejectedOrbit>,
}

/// All primitive periodic orbits of period `≤ max_period`.
pub fn periodic_points(map: &PiecewiseMap, max_period: usize) -> Result<PeriodicPoints> {
    if max_period == 0 || max_period > MAX_PERIOD {
        return Err(Error::Parameter(format!("max_period must lie in 1..={MAX_PERIOD}, got {max_period}")));
    }
    let k = map.len();
    if (k as f64).powi(max_period as i32) > (1u64 << MAX_PERIOD) as f64 {
        return Err(Error::Parameter(format!(
            "{k}^{max_period} words exceeds the enumeration guard of 2^{MAX_PERIOD}"
        )));
    }
    let adj = adjacency(map);
    let mut words: Vec<Vec<Symbol>> = lyndon_words(k, max_period)
        .into_iter()
        .filter(|w| word_is_admissible(&adj, w) && adj[w[w.len() - 1]][w[0]])
        .collect();
    words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let solved: Vec<std::result::Result<PeriodicOrbit, RejectedOrbit>> =
        words.into_par_iter().map(|w| solve_word(map, w)).collect();
    let mut orbits = Vec::new();
    let mut rejected = Vec::new();
    for r in solved {
        match r {
            Ok(o) => orbits.push(o),
            Err(r) => rejected.push(r),
        }
    }
    Ok(PeriodicPoints { orbits, rejected })
}

fn is_neutral_word(map: &PiecewiseMap, word: &[Symbol]) -> bool {
    let s = word[0];
    let b = map.branch(s);
    word.iter().all(|&t| t == s) && matches!(b.func(), BranchFn::Intermittent { .. }) && b.domain().contains(0.0)
}

fn solve_word(map: &PiecewiseMap, word: Vec<Symbol>) -> std::result::Result<PeriodicOrbit, RejectedOrbit> {
    let n = word.len();
    let reject = |word: Vec<Symbol>, residual: f64, reason: String| RejectedOrbit { word, residual, reason };

    if is_neutral_word(map, &word) {
        return Ok(PeriodicOrbit {
            points: vec![0.0; n],
            period: n,
            residual: 0.0,
            flags: vec![OrbitFlag::Neutral],
            word,
        });
    }

    let pull_back = |x: f64| -> Result<f64> {
        let mut y = x;
        for &s in word.iter().rev() {
            y = map.branch(s).inverse(y)?;
        }
        Ok(y)
    };

    let mut x = map.branch(word[0]).domain().midpoint();
    let mut converged = false;
    for _ in 0..CONTRACTION_BUDGET {
        let next = match pull_back(x) {
            Ok(v) => v,
            Err(e) => return Err(reject(word, f64::NAN, e.to_string())),
        };
        let delta = (next - x).abs();
        x = next;
        if delta <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || delta == 0.0 {
            converged = true;
            break;
        }
    }

    // Newton on G(x) - x with G the word-composed forward map.
    let dom0 = *map.branch(word[0]).domain();
    let word_forward = |x: f64| -> (f64, f64) {
        let mut y = x;
        let mut d = 1.0;
        for &s in &word {
            let b = map.branch(s);
            d *= b.derivative(y);
            y = b.forward(y);
        }
        (y, d)
    };
    for _ in 0..3 {
        let (g, dg) = word_forward(x);
        let r = g - x;
        if r == 0.0 || dg == 1.0 {
            break;
        }
        let cand = x - r / (dg - 1.0);
        if !dom0.contains_approx(cand, 0.0) {
            break;
        }
        let (gc, _) = word_forward(cand);
        if (gc - cand).abs() < r.abs() {
            x = cand;
        } else {
            break;
        }
    }

    let mut points = Vec::with_capacity(n);
    let mut p = x;
    for &s in &word {
        points.push(p);
        p = map.branch(s).forward(p);
    }
    let mut residual: f64 = 0.0;
    for k in 0..n {
        let image = map.branch(word[k]).forward(points[k]);
        residual = residual.max((image - points[(k + 1) % n]).abs());
        if !map.branch(word[k]).domain().contains_approx(points[k], SUBSET_TOL) {
            return Err(reject(
                word.clone(),
                residual,
                format!("point {} escaped branch `{}`", points[k], map.label(word[k])),
            ));
        }
    }
    if residual > ORBIT_RESIDUAL_TOL {
        return Err(reject(word, residual, "residual above tolerance".into()));
    }
    let flags = if converged { vec![] } else { vec![OrbitFlag::NeutralDegenerate] };
    Ok(PeriodicOrbit { word, points, period: n, residual, flags })
}
