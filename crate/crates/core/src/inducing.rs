//! First-return systems on `Y = (1/2, 1]` and their tower view.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cohomology::observable::{holder_quotient, Observable, Seminorm};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::{PiecewiseMap, Symbol};
use crate::sampling::{sample_pair, sample_point};
use crate::sum::CompensatedSum;
use crate::symbolic::Separation;
use crate::system::MarkovSystem;

pub const DEFAULT_RETURN_CAP: usize = 10_000;

/// Number of return-partition elements that receive seminorm estimates in
/// [`induced_observable`].
pub const INDUCED_SEMINORM_ELEMENTS: usize = 40;

const STRUCTURE_TOL: f64 = 1e-12;

/// First `n ≥ 1` with `T^n x ∈ y_set`.
pub fn return_time(map: &PiecewiseMap, y_set: &Interval, x: f64, cap: usize) -> Result<usize> {
    if !y_set.contains(x) {
        return Err(Error::Parameter(format!("{x} is not in the inducing set {y_set}")));
    }
    let mut orbit = Vec::new();
    let mut p = x;
    for n in 1..=cap {
        p = map.step(p)?.1;
        if y_set.contains(p) {
            return Ok(n);
        }
        orbit.push(p);
    }
    Err(Error::ReturnNotResolved { x, cap, partial_orbit: orbit })
}

/// Metric used on the inducing set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InducedMetric {
    Euclidean,
    Symbolic { tau: f64 },
}

/// The first-return map `T_Y` of a two-branch map with a fixed point at the
/// left end, on `Y` = domain of the right branch.
///
/// With `x_0 = 1`, `x_1 = 1/2` and `x_{k+1}` the left preimage of `x_k`, the
/// return partition is `B_n = R^{-1}(x_n, x_{n-1}]` and `T_Y = L^{n-1} ∘ R`
/// on `B_n`. Element `i` is `B_{i+1}`.
#[derive(Debug, Clone)]
pub struct InducedSystem {
    base: PiecewiseMap,
    y_set: Interval,
    left: Symbol,
    right: Symbol,
    boundary: Arc<Vec<f64>>,
    metric: InducedMetric,
    lambda: f64,
}

pub fn induce(map: &PiecewiseMap, y_set: Interval, cap: usize) -> Result<InducedSystem> {
    if cap == 0 {
        return Err(Error::Parameter("return-time cap must be positive".into()));
    }
    if map.len() != 2 || !map.is_full_branched() {
        return Err(Error::Structural(format!(
            "`{}`: inducing is implemented for maps with two full branches",
            map.name()
        )));
    }
    let (left, right) = (0, 1);
    let l = map.branch(left);
    let r = map.branch(right);
    if l.forward(l.domain().lo).abs() > STRUCTURE_TOL {
        return Err(Error::Structural("the left branch must fix the left endpoint".into()));
    }
    let yd = r.domain();
    if (y_set.lo - yd.lo).abs() > STRUCTURE_TOL || (y_set.hi - yd.hi).abs() > STRUCTURE_TOL {
        return Err(Error::Structural(format!(
            "inducing set {y_set} must be the right-branch domain {yd}; other sets give non-monotone return branches here"
        )));
    }

    let mut boundary = Vec::with_capacity(cap + 1);
    boundary.push(l.image().hi);
    boundary.push(l.domain().hi);
    while boundary.len() <= cap {
        let prev = *boundary.last().unwrap();
        boundary.push(l.inverse_from(prev, Some(prev))?);
    }

    let mut sys = InducedSystem {
        base: map.clone(),
        y_set: *yd,
        left,
        right,
        boundary: Arc::new(boundary),
        metric: InducedMetric::Euclidean,
        lambda: f64::NAN,
    };
    // T_Y' increases inside each B_n, so its infimum sits at left endpoints.
    sys.lambda = (0..sys.element_count()).map(|i| sys.derivative(i, sys.element(i).lo)).fold(f64::INFINITY, f64::min);
    Ok(sys)
}

impl InducedSystem {
    pub fn with_metric(mut self, metric: InducedMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn base(&self) -> &PiecewiseMap {
        &self.base
    }

    pub fn inducing_set(&self) -> Interval {
        self.y_set
    }

    pub fn cap(&self) -> usize {
        self.boundary.len() - 1
    }

    pub fn metric(&self) -> InducedMetric {
        self.metric
    }

    /// Infimum of `T_Y'` over the resolved elements.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `x_0 = 1, x_1 = 1/2, x_2, …, x_cap`.
    pub fn boundary_points(&self) -> &[f64] {
        &self.boundary
    }

    /// `B_n`, for `1 ≤ n ≤ cap`.
    pub fn cell(&self, n: usize) -> Interval {
        Interval::left_open(self.cut(n), self.cut(n - 1))
    }

    /// Largest float `y` with `R y ≤ x_k`, so that cells agree exactly with
    /// [`MarkovSystem::element_of`].
    fn cut(&self, k: usize) -> f64 {
        let r = self.base.branch(self.right);
        let xk = self.boundary[k];
        let mut y = r.inverse(xk).expect("boundary points lie in the right image");
        while y > self.y_set.lo && r.forward(y) > xk {
            y = y.next_down();
        }
        while y < self.y_set.hi && r.forward(y.next_up()) <= xk {
            y = y.next_up();
        }
        y
    }

    /// Part of `Y` whose return time exceeds the cap.
    pub fn unresolved_tail(&self) -> Interval {
        Interval::left_open(self.y_set.lo, self.cell(self.cap()).lo)
    }

    /// Return time of `y`, read off the partition.
    pub fn return_time_of(&self, y: f64) -> Result<usize> {
        match self.element_of(y) {
            Some(i) => Ok(i + 1),
            None if self.y_set.contains(y) => {
                return_time(&self.base, &self.y_set, y, self.cap()).map_err(|e| match e {
                    Error::ReturnNotResolved { partial_orbit, .. } => {
                        Error::ReturnNotResolved { x: y, cap: self.cap(), partial_orbit }
                    }
                    e => e,
                })
            }
            None => Err(Error::Parameter(format!("{y} is not in the inducing set {}", self.y_set))),
        }
    }

    /// `T_Y y`.
    pub fn apply(&self, y: f64) -> Result<f64> {
        let i =
            self.element_of(y).ok_or(Error::ReturnNotResolved { x: y, cap: self.cap(), partial_orbit: Vec::new() })?;
        Ok(self.forward(i, y))
    }

    /// `T^k` on `B_n` for `0 ≤ k ≤ n`, with its derivative.
    pub fn partial_excursion(&self, n: usize, k: usize, y: f64) -> (f64, f64) {
        if k == 0 {
            return (y, 1.0);
        }
        let r = self.base.branch(self.right);
        let l = self.base.branch(self.left);
        let mut d = r.derivative(y);
        let mut p = r.forward(y);
        for _ in 1..k.min(n) {
            d *= l.derivative(p);
            p = l.forward(p);
        }
        (p, d)
    }

    /// Separation time under `T_Y`, capped.
    pub fn separation_time(&self, x: f64, y: f64, cap: usize) -> Separation {
        let (mut a, mut b) = (x, y);
        for n in 0..cap {
            match (self.element_of(a), self.element_of(b)) {
                (Some(i), Some(j)) if i == j => {
                    a = self.forward(i, a);
                    b = self.forward(j, b);
                }
                _ => return Separation::At(n),
            }
        }
        Separation::NotWithin(cap)
    }

    /// One row per resolved `B_n`, `n ≤ count`.
    pub fn return_partition_rows(&self, count: usize, samples: usize, seed: u64) -> Vec<ReturnCell> {
        (1..=count.min(self.cap()))
            .into_par_iter()
            .map(|n| {
                let cell = self.cell(n);
                let min_derivative = (0..samples as u64)
                    .map(|s| self.derivative(n - 1, sample_point(&cell, seed ^ n as u64, s)))
                    .fold(f64::INFINITY, f64::min);
                ReturnCell { n, left: cell.lo, right: cell.hi, length: cell.length(), min_derivative }
            })
            .collect()
    }
}

/// CSV row of the return partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnCell {
    pub n: usize,
    pub left: f64,
    pub right: f64,
    pub length: f64,
    pub min_derivative: f64,
}

impl MarkovSystem for InducedSystem {
    fn space(&self) -> Interval {
        self.y_set
    }

    fn element_count(&self) -> usize {
        self.cap()
    }

    fn element(&self, i: usize) -> Interval {
        self.cell(i + 1)
    }

    fn element_image(&self, _i: usize) -> Interval {
        self.y_set
    }

    fn element_label(&self, i: usize) -> String {
        format!("B{}", i + 1)
    }

    fn forward(&self, i: usize, x: f64) -> f64 {
        self.partial_excursion(i + 1, i + 1, x).0
    }

    fn derivative(&self, i: usize, x: f64) -> f64 {
        self.partial_excursion(i + 1, i + 1, x).1
    }

    fn inverse(&self, i: usize, y: f64) -> Result<f64> {
        let l = self.base.branch(self.left);
        let mut w = y;
        for _ in 0..i {
            w = l.inverse_from(w, Some(w))?;
        }
        self.base.branch(self.right).inverse(w)
    }

    fn element_of(&self, x: f64) -> Option<usize> {
        if !self.y_set.contains(x) {
            return None;
        }
        let v = self.base.branch(self.right).forward(x);
        // boundary is decreasing; B_n holds R x ∈ (x_n, x_{n-1}].
        let p = self.boundary.partition_point(|&b| b >= v);
        (p >= 1 && p <= self.cap()).then(|| p - 1)
    }

    /// Walks the left inverse branch once per element instead of restarting
    /// from `y` for every `B_n`.
    fn for_each_preimage_set(&self, ys: &[f64], f: &mut dyn FnMut(usize, &[usize], &[f64], &[f64])) -> Result<()> {
        let l = self.base.branch(self.left);
        let r = self.base.branch(self.right);
        let idx: Vec<usize> = (0..ys.len()).filter(|&j| self.y_set.contains_approx(ys[j], 0.0)).collect();
        let mut w: Vec<f64> = idx.iter().map(|&j| ys[j]).collect();
        let mut dprod = vec![1.0; w.len()];
        let mut pre = vec![0.0; w.len()];
        let mut der = vec![0.0; w.len()];
        for i in 0..self.element_count() {
            if i > 0 {
                let step: Result<Vec<(f64, f64)>> = w
                    .par_iter()
                    .zip(dprod.par_iter())
                    .map(|(&wj, &dj)| {
                        let v = l.inverse_from(wj, Some(wj))?;
                        Ok((v, dj * l.derivative(v)))
                    })
                    .collect();
                for (k, (v, d)) in step?.into_iter().enumerate() {
                    w[k] = v;
                    dprod[k] = d;
                }
            }
            for k in 0..w.len() {
                let x = r.inverse(w[k])?;
                pre[k] = x;
                der[k] = r.derivative(x) * dprod[k];
            }
            f(i, &idx, &pre, &der);
        }
        Ok(())
    }

    fn unresolved_mass(&self) -> f64 {
        self.unresolved_tail().length()
    }

    fn describe(&self) -> String {
        format!("first return of {} to {} (cap {})", self.base.name(), self.y_set, self.cap())
    }
}

/// `f_Y(y) = Σ_{k<φ(y)} f(T^k y)`, with per-`B_n` seminorms: the chain bound
/// `Σ_k Df(T^k B_n) · sup |(T^k)'|^γ` as the recorded value and a sampled
/// quotient as cross-check.
pub fn induced_observable(system: &InducedSystem, f: &Observable) -> Result<Observable> {
    let sys = system.clone();
    let g = f.function();
    let eval = move |y: f64| -> f64 {
        let Some(i) = sys.element_of(y) else { return f64::NAN };
        let mut s = CompensatedSum::new();
        let mut p = y;
        for _ in 0..=i {
            s.add(g(p));
            p = match sys.base.step(p) {
                Ok((_, q)) => q,
                Err(_) => return f64::NAN,
            };
        }
        s.value()
    };
    let gamma = f.exponent();
    let plain = Observable::new(format!("induced:{}", f.descriptor()), gamma, eval).on(system.y_set);

    let count = INDUCED_SEMINORM_ELEMENTS.min(system.cap());
    let seminorms: Vec<Seminorm> = (1..=count)
        .into_par_iter()
        .map(|n| {
            let cell = system.cell(n);
            let mut chain = 0.0;
            for k in 0..n {
                let level =
                    if k == 0 { cell } else { Interval::left_open(system.boundary[n - k + 1], system.boundary[n - k]) };
                let df = f.seminorm_at(level.midpoint()).unwrap_or(f64::NAN);
                // (T^k)' is increasing on B_n.
                let dmax = system.partial_excursion(n, k, cell.hi).1;
                chain += df * dmax.powf(gamma);
            }
            let h = plain.function();
            let sampled = (0..200u64)
                .map(|id| {
                    let (x, y) = sample_pair(&cell, 0x5eed ^ n as u64, id);
                    holder_quotient(&*h, x, y, gamma)
                })
                .filter(|q| q.is_finite())
                .fold(0.0, f64::max);
            Seminorm { label: format!("B{n}"), element: cell, value: chain, sampled: Some(sampled) }
        })
        .collect();
    Ok(plain.with_seminorms(seminorms))
}

/// `d'(x, y)`: the metric after one return on a common element, and
/// `λ · diam` across elements.
pub fn induced_metric(system: &InducedSystem, x: f64, y: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    match system.metric {
        InducedMetric::Euclidean => match (system.element_of(x), system.element_of(y)) {
            (Some(i), Some(j)) if i == j => (system.forward(i, x) - system.forward(i, y)).abs(),
            _ => system.lambda * Interval::UNIT.length(),
        },
        InducedMetric::Symbolic { tau } => match system.separation_time(x, y, 64) {
            Separation::At(s) => tau.powi(s as i32),
            Separation::NotWithin(_) => 0.0,
        },
    }
}

/// Column `l` of a Young tower: base `Δ_{0,l} = B_n` with height `R_l = n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TowerColumn {
    pub return_time: usize,
    pub base: Interval,
}

/// Tower over the resolved return partition. Levels are generated on
/// demand from the boundary sequence.
#[derive(Debug, Clone)]
pub struct YoungTower {
    system: InducedSystem,
    columns: Vec<TowerColumn>,
}

pub fn tower_of(system: &InducedSystem) -> YoungTower {
    let columns = (1..=system.cap()).map(|n| TowerColumn { return_time: n, base: system.cell(n) }).collect();
    YoungTower { system: system.clone(), columns }
}

impl YoungTower {
    pub fn system(&self) -> &InducedSystem {
        &self.system
    }

    pub fn columns(&self) -> &[TowerColumn] {
        &self.columns
    }

    /// `Δ_{0} = Y`.
    pub fn base(&self) -> Interval {
        self.system.y_set
    }

    /// `Δ_{k,l}` as a subset of `[0, 1]`, for `k < R_l`.
    pub fn level(&self, l: usize, k: usize) -> Interval {
        let n = self.columns[l].return_time;
        assert!(k < n, "level {k} above column of height {n}");
        if k == 0 {
            self.columns[l].base
        } else {
            let b = &self.system.boundary;
            Interval::left_open(b[n - k + 1], b[n - k])
        }
    }

    pub fn level_count(&self) -> usize {
        self.columns.iter().map(|c| c.return_time).sum()
    }

    /// `Σ_l R_l m(Δ_{0,l})` for the measure `m`.
    pub fn kac_sum(&self, m: impl Fn(&Interval) -> f64) -> f64 {
        self.columns.iter().map(|c| c.return_time as f64 * m(&c.base)).collect::<CompensatedSum>().value()
    }

    /// `T` on `Δ_{k,l}`, landing in `Δ_{k+1,l}` or in the base.
    pub fn climb(&self, l: usize, k: usize, x: f64) -> Result<f64> {
        let _ = self.level(l, k);
        Ok(self.system.base.step(x)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{doubling_map, lsv_map};

    fn y() -> Interval {
        Interval::left_open(0.5, 1.0)
    }

    #[test]
    fn return_time_examples() {
        let lsv = lsv_map(0.5).unwrap();
        assert_eq!(return_time(&lsv, &y(), 0.9, 10).unwrap(), 1);
        assert_eq!(return_time(&lsv, &y(), 0.7, 10).unwrap(), 2);
        assert_eq!(return_time(&doubling_map(), &y(), 0.6, 10).unwrap(), 3);
        match return_time(&lsv, &y(), 0.5 + 1e-12, 5) {
            Err(Error::ReturnNotResolved { cap: 5, partial_orbit, .. }) => assert_eq!(partial_orbit.len(), 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_examples() {
        let lsv = lsv_map(0.5).unwrap();
        let sys = induce(&lsv, y(), 200).unwrap();
        assert_eq!(sys.cell(1), Interval::left_open(0.75, 1.0));
        // x_2 solves x (1 + sqrt(2x)) = 1/2.
        let x2 = sys.boundary_points()[2];
        assert!((x2 * (1.0 + (2.0 * x2).sqrt()) - 0.5).abs() < 1e-15);
        assert!((x2 - 0.2849201454990267).abs() < 1e-12);
        let b2 = sys.cell(2);
        assert!((b2.lo - (1.0 + x2) / 2.0).abs() < 1e-15 && b2.hi == 0.75);
        assert!((b2.lo - 0.64246).abs() < 1e-5);
        for x in [0.76, 0.9, 1.0] {
            assert_eq!(sys.derivative(0, x), 2.0);
        }
        assert!(sys.unresolved_tail().length() > 0.0);
        assert!((sys.unresolved_tail().hi - sys.cell(200).lo).abs() == 0.0);
        assert_eq!(sys.lambda(), 2.0);
    }

    #[test]
    fn partition_matches_iteration() {
        for map in [lsv_map(0.5).unwrap(), doubling_map()] {
            let sys = induce(&map, y(), 60).unwrap();
            for n in 1..=40 {
                let cell = sys.cell(n);
                for s in 0..100 {
                    let p = sample_point(&cell, 3, s);
                    assert_eq!(return_time(&map, &y(), p, 1000).unwrap(), n, "{} B_{n} at {p}", map.name());
                    assert_eq!(sys.element_of(p), Some(n - 1));
                    let (img, d) = sys.partial_excursion(n, n, p);
                    let direct = map.orbit(p, n).unwrap().points[n];
                    assert!((img - direct).abs() < 1e-12);
                    assert!(d >= 2.0 - 1e-9);
                }
                // T^n maps B_n onto Y.
                assert!((sys.forward(n - 1, cell.lo) - 0.5).abs() < 1e-9);
                assert!((sys.forward(n - 1, cell.hi) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lengths_decrease_and_cover() {
        let lsv = lsv_map(0.5).unwrap();
        let sys = induce(&lsv, y(), 2000).unwrap();
        let lens: Vec<f64> = (1..=2000).map(|n| sys.cell(n).length()).collect();
        assert!(lens[1..].windows(2).all(|w| w[1] < w[0]));
        let covered: f64 = lens.iter().sum();
        assert!((covered + sys.unresolved_mass() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn preimage_walk_matches_inverse() {
        let lsv = lsv_map(0.5).unwrap();
        let sys = induce(&lsv, y(), 30).unwrap();
        let ys: Vec<f64> = (0..=16).map(|i| 0.5 + i as f64 / 32.0).collect();
        let mut seen = 0;
        sys.for_each_preimage_set(&ys, &mut |i, idx, pre, der| {
            for (k, &j) in idx.iter().enumerate() {
                let x = sys.inverse(i, ys[j]).unwrap();
                assert!((x - pre[k]).abs() < 1e-13);
                assert!((sys.forward(i, pre[k]) - ys[j]).abs() < 1e-10);
                assert!((der[k] / sys.derivative(i, pre[k]) - 1.0).abs() < 1e-12);
            }
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 30);
    }

    #[test]
    fn induced_observable_examples() {
        let lsv = lsv_map(0.5).unwrap();
        let sys = induce(&lsv, y(), 500).unwrap();
        let fy = induced_observable(&sys, &Observable::affine(1.0, 0.0).with_estimated_seminorms(&lsv)).unwrap();
        let t07 = lsv.evaluate(0.7).unwrap();
        assert!((fy.evaluate(0.7) - (0.7 + t07)).abs() < 1e-15);
        assert!((fy.evaluate(0.7) - 1.1).abs() < 1e-12);
        let one = induced_observable(&sys, &Observable::constant(1.0)).unwrap();
        for p in [0.99, 0.7, 0.51] {
            assert_eq!(one.evaluate(p), sys.return_time_of(p).unwrap() as f64);
        }
        for s in fy.seminorms() {
            let sampled = s.sampled.unwrap();
            assert!(sampled <= s.value * (1.0 + 1e-5), "{}: {sampled} > {}", s.label, s.value);
        }
    }

    #[test]
    fn telescoping_under_inducing() {
        let lsv = lsv_map(0.5).unwrap();
        let sys = induce(&lsv, y(), 2000).unwrap();
        let g = |x: f64| x * (1.0 - x);
        let f = Observable::coboundary_of(&lsv, "g1", 1.0, g);
        let fy = induced_observable(&sys, &f).unwrap();
        let mut checked = 0;
        for s in 0..1000 {
            let p = sample_point(&y(), 8, s);
            if sys.element_of(p).is_none() {
                continue;
            }
            let expect = g(p) - g(sys.apply(p).unwrap());
            assert!((fy.evaluate(p) - expect).abs() < 1e-10, "{p}");
            checked += 1;
        }
        assert!(checked > 990);
    }

    #[test]
    fn metric_examples() {
        let lsv = lsv_map(0.5).unwrap();
        let sys = induce(&lsv, y(), 100).unwrap();
        assert_eq!(induced_metric(&sys, 0.8, 0.9), (2.0f64 * 0.8 - 2.0 * 0.9).abs());
        assert_eq!(induced_metric(&sys, 0.9, 0.7), 2.0);
        assert_eq!(induced_metric(&sys, 0.7, 0.7), 0.0);
        let sym = sys.clone().with_metric(InducedMetric::Symbolic { tau: 0.5 });
        assert_eq!(induced_metric(&sym, 0.9, 0.7), 1.0);
    }

    #[test]
    fn tower_shape() {
        let lsv = lsv_map(0.5).unwrap();
        let sys = induce(&lsv, y(), 50).unwrap();
        let tower = tower_of(&sys);
        assert_eq!(tower.columns()[0].return_time, 1);
        assert_eq!(tower.columns()[0].base, sys.cell(1));
        assert_eq!(tower.level_count(), 50 * 51 / 2);
        for l in [1usize, 5, 20] {
            let n = l + 1;
            for k in 0..n {
                let lev = tower.level(l, k);
                let p = sample_point(&lev, 1, k as u64);
                let q = tower.climb(l, k, p).unwrap();
                let next = if k + 1 < n { tower.level(l, k + 1) } else { tower.base() };
                assert!(next.contains_approx(q, 1e-12), "l={l} k={k}");
            }
        }
        let d = tower_of(&induce(&doubling_map(), y(), 50).unwrap());
        let kac = d.kac_sum(Interval::length);
        assert!(kac <= 1.0 && 1.0 - kac < 1e-12);
    }

    #[test]
    fn rejects_other_sets() {
        let lsv = lsv_map(0.5).unwrap();
        assert!(matches!(induce(&lsv, Interval::left_open(0.6, 1.0), 10), Err(Error::Structural(_))));
    }
}
