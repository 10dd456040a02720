use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cohomology::birkhoff::DitheredOrbit;
use crate::cohomology::observable::Observable;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::PiecewiseMap;
use crate::sampling::{derive_seed, stream_rng};
use crate::sum::{compensated_sum, CompensatedSum};
use crate::transfer::ulam::{ulam_matrix, UlamOperator};

pub const DENSITY_TOL: f64 = 1e-12;
pub const MAX_POWER_ITERATIONS: usize = 100_000;

/// Piecewise-constant density on the bins of an Ulam operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    pub space: Interval,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// L¹ change of the last power-iteration step.
    pub l1_change: f64,
}

impl Density {
    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.space.length() / self.values.len() as f64
    }

    fn edge(&self, j: usize) -> f64 {
        if j == self.values.len() {
            self.space.hi
        } else {
            self.space.lo + j as f64 * self.bin_width()
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        let j = (((x - self.space.lo) / self.bin_width()).max(0.0) as usize).min(self.values.len() - 1);
        self.values[j]
    }

    /// `μ(I) = ∫_I ρ`.
    pub fn measure(&self, interval: &Interval) -> f64 {
        let lo = interval.lo.max(self.space.lo);
        let hi = interval.hi.min(self.space.hi);
        if hi <= lo {
            return 0.0;
        }
        let w = self.bin_width();
        let j0 = ((lo - self.space.lo) / w) as usize;
        let j1 = (((hi - self.space.lo) / w) as usize).min(self.values.len() - 1);
        compensated_sum((j0..=j1).map(|j| self.values[j] * (hi.min(self.edge(j + 1)) - lo.max(self.edge(j))).max(0.0)))
    }

    /// `∫ f ρ` with five-point Gauss–Legendre quadrature on every bin.
    pub fn integrate(&self, f: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
        let parts: Vec<f64> = (0..self.values.len())
            .into_par_iter()
            .map(|j| self.values[j] * bin_integral(f, self.edge(j), self.edge(j + 1)))
            .collect();
        compensated_sum(parts)
    }

    /// L¹ distance to `other`, which may live on a finer grid of the same
    /// space.
    pub fn l1_distance(&self, other: &Density) -> f64 {
        let (coarse, fine) = if self.n_bins() <= other.n_bins() { (self, other) } else { (other, self) };
        let w = fine.bin_width();
        compensated_sum(fine.values.iter().enumerate().map(|(j, v)| {
            let x = fine.space.lo + (j as f64 + 0.5) * w;
            (v - coarse.at(x)).abs() * w
        }))
    }
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

pub(crate) fn bin_integral(f: &(dyn Fn(f64) -> f64 + Sync), a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * GL5.iter().map(|(t, w)| w * f(m + r * t)).sum::<f64>()
}

/// Fixed point of the Ulam operator by power iteration from the uniform
/// density, stopped once one step moves less than `tol` in L¹.
pub fn invariant_density(op: &UlamOperator, tol: f64) -> Result<Density> {
    let n = op.n_bins;
    let w = op.bin_width();
    let mut v = vec![1.0 / op.space.length(); n];
    for it in 1..=MAX_POWER_ITERATIONS {
        let mut next = op.apply(&v);
        let mass = compensated_sum(next.iter().map(|x| x * w));
        if !(mass > 0.0) {
            return Err(Error::Numeric("Ulam iterate lost all mass".into()));
        }
        next.iter_mut().for_each(|x| *x /= mass);
        let change = compensated_sum(next.iter().zip(&v).map(|(a, b)| (a - b).abs() * w));
        v = next;
        if change <= tol {
            return Ok(Density { space: op.space, values: v, iterations: it, l1_change: change });
        }
    }
    Err(Error::Numeric(format!("power iteration did not reach {tol:e} in {MAX_POWER_ITERATIONS} steps")))
}

/// `∫ f dμ` computed two ways.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenteringConstant {
    /// Ulam-density quadrature; the value used for centering.
    pub value: f64,
    pub birkhoff: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub agree: bool,
    pub n_bins: usize,
    pub steps: usize,
    pub burn_in: usize,
}

pub const CENTERING_STEPS: usize = 10_000_000;
pub const CENTERING_BURN_IN: usize = 10_000;
pub const CENTERING_TOL: f64 = 1e-3;

/// `∫ f dμ` by quadrature against the Ulam density, cross-checked against
/// a dithered Birkhoff average from a seeded random start.
pub fn centering_constant(
    map: &PiecewiseMap,
    f: &Observable,
    n_bins: usize,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<CenteringConstant> {
    let density = invariant_density(&ulam_matrix(map, n_bins)?, DENSITY_TOL)?;
    let value = density.integrate(&|x| f.evaluate(x));
    let birkhoff = if steps == 0 {
        f64::NAN
    } else {
        let x0 = stream_rng(derive_seed(seed, 0xce17), 0).gen_range(f64::EPSILON..1.0);
        let mut orbit = DitheredOrbit::new(map, x0, Some(derive_seed(seed, 0xd17e)))?;
        for _ in 0..burn_in {
            orbit.advance()?;
        }
        let mut s = CompensatedSum::new();
        for _ in 0..steps {
            s.add(f.evaluate(orbit.current()));
            orbit.advance()?;
        }
        s.value() / steps as f64
    };
    let difference = (value - birkhoff).abs();
    Ok(CenteringConstant {
        value,
        birkhoff,
        difference,
        tolerance: CENTERING_TOL,
        agree: difference <= CENTERING_TOL,
        n_bins,
        steps,
        burn_in,
    })
}

/// Kac sum `Σ n μ(B_n)` of a first-return system, with `μ` the Ulam
/// invariant density of the base map.
pub fn ulam_measure(map: &PiecewiseMap, n_bins: usize) -> Result<impl Fn(&Interval) -> f64> {
    let d = invariant_density(&ulam_matrix(map, n_bins)?, DENSITY_TOL)?;
    Ok(move |i: &Interval| d.measure(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{doubling_map, lsv_map};

    #[test]
    fn doubling_density_is_uniform() {
        let d = invariant_density(&ulam_matrix(&doubling_map(), 1024).unwrap(), DENSITY_TOL).unwrap();
        assert!(d.values.iter().all(|v| (v - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn lsv_density_blows_up_at_zero() {
        let d = invariant_density(&ulam_matrix(&lsv_map(0.5).unwrap(), 4096).unwrap(), DENSITY_TOL).unwrap();
        let dec = d.n_bins() / 10;
        let first: f64 = d.values[..dec].iter().sum();
        let last: f64 = d.values[d.n_bins() - dec..].iter().sum();
        assert!(first > last);
        // Least-squares slope of log ρ against log x over [2^-10, 2^-4].
        let pts: Vec<(f64, f64)> = (0..d.n_bins())
            .map(|j| ((j as f64 + 0.5) * d.bin_width(), d.values[j]))
            .filter(|(x, _)| (2f64.powi(-10)..=2f64.powi(-4)).contains(x))
            .map(|(x, v)| (x.ln(), v.ln()))
            .collect();
        let slope = ls_slope(&pts);
        assert!((slope + 0.5).abs() <= 0.15, "{slope}");
        assert!((d.measure(&Interval::UNIT) - 1.0).abs() < 1e-12);
    }

    fn ls_slope(p: &[(f64, f64)]) -> f64 {
        let n = p.len() as f64;
        let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
        let my = p.iter().map(|q| q.1).sum::<f64>() / n;
        p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum::<f64>() / p.iter().map(|q| (q.0 - mx).powi(2)).sum::<f64>()
    }

    #[test]
    fn quadrature_and_birkhoff_agree() {
        let lsv = lsv_map(0.25).unwrap();
        let f = Observable::log_derivative(&lsv);
        let c = centering_constant(&lsv, &f, 1 << 14, CENTERING_STEPS, CENTERING_BURN_IN, 11).unwrap();
        assert!(c.agree, "{c:?}");
        // Raw doubling: log 2 exactly.
        let d = doubling_map();
        let c = centering_constant(&d, &Observable::log_derivative(&d), 256, 0, 0, 0).unwrap();
        assert!((c.value - 2f64.ln()).abs() < 1e-12);
    }
}
