use rayon::prelude::*;
use serde::Serialize;

use crate::cohomology::observable::Observable;
use crate::error::Result;
use crate::maps::PiecewiseMap;
use crate::sum::compensated_sum;
use crate::symbolic::{periodic_points, word_labels, OrbitFlag, PeriodicOrbit, RejectedOrbit};

/// Tolerance for synthetic coboundaries.
pub const COBOUNDARY_TOL: f64 = 1e-8;
/// Tolerance for generic verdicts.
pub const GENERIC_TOL: f64 = 1e-6;

/// Birkhoff sum of `f` around one periodic orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSum {
    pub word: String,
    pub period: usize,
    pub points: Vec<f64>,
    pub sum: f64,
    pub flags: Vec<OrbitFlag>,
}

impl OrbitSum {
    pub fn is_fixed_point(&self) -> bool {
        self.period == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub observable: String,
    pub max_period: usize,
    pub tolerance: f64,
    pub orbits: Vec<OrbitSum>,
    pub rejected: Vec<RejectedOrbit>,
    pub obstructed: bool,
    pub max_abs_sum: f64,
    pub verdict: String,
}

impl ObstructionReport {
    /// First orbit (lowest period, then word order) with `|S| > tol`.
    pub fn first_obstruction(&self) -> Option<&OrbitSum> {
        self.orbits.iter().find(|o| o.sum.abs() > self.tolerance)
    }

    /// One-line summary naming where the first obstruction sits.
    pub fn summary(&self) -> String {
        match self.first_obstruction() {
            Some(o) if o.is_fixed_point() => format!("obstructed at fixed point {}", o.points[0]),
            Some(o) => format!("obstructed at period-{} orbit {} (x = {})", o.period, o.word, o.points[0]),
            None => self.verdict.clone(),
        }
    }
}

/// Sums of `f` over every primitive periodic orbit of period `≤ max_period`.
/// Neutral fixed points are evaluated exactly at the point.
pub fn livsic_obstructions(
    map: &PiecewiseMap,
    f: &Observable,
    max_period: usize,
    tol: f64,
) -> Result<ObstructionReport> {
    let pp = periodic_points(map, max_period)?;
    Ok(obstructions_from(map, f, &pp.orbits, pp.rejected, max_period, tol))
}

/// As [`livsic_obstructions`] over precomputed orbits.
pub fn obstructions_from(
    map: &PiecewiseMap,
    f: &Observable,
    orbits: &[PeriodicOrbit],
    rejected: Vec<RejectedOrbit>,
    max_period: usize,
    tol: f64,
) -> ObstructionReport {
    let orbits: Vec<OrbitSum> = orbits
        .par_iter()
        .map(|o| OrbitSum {
            word: word_labels(map, &o.word),
            period: o.period,
            points: o.points.clone(),
            sum: compensated_sum(o.points.iter().map(|&p| f.evaluate(p))),
            flags: o.flags.clone(),
        })
        .collect();
    let max_abs_sum = orbits.iter().map(|o| o.sum.abs()).fold(0.0, f64::max);
    let obstructed = orbits.iter().any(|o| !(o.sum.abs() <= tol));
    let verdict = if obstructed { "obstructed".to_string() } else { format!("unobstructed up to period {max_period}") };
    ObstructionReport {
        observable: f.descriptor().to_string(),
        max_period,
        tolerance: tol,
        orbits,
        rejected,
        obstructed,
        max_abs_sum,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{doubling_map, lsv_map};

    #[test]
    fn examples() {
        let d = doubling_map();
        let cob = Observable::coboundary_of(&d, "g2", 1.0, |x| x * x);
        let r = livsic_obstructions(&d, &cob, 10, 1e-10).unwrap();
        assert_eq!(r.verdict, "unobstructed up to period 10");
        assert!(r.max_abs_sum < 1e-10);

        let f = Observable::affine(1.0, -0.5);
        let r = livsic_obstructions(&d, &f, 4, GENERIC_TOL).unwrap();
        assert!(r.obstructed && r.verdict == "obstructed");
        let one = r.orbits.iter().find(|o| o.word == "R").unwrap();
        assert_eq!(one.points, vec![1.0]);
        assert_eq!(one.sum, 0.5);
    }

    #[test]
    fn neutral_fixed_point_is_exact() {
        let lsv = lsv_map(0.25).unwrap();
        let c = 0.37;
        let f = Observable::log_derivative(&lsv).minus_constant(c);
        let r = livsic_obstructions(&lsv, &f, 3, GENERIC_TOL).unwrap();
        let zero = &r.orbits[0];
        assert_eq!(zero.points, vec![0.0]);
        assert!(zero.flags.contains(&OrbitFlag::Neutral));
        assert_eq!(zero.sum, -c);
        assert_eq!(r.summary(), "obstructed at fixed point 0");
    }
}
