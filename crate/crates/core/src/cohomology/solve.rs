use rand::Rng;
use serde::Serialize;

use crate::cohomology::birkhoff::DitheredOrbit;
use crate::cohomology::observable::Observable;
use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::sampling::{derive_seed, stream_rng};
use crate::sum::CompensatedSum;

/// Abscissae closer than this are treated as the same point.
pub const MERGE_TOL: f64 = 1e-14;
/// Largest value disagreement tolerated at merged points.
pub const MERGE_VALUE_TOL: f64 = 1e-8;
/// Orbit-prefix lengths at which the value range is reported.
pub const RANGE_CHECKPOINTS: [usize; 3] = [1_000, 10_000, 100_000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPoint {
    Point(f64),
    /// Uniform point drawn from the seed.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeAt {
    pub length: usize,
    pub range: f64,
}

/// `u` sampled along one orbit, in the gauge `u(base_point) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    /// Strictly increasing.
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub base_point: f64,
    pub orbit_length: usize,
    pub start: StartPoint,
    pub dither_seed: Option<u64>,
    pub merged_duplicates: usize,
    /// Range of `-S_n f(x0)` over orbit prefixes.
    pub range_growth: Vec<RangeAt>,
    /// Set when the range at the longest checkpoint is at least twice the
    /// range at the shortest: the partial sums are not bounded.
    pub unbounded_flag: bool,
}

impl SampledFunction {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same samples in the gauge `u(x) = 0` for the sample point nearest `x`.
    pub fn regauge(&self, x: f64) -> SampledFunction {
        let i = self.points.partition_point(|&p| p < x).min(self.points.len() - 1);
        let i = if i > 0 && (self.points[i - 1] - x).abs() < (self.points[i] - x).abs() { i - 1 } else { i };
        let shift = self.values[i];
        SampledFunction {
            values: self.values.iter().map(|v| v - shift).collect(),
            base_point: self.points[i],
            ..self.clone()
        }
    }

    /// Points and values where `keep` holds.
    pub fn restricted(&self, keep: impl Fn(f64) -> bool) -> (Vec<f64>, Vec<f64>) {
        self.points.iter().zip(&self.values).filter(|(p, _)| keep(**p)).map(|(p, v)| (*p, *v)).unzip()
    }
}

/// Reconstructs `u` with `f = u − u∘T` along the orbit of `x0` through
/// `u(T^n x0) = −S_n f(x0)`. With `dither_seed` the orbit is perturbed at
/// rounding level each step (see [`DitheredOrbit`]).
pub fn solve_coboundary(
    map: &PiecewiseMap,
    f: &Observable,
    orbit_length: usize,
    start: StartPoint,
    dither_seed: Option<u64>,
) -> Result<SampledFunction> {
    if orbit_length < 1_000 {
        return Err(Error::Parameter(format!("orbit length {orbit_length} below 1000")));
    }
    let x0 = match start {
        StartPoint::Point(x) => x,
        StartPoint::Random(seed) => stream_rng(derive_seed(seed, 0x5717), 0).gen_range(f64::EPSILON..1.0),
    };
    let mut orbit = DitheredOrbit::new(map, x0, dither_seed)?;
    let mut raw = Vec::with_capacity(orbit_length);
    let mut s = CompensatedSum::new();
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let mut range_growth = Vec::new();
    raw.push((x0, 0.0));
    for n in 1..orbit_length {
        s.add(f.evaluate(orbit.current()));
        let p = orbit.advance()?;
        let v = -s.value();
        lo = lo.min(v);
        hi = hi.max(v);
        raw.push((p, v));
        if RANGE_CHECKPOINTS.contains(&(n + 1)) {
            range_growth.push(RangeAt { length: n + 1, range: hi - lo });
        }
    }
    if range_growth.last().map(|r| r.length) != Some(orbit_length) {
        range_growth.push(RangeAt { length: orbit_length, range: hi - lo });
    }
    let unbounded_flag = match (range_growth.first(), range_growth.last()) {
        (Some(a), Some(b)) if b.length > a.length => b.range >= 2.0 * a.range,
        _ => false,
    };

    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points: Vec<f64> = Vec::with_capacity(raw.len());
    let mut values: Vec<f64> = Vec::with_capacity(raw.len());
    let mut merged = 0;
    for (p, v) in raw {
        if let Some(&last) = points.last() {
            if p - last <= MERGE_TOL {
                let prev = *values.last().unwrap();
                let discrepancy = (v - prev).abs();
                if discrepancy > MERGE_VALUE_TOL {
                    return Err(Error::NotACoboundary { point: p, discrepancy });
                }
                merged += 1;
                continue;
            }
        }
        points.push(p);
        values.push(v);
    }
    Ok(SampledFunction {
        points,
        values,
        base_point: x0,
        orbit_length,
        start,
        dither_seed,
        merged_duplicates: merged,
        range_growth,
        unbounded_flag,
    })
}
