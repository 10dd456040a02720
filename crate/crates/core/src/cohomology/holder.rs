use rayon::prelude::*;
use serde::Serialize;

use crate::cohomology::solve::SampledFunction;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::PiecewiseMap;
use crate::sampling::derive_seed;

/// Pairs used per band at most; larger bands are subsampled.
pub const MAX_PAIRS_PER_BAND: usize = 1_000_000;
/// Bands with fewer pairs are unreliable.
pub const MIN_RELIABLE_PAIRS: usize = 10;
/// Point cap for the symbolic metric, whose pairs are enumerated directly.
pub const SYMBOLIC_POINT_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy)]
pub enum HolderMetric<'a> {
    Euclidean,
    /// `τ^{s(x, y)}`, with separation times read from itineraries of
    /// length `cap` (`0` beyond).
    Symbolic {
        map: &'a PiecewiseMap,
        tau: f64,
        cap: usize,
    },
}

/// Pairs at distance in `(2^{-k-1}, 2^{-k}]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
    pub pairs: u64,
    pub used: u64,
    pub constant: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub metric: String,
    pub restricted_to: Option<Interval>,
    pub points_used: usize,
    pub bands: Vec<Band>,
    /// Stability ratio over all reliable bands.
    pub stability_ratio: f64,
}

impl HolderEstimate {
    /// Largest ratio (either direction) between constants of consecutive
    /// reliable bands with `k ≤ k_last`.
    pub fn stability_ratio_through(&self, k_last: usize) -> f64 {
        stability(self.bands.iter().filter(|b| b.k <= k_last))
    }

    pub fn max_constant(&self) -> f64 {
        self.bands.iter().filter(|b| b.reliable).map(|b| b.constant).fold(0.0, f64::max)
    }
}

fn stability<'a>(bands: impl Iterator<Item = &'a Band>) -> f64 {
    let reliable: Vec<f64> = bands.filter(|b| b.reliable).map(|b| b.constant).collect();
    reliable
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (a, b) if a == 0.0 && b == 0.0 => 1.0,
            (a, b) if a == 0.0 || b == 0.0 => f64::INFINITY,
            (a, b) => (a / b).max(b / a),
        })
        .fold(1.0, f64::max)
}

/// Band-wise Hölder constants `max |u(p) − u(q)| / d(p, q)^γ` for bands
/// `k = 0..=k_max`.
pub fn holder_estimate(
    u: &SampledFunction,
    gamma: f64,
    metric: HolderMetric<'_>,
    restrict: Option<Interval>,
    k_max: usize,
    seed: u64,
) -> Result<HolderEstimate> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Parameter(format!("Hölder exponent {gamma} outside (0, 1]")));
    }
    let (points, values) = match restrict {
        Some(r) => u.restricted(|p| r.contains(p)),
        None => (u.points.clone(), u.values.clone()),
    };
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{} sample points in the domain", points.len())));
    }
    let (bands, metric_name, used) = match metric {
        HolderMetric::Euclidean => {
            (euclidean_bands(&points, &values, gamma, k_max, seed), "euclidean".to_string(), points.len())
        }
        HolderMetric::Symbolic { map, tau, cap } => {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::Parameter(format!("tau {tau} outside (0, 1)")));
            }
            let stride = points.len().div_ceil(SYMBOLIC_POINT_CAP);
            let p: Vec<f64> = points.iter().step_by(stride).copied().collect();
            let v: Vec<f64> = values.iter().step_by(stride).copied().collect();
            let bands = symbolic_bands(map, tau, cap, &p, &v, gamma, k_max, seed)?;
            (bands, format!("symbolic(tau={tau})"), p.len())
        }
    };
    let stability_ratio = stability(bands.iter());
    Ok(HolderEstimate {
        exponent: gamma,
        metric: metric_name,
        restricted_to: restrict,
        points_used: used,
        bands,
        stability_ratio,
    })
}

fn band_bounds(k: usize) -> (f64, f64) {
    ((-(k as f64) - 1.0).exp2(), (-(k as f64)).exp2())
}

fn euclidean_bands(p: &[f64], v: &[f64], gamma: f64, k_max: usize, seed: u64) -> Vec<Band> {
    (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = band_bounds(k);
            // Partner window of i: p[j] - p[i] ∈ (lo, hi].
            let windows: Vec<(usize, usize)> = (0..p.len())
                .map(|i| {
                    let a = p.partition_point(|&q| q - p[i] <= lo);
                    let b = p.partition_point(|&q| q - p[i] <= hi);
                    (a.max(i + 1), b.max(i + 1))
                })
                .collect();
            let total: u64 = windows.iter().map(|&(a, b)| (b - a) as u64).sum();
            let q = |i: usize, j: usize| (v[j] - v[i]).abs() / (p[j] - p[i]).powf(gamma);
            let mut constant: f64 = 0.0;
            let used;
            if total as usize <= MAX_PAIRS_PER_BAND {
                for (i, &(a, b)) in windows.iter().enumerate() {
                    for j in a..b {
                        constant = constant.max(q(i, j));
                    }
                }
                used = total;
            } else {
                let mut cum = Vec::with_capacity(windows.len());
                let mut acc = 0u64;
                for &(a, b) in &windows {
                    acc += (b - a) as u64;
                    cum.push(acc);
                }
                let s = derive_seed(seed, k as u64);
                for m in 0..MAX_PAIRS_PER_BAND as u64 {
                    let t = derive_seed(s, m) % total;
                    let i = cum.partition_point(|&c| c <= t);
                    let before = if i == 0 { 0 } else { cum[i - 1] };
                    let j = windows[i].0 + (t - before) as usize;
                    constant = constant.max(q(i, j));
                }
                used = MAX_PAIRS_PER_BAND as u64;
            }
            Band { k, lo, hi, pairs: total, used, constant, reliable: total as usize >= MIN_RELIABLE_PAIRS }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn symbolic_bands(
    map: &PiecewiseMap,
    tau: f64,
    cap: usize,
    p: &[f64],
    v: &[f64],
    gamma: f64,
    k_max: usize,
    seed: u64,
) -> Result<Vec<Band>> {
    let bits = (usize::BITS - (map.len() - 1).max(1).leading_zeros()) as usize;
    let cap = cap.clamp(1, 64 / bits);
    let unused = 64 - bits * cap;
    let codes: Vec<u64> = p
        .iter()
        .map(|&x| {
            let orbit = map.orbit(x, cap)?;
            Ok(orbit.itinerary.iter().take(cap).fold(0u64, |c, &s| (c << bits) | s as u64) << unused)
        })
        .collect::<Result<_>>()?;
    let band_of = |i: usize, j: usize| -> Option<(usize, f64)> {
        let x = codes[i] ^ codes[j];
        if x == 0 {
            return None;
        }
        let s = x.leading_zeros() as usize / bits;
        let d = tau.powi(s as i32);
        let k = (-d.log2()).floor() as usize;
        (k <= k_max).then_some((k, d))
    };
    let n = p.len();
    let mut counts = vec![0u64; k_max + 1];
    for i in 0..n {
        for j in i + 1..n {
            if let Some((k, _)) = band_of(i, j) {
                counts[k] += 1;
            }
        }
    }
    let thresholds: Vec<u64> = counts
        .iter()
        .map(|&c| {
            if c as usize <= MAX_PAIRS_PER_BAND {
                u64::MAX
            } else {
                ((MAX_PAIRS_PER_BAND as f64 / c as f64) * u64::MAX as f64) as u64
            }
        })
        .collect();
    let per_i: Vec<(Vec<f64>, Vec<u64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = vec![0.0f64; k_max + 1];
            let mut used = vec![0u64; k_max + 1];
            for j in i + 1..n {
                if let Some((k, d)) = band_of(i, j) {
                    if thresholds[k] != u64::MAX && derive_seed(seed ^ k as u64, (i * n + j) as u64) > thresholds[k] {
                        continue;
                    }
                    used[k] += 1;
                    best[k] = best[k].max((v[j] - v[i]).abs() / d.powf(gamma));
                }
            }
            (best, used)
        })
        .collect();
    Ok((0..=k_max)
        .map(|k| {
            let (lo, hi) = band_bounds(k);
            let constant = per_i.iter().map(|(b, _)| b[k]).fold(0.0, f64::max);
            let used = per_i.iter().map(|(_, u)| u[k]).sum();
            Band { k, lo, hi, pairs: counts[k], used, constant, reliable: counts[k] as usize >= MIN_RELIABLE_PAIRS }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::observable::Observable;
    use crate::cohomology::solve::{solve_coboundary, StartPoint};
    use crate::maps::{doubling_map, lsv_map};

    fn sampled(points: Vec<f64>, values: Vec<f64>) -> SampledFunction {
        SampledFunction {
            base_point: points[0],
            orbit_length: points.len(),
            start: StartPoint::Point(points[0]),
            dither_seed: None,
            merged_duplicates: 0,
            range_growth: Vec::new(),
            unbounded_flag: false,
            points,
            values,
        }
    }

    #[test]
    fn constant_and_identity() {
        let pts: Vec<f64> = (0..3000).map(|i| (i as f64 + 0.5) / 3000.0).collect();
        let c =
            holder_estimate(&sampled(pts.clone(), vec![2.0; 3000]), 1.0, HolderMetric::Euclidean, None, 12, 1).unwrap();
        assert!(c.bands.iter().all(|b| b.constant == 0.0));
        let id = holder_estimate(&sampled(pts.clone(), pts), 1.0, HolderMetric::Euclidean, None, 12, 1).unwrap();
        for b in id.bands.iter().filter(|b| b.pairs > 0) {
            assert_eq!(b.constant, 1.0, "band {}", b.k);
        }
        assert_eq!(id.stability_ratio, 1.0);
        assert!(id.bands[0].pairs > MAX_PAIRS_PER_BAND as u64 && id.bands[0].used == MAX_PAIRS_PER_BAND as u64);
    }

    #[test]
    fn recovered_lipschitz_function_is_stable() {
        let lsv = lsv_map(0.5).unwrap();
        let g = |x: f64| x * (1.0 - x);
        let f = Observable::coboundary_of(&lsv, "g1", 1.0, g);
        let u = solve_coboundary(&lsv, &f, 10_000, StartPoint::Random(5), Some(5)).unwrap();
        let y = Interval::left_open(0.5, 1.0);
        let h = holder_estimate(&u, 1.0, HolderMetric::Euclidean, Some(y), 16, 2).unwrap();
        assert!(h.stability_ratio_through(12) <= 2.0, "{:?}", h.bands);
        // Oracle: the secant slopes of g never exceed max |g'| on the range.
        let (pts, _) = u.restricted(|p| y.contains(p));
        let gmax = pts.iter().map(|p| (1.0 - 2.0 * p).abs()).fold(0.0, f64::max);
        for b in h.bands.iter().filter(|b| b.reliable) {
            assert!(b.constant <= gmax + 1e-6 && b.constant >= 0.5 * gmax, "band {}: {} vs {gmax}", b.k, b.constant);
        }
    }

    #[test]
    fn pseudo_solution_of_non_coboundary_is_rough() {
        let d = doubling_map();
        let u = solve_coboundary(&d, &Observable::affine(1.0, -0.5), 20_000, StartPoint::Random(1), Some(1)).unwrap();
        let h = holder_estimate(&u, 1.0, HolderMetric::Euclidean, Some(Interval::left_open(0.5, 1.0)), 12, 2).unwrap();
        assert!(h.stability_ratio_through(12) > 2.0);
    }

    #[test]
    fn symbolic_metric_bands() {
        let d = doubling_map();
        let pts: Vec<f64> = (0..2000).map(|i| (i as f64 + 0.5) / 2000.0).collect();
        let h = holder_estimate(
            &sampled(pts.clone(), pts),
            1.0,
            HolderMetric::Symbolic { map: &d, tau: 0.5, cap: 30 },
            None,
            10,
            1,
        )
        .unwrap();
        // With τ = 1/2 a pair in band k shares exactly k leading symbols, so
        // it lies within Euclidean distance 2^{-k}.
        for b in h.bands.iter().filter(|b| b.reliable) {
            assert!(b.constant <= 1.0 + 1e-12, "band {}: {}", b.k, b.constant);
        }
        assert!(h.bands.iter().all(|b| b.pairs > 0));
    }

    #[test]
    fn needs_points() {
        let s = sampled(vec![0.1, 0.2], vec![0.0, 0.0]);
        let e = holder_estimate(&s, 1.0, HolderMetric::Euclidean, Some(Interval::closed(0.5, 1.0)), 4, 0);
        assert!(matches!(e, Err(Error::InsufficientData(_))));
    }
}
