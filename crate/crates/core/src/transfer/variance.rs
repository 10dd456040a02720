use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohomology::birkhoff::DitheredOrbit;
use crate::cohomology::observable::Observable;
use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::sampling::{derive_seed, stream_rng};
use crate::sum::{compensated_sum, CompensatedSum};
use crate::transfer::density::{bin_integral, invariant_density, DENSITY_TOL};
use crate::transfer::ulam::ulam_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// Green–Kubo series with correlations from the Ulam operator.
    Ulam,
    /// Batch means along dithered orbits.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceParams {
    pub n_bins: usize,
    pub max_lag: usize,
    /// Correlations below this count towards a plateau.
    pub plateau_tol: f64,
    pub plateau_run: usize,
    pub steps: usize,
    pub batch_len: usize,
    pub burn_in: usize,
    pub streams: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for VarianceParams {
    fn default() -> Self {
        Self {
            n_bins: 4096,
            max_lag: 1000,
            plateau_tol: 1e-6,
            plateau_run: 3,
            steps: 10_000_000,
            batch_len: 1000,
            burn_in: 10_000,
            streams: 16,
            bootstrap: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub mode: VarianceMode,
    pub map: String,
    pub observable: String,
    /// `∫ f dμ` from the Ulam density, subtracted before estimating.
    pub centering: f64,
    /// `None` when the estimate is flagged unreliable.
    pub sigma2: Option<f64>,
    /// Raw value even when flagged.
    pub raw_sigma2: f64,
    pub ci95: Option<[f64; 2]>,
    /// `C_0, C_1, …` (Ulam mode).
    pub correlations: Vec<f64>,
    /// `C_0 + 2 Σ_{n≤N} C_n` for `N = 0, 1, …` (Ulam mode).
    pub partial_sums: Vec<f64>,
    pub truncation: Option<usize>,
    /// Batch means (Monte-Carlo mode).
    pub batches: usize,
    pub flags: Vec<String>,
    pub params: VarianceParams,
}

pub const FLAG_TRUNCATION: &str = "truncation-unreliable";

/// Asymptotic variance `σ² = Σ_{n∈ℤ} ∫ f̄ · f̄∘Tⁿ dμ` of the centered
/// observable `f̄ = f − ∫ f dμ`.
pub fn green_kubo_variance(
    map: &PiecewiseMap,
    f: &Observable,
    mode: VarianceMode,
    params: &VarianceParams,
) -> Result<VarianceEstimate> {
    let op = ulam_matrix(map, params.n_bins)?;
    let rho = invariant_density(&op, DENSITY_TOL)?;
    let w = op.bin_width();
    let fun = f.function();
    let fbar: Vec<f64> =
        (0..op.n_bins).into_par_iter().map(|j| bin_integral(&*fun, op.edge(j), op.edge(j + 1)) / w).collect();
    let centering = compensated_sum(fbar.iter().zip(&rho.values).map(|(a, r)| a * r * w));
    let base = VarianceEstimate {
        mode,
        map: map.name().to_string(),
        observable: f.descriptor().to_string(),
        centering,
        sigma2: None,
        raw_sigma2: f64::NAN,
        ci95: None,
        correlations: Vec::new(),
        partial_sums: Vec::new(),
        truncation: None,
        batches: 0,
        flags: Vec::new(),
        params: params.clone(),
    };
    match mode {
        VarianceMode::Ulam => {
            let c0 = compensated_sum((0..op.n_bins).map(|j| {
                let sq = |x: f64| (fun(x) - centering).powi(2);
                rho.values[j] * bin_integral(&sq, op.edge(j), op.edge(j + 1))
            }));
            let g: Vec<f64> = fbar.iter().map(|v| v - centering).collect();
            let mut v: Vec<f64> = g.iter().zip(&rho.values).map(|(a, r)| a * r).collect();
            let mut correlations = vec![c0];
            let mut partial_sums = vec![c0];
            let mut truncation = None;
            let mut run = 0;
            for n in 1..=params.max_lag {
                v = op.apply(&v);
                let cn = compensated_sum(g.iter().zip(&v).map(|(a, b)| a * b * w));
                correlations.push(cn);
                partial_sums.push(partial_sums[n - 1] + 2.0 * cn);
                run = if cn.abs() < params.plateau_tol { run + 1 } else { 0 };
                if run >= params.plateau_run {
                    truncation = Some(n);
                    break;
                }
            }
            let raw = *partial_sums.last().unwrap();
            let mut flags = Vec::new();
            if map.alpha().is_some_and(|a| a >= 0.5) {
                flags.push(format!("{FLAG_TRUNCATION}: correlations decay too slowly for alpha >= 1/2"));
            }
            if truncation.is_none() {
                flags.push(format!("{FLAG_TRUNCATION}: no plateau within {} lags", params.max_lag));
            }
            Ok(VarianceEstimate {
                sigma2: flags.is_empty().then_some(raw),
                raw_sigma2: raw,
                correlations,
                partial_sums,
                truncation,
                flags,
                ..base
            })
        }
        VarianceMode::MonteCarlo => {
            if params.streams == 0 || params.batch_len == 0 {
                return Err(Error::Parameter("streams and batch_len must be positive".into()));
            }
            let per_stream = params.steps / params.streams / params.batch_len;
            if per_stream * params.streams < 2 {
                return Err(Error::Parameter("fewer than two batches".into()));
            }
            let means: Vec<Vec<f64>> = (0..params.streams)
                .into_par_iter()
                .map(|s| -> Result<Vec<f64>> {
                    let x0 = stream_rng(derive_seed(params.seed, 0x5a), s as u64).gen_range(f64::EPSILON..1.0);
                    let mut orbit = DitheredOrbit::new(map, x0, Some(derive_seed(params.seed, 0x100 + s as u64)))?;
                    for _ in 0..params.burn_in {
                        orbit.advance()?;
                    }
                    let mut out = Vec::with_capacity(per_stream);
                    for _ in 0..per_stream {
                        let mut acc = CompensatedSum::new();
                        for _ in 0..params.batch_len {
                            acc.add(fun(orbit.current()) - centering);
                            orbit.advance()?;
                        }
                        out.push(acc.value() / params.batch_len as f64);
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let means: Vec<f64> = means.into_iter().flatten().collect();
            let l = params.batch_len as f64;
            let raw = l * sample_variance(&means);
            let mut rng = stream_rng(derive_seed(params.seed, 0xb007), 0);
            let mut boot: Vec<f64> = (0..params.bootstrap)
                .map(|_| {
                    let resample: Vec<f64> = (0..means.len()).map(|_| means[rng.gen_range(0..means.len())]).collect();
                    l * sample_variance(&resample)
                })
                .collect();
            boot.sort_by(f64::total_cmp);
            let ci95 = (!boot.is_empty()).then(|| [percentile(&boot, 0.025), percentile(&boot, 0.975)]);
            Ok(VarianceEstimate { sigma2: Some(raw), raw_sigma2: raw, ci95, batches: means.len(), ..base })
        }
    }
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = compensated_sum(x.iter().copied()) / n;
    compensated_sum(x.iter().map(|v| (v - m).powi(2))) / (n - 1.0)
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, t) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - t) + sorted[i + 1] * t
    } else {
        sorted[i]
    }
}
