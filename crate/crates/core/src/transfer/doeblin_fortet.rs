use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs_markov::{check_expansion, EXPANSION_MARGIN};
use crate::sampling::{derive_seed, stream_rng};
use crate::system::MarkovSystem;
use crate::transfer::ulam::CsrMatrix;

pub const DEFAULT_GRID: usize = 1 << 14;
/// An estimate passes when `η̂` stays below `1 − ETA_MARGIN`.
pub const ETA_MARGIN: f64 = 1e-3;
const EIGEN_TOL: f64 = 1e-13;
const EIGEN_MAX_ITER: usize = 20_000;

/// Contraction of the transfer operator on the Lipschitz space, estimated
/// from `r_p = max_h ‖T̂ᵖh − Πh‖_𝓛 / ‖h‖_𝓛` over random test functions,
/// where `Π` projects onto the invariant density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoeblinFortet {
    pub system: String,
    /// Grid intervals; the grid has one more node.
    pub grid: usize,
    pub p_max: usize,
    pub test_functions: usize,
    /// Minimum branch expansion found by the precondition check.
    pub expansion: f64,
    pub leading_eigenvalue: f64,
    pub ratios: Vec<f64>,
    /// `exp` of the least-squares slope of `log r_p` against `p`, over
    /// `p ≥ ⌈p_max / 2⌉`.
    pub eta_hat: f64,
    /// `exp` of the intercept of the same fit.
    pub m_hat: f64,
    pub density_norm: f64,
    pub pass: bool,
}

/// Nodal transfer operator on a uniform grid: `(T̂h)(y) = Σ h(x)/T'(x)` over
/// preimages `x` of each node, with `h` interpolated linearly between nodes.
pub struct NodalOperator {
    pub lo: f64,
    pub step: f64,
    pub matrix: CsrMatrix,
    /// `same_element[q]` when nodes `q` and `q+1` lie in one element.
    pub same_element: Vec<bool>,
}

impl NodalOperator {
    pub fn new(system: &dyn MarkovSystem, grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::Parameter(format!("grid must have at least 2 intervals, got {grid}")));
        }
        let space = system.space();
        let step = space.length() / grid as f64;
        let nodes: Vec<f64> =
            (0..=grid).map(|q| if q == grid { space.hi } else { space.lo + q as f64 * step }).collect();
        let elem: Vec<Option<usize>> = nodes.iter().map(|&x| system.element_of(x)).collect();
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); grid + 1];
        system.for_each_preimage_set(&nodes, &mut |e, idx, pre, der| {
            for ((&m, &x), &d) in idx.iter().zip(pre).zip(der) {
                let s = ((x - space.lo) / step).clamp(0.0, grid as f64);
                let q = (s as usize).min(grid - 1);
                let mut t = s - q as f64;
                // Never interpolate across an element boundary: test
                // functions may jump there.
                if elem[q] != elem[q + 1] {
                    if elem[q] == Some(e) {
                        t = 0.0;
                    } else if elem[q + 1] == Some(e) {
                        t = 1.0;
                    }
                }
                for (c, w) in [(q as u32, (1.0 - t) / d), (q as u32 + 1, t / d)] {
                    if w == 0.0 {
                        continue;
                    }
                    let row = &mut rows[m];
                    // Preimages of a node move monotonically across elements,
                    // so repeated columns are among the last two entries.
                    let k = row.len();
                    if let Some(e) = row[k.saturating_sub(2)..].iter_mut().find(|e| e.0 == c) {
                        e.1 += w;
                    } else {
                        row.push((c, w));
                    }
                }
            }
        })?;
        let same_element = elem.windows(2).map(|w| w[0].is_some() && w[0] == w[1]).collect();
        Ok(Self { lo: space.lo, step, matrix: CsrMatrix::from_rows(grid + 1, rows), same_element })
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.matrix.mul(h)
    }

    /// `sup |h| + max` over grid intervals inside one element of the
    /// difference quotient.
    pub fn lip_norm(&self, h: &[f64]) -> f64 {
        let sup = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lip = h
            .windows(2)
            .zip(&self.same_element)
            .filter(|(_, s)| **s)
            .fold(0.0f64, |m, (w, _)| m.max((w[1] - w[0]).abs() / self.step));
        sup + lip
    }

    /// Leading eigenvalue with right eigenvector `ρ` (unit trapezoid
    /// integral) and left eigenvector `ℓ` scaled so `ℓ·ρ = 1`.
    pub fn leading_pair(&self) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let n = self.matrix.rows;
        let trap: Vec<f64> = (0..n).map(|q| if q == 0 || q == n - 1 { 0.5 * self.step } else { self.step }).collect();
        let normalize_by = |v: &mut Vec<f64>, w: &[f64]| -> f64 {
            let s: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            v.iter_mut().for_each(|x| *x /= s);
            s
        };
        let mut rho = vec![1.0; n];
        normalize_by(&mut rho, &trap);
        let mut lambda = 1.0;
        let mut converged = false;
        for _ in 0..EIGEN_MAX_ITER {
            let mut next = self.apply(&rho);
            lambda = normalize_by(&mut next, &trap);
            let change = next.iter().zip(&rho).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = next.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            rho = next;
            if change <= EIGEN_TOL * scale {
                converged = true;
                break;
            }
        }
        let mut ell = trap.clone();
        let mut converged_left = false;
        for _ in 0..EIGEN_MAX_ITER {
            let mut next = self.matrix.mul_transpose(&ell);
            normalize_by(&mut next, &rho);
            let change = next.iter().zip(&ell).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = next.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            ell = next;
            if change <= EIGEN_TOL * scale {
                converged_left = true;
                break;
            }
        }
        if !(converged && converged_left) {
            return Err(Error::Numeric("leading eigenpair of the nodal operator did not converge".into()));
        }
        Ok((lambda, rho, ell))
    }
}

/// Estimates `η` in `‖T̂ᵖh‖ ≤ M ηᵖ ‖h‖ + …` for a Gibbs–Markov system.
/// Systems without uniform expansion are rejected before any work.
pub fn doeblin_fortet_estimate(
    system: &dyn MarkovSystem,
    grid: usize,
    p_max: usize,
    test_functions: usize,
    seed: u64,
) -> Result<DoeblinFortet> {
    if p_max < 2 || test_functions == 0 {
        return Err(Error::Parameter("need p_max ≥ 2 and at least one test function".into()));
    }
    let exp = check_expansion(system, 64, 64, derive_seed(seed, 0xe4a))?;
    if !(exp.constant > 1.0 + EXPANSION_MARGIN) {
        return Err(Error::Precondition(format!(
            "{} is not uniformly expanding (inf |T'| ≈ {}); the estimate needs a Gibbs–Markov system",
            system.describe(),
            exp.constant
        )));
    }
    let op = NodalOperator::new(system, grid)?;
    let (lambda, rho, ell) = op.leading_pair()?;
    let nodes: Vec<f64> = (0..=grid).map(|q| op.lo + q as f64 * op.step).collect();
    let elem: Vec<Option<usize>> = nodes.iter().map(|&x| system.element_of(x)).collect();

    let mut ratios = vec![0.0f64; p_max];
    for t in 0..test_functions {
        let mut rng = stream_rng(derive_seed(seed, 0xdf), t as u64);
        let (k, phase, slope) =
            (rng.gen_range(1..=4) as f64, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-1.0..1.0));
        let mut offsets = vec![0.0; system.element_count()];
        offsets.iter_mut().for_each(|o| *o = rng.gen_range(-1.0..1.0));
        // Test function 0 is the identity, which excites the slowest smooth
        // mode; the rest add random jumps and oscillation.
        let h: Vec<f64> = if t == 0 {
            nodes.clone()
        } else {
            nodes
                .iter()
                .zip(&elem)
                .map(|(&x, e)| {
                    let jump = e.map_or(0.0, |i| offsets[i]);
                    jump + slope * x + (std::f64::consts::TAU * k * x + phase).sin()
                })
                .collect()
        };
        let norm = op.lip_norm(&h);
        let deflate = |g: &mut Vec<f64>| {
            let c: f64 = ell.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
            g.iter_mut().zip(&rho).for_each(|(x, r)| *x -= c * r);
        };
        let mut g = h;
        deflate(&mut g);
        for r in ratios.iter_mut() {
            g = op.apply(&g);
            // Removes what the projection leaks back through rounding.
            deflate(&mut g);
            *r = r.max(op.lip_norm(&g) / norm);
        }
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Numeric(format!("degenerate contraction ratios {ratios:?}")));
    }
    // Early ratios carry fast transients; the rate is fitted on the tail.
    let first = p_max.div_ceil(2);
    let pts: Vec<(f64, f64)> =
        ratios.iter().enumerate().skip(first - 1).map(|(p, r)| ((p + 1) as f64, r.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let slope =
        pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum::<f64>() / pts.iter().map(|q| (q.0 - mx).powi(2)).sum::<f64>();
    let eta_hat = slope.exp();
    Ok(DoeblinFortet {
        system: system.describe(),
        grid,
        p_max,
        test_functions,
        expansion: exp.constant,
        leading_eigenvalue: lambda,
        ratios,
        eta_hat,
        m_hat: (my - slope * mx).exp(),
        density_norm: op.lip_norm(&rho),
        pass: eta_hat < 1.0 - ETA_MARGIN,
    })
}
