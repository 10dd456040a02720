use serde::Serialize;

use crate::cohomology::obstruction::ObstructionReport;
use crate::error::{Error, Result};

pub const MAX_LATTICE_CANDIDATES: usize = 1_000;
/// Default tolerance of the lattice test.
pub const LATTICE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LatticeOutcome {
    LatticeFound { lambda: f64, mu: f64 },
    NoLattice,
    Degenerate { mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub word: String,
    pub period: usize,
    pub sum: f64,
    pub residual: f64,
    /// `round(residual / λ)` when a lattice was found.
    pub lattice_index: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeVerdict {
    pub mu_hat: f64,
    pub anchor: String,
    /// Smallest residual above tolerance, from which candidates are built.
    pub r_star: Option<f64>,
    pub candidates_examined: usize,
    pub tolerance: f64,
    pub outcome: LatticeOutcome,
    pub verdict: String,
    pub residuals: Vec<ResidualRow>,
}

/// Tests whether the periodic data fit `S_p − n_p μ ∈ λℤ` for some `λ`,
/// i.e. whether `f = u − u∘T + λq + μ` with integer `q` survives. `μ` is
/// anchored at the first fixed point; candidates are `λ = |r*| / k`, skipping
/// those with `λ ≤ 2 tol`, which every residual fits.
pub fn aperiodicity_test(report: &ObstructionReport, k_max: usize, tol: f64) -> Result<LatticeVerdict> {
    if report.orbits.len() < 2 {
        return Err(Error::Precondition("the lattice test needs at least two periodic orbits".into()));
    }
    if k_max == 0 || k_max > MAX_LATTICE_CANDIDATES {
        return Err(Error::Parameter(format!("k_max {k_max} outside 1..={MAX_LATTICE_CANDIDATES}")));
    }
    let anchor = report
        .orbits
        .iter()
        .find(|o| o.is_fixed_point())
        .ok_or_else(|| Error::Precondition("no fixed point to anchor μ".into()))?;
    let mu = anchor.sum;
    let mut residuals: Vec<ResidualRow> = report
        .orbits
        .iter()
        .filter(|o| !std::ptr::eq(*o, anchor))
        .map(|o| ResidualRow {
            word: o.word.clone(),
            period: o.period,
            sum: o.sum,
            residual: o.sum - o.period as f64 * mu,
            lattice_index: None,
        })
        .collect();

    let fmt = |x: f64| format!("{}", (x * 1e12).round() / 1e12 + 0.0);
    let r_star = residuals.iter().map(|r| r.residual.abs()).filter(|&r| r > tol).min_by(f64::total_cmp);
    let Some(r_star) = r_star else {
        return Ok(LatticeVerdict {
            mu_hat: mu,
            anchor: anchor.word.clone(),
            r_star: None,
            candidates_examined: 0,
            tolerance: tol,
            outcome: LatticeOutcome::Degenerate { mu },
            verdict: format!("degenerate (pure drift, μ={})", fmt(mu)),
            residuals,
        });
    };
    let on_lattice = |lambda: f64, r: f64| (r - lambda * (r / lambda).round()).abs() <= tol;
    // Every real lies within tol of a lattice of spacing ≤ 2 tol.
    let informative = (1..=k_max).take_while(|&k| r_star / k as f64 > 2.0 * tol).count();
    for k in 1..=informative {
        let lambda = r_star / k as f64;
        if residuals.iter().all(|r| on_lattice(lambda, r.residual)) {
            for r in &mut residuals {
                r.lattice_index = Some((r.residual / lambda).round() as i64);
            }
            return Ok(LatticeVerdict {
                mu_hat: mu,
                anchor: anchor.word.clone(),
                r_star: Some(r_star),
                candidates_examined: k,
                tolerance: tol,
                outcome: LatticeOutcome::LatticeFound { lambda, mu },
                verdict: format!("lattice found (λ={}, μ={})", fmt(lambda), fmt(mu)),
                residuals,
            });
        }
    }
    Ok(LatticeVerdict {
        mu_hat: mu,
        anchor: anchor.word.clone(),
        r_star: Some(r_star),
        candidates_examined: informative,
        tolerance: tol,
        outcome: LatticeOutcome::NoLattice,
        verdict: "no lattice (aperiodic at tolerance)".into(),
        residuals,
    })
}
