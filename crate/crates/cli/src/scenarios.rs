//! Builtin end-to-end analyses with fixed parameters. Only the master seed
//! comes from outside.

use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Result};
use livsic_core::{aperiodicity_test, doubling_map, livsic_obstructions, Interval, Observable, VarianceMode};
use serde_json::json;

use crate::config::AnalysisConfig;
use crate::report::RunReport;
use crate::run::{aperiodicity, livsic, solve, variance, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// The centered log-derivative of LSV α=1/4 is obstructed at the
    /// neutral fixed point.
    Corollary1,
    /// The same data admit no lattice reduction `λq + μ`.
    Corollary2,
    /// A synthetic coboundary is recovered and is Lipschitz on `(1/2, 1]`.
    Theorem2Regularity,
    /// The centered log-derivative has positive CLT variance.
    VariancePositivity,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::Corollary1, Scenario::Corollary2, Scenario::Theorem2Regularity, Scenario::VariancePositivity];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Corollary1 => "corollary-1",
            Scenario::Corollary2 => "corollary-2",
            Scenario::Theorem2Regularity => "theorem-2-regularity",
            Scenario::VariancePositivity => "variance-positivity",
        }
    }

    /// Effective configuration of the scenario.
    pub fn config(&self, seed: u64) -> AnalysisConfig {
        let mut c = AnalysisConfig::default();
        c.run.seed = seed;
        match self {
            Scenario::Corollary1 | Scenario::Corollary2 | Scenario::VariancePositivity => {
                c.map.name = "lsv".into();
                c.map.alpha = 0.25;
                c.observable.spec = "log-derivative".into();
                c.observable.center = true;
                c.livsic.max_period = 10;
                c.livsic.tol = 1e-6;
                c.aperiodicity.max_period = 10;
                c.aperiodicity.k_max = 50;
                c.aperiodicity.tol = 1e-4;
                c.variance.mode = "monte-carlo".into();
            }
            Scenario::Theorem2Regularity => {
                c.map.name = "lsv".into();
                c.map.alpha = 0.5;
                c.observable.spec = "coboundary-of:g1".into();
                c.livsic.max_period = 12;
                c.livsic.tol = 1e-7;
                c.solve.orbit_length = 10_000;
                c.solve.gamma = 1.0;
                c.solve.restrict = Some("(0.5, 1]".into());
                c.solve.k_max = 12;
            }
        }
        c
    }
}

impl FromStr for Scenario {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Scenario::ALL.iter().find(|c| c.name() == s) {
            Some(c) => Ok(*c),
            None => {
                let names: Vec<&str> = Scenario::ALL.iter().map(|c| c.name()).collect();
                bail!("unknown scenario `{s}` (expected one of {})", names.join(", "))
            }
        }
    }
}

pub fn run_scenario(scenario: Scenario, seed: u64) -> Result<RunReport> {
    let mut s = Session::new(&format!("scenario {}", scenario.name()), scenario.config(seed), Path::new("."));
    let verdict = match scenario {
        Scenario::Corollary1 => {
            let r = livsic(&mut s)?;
            let c = s.centering.as_ref().map(|c| c.value).unwrap_or(f64::NAN);
            let zero = r.orbits.iter().find(|o| o.is_fixed_point() && o.points[0] == 0.0);
            let at_zero = zero.map(|o| o.sum).unwrap_or(f64::NAN);
            s.report.stage(
                "claim",
                &json!({
                    "obstruction_at_zero": at_zero,
                    "minus_c": -c,
                    "exact": at_zero == -c,
                    "magnitude_above_0.1": c.abs() > 0.1,
                }),
            );
            r.summary()
        }
        Scenario::Corollary2 => {
            let v = aperiodicity(&mut s)?;
            let d = doubling_map();
            let ind = Observable::indicator(Interval::left_open(0.5, 1.0));
            let control = s.timed("control", |s| {
                let c = &s.cfg.aperiodicity;
                let r = livsic_obstructions(&d, &ind, c.max_period, 1e-6)?;
                Ok(aperiodicity_test(&r, c.k_max, c.tol)?)
            })?;
            s.report.stage("control", &control);
            format!("{}; control (doubling, indicator of (1/2,1]): {}", v.verdict, control.verdict)
        }
        Scenario::Theorem2Regularity => {
            let r = livsic(&mut s)?;
            let u = solve(&mut s)?;
            let err = u.recovery_error.unwrap_or(f64::NAN);
            let ratio = u.stability_ratio.unwrap_or(f64::NAN);
            let holds = !r.obstructed && err < 1e-5 && ratio <= 2.0;
            s.report.stage(
                "claim",
                &json!({
                    "max_abs_orbit_sum": r.max_abs_sum,
                    "recovery_sup_error": err,
                    "stability_ratio": ratio,
                    "holds": holds,
                }),
            );
            format!(
                "{}; u recovered to {err:.2e}, Lipschitz stability ratio {ratio:.4} on (1/2,1]{}",
                r.summary(),
                if holds { "" } else { " (regularity not confirmed)" }
            )
        }
        Scenario::VariancePositivity => {
            let (_, estimates) = variance(&mut s)?;
            let mc = estimates.iter().find(|e| e.mode == VarianceMode::MonteCarlo).expect("monte-carlo mode requested");
            let sigma2 = mc.sigma2.unwrap_or(f64::NAN);
            match mc.ci95 {
                Some([lo, hi]) => format!(
                    "σ² = {sigma2:.6}, 95% CI [{lo:.6}, {hi:.6}] {} 0",
                    if lo > 0.0 || hi < 0.0 { "excludes" } else { "includes" }
                ),
                None => format!("σ² = {sigma2:.6}, no confidence interval"),
            }
        }
    };
    s.report.verdict = verdict;
    Ok(s.report)
}
