use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use livsic_core::cohomology::obstruction::GENERIC_TOL;
use livsic_core::gibbs_markov::{check_iterate_distortion, check_tower_axioms};
use livsic_core::transfer::ulam::ULAM_CONVENTION;
use livsic_core::*;
use serde_json::json;

use crate::config::AnalysisConfig;
use crate::observable_spec::{known_transfer, parse_observable};
use crate::report::{num, CsvFile, RunReport};
use crate::scenarios::Scenario;
use crate::seeds::stage_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Axioms,
    Induce,
    Livsic,
    Solve,
    Aperiodicity,
    Variance,
    Scenario(Scenario),
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Axioms => "axioms".into(),
            Command::Induce => "induce".into(),
            Command::Livsic => "livsic".into(),
            Command::Solve => "solve".into(),
            Command::Aperiodicity => "aperiodicity".into(),
            Command::Variance => "variance".into(),
            Command::Scenario(s) => format!("scenario {}", s.name()),
        }
    }
}

/// Inducing set used throughout: the domain of the right branch.
pub fn inducing_set() -> Interval {
    Interval::left_open(0.5, 1.0)
}

/// State of one run: configuration, accumulated stage reports and side
/// files.
pub struct Session {
    pub cfg: AnalysisConfig,
    /// Directory that relative table paths resolve against.
    pub base: PathBuf,
    pub report: RunReport,
    pub centering: Option<CenteringConstant>,
}

impl Session {
    pub fn new(command: &str, cfg: AnalysisConfig, base: &Path) -> Self {
        let report = RunReport::new(command, &cfg, cfg.run.seed);
        Self { cfg, base: base.to_path_buf(), report, centering: None }
    }

    pub fn seed(&self, stage: &str) -> u64 {
        stage_seed(stage, self.cfg.run.seed)
    }

    /// Runs `f` as stage `name`: times it and attributes errors.
    pub fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f(self).with_context(|| format!("stage `{name}`"));
        self.report.timing.insert(name.into(), t0.elapsed().as_secs_f64());
        out
    }

    pub fn map(&self) -> Result<PiecewiseMap> {
        self.cfg.map.build()
    }

    /// The configured observable, centered when requested.
    pub fn observable(&mut self, map: &PiecewiseMap) -> Result<Observable> {
        let f = parse_observable(&self.cfg.observable.spec, map, &self.base)?;
        if !self.cfg.observable.center {
            return Ok(f);
        }
        let c = self.timed("centering", |s| {
            let c = &s.cfg.centering;
            let cc = centering_constant(map, &f, c.n_bins, c.steps, c.burn_in, s.seed("centering"))?;
            s.report.stage("centering", &cc);
            if !cc.agree {
                bail!(
                    "quadrature ({}) and Birkhoff average ({}) differ by {:e} > {:e}",
                    cc.value,
                    cc.birkhoff,
                    cc.difference,
                    cc.tolerance
                );
            }
            let value = cc.value;
            s.centering = Some(cc);
            Ok(value)
        })?;
        Ok(f.minus_constant(c))
    }
}

/// Runs `command` and returns its report; nothing is written.
pub fn run(command: Command, cfg: AnalysisConfig, base: &Path) -> Result<RunReport> {
    if let Command::Scenario(s) = command {
        return crate::scenarios::run_scenario(s, cfg.run.seed);
    }
    let mut s = Session::new(&command.name(), cfg, base);
    let verdict = match command {
        Command::Axioms => axioms(&mut s)?,
        Command::Induce => induce_stage(&mut s)?,
        Command::Livsic => livsic(&mut s)?.summary(),
        Command::Solve => solve(&mut s)?.verdict,
        Command::Aperiodicity => aperiodicity(&mut s)?.verdict,
        Command::Variance => variance(&mut s)?.0,
        Command::Scenario(_) => unreachable!(),
    };
    s.report.verdict = verdict;
    Ok(s.report)
}

fn verdict_word(r: &AxiomReport) -> String {
    serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn axioms(s: &mut Session) -> Result<String> {
    let map = s.map()?;
    let a = s.cfg.axioms.clone();
    let induced = match a.system.as_str() {
        "induced" => Some(induce(&map, inducing_set(), a.cap)?),
        "map" => None,
        other => bail!("unknown axioms.system `{other}` (expected `induced` or `map`)"),
    };
    let system: &dyn MarkovSystem = match &induced {
        Some(sys) => sys,
        None => &map,
    };
    let mut reports: Vec<AxiomReport> = Vec::new();
    reports.push(s.timed("expansion", |s| Ok(check_expansion(system, a.elements, a.samples, s.seed("expansion"))?))?);
    reports.push(s.timed("distortion", |s| {
        Ok(check_distortion(system, a.elements, a.samples, a.exponent, s.seed("distortion"))?)
    })?);
    reports.push(s.timed("bip", |_| Ok(check_bip(system)?))?);
    if let Some(sys) = &induced {
        let tower = tower_of(sys);
        let t = s.timed("tower", |s| Ok(check_tower_axioms(&tower, a.tower_columns, a.samples, s.seed("tower"))?))?;
        reports.extend(t);
    }
    if a.iterate_length > 0 {
        reports.push(s.timed("iterate-distortion", |s| {
            Ok(check_iterate_distortion(
                system,
                a.elements.min(8),
                a.iterate_length,
                a.samples,
                s.seed("iterate-distortion"),
            )?)
        })?);
    }
    let mut csv = CsvFile::new("axioms_per_element.csv", &["axiom", "element", "value"]);
    for r in &reports {
        for e in &r.per_element {
            csv.push(vec![r.axiom.clone(), e.element.clone(), num(e.value)]);
        }
    }
    s.report.csv.push(csv);
    s.report.stage("axioms", &reports);
    let mut parts: Vec<String> = reports.iter().map(|r| format!("{}: {}", r.axiom, verdict_word(r))).collect();

    if a.doeblin_fortet {
        let df_system = match &induced {
            Some(_) => Some(induce(&map, inducing_set(), a.df_cap)?),
            None => None,
        };
        let target: &dyn MarkovSystem = match &df_system {
            Some(sys) => sys,
            None => &map,
        };
        let df = s.timed("doeblin-fortet", |s| {
            match doeblin_fortet_estimate(target, a.df_grid, a.p_max, a.test_functions, s.seed("doeblin-fortet")) {
                Ok(df) => Ok(Some(df)),
                Err(Error::Precondition(reason)) => {
                    s.report.stage("doeblin_fortet", &json!({ "status": "rejected", "reason": reason }));
                    Ok(None)
                }
                Err(e) => Err(e.into()),
            }
        })?;
        match df {
            Some(df) => {
                parts.push(format!(
                    "doeblin-fortet: η̂ = {:.4} ({})",
                    df.eta_hat,
                    if df.pass { "pass" } else { "fail" }
                ));
                let mut csv = CsvFile::new("doeblin_fortet.csv", &["p", "ratio"]);
                for (p, r) in df.ratios.iter().enumerate() {
                    csv.push(vec![(p + 1).to_string(), num(*r)]);
                }
                s.report.csv.push(csv);
                s.report.stage("doeblin_fortet", &df);
            }
            None => parts.push("doeblin-fortet: rejected (not uniformly expanding)".into()),
        }
    }
    Ok(parts.join("; "))
}

pub fn induce_stage(s: &mut Session) -> Result<String> {
    let map = s.map()?;
    let c = s.cfg.induce.clone();
    let sys = s.timed("induce", |_| Ok(induce(&map, inducing_set(), c.cap)?))?;
    let rows =
        s.timed("return-partition", |s| Ok(sys.return_partition_rows(c.rows, c.samples, s.seed("return-partition"))))?;
    let tower = tower_of(&sys);
    let kac_lebesgue = tower.kac_sum(|i: &Interval| i.length());
    let kac_invariant = s.timed("kac", |_| {
        let mu = livsic_core::transfer::ulam_measure(&map, c.n_bins)?;
        Ok(tower.kac_sum(mu))
    })?;
    let tail = sys.unresolved_tail();
    let mut csv = CsvFile::new("return_partition.csv", &["n", "left", "right", "length", "min_derivative"]);
    for r in &rows {
        csv.push(vec![r.n.to_string(), num(r.left), num(r.right), num(r.length), num(r.min_derivative)]);
    }
    s.report.csv.push(csv);
    s.report.stage(
        "induce",
        &json!({
            "system": sys.describe(),
            "lambda": sys.lambda(),
            "cap": sys.cap(),
            "unresolved_tail": tail,
            "unresolved_tail_length": tail.length(),
            "kac_sum_invariant_density": kac_invariant,
            "kac_sum_lebesgue": kac_lebesgue,
            "kac_bins": c.n_bins,
            "partition": rows,
        }),
    );
    Ok(format!(
        "first return to {}: λ = {}, Kac sum {:.6} (unresolved tail length {:e})",
        inducing_set(),
        sys.lambda(),
        kac_invariant,
        tail.length()
    ))
}

pub fn livsic(s: &mut Session) -> Result<ObstructionReport> {
    let map = s.map()?;
    let f = s.observable(&map)?;
    let c = s.cfg.livsic.clone();
    let r = s.timed("livsic", |_| Ok(livsic_obstructions(&map, &f, c.max_period, c.tol)?))?;
    s.report.csv.push(obstruction_csv(&r));
    s.report.stage("livsic", &r);
    Ok(r)
}

fn obstruction_csv(r: &ObstructionReport) -> CsvFile {
    let mut csv = CsvFile::new("obstructions.csv", &["word", "period", "sum", "first_point", "flags"]);
    for o in &r.orbits {
        let flags: Vec<String> = o.flags.iter().map(|f| format!("{f:?}")).collect();
        csv.push(vec![o.word.clone(), o.period.to_string(), num(o.sum), num(o.points[0]), flags.join("|")]);
    }
    csv
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub verdict: String,
    /// Sup distance to the known transfer function, up to the gauge.
    pub recovery_error: Option<f64>,
    pub stability_ratio: Option<f64>,
    pub unbounded: bool,
}

pub fn solve(s: &mut Session) -> Result<SolveOutcome> {
    let map = s.map()?;
    let f = s.observable(&map)?;
    let c = s.cfg.solve.clone();
    let start = match c.start {
        Some(x) => StartPoint::Point(x),
        None => StartPoint::Random(s.seed("solve-start")),
    };
    let dither = c.dither.then(|| s.seed("solve-dither"));
    let u = s.timed("solve", |_| match solve_coboundary(&map, &f, c.orbit_length, start, dither) {
        Ok(u) => Ok(Ok(u)),
        Err(Error::NotACoboundary { point, discrepancy }) => Ok(Err((point, discrepancy))),
        Err(e) => Err(e.into()),
    })?;
    let u = match u {
        Ok(u) => u,
        Err((point, discrepancy)) => {
            s.report.stage("solve", &json!({ "status": "inconsistent", "point": point, "discrepancy": discrepancy }));
            return Ok(SolveOutcome {
                verdict: format!("not a coboundary: values at {point} disagree by {discrepancy:e}"),
                recovery_error: None,
                stability_ratio: None,
                unbounded: true,
            });
        }
    };
    let restrict = match &c.restrict {
        Some(r) => Some(r.parse::<Interval>().map_err(|e| anyhow::anyhow!("solve.restrict: {e}"))?),
        None => None,
    };
    let metric = match c.metric.as_str() {
        "euclidean" => HolderMetric::Euclidean,
        "symbolic" => HolderMetric::Symbolic { map: &map, tau: c.tau, cap: 200 },
        other => bail!("unknown solve.metric `{other}`"),
    };
    let h = s.timed("holder", |s| Ok(holder_estimate(&u, c.gamma, metric, restrict, c.k_max, s.seed("holder"))?))?;
    let recovery = known_transfer(&s.cfg.observable.spec).filter(|_| !s.cfg.observable.center).map(|g| {
        let g0 = g(u.base_point);
        u.points.iter().zip(&u.values).map(|(p, v)| (v - (g(*p) - g0)).abs()).fold(0.0, f64::max)
    });

    let mut sol = CsvFile::new("solution.csv", &["point", "value"]);
    for (p, v) in u.points.iter().zip(&u.values) {
        sol.push(vec![num(*p), num(*v)]);
    }
    let mut bands = CsvFile::new("holder_bands.csv", &["k", "lo", "hi", "pairs", "used", "constant", "reliable"]);
    for b in &h.bands {
        bands.push(vec![
            b.k.to_string(),
            num(b.lo),
            num(b.hi),
            b.pairs.to_string(),
            b.used.to_string(),
            num(b.constant),
            b.reliable.to_string(),
        ]);
    }
    s.report.csv.push(sol);
    s.report.csv.push(bands);
    s.report.stage(
        "solve",
        &json!({
            "points": u.len(),
            "base_point": u.base_point,
            "orbit_length": u.orbit_length,
            "merged_duplicates": u.merged_duplicates,
            "range_growth": u.range_growth,
            "unbounded_flag": u.unbounded_flag,
            "recovery_sup_error": recovery,
        }),
    );
    let ratio = h.stability_ratio_through(c.k_max);
    s.report.stage("holder", &h);
    let range = u.range_growth.last().map(|r| r.range).unwrap_or(0.0);
    let verdict = if u.unbounded_flag {
        format!("range of partial sums grows ({range:.4} at n = {}): not a coboundary", u.orbit_length)
    } else {
        format!("u bounded (range {range:.6}); Hölder-{} stability ratio {ratio:.4} through band {}", c.gamma, c.k_max)
    };
    Ok(SolveOutcome { verdict, recovery_error: recovery, stability_ratio: Some(ratio), unbounded: u.unbounded_flag })
}

pub fn aperiodicity(s: &mut Session) -> Result<LatticeVerdict> {
    let map = s.map()?;
    let f = s.observable(&map)?;
    let c = s.cfg.aperiodicity.clone();
    let r = s.timed("livsic", |_| Ok(livsic_obstructions(&map, &f, c.max_period, GENERIC_TOL)?))?;
    let v = s.timed("aperiodicity", |_| Ok(aperiodicity_test(&r, c.k_max, c.tol)?))?;
    let mut csv = CsvFile::new("residuals.csv", &["word", "period", "sum", "residual", "lattice_index"]);
    for row in &v.residuals {
        csv.push(vec![
            row.word.clone(),
            row.period.to_string(),
            num(row.sum),
            num(row.residual),
            row.lattice_index.map(|i| i.to_string()).unwrap_or_default(),
        ]);
    }
    s.report.csv.push(csv);
    s.report.stage("livsic", &r);
    s.report.stage("aperiodicity", &v);
    Ok(v)
}

pub fn variance(s: &mut Session) -> Result<(String, Vec<VarianceEstimate>)> {
    let map = s.map()?;
    let f = s.observable(&map)?;
    let c = s.cfg.variance.clone();
    let modes: Vec<VarianceMode> = match c.mode.as_str() {
        "ulam" => vec![VarianceMode::Ulam],
        "monte-carlo" => vec![VarianceMode::MonteCarlo],
        "both" => vec![VarianceMode::Ulam, VarianceMode::MonteCarlo],
        other => bail!("unknown variance.mode `{other}`"),
    };
    let mut parts = Vec::new();
    let mut estimates = Vec::new();
    for mode in modes {
        let (stage, label) = match mode {
            VarianceMode::Ulam => ("variance-ulam", "ulam"),
            VarianceMode::MonteCarlo => ("variance-monte-carlo", "monte-carlo"),
        };
        let params = c.params(s.seed(stage));
        let e = s.timed(stage, |_| Ok(green_kubo_variance(&map, &f, mode, &params)?))?;
        parts.push(match (e.sigma2, e.ci95) {
            (Some(v), Some([lo, hi])) => format!("σ² = {v:.6} ({label}, 95% CI [{lo:.6}, {hi:.6}])"),
            (Some(v), None) => format!("σ² = {v:.6} ({label})"),
            (None, _) => format!("σ² withheld ({label}): {}", e.flags.join("; ")),
        });
        if mode == VarianceMode::Ulam {
            let mut csv = CsvFile::new("correlations.csv", &["lag", "correlation", "partial_sum"]);
            for (n, (cn, ps)) in e.correlations.iter().zip(&e.partial_sums).enumerate() {
                csv.push(vec![n.to_string(), num(*cn), num(*ps)]);
            }
            s.report.csv.push(csv);
        }
        s.report.stage(stage, &e);
        estimates.push(e);
    }
    if c.export_matrix {
        let op = ulam_matrix(&map, c.n_bins)?;
        let mut csv = CsvFile::new("ulam_matrix.csv", &["row", "col", "value"]);
        for (i, j, v) in op.matrix.triplets() {
            csv.push(vec![i.to_string(), j.to_string(), num(v)]);
        }
        s.report.csv.push(csv);
        s.report.stage(
            "ulam_matrix",
            &json!({ "n_bins": op.n_bins, "nnz": op.matrix.nnz(), "convention": ULAM_CONVENTION }),
        );
    }
    Ok((parts.join("; "), estimates))
}
