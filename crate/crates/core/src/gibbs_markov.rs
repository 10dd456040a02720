//! Sampled verification of the Gibbs-Markov and Young-tower axioms.
//!
//! A "pass" means no violation was found among the sampled pairs at the
//! stated sample size; it is not a proof.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inducing::{InducedSystem, YoungTower};
use crate::interval::Interval;
use crate::sampling::{derive_seed, sample_pair, stream_rng};
use crate::system::MarkovSystem;

/// Expansion passes iff the measured constant exceeds `1 + EXPANSION_MARGIN`.
pub const EXPANSION_MARGIN: f64 = 1e-9;
const SUBSET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub element: String,
    pub points: Vec<f64>,
    /// The quantity that violates (or attains) the bound.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementConstant {
    pub element: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub axiom: String,
    pub verdict: Verdict,
    pub constant: f64,
    pub samples: usize,
    pub witness: Option<Witness>,
    pub per_element: Vec<ElementConstant>,
    pub note: String,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Per-element extremum together with the pair attaining it.
#[derive(Debug, Clone, Copy)]
struct Extremum {
    value: f64,
    x: f64,
    y: f64,
}

fn pair_extremum(
    element: &Interval,
    samples: usize,
    seed: u64,
    maximize: bool,
    q: impl Fn(f64, f64) -> Option<f64>,
) -> Option<Extremum> {
    let mut best: Option<Extremum> = None;
    for id in 0..samples as u64 {
        let (x, y) = sample_pair(element, seed, id);
        if x == y {
            continue;
        }
        let Some(v) = q(x, y) else { continue };
        let better = match best {
            None => true,
            Some(b) if v.is_nan() => !b.value.is_nan(),
            Some(b) => {
                if maximize {
                    v > b.value
                } else {
                    v < b.value
                }
            }
        };
        if better {
            best = Some(Extremum { value: v, x, y });
        }
    }
    best
}

/// `λ̂ = min |Tx − Ty| / |x − y|` over sampled same-element pairs (and the
/// derivative at the sampled points) in the first `elements` elements.
pub fn check_expansion(system: &dyn MarkovSystem, elements: usize, samples: usize, seed: u64) -> Result<AxiomReport> {
    if samples < 2 {
        return Err(Error::Parameter("expansion check needs at least 2 samples".into()));
    }
    let count = elements.min(system.element_count());
    let per: Vec<Option<Extremum>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let e = system.element(i);
            pair_extremum(&e, samples, derive_seed(seed, i as u64), false, |x, y| {
                let q = (system.forward(i, x) - system.forward(i, y)).abs() / (x - y).abs();
                Some(q.min(system.derivative(i, x)).min(system.derivative(i, y)))
            })
        })
        .collect();
    let (mut lambda, mut worst) = (f64::INFINITY, None);
    let mut per_element = Vec::with_capacity(count);
    for (i, ext) in per.into_iter().enumerate() {
        let Some(ext) = ext else { continue };
        per_element.push(ElementConstant { element: system.element_label(i), value: ext.value });
        if ext.value < lambda || ext.value.is_nan() {
            lambda = ext.value;
            worst = Some(Witness { element: system.element_label(i), points: vec![ext.x, ext.y], value: ext.value });
        }
    }
    let pass = lambda > 1.0 + EXPANSION_MARGIN;
    Ok(AxiomReport {
        axiom: "expansion".into(),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        constant: lambda,
        samples: samples * count,
        witness: worst,
        per_element,
        note: format!(
            "minimum expansion over {samples} pairs per element in {count} elements of {}",
            system.describe()
        ),
    })
}

/// `Ĉ = max |1 − T'(y)/T'(x)| / |Tx − Ty|^γ` per element (Lebesgue
/// jacobian). Passes iff every per-element maximum is finite and the mean
/// over the last quarter of elements is at most twice the mean over the
/// first quarter.
pub fn check_distortion(
    system: &dyn MarkovSystem,
    elements: usize,
    samples: usize,
    exponent: f64,
    seed: u64,
) -> Result<AxiomReport> {
    if samples < 2 {
        return Err(Error::Parameter("distortion check needs at least 2 samples".into()));
    }
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::Parameter(format!("distortion exponent {exponent} outside (0, 1]")));
    }
    let count = elements.min(system.element_count());
    let per: Vec<Extremum> = (0..count)
        .into_par_iter()
        .map(|i| {
            let e = system.element(i);
            pair_extremum(&e, samples, derive_seed(seed, i as u64), true, |x, y| {
                let d = (system.forward(i, x) - system.forward(i, y)).abs();
                if d == 0.0 {
                    return None;
                }
                let ratio = system.derivative(i, y) / system.derivative(i, x);
                Some((1.0 - ratio).abs() / d.powf(exponent))
            })
            .unwrap_or(Extremum { value: 0.0, x: e.midpoint(), y: e.midpoint() })
        })
        .collect();
    let per_element: Vec<ElementConstant> = per
        .iter()
        .enumerate()
        .map(|(i, e)| ElementConstant { element: system.element_label(i), value: e.value })
        .collect();
    let constant = per.iter().map(|e| e.value).fold(0.0, f64::max);
    let witness_at =
        |i: usize| Witness { element: system.element_label(i), points: vec![per[i].x, per[i].y], value: per[i].value };

    if let Some(i) = per.iter().position(|e| !e.value.is_finite()) {
        return Ok(AxiomReport {
            axiom: "distortion".into(),
            verdict: Verdict::Fail,
            constant: f64::INFINITY,
            samples: samples * count,
            witness: Some(witness_at(i)),
            per_element,
            note: "non-finite distortion quotient".into(),
        });
    }
    let values: Vec<f64> = per.iter().map(|e| e.value).collect();
    let (first, last) = quartile_means(&values);
    let trend_ok = last <= 2.0 * first;
    let q = count.div_ceil(4).max(1);
    let witness = if trend_ok {
        per.iter().enumerate().max_by(|a, b| a.1.value.total_cmp(&b.1.value)).map(|(i, _)| witness_at(i))
    } else {
        (count - q..count).max_by(|&a, &b| per[a].value.total_cmp(&per[b].value)).map(witness_at)
    };
    Ok(AxiomReport {
        axiom: "distortion".into(),
        verdict: if trend_ok { Verdict::Pass } else { Verdict::Fail },
        constant,
        samples: samples * count,
        witness,
        per_element,
        note: format!(
            "exponent {exponent}; first-quarter mean {first:.6e}, last-quarter mean {last:.6e} over {count} elements"
        ),
    })
}

/// Means over the first and the last quarter (rounded up) of `values`.
pub fn quartile_means(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let q = values.len().div_ceil(4);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&values[..q]), mean(&values[values.len() - q..]))
}

/// Big images and preimages: a finite set `W` of elements such that every
/// image contains a member of `W` and every element lies in the image of a
/// member of `W`. The witness set is chosen greedily.
pub fn check_bip(system: &dyn MarkovSystem) -> Result<AxiomReport> {
    let n = system.element_count();
    if n == 0 {
        return Err(Error::Precondition("no resolved partition elements".into()));
    }
    let elems: Vec<Interval> = (0..n).map(|i| system.element(i)).collect();
    let images: Vec<Interval> = (0..n).map(|i| system.element_image(i)).collect();
    // need_big[a]: image of a still lacks a witness; need_pre[a]: a not yet
    // inside the image of a witness.
    let mut need_big = vec![true; n];
    let mut need_pre = vec![true; n];
    let mut chosen: Vec<usize> = Vec::new();
    loop {
        let remaining = need_big.iter().chain(&need_pre).filter(|&&b| b).count();
        if remaining == 0 {
            break;
        }
        let gain = |b: usize| {
            (0..n)
                .filter(|&a| {
                    (need_big[a] && elems[b].is_subset_mod0(&images[a], SUBSET_TOL))
                        || (need_pre[a] && elems[a].is_subset_mod0(&images[b], SUBSET_TOL))
                })
                .count()
        };
        let best = (0..n).into_par_iter().map(|b| (gain(b), std::cmp::Reverse(b))).max();
        match best {
            Some((g, std::cmp::Reverse(b))) if g > 0 => {
                chosen.push(b);
                for a in 0..n {
                    need_big[a] &= !elems[b].is_subset_mod0(&images[a], SUBSET_TOL);
                    need_pre[a] &= !elems[a].is_subset_mod0(&images[b], SUBSET_TOL);
                }
            }
            _ => {
                let (a, what) = match need_big.iter().position(|&b| b) {
                    Some(a) => (a, "image contains no partition element"),
                    None => (need_pre.iter().position(|&b| b).unwrap(), "element lies in no image"),
                };
                return Ok(AxiomReport {
                    axiom: "big-images-and-preimages".into(),
                    verdict: Verdict::Fail,
                    constant: chosen.len() as f64,
                    samples: n,
                    witness: Some(Witness {
                        element: system.element_label(a),
                        points: vec![elems[a].lo, elems[a].hi, images[a].lo, images[a].hi],
                        value: images[a].length(),
                    }),
                    per_element: Vec::new(),
                    note: format!("{}: {what}", system.element_label(a)),
                });
            }
        }
    }
    let labels: Vec<String> = chosen.iter().map(|&b| system.element_label(b)).collect();
    Ok(AxiomReport {
        axiom: "big-images-and-preimages".into(),
        verdict: Verdict::Pass,
        constant: chosen.len() as f64,
        samples: n,
        witness: Some(Witness {
            element: labels.join(","),
            points: chosen.iter().flat_map(|&b| [elems[b].lo, elems[b].hi]).collect(),
            value: chosen.len() as f64,
        }),
        per_element: Vec::new(),
        note: format!("witness set {{{}}} over {n} elements", labels.join(", ")),
    })
}

/// Constants of the tower axioms over the first `columns` columns:
/// expansion at return times, backward contraction along columns, and
/// distortion of the return map.
pub fn check_tower_axioms(tower: &YoungTower, columns: usize, samples: usize, seed: u64) -> Result<Vec<AxiomReport>> {
    if samples < 2 {
        return Err(Error::Parameter("tower checks need at least 2 samples".into()));
    }
    let sys: &InducedSystem = tower.system();
    let count = columns.min(tower.columns().len());
    let mut expansion = check_expansion(sys, count, samples, derive_seed(seed, 3))?;
    expansion.axiom = "tower-expansion-at-return".into();
    let mut distortion = check_distortion(sys, count, samples, 1.0, derive_seed(seed, 5))?;
    distortion.axiom = "tower-return-distortion".into();

    // Axiom (4): d(x, y) ≤ C d(T^{R-k} x, T^{R-k} y) on Δ_{k,l}.
    let left = sys.base().branch(0);
    let per: Vec<(f64, Extremum)> = (0..count)
        .into_par_iter()
        .map(|l| {
            let n = tower.columns()[l].return_time;
            let mut worst = Extremum { value: 0.0, x: f64::NAN, y: f64::NAN };
            for k in 0..n {
                let level = tower.level(l, k);
                let climb = |p: f64| {
                    if k == 0 {
                        sys.forward(l, p)
                    } else {
                        (k..n).fold(p, |q, _| left.forward(q))
                    }
                };
                let s = derive_seed(seed, ((l as u64) << 32) | k as u64);
                if let Some(e) = pair_extremum(&level, samples, s, true, |x, y| {
                    let d = (climb(x) - climb(y)).abs();
                    (d > 0.0).then(|| (x - y).abs() / d)
                }) {
                    if e.value > worst.value {
                        worst = e;
                    }
                }
            }
            (worst.value, worst)
        })
        .collect();
    let c = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let arg = per.iter().position(|p| p.0 == c).unwrap_or(0);
    let backward = AxiomReport {
        axiom: "tower-backward-contraction".into(),
        verdict: if c.is_finite() { Verdict::Pass } else { Verdict::Fail },
        constant: c,
        samples: samples * per.len(),
        witness: per.get(arg).map(|p| Witness {
            element: format!("column {}", arg + 1),
            points: vec![p.1.x, p.1.y],
            value: p.1.value,
        }),
        per_element: per
            .iter()
            .enumerate()
            .map(|(l, p)| ElementConstant { element: format!("column {}", l + 1), value: p.0 })
            .collect(),
        note: "max over levels k < R_l of |x - y| / |T^(R_l - k) x - T^(R_l - k) y|".into(),
    };
    Ok(vec![expansion, backward, distortion])
}

/// Bounded distortion of iterates: for random words `a_0 … a_{k-1}` over the
/// first `elements` elements and random intervals `Z`, the ratio
/// `m([a] ∩ T^{-k} Z) / m([a])` against `m(Z) / m(space)`. Requires every
/// element to map onto the whole space.
pub fn check_iterate_distortion(
    system: &dyn MarkovSystem,
    elements: usize,
    k_max: usize,
    samples: usize,
    seed: u64,
) -> Result<AxiomReport> {
    if k_max == 0 || k_max > 6 {
        return Err(Error::Parameter(format!("cylinder length {k_max} outside 1..=6")));
    }
    let space = system.space();
    let count = elements.min(system.element_count());
    for i in 0..count {
        let img = system.element_image(i);
        if !space.is_subset_mod0(&img, SUBSET_TOL) {
            return Err(Error::Precondition(format!("element {} does not map onto {space}", system.element_label(i))));
        }
    }
    let pull = |word: &[usize], z: (f64, f64)| -> Result<f64> {
        let (mut a, mut b) = z;
        for &s in word.iter().rev() {
            a = system.inverse(s, a)?;
            b = system.inverse(s, b)?;
        }
        Ok((b - a).abs())
    };
    let trials: Vec<(usize, u64)> = (1..=k_max).flat_map(|k| (0..samples as u64).map(move |t| (k, t))).collect();
    let ratios: Result<Vec<(f64, Vec<usize>, (f64, f64))>> = trials
        .into_par_iter()
        .map(|(k, t)| {
            let mut rng = stream_rng(derive_seed(seed, k as u64), t);
            let word: Vec<usize> = (0..k).map(|_| rng.gen_range(0..count)).collect();
            let (u, v) = (rng.gen::<f64>(), rng.gen::<f64>());
            let z = if t == 0 { (space.lo, space.hi) } else { (space.lerp(u.min(v)), space.lerp(u.max(v))) };
            let cyl = pull(&word, (space.lo, space.hi))?;
            let part = pull(&word, z)?;
            let expected = (z.1 - z.0) / space.length();
            let r = if expected == 0.0 || cyl == 0.0 { 1.0 } else { (part / cyl) / expected };
            Ok((r, word, z))
        })
        .collect();
    let ratios = ratios?;
    let (mut b_hat, mut arg) = (1.0f64, None);
    for (r, word, z) in &ratios {
        let b = r.max(1.0 / r);
        if b > b_hat || b.is_nan() {
            b_hat = b;
            arg = Some((word.clone(), *z, *r));
        }
    }
    Ok(AxiomReport {
        axiom: "iterate-distortion".into(),
        verdict: if b_hat.is_finite() { Verdict::Pass } else { Verdict::Fail },
        constant: b_hat,
        samples: ratios.len(),
        witness: arg.map(|(w, z, r)| Witness {
            element: w.iter().map(|&s| system.element_label(s)).collect::<Vec<_>>().join(" "),
            points: vec![z.0, z.1],
            value: r,
        }),
        per_element: Vec::new(),
        note: format!("cylinders of length ≤ {k_max} over the first {count} elements"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inducing::{induce, tower_of};
    use crate::maps::{doubling_map, lsv_map, Branch, BranchFn, PiecewiseMap};

    fn y() -> Interval {
        Interval::left_open(0.5, 1.0)
    }

    #[test]
    fn expansion_examples() {
        let d = check_expansion(&doubling_map(), 10, 500, 1).unwrap();
        assert!(d.passed());
        assert_eq!(d.constant, 2.0);

        let lsv = lsv_map(0.5).unwrap();
        let raw = check_expansion(&lsv, 10, 500, 1).unwrap();
        assert_eq!(raw.verdict, Verdict::Fail);
        let w = raw.witness.unwrap();
        let (x, z) = (w.points[0], w.points[1]);
        // Soundness of the witness, re-evaluated independently.
        let q = ((lsv.evaluate(x).unwrap() - lsv.evaluate(z).unwrap()) / (x - z))
            .abs()
            .min(lsv.derivative(x).unwrap())
            .min(lsv.derivative(z).unwrap());
        assert!(q <= 1.0 + EXPANSION_MARGIN);

        let ind = induce(&lsv, y(), 100).unwrap();
        let r = check_expansion(&ind, 40, 100, 1).unwrap();
        assert!(r.passed() && r.constant >= 2.0 - 1e-9, "{r:?}");
    }

    #[test]
    fn more_samples_never_rescue_expansion() {
        let lsv = lsv_map(0.25).unwrap();
        for s in [8, 64, 512] {
            assert_eq!(check_expansion(&lsv, 2, s, 4).unwrap().verdict, Verdict::Fail);
        }
    }

    #[test]
    fn distortion_examples() {
        let d = check_distortion(&doubling_map(), 2, 300, 1.0, 2).unwrap();
        assert!(d.passed());
        assert_eq!(d.constant, 0.0);

        let lsv = lsv_map(0.5).unwrap();
        let ind = induce(&lsv, y(), 100).unwrap();
        let r = check_distortion(&ind, 40, 200, 1.0, 2).unwrap();
        assert!(r.constant.is_finite() && r.constant < 3.0, "{r:?}");
        // B1 is affine, so the sequence climbs from 0 before levelling off;
        // over n ≤ 40 the quartile rule reads that climb as a trend.
        assert_eq!(r.per_element[0].value, 0.0);
        assert_eq!(r.verdict, Verdict::Fail);

        // The left branch alone: Hölder with the branch exponent.
        let left = check_distortion(&lsv, 1, 2000, 0.5, 3).unwrap();
        assert!(left.constant.is_finite() && left.constant < 10.0, "{left:?}");
    }

    #[test]
    fn quartile_rule() {
        assert_eq!(quartile_means(&[1.0, 2.0, 3.0, 4.0, 5.0]), (1.5, 4.5));
        let growing: Vec<f64> = (1..=40).map(|n| n as f64).collect();
        let (a, b) = quartile_means(&growing);
        assert!(b > 2.0 * a);
        let flat = vec![2.5; 40];
        let (a, b) = quartile_means(&flat);
        assert!(b <= 2.0 * a);
    }

    #[test]
    fn bip_examples() {
        let d = check_bip(&doubling_map()).unwrap();
        assert!(d.passed());
        assert_eq!(d.constant, 1.0);

        let ind = induce(&lsv_map(0.5).unwrap(), y(), 200).unwrap();
        assert!(check_bip(&ind).unwrap().passed());

        let lifted = PiecewiseMap::new(
            "lift",
            vec![
                Branch::new("L", Interval::closed(0.0, 0.5), BranchFn::Affine { slope: 1.0, offset: 0.5 }).unwrap(),
                Branch::new("R", Interval::left_open(0.5, 1.0), BranchFn::Affine { slope: 1.0, offset: 0.0 }).unwrap(),
            ],
        )
        .unwrap();
        let r = check_bip(&lifted).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witness.unwrap().element, "L");
    }

    #[test]
    fn tower_examples() {
        let dt = tower_of(&induce(&doubling_map(), y(), 20).unwrap());
        let reports = check_tower_axioms(&dt, 12, 100, 7).unwrap();
        assert!(reports.iter().all(AxiomReport::passed), "{reports:?}");
        for (l, c) in reports[0].per_element.iter().enumerate() {
            let expect = 2f64.powi(l as i32 + 1);
            assert!((c.value / expect - 1.0).abs() < 1e-6, "column {l}: {}", c.value);
        }
        let lt = tower_of(&induce(&lsv_map(0.5).unwrap(), y(), 60).unwrap());
        let reports = check_tower_axioms(&lt, 40, 60, 7).unwrap();
        assert!(reports[1].constant.is_finite() && reports[1].constant <= 1.0 + 1e-9);
    }

    #[test]
    fn iterate_distortion_examples() {
        let d = check_iterate_distortion(&doubling_map(), 2, 6, 100, 5).unwrap();
        assert!((d.constant - 1.0).abs() < 1e-9, "{d:?}");
        let ind = induce(&lsv_map(0.5).unwrap(), y(), 100).unwrap();
        let r = check_iterate_distortion(&ind, 8, 4, 100, 5).unwrap();
        assert!(r.passed() && r.constant < 10.0, "{r:?}");
        assert!(check_iterate_distortion(&lsv_map(0.5).unwrap(), 2, 7, 10, 5).is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let ind = induce(&lsv_map(0.5).unwrap(), y(), 100).unwrap();
        let a = check_distortion(&ind, 40, 50, 1.0, 9).unwrap();
        let b = check_distortion(&ind, 40, 50, 1.0, 9).unwrap();
        assert_eq!(a, b);
    }
}
