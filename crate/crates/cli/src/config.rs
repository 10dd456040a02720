//! Run configuration. The file format is TOML with one table per stage; every
//! table rejects unknown keys. See `docs/config.md`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use livsic_core::{doubling_map, lsv_map, PiecewiseMap};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub map: MapSection,
    pub observable: ObservableSection,
    pub run: RunSection,
    pub centering: CenteringSection,
    pub livsic: LivsicSection,
    pub solve: SolveSection,
    pub axioms: AxiomsSection,
    pub induce: InduceSection,
    pub aperiodicity: AperiodicitySection,
    pub variance: VarianceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSection {
    /// `lsv` or `doubling`.
    pub name: String,
    pub alpha: f64,
}

impl Default for MapSection {
    fn default() -> Self {
        Self { name: "lsv".into(), alpha: 0.5 }
    }
}

impl MapSection {
    pub fn build(&self) -> Result<PiecewiseMap> {
        match self.name.as_str() {
            "lsv" => Ok(lsv_map(self.alpha)?),
            "doubling" => Ok(doubling_map()),
            other => bail!("unknown map `{other}` (expected `lsv` or `doubling`)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableSection {
    /// `log-derivative`, `coboundary-of:<g>`, `affine:<a>,<b>`,
    /// `indicator:<interval>` or `table:<path>`.
    pub spec: String,
    /// Subtract `∫ f dμ` (computed by the centering stage).
    pub center: bool,
}

impl Default for ObservableSection {
    fn default() -> Self {
        Self { spec: "log-derivative".into(), center: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CenteringSection {
    pub n_bins: usize,
    pub steps: usize,
    pub burn_in: usize,
}

impl Default for CenteringSection {
    fn default() -> Self {
        Self { n_bins: 1 << 14, steps: 10_000_000, burn_in: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LivsicSection {
    pub max_period: usize,
    pub tol: f64,
}

impl Default for LivsicSection {
    fn default() -> Self {
        Self { max_period: 10, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub orbit_length: usize,
    /// Starting point; a seeded random point when absent.
    pub start: Option<f64>,
    pub dither: bool,
    pub gamma: f64,
    /// Interval the Hölder estimate is restricted to, e.g. `"(0.5, 1]"`.
    pub restrict: Option<String>,
    pub k_max: usize,
    /// `euclidean` or `symbolic`.
    pub metric: String,
    pub tau: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            orbit_length: 10_000,
            start: None,
            dither: true,
            gamma: 1.0,
            restrict: Some("(0.5, 1]".into()),
            k_max: 12,
            metric: "euclidean".into(),
            tau: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxiomsSection {
    /// `induced` (first return to `(1/2, 1]`) or `map`.
    pub system: String,
    pub cap: usize,
    pub elements: usize,
    pub samples: usize,
    pub exponent: f64,
    pub tower_columns: usize,
    pub iterate_length: usize,
    pub doeblin_fortet: bool,
    pub df_grid: usize,
    pub df_cap: usize,
    pub p_max: usize,
    pub test_functions: usize,
}

impl Default for AxiomsSection {
    fn default() -> Self {
        Self {
            system: "induced".into(),
            cap: 10_000,
            elements: 40,
            samples: 100,
            exponent: 1.0,
            tower_columns: 20,
            iterate_length: 3,
            doeblin_fortet: true,
            df_grid: 4096,
            df_cap: 1000,
            p_max: 10,
            test_functions: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InduceSection {
    pub cap: usize,
    pub rows: usize,
    pub samples: usize,
    /// Ulam bins for the invariant measure in the Kac sum.
    pub n_bins: usize,
}

impl Default for InduceSection {
    fn default() -> Self {
        Self { cap: 10_000, rows: 40, samples: 100, n_bins: 1 << 14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AperiodicitySection {
    pub max_period: usize,
    pub k_max: usize,
    pub tol: f64,
}

impl Default for AperiodicitySection {
    fn default() -> Self {
        Self { max_period: 10, k_max: 50, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceSection {
    /// `ulam`, `monte-carlo` or `both`.
    pub mode: String,
    pub n_bins: usize,
    pub max_lag: usize,
    pub plateau_tol: f64,
    pub plateau_run: usize,
    pub steps: usize,
    pub batch_len: usize,
    pub burn_in: usize,
    pub streams: usize,
    pub bootstrap: usize,
    pub export_matrix: bool,
}

impl Default for VarianceSection {
    fn default() -> Self {
        let p = livsic_core::VarianceParams::default();
        Self {
            mode: "both".into(),
            n_bins: p.n_bins,
            max_lag: p.max_lag,
            plateau_tol: p.plateau_tol,
            plateau_run: p.plateau_run,
            steps: p.steps,
            batch_len: p.batch_len,
            burn_in: p.burn_in,
            streams: p.streams,
            bootstrap: p.bootstrap,
            export_matrix: false,
        }
    }
}

impl VarianceSection {
    pub fn params(&self, seed: u64) -> livsic_core::VarianceParams {
        livsic_core::VarianceParams {
            n_bins: self.n_bins,
            max_lag: self.max_lag,
            plateau_tol: self.plateau_tol,
            plateau_run: self.plateau_run,
            steps: self.steps,
            batch_len: self.batch_len,
            burn_in: self.burn_in,
            streams: self.streams,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

impl AnalysisConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {}", e.message().trim()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(AnalysisConfig::parse("").unwrap(), AnalysisConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = AnalysisConfig::parse("[livsic]\nmax_perod = 3\n").unwrap_err().to_string();
        assert!(e.contains("max_perod"), "{e}");
        let e = AnalysisConfig::parse("[mapp]\nname = \"lsv\"\n").unwrap_err().to_string();
        assert!(e.contains("mapp"), "{e}");
    }

    #[test]
    fn sections_override_defaults() {
        let c = AnalysisConfig::parse("[map]\nname = \"doubling\"\n[variance]\nmode = \"ulam\"\n").unwrap();
        assert_eq!(c.map.name, "doubling");
        assert_eq!(c.variance.mode, "ulam");
        assert_eq!(c.variance.n_bins, 4096);
    }
}
