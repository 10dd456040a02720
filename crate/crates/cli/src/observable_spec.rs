use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use livsic_core::{Interval, Observable, PiecewiseMap};

/// Builtin transfer functions for `coboundary-of:<name>`.
pub const TRANSFER_FUNCTIONS: [(&str, fn(f64) -> f64); 3] =
    [("g1", |x| x * (1.0 - x)), ("g2", |x| x * x), ("g3", |x| (3.0 * x).sin())];

pub fn transfer_function(name: &str) -> Option<fn(f64) -> f64> {
    TRANSFER_FUNCTIONS.iter().find(|(n, _)| *n == name).map(|(_, g)| *g)
}

/// The `g` behind a `coboundary-of:` spec, when there is one.
pub fn known_transfer(spec: &str) -> Option<fn(f64) -> f64> {
    spec.strip_prefix("coboundary-of:").and_then(|n| transfer_function(n.trim()))
}

/// Builds an observable from its spec string. Table paths are resolved
/// against `base`.
pub fn parse_observable(spec: &str, map: &PiecewiseMap, base: &Path) -> Result<Observable> {
    let spec = spec.trim();
    if spec == "log-derivative" {
        return Ok(Observable::log_derivative(map));
    }
    let (kind, arg) = spec.split_once(':').ok_or_else(|| anyhow!("unknown observable `{spec}`"))?;
    let arg = arg.trim();
    match kind.trim() {
        "coboundary-of" => {
            let g = transfer_function(arg).ok_or_else(|| {
                let names: Vec<&str> = TRANSFER_FUNCTIONS.iter().map(|(n, _)| *n).collect();
                anyhow!("unknown transfer function `{arg}` (expected one of {})", names.join(", "))
            })?;
            Ok(Observable::coboundary_of(map, arg, 1.0, g))
        }
        "affine" => {
            let (a, b) = arg.split_once(',').ok_or_else(|| anyhow!("affine needs `a,b`, got `{arg}`"))?;
            let parse =
                |s: &str| s.trim().replace('−', "-").parse::<f64>().with_context(|| format!("bad number `{s}`"));
            Ok(Observable::affine(parse(a)?, parse(b)?))
        }
        "indicator" => {
            let set: Interval = arg.parse().map_err(|e| anyhow!("bad interval `{arg}`: {e}"))?;
            Ok(Observable::indicator(set))
        }
        "table" => {
            let path = base.join(arg);
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .trim(csv::Trim::All)
                .from_path(&path)
                .with_context(|| format!("reading table {}", path.display()))?;
            let mut xs = Vec::new();
            let mut vs = Vec::new();
            for row in reader.deserialize::<(f64, f64)>() {
                let (x, v) = row.with_context(|| format!("in table {}", path.display()))?;
                xs.push(x);
                vs.push(v);
            }
            Ok(Observable::from_table(xs, vs)?)
        }
        other => bail!("unknown observable kind `{other}`"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use livsic_core::doubling_map;

    #[test]
    fn parses_builtins() {
        let d = doubling_map();
        let here = Path::new(".");
        assert_eq!(parse_observable("affine:1,-0.5", &d, here).unwrap().evaluate(0.75), 0.25);
        assert_eq!(parse_observable("affine:1,−0.5", &d, here).unwrap().evaluate(0.5), 0.0);
        assert_eq!(parse_observable("indicator:(0.5,1]", &d, here).unwrap().evaluate(0.5), 0.0);
        let f = parse_observable("coboundary-of:g1", &d, here).unwrap();
        assert!((f.evaluate(0.3) - (0.21 - 0.24)).abs() < 1e-15);
        assert!(parse_observable("coboundary-of:g9", &d, here).is_err());
        assert!(parse_observable("cubic", &d, here).is_err());
    }

    #[test]
    fn reads_tables() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "x,value\n0,0\n0.5,1\n1,0\n").unwrap();
        let f = parse_observable("table:f.csv", &doubling_map(), dir.path()).unwrap();
        assert!((f.evaluate(0.25) - 0.5).abs() < 1e-15);
    }
}
