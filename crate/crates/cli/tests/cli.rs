use std::path::Path;
use std::process::{Command, Output};

use livsic_cli::canonical;
use serde_json::Value;

fn livsic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_livsic")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn coboundary_on_doubling_is_unobstructed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[map]\nname = \"doubling\"\n[observable]\nspec = \"coboundary-of:g1\"\n");
    let out = dir.path().join("out");
    let o = livsic(&["livsic", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(stdout(&o), "unobstructed up to period 10");
    let r = report(&out);
    assert_eq!(r["schema"], "livsic-report/1");
    assert_eq!(r["command"], "livsic");
    assert_eq!(r["artifacts"], serde_json::json!(["obstructions.csv"]));
    let csv = std::fs::read_to_string(out.join("obstructions.csv")).unwrap();
    assert!(csv.starts_with("word,period,sum,first_point,flags\n"));
}

#[test]
fn variance_of_the_identity_on_doubling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[map]\nname = \"doubling\"\n[observable]\nspec = \"affine:1,−0.5\"\n");
    let out = dir.path().join("out");
    let o = livsic(&["variance", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(stdout(&o), "");
    let r = report(&out);
    for stage in ["variance-ulam", "variance-monte-carlo"] {
        assert!(r["timing"][stage].is_number(), "{stage}");
        let sigma2 = r["stages"][stage]["sigma2"].as_f64().unwrap();
        assert!((0.23..=0.27).contains(&sigma2), "{stage}: {sigma2}");
    }
}

#[test]
fn unknown_keys_fail_with_their_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[solve]\norbit_lenght = 10\n");
    let o = livsic(&["solve", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("orbit_lenght"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn tables_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f.csv"), "x,value\n0,0\n1,1\n").unwrap();
    let cfg = write_config(dir.path(), "[map]\nname = \"doubling\"\n[observable]\nspec = \"table:f.csv\"\n");
    let o = livsic(&["livsic", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert!(stdout(&o).starts_with("obstructed"));
}

#[test]
fn unknown_scenario_is_rejected() {
    let o = livsic(&["scenario", "corollary-3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("corollary-1"));
}

#[test]
fn scenarios_reach_their_verdicts_and_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let expected = [
        ("corollary-1", "obstructed at fixed point 0"),
        (
            "corollary-2",
            "no lattice (aperiodic at tolerance); control (doubling, indicator of (1/2,1]): lattice found (λ=1, μ=0)",
        ),
        ("theorem-2-regularity", "unobstructed up to period 12; u recovered to"),
        ("variance-positivity", "excludes 0"),
    ];
    for (name, verdict) in expected {
        let a = dir.path().join(format!("{name}-a"));
        let b = dir.path().join(format!("{name}-b"));
        let va = stdout(&livsic(&["scenario", name, "--seed", "7", "--out", a.to_str().unwrap()]));
        let vb = stdout(&livsic(&["scenario", name, "--seed", "7", "--out", b.to_str().unwrap()]));
        assert!(va.contains(verdict), "{name}: {va}");
        assert_eq!(va, vb);
        assert_eq!(canonical(&report(&a)), canonical(&report(&b)), "{name}");
        for artifact in report(&a)["artifacts"].as_array().unwrap() {
            let f = artifact.as_str().unwrap();
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{name}/{f}");
        }
    }
}

#[test]
fn seeds_change_stochastic_stages() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = dir.path().join(seed);
        stdout(&livsic(&["scenario", "variance-positivity", "--seed", seed, "--out", out.to_str().unwrap()]));
        report(&out)["stages"]["variance-monte-carlo"]["sigma2"].as_f64().unwrap()
    };
    assert_ne!(run("1"), run("2"));
}
