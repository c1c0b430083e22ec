use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dicke_cli::{execute, parse_config, RunOptions, Verb};
use proptest::prelude::*;

const SMALL: &str = r#"
[geometry]
sampler = "fixed_pair"
distance = 0.3333333333333333

[ensemble]
n_realizations = 24
seed = 7
intensity_jitter_rel = 0.05

[drive]
s = 75.0
duration = 0.5

[schedule]
dt = 0.05
"#;

fn dicke(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dicke")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_configs_parse() {
    for name in ["pair_average.toml", "chain_sweep.toml"] {
        let text = fs::read_to_string(repo_config(name)).unwrap();
        let c = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }
}

#[test]
fn exit_codes_by_category() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out");
    let out = out.to_str().unwrap();

    let empty = write(d, "empty.toml", "");
    let (code, err) = dicke(&["simulate", "--config", empty.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("line 1, column 1"), "{err}");

    let both = write(d, "both.toml", &SMALL.replace("s = 75.0", "s = 75.0\nrabi = 2.0"));
    let (code, err) = dicke(&["simulate", "--config", both.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("drive"), "{err}");

    let (code, _) = dicke(&["simulate", "--out-dir", out]);
    assert_eq!(code, 2);
    let (code, _) = dicke(&["simulate", "--bogus"]);
    assert_eq!(code, 2);

    let missing = d.join("nope.toml");
    let (code, _) = dicke(&["simulate", "--config", missing.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(code, 4);

    // RK4 with steps far beyond its stability limit blows up every realization
    let unstable = write(
        d,
        "unstable.toml",
        &SMALL.replace("dt = 0.05", "dt = 0.5\nmethod = \"rk4\"\nmax_step = 0.5").replace("duration = 0.5", "duration = 1.0"),
    );
    let (code, err) = dicke(&["simulate", "--config", unstable.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(code, 3, "{err}");

    let good = write(d, "good.toml", SMALL);
    let (code, err) =
        dicke(&["analyze", "--config", good.to_str().unwrap(), "--input", missing.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn outputs_identical_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let mut runs = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("jobs{jobs}"));
        let (code, err) = dicke(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out-dir",
            out.to_str().unwrap(),
            "--keep-realizations",
        ]);
        assert_eq!(code, 0, "{err}");
        runs.push(out);
    }
    for f in ["trajectory.csv", "analysis.csv", "analysis.json", "resolved.toml", "realizations.csv"] {
        let a = fs::read(runs[0].join(f)).unwrap();
        let b = fs::read(runs[1].join(f)).unwrap();
        assert!(!a.is_empty());
        assert!(a == b, "{f} differs between job counts");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL).unwrap();
    let mut a = RunOptions::new(dir.path().join("a"));
    a.seed = Some(99);
    execute(Verb::Simulate, &cfg, &a).unwrap();
    let resolved = fs::read_to_string(dir.path().join("a/resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 99"));
    let b = RunOptions::new(dir.path().join("b"));
    execute(Verb::Simulate, &parse_config(&resolved).unwrap(), &b).unwrap();
    for f in ["trajectory.csv", "analysis.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn trajectory_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL).unwrap();
    let s = execute(Verb::Simulate, &cfg, &RunOptions::new(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "time,n_e,axial_intensity,total_rate,pop_plus,pop_minus");
    let rows: Vec<&str> = lines.collect();
    // 0.5 pulse + 6.0 record at dt 0.05
    assert_eq!(rows.len(), 131);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
    assert!(!text.contains('\r'));
    assert_eq!(s.rows.len(), 1);
    assert_eq!(s.rows[0].status, "ok");
    let h = s.hygiene.unwrap();
    assert_eq!(h.realizations_succeeded, 24);
    assert!(h.max_trace_drift <= 1e-8 && h.max_hermiticity_residue <= 1e-9);
    assert!(h.min_final_eigenvalue.unwrap() >= -1e-7);

    let header = fs::read_to_string(dir.path().join("analysis.csv")).unwrap();
    assert!(header.starts_with(&dicke_cli::output::ANALYSIS_COLUMNS.join(",")));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("analysis.json")).unwrap()).unwrap();
    assert_eq!(json[0]["status"], "ok");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(parse_config(manifest["config"].as_str().unwrap()).unwrap(), cfg);
}

#[test]
fn analyze_reproduces_stored_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = format!("{SMALL}\n[sweep]\ndurations = [0.2, 0.5, 0.9]\n");
    let cfg = parse_config(&sweep).unwrap();
    let sim = dir.path().join("sim");
    let s = execute(Verb::Simulate, &cfg, &RunOptions::new(&sim)).unwrap();
    let sw = dir.path().join("sweep");
    let t = execute(Verb::Sweep, &cfg, &RunOptions::new(&sw)).unwrap();
    assert_eq!(t.rows.len(), 3);
    assert_eq!(t.rows[1], s.rows[0]);

    for run in [&sim, &sw] {
        let before = fs::read(run.join("analysis.csv")).unwrap();
        let again = execute(Verb::Analyze, &cfg, &RunOptions::new(run)).unwrap();
        assert!(again.hygiene.is_none());
        assert_eq!(fs::read(run.join("analysis.csv")).unwrap(), before);
    }
}

#[test]
fn sweep_needs_durations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL).unwrap();
    let e = execute(Verb::Sweep, &cfg, &RunOptions::new(dir.path())).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolved_config_round_trips(
        distance in 0.01f64..2.0,
        s in 0.0f64..500.0,
        duration_ns in 1.0f64..400.0,
        seed in any::<u64>(),
        n in 1usize..5000,
        jitter in 0.0f64..0.3,
        polar in any::<bool>(),
        background in any::<bool>(),
        axis in prop::array::uniform3(-1.0f64..1.0).prop_filter("nonzero", |a| a.iter().any(|c| c.abs() > 1e-3)),
    ) {
        let text = format!(
            "[geometry]\nsampler = \"fixed_pair\"\ndistance = {distance}\ndipole_axis = [{}, {}, {}]\norientation = \"{}\"\n\
             [ensemble]\nn_realizations = {n}\nseed = {seed}\nintensity_jitter_rel = {jitter}\n\
             [drive]\ns = {s}\nduration_ns = {duration_ns}\n\
             [windows]\nfit_background = {background}\n",
            axis[0], axis[1], axis[2], if polar { "polar_angle" } else { "solid_angle" },
        );
        let c = parse_config(&text).unwrap();
        let echo = c.to_toml();
        let again = parse_config(&echo).unwrap();
        prop_assert_eq!(&again, &c);
        prop_assert_eq!(again.to_toml(), echo);
    }
}
