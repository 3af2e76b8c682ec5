mod common;

use common::{csvs, path_str, rmt_lab, small_configs, write, BIN};
use rmt_lab::run::RunManifest;

fn manifest(dir: &std::path::Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn zero_trials_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "trials = 0\n[locations]\nlambdas = [0.0]\n[grids]\ndelta = [0.5]\n");
    let out = tmp.path().join("out");
    let o = rmt_lab(&["smallball", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("INVALID_TRIALS"));
    assert!(!out.exists());
}

#[test]
fn validation_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // λ = 2.1√n with κ = 0.1
    let bulk = write(tmp.path(), "b.toml", "trials = 10\n[ensemble]\nn = 100\n[locations]\nlambdas = [2.1]\nunits = \"sqrt_n\"\nkappa = 0.1\n[grids]\ndelta = [0.5]\n");
    let o = rmt_lab(&["smallball", "--config", path_str(&bulk), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("BULK_VIOLATION"));
    // gap 0.1 with Δ = 1, σ = 1, n = 100: required 10
    let sep = write(tmp.path(), "s.toml", "trials = 10\n[ensemble]\nn = 100\n[locations]\nlambdas = [0.0, 0.1]\ndelta_sep = 1.0\nsep_exponent = 1.0\n[grids]\ndelta = [0.5]\n");
    let o = rmt_lab(&["smallball", "--config", path_str(&sep), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SEPARATION_VIOLATION"));
    assert!(!out.exists());
    // Rademacher: a warning, and the run goes ahead.
    let rad = write(tmp.path(), "r.toml", "trials = 50\n[ensemble]\nn = 30\nentry = \"rademacher\"\n[locations]\nlambdas = [0.0]\n[grids]\ndelta = [0.5]\n");
    let o = rmt_lab(&["smallball", "--config", path_str(&rad), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("OUTSIDE_HYPOTHESIS"));
    let m = manifest(&out);
    assert_eq!(m.diagnostics.len(), 1);
    assert_eq!(m.diagnostics[0].code, "OUTSIDE_HYPOTHESIS");
}

#[test]
fn bad_config_files_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = write(tmp.path(), "t.toml", "trails = 10\n");
    let o = rmt_lab(&["sample", "--config", path_str(&typo), "--out", path_str(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let mismatch = write(tmp.path(), "m.toml", "experiment = \"rigidity\"\ntrials = 3\n");
    let o = rmt_lab(&["sample", "--config", path_str(&mismatch), "--out", path_str(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("EXPERIMENT_MISMATCH"));
    let o = rmt_lab(&["sample", "--config", path_str(&tmp.path().join("missing.toml"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn golden_headers_and_manifest_contents() {
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let tmp = tempfile::tempdir().unwrap();
    for (kind, text) in small_configs() {
        let cfg = write(tmp.path(), &format!("{kind}.toml"), text);
        let out = tmp.path().join(kind.name());
        let o = rmt_lab(&[kind.name(), "--config", path_str(&cfg), "--out", path_str(&out), "--workers", "2"]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        let m = manifest(&out);
        assert_eq!(m.experiment, kind);
        assert_eq!(m.workers, 2);
        assert_eq!(m.tool, "rmt-lab");
        assert!(m.started_unix_ms <= m.finished_unix_ms);
        assert!(m.checks.iter().all(|c| c.passed), "{kind}: {:?}", m.checks);
        let mut listed = m.outputs.clone();
        listed.push("manifest.json".into());
        listed.sort();
        let mut present: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
        present.sort();
        assert_eq!(listed, present, "{kind}: no stray or .partial files");
        for (name, bytes) in csvs(&out) {
            let header = String::from_utf8(bytes).unwrap().lines().next().unwrap().to_string();
            let expected = std::fs::read_to_string(golden.join(&name)).unwrap();
            assert_eq!(header, expected.trim_end(), "{name}");
        }
    }
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (kind, text) = small_configs().into_iter().find(|(k, _)| k.name() == "smallball").unwrap();
    let cfg = write(tmp.path(), "c.toml", text);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        assert_eq!(rmt_lab(&[kind.name(), "--config", path_str(&cfg), "--out", path_str(d)]).status.code(), Some(0));
    }
    assert_eq!(csvs(&a), csvs(&b));
    assert_eq!(std::fs::read(a.join("smallball_fit.json")).unwrap(), std::fs::read(b.join("smallball_fit.json")).unwrap());
    // A different seed changes the numbers.
    let c = tmp.path().join("c");
    assert_eq!(rmt_lab(&[kind.name(), "--config", path_str(&cfg), "--out", path_str(&c), "--seed", "99"]).status.code(), Some(0));
    assert_ne!(csvs(&a), csvs(&c));
    assert_eq!(manifest(&c).master_seed, 99);
}

#[test]
fn smallball_pilot_lists_one_csv_and_one_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "experiment = \"smallball\"\nmaster_seed = 1\ntrials = 500\n[ensemble]\nn = 50\n[locations]\nlambdas = [0.0]\n[grids]\ndelta = [0.1, 0.2, 0.4, 0.8]\n[check]\nr_squared_min = 0.5\n",
    );
    let out = tmp.path().join("o");
    let o = rmt_lab(&["smallball", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let m = manifest(&out);
    assert_eq!(m.outputs, vec!["smallball.csv".to_string(), "smallball_fit.json".to_string()]);
    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("smallball_fit.json")).unwrap()).unwrap();
    assert!(fit["fit"]["slope"].as_f64().unwrap() > 0.0);
    assert_eq!(fit["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn failed_check_exits_3_but_keeps_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "trials = 200\n[ensemble]\nn = 40\n[locations]\nlambdas = [0.0]\n[grids]\ndelta = [0.2, 0.8]\n[check]\nslope_min = 10.0\n");
    let out = tmp.path().join("o");
    let o = rmt_lab(&["smallball", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL slope_min"));
    assert!(!manifest(&out).passed());
    // Oracle failures are reported the same way.
    let strict = write(tmp.path(), "o.toml", "[oracle]\nchecks = [\"distance_identity\"]\nidentity_rel_tol = 0.0\n");
    let o = rmt_lab(&["oracle", "--config", path_str(&strict), "--out", path_str(&tmp.path().join("or"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn default_oracle_run_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = rmt_lab(&["oracle", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(manifest(&out).checks.len(), 6);
}

#[test]
fn workers_env_and_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "trials = 3\nworkers = 2\n[ensemble]\nn = 10\n");
    let run = |env: Option<&str>, flag: Option<&str>, dir: &str| {
        let out = tmp.path().join(dir);
        let mut cmd = std::process::Command::new(BIN);
        cmd.args(["sample", "--config", path_str(&cfg), "--out", path_str(&out)]).env_remove("RMT_LAB_WORKERS").stdout(std::process::Stdio::null());
        if let Some(e) = env {
            cmd.env("RMT_LAB_WORKERS", e);
        }
        if let Some(f) = flag {
            cmd.args(["--workers", f]);
        }
        assert!(cmd.status().unwrap().success());
        manifest(&out).workers
    };
    assert_eq!(run(None, None, "a"), 2);
    assert_eq!(run(Some("3"), None, "b"), 3);
    assert_eq!(run(Some("3"), Some("4"), "c"), 4);
}

#[test]
fn report_renders_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert!(rmt_lab(&["oracle", "--out", path_str(&out)]).status.success());
    let o = rmt_lab(&["report", path_str(&out)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("| manifest | experiment |"));
    assert!(text.contains("| oracle |"));
    assert!(text.contains("6/6 pass"));
    let rep = tmp.path().join("rep");
    assert!(rmt_lab(&["report", path_str(&out.join("manifest.json")), "--out", path_str(&rep)]).status.success());
    assert_eq!(std::fs::read_to_string(rep.join("report.md")).unwrap(), text);
    assert_eq!(rmt_lab(&["report", path_str(&tmp.path().join("nope"))]).status.code(), Some(1));
}
