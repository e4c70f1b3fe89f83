use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"
[params]
gamma = 1.0
tau1 = 3.0
tau2 = 3.0
epsilon = 0.02

[schedule]
m1 = 16
depth = 2
"#;

fn exactdim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exactdim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let out = dir.join(name.replace(".toml", ""));
    let text = format!("{body}\n[output]\ndir = {:?}\n", out.display().to_string());
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn minimal_config_writes_the_full_report_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "min.toml", MINIMAL);
    let out = exactdim(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("min");
    for f in [
        "params.json",
        "bump.json",
        "regimes.json",
        "mu.csv",
        "mu.csv.meta.json",
        "mu.level1.csv",
        "bounds_level1.json",
        "bounds_level2.json",
        "stability.json",
        "periodize.json",
        "normality.json",
        "report.json",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let report = json(&run.join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["mode"], "desk");
    assert!((report["alpha_theory"].as_f64().unwrap() - 2.0 / 9.0).abs() < 1e-12);
    assert!(report["margins"].as_array().unwrap().iter().all(|m| m["bound"].is_number() || m["bound"].is_null()));
    let csv = std::fs::read_to_string(run.join("mu.csv")).unwrap();
    assert!(csv.starts_with("s,re,im,abs,band,bound,margin\n"));
}

#[test]
fn paper_strict_run_reports_failure_in_its_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace("depth = 2", "depth = 1\nmode = \"paper-strict\"");
    let cfg = config(dir.path(), "strict.toml", &body);
    let out = exactdim(&["run", "--config", &cfg], dir.path());
    // the synthetic stability check fails at M = 16
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("strict/report.json").exists());
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace("depth = 2", "depth = 1");
    let a = config(dir.path(), "a.toml", &body);
    let b = config(dir.path(), "b.toml", &body);
    assert!(exactdim(&["run", "--config", &a, "--threads", "1"], dir.path()).status.success());
    assert!(exactdim(&["run", "--config", &b, "--threads", "3"], dir.path()).status.success());
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        let x = std::fs::read(dir.path().join("a").join(&n)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
}

#[test]
fn inadmissible_parameters_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace("tau1 = 3.0", "tau1 = 2.5").replace("tau2 = 3.0", "tau2 = 2.5");
    let cfg = config(dir.path(), "bad.toml", &body);
    let out = exactdim(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inadmissible"));
    // the exponents are still reported
    let report = json(&dir.path().join("bad/report.json"));
    assert_eq!(report["admissible"], false);
    assert!(report["alpha_theory"].is_number());

    let out = exactdim(&["params", "--tau1", "2.5", "--tau2", "2.5", "--eps", "0.05"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn corrupted_config_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "[params]\ngamma = 1.0\ntau1 = \n[schedule").unwrap();
    let out = exactdim(&["run", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));

    let unknown = config(dir.path(), "extra.toml", &MINIMAL.replace("depth = 2", "depth = 2\nspeed = 11"));
    let out = exactdim(&["run", "--config", &unknown], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("speed"));
}

#[test]
fn budget_exhaustion_exits_with_code_5() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{MINIMAL}\n[windows]\ndense = 200\nwindow = 1000.0\nlog_samples = 10\ntail_samples = 5\ntol = 1e-12\nbudget = 10\nnormality_nmax = 100\n"
    );
    let cfg = config(dir.path(), "tight.toml", &body);
    let out = exactdim(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_is_an_io_error_and_bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exactdim(&["run", "--config", "nope.toml"], dir.path()).status.code(), Some(1));
    assert_eq!(exactdim(&["measure", "--depth", "x"], dir.path()).status.code(), Some(2));
    assert_eq!(exactdim(&["params", "--theta", "pi"], dir.path()).status.code(), Some(2));
}

#[test]
fn measure_dump_feeds_fit_and_normality() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = exactdim(
        &["--out-dir", d, "measure", "--M1", "64", "--depth", "1", "--dense", "10000", "--out", "mu1.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = exactdim(&["--out-dir", d, "fit", "--in", "mu1.csv", "--range", "1e1:1e4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = json(&dir.path().join("fit.json"));
    assert!(fit["exponent"].as_f64().unwrap() < 0.0);
    let out = exactdim(&["--out-dir", d, "normality", "--a", "2", "--m", "1", "--Nmax", "1000", "--in", "mu1.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let n = json(&dir.path().join("normality.json"));
    assert!(n["certified"].as_f64().unwrap().is_finite());
}

#[test]
fn gap_single_window_and_bump_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = exactdim(
        &["gap", "--tau1", "3", "--tau2", "3", "--x", "1/150+1e-12", "--q1", "100", "--q2", "200"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // x sits next to 1/150, which lies strictly between the two scales
    assert_eq!(v["report"]["violations"], serde_json::json!([[1, 150]]));

    let out = exactdim(&["bump", "--depth", "64", "--prefactor", "0.27", "--certify", "1e2:1e4"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["K"], 64);
    assert!(v["C"].as_f64().unwrap() > 0.0);
}
