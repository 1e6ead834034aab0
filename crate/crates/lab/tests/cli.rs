use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pelab"))
        .args(args)
        .output()
        .expect("pelab runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const HALF: &str = r#"
name = "half"
seed = 12
[system]
kind = "renewal"
f = [0.5, 0.5]
"#;

#[test]
fn empty_experiment_list_is_a_passing_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", HALF);
    let out = dir.path().join("out");
    let o = pelab(&["run", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("half/report.json")).unwrap()).unwrap();
    assert_eq!(report["experiments"].as_array().unwrap().len(), 0);
    assert_eq!(report["passed"], true);
    for (file, header) in [
        ("curve.csv", "experiment,n,value,lower,upper"),
        ("criterion.csv", "experiment,n,value"),
        ("p_values.csv", "experiment,test,statistic,dof,p_value,alpha,pass"),
        ("traces.csv", "experiment,estimator,length,value,lower,upper"),
    ] {
        assert_eq!(
            fs::read_to_string(out.join("half").join(file)).unwrap(),
            format!("{header}\n")
        );
    }
}

#[test]
fn mis_toleranced_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // At depth 8 the curve is still about 20% above log 2.
    let cfg = write(
        dir.path(),
        "tight.toml",
        &format!("{HALF}\n[[experiments]]\nkind = \"cylinder-curve\"\ndepth = 8\ntolerance = 0.01\n"),
    );
    let o = pelab(&["run", &cfg, "--out-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL cylinder curve at final depth"));
    let cfg = write(
        dir.path(),
        "loose.toml",
        &format!("{HALF}\n[[experiments]]\nkind = \"cylinder-curve\"\ndepth = 8\ntolerance = 0.5\n"),
    );
    let o = pelab(&["run", &cfg, "--out-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn wrong_expectation_fails() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
name = "tower"
seed = 1
[system]
kind = "tower"
epsilon0 = [1, 1]
stages = [{ cuts = 2, columns = 1 }, { cuts = 2, columns = 1 }, { cuts = 2, columns = 1 }]
[[experiments]]
kind = "tower-criterion"
tolerance = 1e-3
expect = "vanishing"
"#;
    let cfg = write(dir.path(), "t.toml", text);
    // Three stages leave c ε log(1/ε) = 3·2^-3·log 2 far above 1e-3.
    let o = pelab(&["run", &cfg, "--out-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("out/tower/criterion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{HALF}\n[[experiments]]\nkind = \"compare\"\nreturns = 20000\ncurve_depth = 10\nsuspension_horizon = 500\nreplicas = 8\nstatistical_tolerance = 0.5\n\n[[experiments]]\nkind = \"suspension-tests\"\ncells = [[1], [2]]\nsamples = 2000\nalpha = 0.01\nhorizon = 10\n"
    );
    let cfg = write(dir.path(), "c.toml", &text);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = pelab(&["run", &cfg, "--out-dir", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        outputs.push(out.join("half"));
    }
    for f in [
        "report.json",
        "curve.csv",
        "p_values.csv",
        "traces.csv",
        "criterion.csv",
    ] {
        let a = fs::read(outputs[0].join(f)).unwrap();
        let b = fs::read(outputs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    // A different seed changes the simulated entries.
    let out = dir.path().join("c");
    pelab(&["run", &cfg, "--seed", "13", "--out-dir", out.to_str().unwrap()]);
    assert_ne!(
        fs::read(out.join("half/report.json")).unwrap(),
        fs::read(outputs[0].join("report.json")).unwrap()
    );
}

#[test]
fn schema_errors_exit_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &format!("{HALF}\n[[experiments]]\nkind = \"markov-entropy\"\ntolerance = 0.0\n"),
    );
    let o = pelab(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiments[0].tolerance"));
    let cfg = write(
        dir.path(),
        "typo.toml",
        &format!("{HALF}\n[[experiments]]\nkind = \"markov-entropy\"\ntolerence = 1.0\n"),
    );
    let o = pelab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tolerence") && err.contains("line"), "{err}");
}

#[test]
fn exhausted_budget_marks_the_report_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.toml",
        &format!("{HALF}\n[[experiments]]\nkind = \"markov-entropy\"\ntolerance = 1e-12\n"),
    );
    let out = dir.path().join("out");
    let o = pelab(&["run", &cfg, "--budget-seconds", "0", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("half/report.json")).unwrap()).unwrap();
    assert_eq!(report["complete"], false);
}

#[test]
fn builtin_listing_and_transient_rows() {
    let o = pelab(&["list-scenarios"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("builtin:telescoping"));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = pelab(&["run", "builtin:transient", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("transient/report.json")).unwrap()).unwrap();
    let rows = report["experiments"][0]["table"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows
        .iter()
        .all(|r| r["rejected"].as_str().unwrap().contains("recurrent")));
}
