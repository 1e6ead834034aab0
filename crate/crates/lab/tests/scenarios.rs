use pelab::{load_scenario, run_scenario, RunOptions};

fn run(name: &str) -> pelab::Report {
    let s = load_scenario(&format!("builtin:{name}")).unwrap();
    run_scenario(&s, &RunOptions::default()).unwrap().report
}

#[test]
fn telescoping_three_way_and_curve() {
    let r = run("telescoping");
    assert!(r.passed && r.complete);
    let checks: Vec<&str> = r.experiments[0].checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(checks, ["parry step entropy", "return-time partition entropy"]);
    let curve = r.experiments[2].curve.as_ref().unwrap();
    assert_eq!(curve.len(), 20);
}

#[test]
fn random_walk_formula_is_infinite_and_estimates_are_lower_bounds() {
    let r = run("random-walk");
    assert!(r.passed);
    let table = r.experiments[0].table.as_ref().unwrap();
    assert_eq!(table[0].value.as_ref().unwrap(), "inf");
    for row in &table[3..] {
        assert_eq!(row.role, "lower-bound", "{row:?}");
        assert!(row.value.as_ref().unwrap().is_number());
    }
}

#[test]
fn half_half_entries_equal_log_two() {
    let r = run("half-half");
    assert!(r.passed);
    let table = r.experiments[1].table.as_ref().unwrap();
    for row in &table[..3] {
        let v = row.value.as_ref().unwrap().as_f64().unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn towers() {
    let r = run("rank-one-tower");
    assert!(r.passed);
    let seq = r.experiments[0].criterion.as_ref().unwrap();
    // Rank one: c_n = 1, ε_n = 2^-n.
    for &(n, v) in seq.iter().skip(1) {
        let eps = 0.5f64.powi(n as i32);
        assert!((v - eps * (1.0 / eps).ln()).abs() < 1e-12 * v.max(1e-300));
    }
    assert!(run("violating-tower").passed);
}

#[test]
fn suspension_scenario_passes() {
    let r = run("suspension");
    assert!(r.passed, "{}", r.to_json());
    assert_eq!(r.experiments[0].tests.len(), 6);
}
