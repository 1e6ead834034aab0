//! Report records and the CSV bundle derived from them.

use std::fs;
use std::path::Path;

use poisson_entropy::entropy::CurvePoint;
use poisson_entropy::induced::{json_number, EntropyEstimate};
use poisson_entropy::stats::TestResult;
use serde::Serialize;
use serde_json::Value;

use crate::scenario::Scenario;
use crate::LabError;

/// Formula-level values versus simulation-level ones. Exact checks compare
/// values; statistical checks ask whether a declared interval or test level
/// is met.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    Exact,
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Distance from the reference to the interval is at most
    /// `tolerance · max(1, |reference|)`; an infinite reference needs an
    /// infinite value.
    Distance,
    /// `p ≥ tolerance`.
    PValue,
    /// `computed ≤ tolerance`.
    AtMost,
    /// `lower ≤ reference · (1 + tolerance)`.
    LowerBound,
    Equals,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub value: Value,
    pub source: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub class: Class,
    pub reference: Reference,
    pub computed: Value,
    pub interval: Option<[Value; 2]>,
    pub rule: Rule,
    pub tolerance: Value,
    pub pass: bool,
}

/// Distance from `x` to `[lo, hi]`.
fn gap(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

impl Check {
    pub fn distance(
        name: &str,
        class: Class,
        reference: f64,
        source: &str,
        est: &EntropyEstimate<f64>,
        tolerance: f64,
    ) -> Self {
        let pass = if reference.is_infinite() {
            est.value.is_infinite()
        } else {
            est.value.is_finite() && gap(reference, est.lower, est.upper) <= tolerance * reference.abs().max(1.0)
        };
        Self {
            name: name.into(),
            class,
            reference: Reference {
                value: json_number(reference),
                source: source.into(),
            },
            computed: json_number(est.value),
            interval: Some([json_number(est.lower), json_number(est.upper)]),
            rule: Rule::Distance,
            tolerance: json_number(tolerance),
            pass,
        }
    }

    pub fn p_value(name: &str, test: &TestResult, alpha: f64) -> Self {
        Self {
            name: name.into(),
            class: Class::Statistical,
            reference: Reference {
                value: json_number(alpha),
                source: "test level".into(),
            },
            computed: json_number(test.p_value),
            interval: None,
            rule: Rule::PValue,
            tolerance: json_number(alpha),
            pass: test.p_value >= alpha,
        }
    }

    pub fn at_most(name: &str, class: Class, computed: f64, bound: f64, source: &str) -> Self {
        Self {
            name: name.into(),
            class,
            reference: Reference {
                value: json_number(bound),
                source: source.into(),
            },
            computed: json_number(computed),
            interval: None,
            rule: Rule::AtMost,
            tolerance: json_number(bound),
            pass: computed <= bound,
        }
    }

    pub fn lower_bound(name: &str, reference: f64, source: &str, est: &EntropyEstimate<f64>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            class: Class::Statistical,
            reference: Reference {
                value: json_number(reference),
                source: source.into(),
            },
            computed: json_number(est.value),
            interval: Some([json_number(est.lower), json_number(est.upper)]),
            rule: Rule::LowerBound,
            tolerance: json_number(tolerance),
            pass: reference.is_infinite() || est.lower <= reference * (1.0 + tolerance),
        }
    }

    pub fn equals(name: &str, expected: &str, got: &str, source: &str) -> Self {
        Self {
            name: name.into(),
            class: Class::Exact,
            reference: Reference {
                value: Value::String(expected.into()),
                source: source.into(),
            },
            computed: Value::String(got.into()),
            interval: None,
            rule: Rule::Equals,
            tolerance: Value::Null,
            pass: expected == got,
        }
    }

    /// Mean within 3 standard errors of the reference.
    pub fn within_3se(name: &str, mean: f64, se: f64, reference: f64, source: &str) -> Self {
        Self {
            name: name.into(),
            class: Class::Statistical,
            reference: Reference {
                value: json_number(reference),
                source: source.into(),
            },
            computed: json_number(mean),
            interval: Some([json_number(mean - 3.0 * se), json_number(mean + 3.0 * se)]),
            rule: Rule::Distance,
            tolerance: json_number(0.0),
            pass: (mean - reference).abs() <= 3.0 * se || mean == reference,
        }
    }
}

/// One row of an entropy comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub quantity: String,
    pub class: Class,
    /// `formula`, `estimate` or `lower-bound`.
    pub role: String,
    pub value: Option<Value>,
    pub interval: Option<[Value; 2]>,
    /// Reason the row could not be computed.
    pub rejected: Option<String>,
    /// Agreement with the Krengel formula entry, when both exist.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    pub estimator: String,
    pub length: usize,
    pub value: Value,
    pub lower: Value,
    pub upper: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub index: usize,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<CurvePoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Vec<(usize, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<CompareRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint>>,
    /// Tests that fed the Bonferroni split, for the p-value table.
    #[serde(skip)]
    pub tests: Vec<(String, TestResult, f64)>,
}

impl ExperimentReport {
    pub fn new(index: usize, kind: &str, seed: Option<u64>) -> Self {
        Self {
            index,
            kind: kind.into(),
            seed,
            checks: Vec::new(),
            error: None,
            curve: None,
            criterion: None,
            table: None,
            trace: None,
            tests: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    /// Records a hypothesis test both as a check and in the p-value table.
    pub fn test(&mut self, name: &str, t: TestResult, alpha: f64) {
        self.checks.push(Check::p_value(name, &t, alpha));
        self.tests.push((name.into(), t, alpha));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    /// Root seed actually used (the scenario's unless overridden).
    pub seed: u64,
    /// False when the time budget stopped the run early.
    pub complete: bool,
    pub passed: bool,
    pub experiments: Vec<ExperimentReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn writer(dir: &Path, name: &str, header: &[&str]) -> Result<csv::Writer<fs::File>, LabError> {
    let mut w = csv::Writer::from_path(dir.join(name)).map_err(LabError::csv)?;
    w.write_record(header).map_err(LabError::csv)?;
    Ok(w)
}

fn num(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes `curve.csv`, `criterion.csv`, `p_values.csv` and `traces.csv`.
/// Every file is written, with only its header when there is nothing to plot.
pub fn emit_plot_data(report: &Report, dir: &Path) -> Result<(), LabError> {
    fs::create_dir_all(dir)?;
    let mut curve = writer(dir, "curve.csv", &["experiment", "n", "value", "lower", "upper"])?;
    let mut crit = writer(dir, "criterion.csv", &["experiment", "n", "value"])?;
    let mut pv = writer(
        dir,
        "p_values.csv",
        &["experiment", "test", "statistic", "dof", "p_value", "alpha", "pass"],
    )?;
    let mut tr = writer(
        dir,
        "traces.csv",
        &["experiment", "estimator", "length", "value", "lower", "upper"],
    )?;
    for e in &report.experiments {
        let id = e.index.to_string();
        for p in e.curve.iter().flatten() {
            curve
                .write_record([
                    id.clone(),
                    p.n.to_string(),
                    p.value.to_string(),
                    p.lower.to_string(),
                    p.upper.to_string(),
                ])
                .map_err(LabError::csv)?;
        }
        for (n, v) in e.criterion.iter().flatten() {
            crit.write_record([id.clone(), n.to_string(), v.to_string()])
                .map_err(LabError::csv)?;
        }
        for (name, t, alpha) in &e.tests {
            pv.write_record([
                id.clone(),
                name.clone(),
                t.statistic.to_string(),
                t.dof.to_string(),
                t.p_value.to_string(),
                alpha.to_string(),
                t.passes(*alpha).to_string(),
            ])
            .map_err(LabError::csv)?;
        }
        for p in e.trace.iter().flatten() {
            tr.write_record([
                id.clone(),
                p.estimator.clone(),
                p.length.to_string(),
                num(&p.value),
                num(&p.lower),
                num(&p.upper),
            ])
            .map_err(LabError::csv)?;
        }
    }
    for w in [&mut curve, &mut crit, &mut pv, &mut tr] {
        w.flush()?;
    }
    Ok(())
}
