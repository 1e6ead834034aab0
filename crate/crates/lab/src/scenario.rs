//! Scenario files.
//!
//! A scenario names a system, a root seed and a list of experiments. Unset
//! optional fields take the defaults listed on each experiment.

use poisson_entropy::suspension::MarkedModel;
use poisson_entropy::systems::{State, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    MarkovEntropy(MarkovEntropy),
    QuasiFinite(QuasiFinite),
    CylinderCurve(CylinderCurve),
    TowerCriterion(TowerCriterion),
    SuspensionTests(SuspensionTests),
    MarkedLemma(MarkedLemma),
    Additivity(Additivity),
    Compare(Compare),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::MarkovEntropy(_) => "markov-entropy",
            Self::QuasiFinite(_) => "quasi-finite",
            Self::CylinderCurve(_) => "cylinder-curve",
            Self::TowerCriterion(_) => "tower-criterion",
            Self::SuspensionTests(_) => "suspension-tests",
            Self::MarkedLemma(_) => "marked-lemma",
            Self::Additivity(_) => "additivity",
            Self::Compare(_) => "compare",
        }
    }

    fn needs_markov(&self) -> bool {
        !matches!(self, Self::MarkedLemma(_) | Self::TowerCriterion(_))
    }

    /// Explicit per-experiment seed, if any.
    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::SuspensionTests(e) => e.seed,
            Self::MarkedLemma(e) => e.seed,
            Self::Additivity(e) => e.seed,
            Self::Compare(e) => e.seed,
            _ => None,
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(
            self,
            Self::SuspensionTests(_) | Self::MarkedLemma(_) | Self::Additivity(_) | Self::Compare(_)
        )
    }
}

/// Krengel formula, Parry step entropy and `μ(A)·H(ρ_A)` against each other,
/// plus an optional cylinder curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovEntropy {
    pub tolerance: f64,
    /// Default: the first state of the system.
    pub core: Option<Vec<State>>,
    /// Default 4096.
    pub horizon: Option<u64>,
    pub curve_depth: Option<usize>,
    /// Required with `curve_depth`.
    pub curve_tolerance: Option<f64>,
    /// Default 1e-6.
    pub max_pruned: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiFinite {
    pub horizon: u64,
    pub tolerance: f64,
    pub core: Option<Vec<State>>,
    pub unseen_cells: Option<u64>,
    /// `finite`, `divergent` or `inconclusive`.
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderCurve {
    pub depth: usize,
    pub tolerance: f64,
    /// Explicit cells; otherwise singletons of `core`.
    pub cells: Option<Vec<Vec<State>>>,
    pub core: Option<Vec<State>>,
    /// Default 1e-14.
    pub prune_tol: Option<f64>,
    /// Default 5e7.
    pub node_budget: Option<u64>,
    /// Default 1e-6.
    pub max_pruned: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerCriterion {
    /// The sequence counts as vanishing once below this.
    pub tolerance: f64,
    /// Default: `tolerance`.
    pub floor: Option<f64>,
    /// `vanishing`, `bounded-away` or `inconclusive`.
    pub expect: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuspensionTests {
    /// Two disjoint cells.
    pub cells: Vec<Vec<State>>,
    pub samples: usize,
    /// Family level, split over the tests by Bonferroni.
    pub alpha: f64,
    /// Stationarity is tested at times 0, horizon/2 and horizon.
    pub horizon: u64,
    /// Default: `samples`.
    pub covariance_samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkedLemma {
    pub models: Vec<MarkedModel>,
    pub samples: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Additivity {
    pub t: f64,
    pub s: f64,
    pub cell: Vec<State>,
    pub samples: usize,
    pub alpha: f64,
    pub tolerance: f64,
    pub seed: Option<u64>,
}

/// Every entropy route side by side.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compare {
    pub core: Option<Vec<State>>,
    /// Return-time horizon. Default 4096.
    pub horizon: Option<u64>,
    /// Default 12.
    pub curve_depth: Option<usize>,
    /// Induced returns simulated. Default 100000.
    pub returns: Option<usize>,
    /// Particles start in the window `[1, W]` (renewal) or around the centre (walks). Default 8.
    pub suspension_window: Option<i64>,
    /// Default 2000.
    pub suspension_horizon: Option<u64>,
    /// Default 32.
    pub replicas: Option<usize>,
    /// For formula entries. Default 1e-9.
    pub tolerance: Option<f64>,
    /// For simulated and truncated entries. Default 0.2.
    pub statistical_tolerance: Option<f64>,
    pub seed: Option<u64>,
}

/// A field-level problem found after parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Checker {
    out: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, field: String, message: impl Into<String>) {
        self.out.push(Diagnostic {
            field,
            message: message.into(),
        });
    }

    fn positive(&mut self, field: String, x: f64) {
        if !(x > 0.0 && x.is_finite()) {
            self.push(field, format!("must be positive and finite, got {x}"));
        }
    }

    fn opt_positive(&mut self, field: String, x: Option<f64>) {
        if let Some(x) = x {
            self.positive(field, x);
        }
    }

    fn level(&mut self, field: String, x: f64) {
        if !(x > 0.0 && x < 1.0) {
            self.push(field, format!("must lie in (0, 1), got {x}"));
        }
    }

    fn samples(&mut self, field: String, n: usize) {
        if n < 2 {
            self.push(field, format!("need at least 2, got {n}"));
        }
    }

    fn nonempty<T>(&mut self, field: String, v: &Option<Vec<T>>) {
        if v.as_ref().is_some_and(|v| v.is_empty()) {
            self.push(field, "must not be empty");
        }
    }

    fn one_of(&mut self, field: String, v: &str, allowed: &[&str]) {
        if !allowed.contains(&v) {
            self.push(field, format!("`{v}` is not one of {allowed:?}"));
        }
    }
}

const QUASI_STATUSES: [&str; 3] = ["finite", "divergent", "inconclusive"];
const VERDICTS: [&str; 3] = ["vanishing", "bounded-away", "inconclusive"];

impl Scenario {
    /// Parses TOML; syntax and schema errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Semantic checks the schema cannot express.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut c = Checker { out: Vec::new() };
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            c.push("name".into(), "must be a nonempty file-name-safe string");
        }
        let tower = matches!(self.system, Some(SystemSpec::Tower { .. }));
        for (i, e) in self.experiments.iter().enumerate() {
            let at = |f: &str| format!("experiments[{i}].{f}");
            if e.needs_markov() && (self.system.is_none() || tower) {
                c.push(at("kind"), format!("`{}` needs a Markov system", e.kind()));
            }
            match e {
                Experiment::MarkovEntropy(x) => {
                    c.positive(at("tolerance"), x.tolerance);
                    c.nonempty(at("core"), &x.core);
                    c.opt_positive(at("curve_tolerance"), x.curve_tolerance);
                    c.opt_positive(at("max_pruned"), x.max_pruned);
                    if x.curve_depth.is_some() != x.curve_tolerance.is_some() {
                        c.push(at("curve_tolerance"), "`curve_depth` and `curve_tolerance` go together");
                    }
                    if x.curve_depth == Some(0) {
                        c.push(at("curve_depth"), "must be at least 1");
                    }
                }
                Experiment::QuasiFinite(x) => {
                    c.positive(at("tolerance"), x.tolerance);
                    c.nonempty(at("core"), &x.core);
                    if x.horizon == 0 {
                        c.push(at("horizon"), "must be at least 1");
                    }
                    if let Some(s) = &x.expect {
                        c.one_of(at("expect"), s, &QUASI_STATUSES);
                    }
                }
                Experiment::CylinderCurve(x) => {
                    c.positive(at("tolerance"), x.tolerance);
                    c.nonempty(at("core"), &x.core);
                    c.nonempty(at("cells"), &x.cells);
                    c.opt_positive(at("max_pruned"), x.max_pruned);
                    if x.prune_tol.is_some_and(|p| !(p >= 0.0)) {
                        c.push(at("prune_tol"), "must be nonnegative");
                    }
                    if x.cells.is_some() && x.core.is_some() {
                        c.push(at("cells"), "give either `cells` or `core`, not both");
                    }
                    if x.depth == 0 {
                        c.push(at("depth"), "must be at least 1");
                    }
                }
                Experiment::TowerCriterion(x) => {
                    if !tower {
                        c.push(at("kind"), "`tower-criterion` needs a tower system");
                    }
                    c.positive(at("tolerance"), x.tolerance);
                    c.opt_positive(at("floor"), x.floor);
                    c.one_of(at("expect"), &x.expect, &VERDICTS);
                }
                Experiment::SuspensionTests(x) => {
                    if x.cells.len() != 2 || x.cells.iter().any(|c| c.is_empty()) {
                        c.push(at("cells"), "need exactly two nonempty cells");
                    } else if x.cells[0].iter().any(|s| x.cells[1].contains(s)) {
                        c.push(at("cells"), "cells must be disjoint");
                    }
                    c.samples(at("samples"), x.samples);
                    if let Some(n) = x.covariance_samples {
                        c.samples(at("covariance_samples"), n);
                    }
                    c.level(at("alpha"), x.alpha);
                }
                Experiment::MarkedLemma(x) => {
                    if x.models.is_empty() {
                        c.push(at("models"), "must not be empty");
                    }
                    for (j, m) in x.models.iter().enumerate() {
                        if let Err(e) = m.validate() {
                            c.push(at(&format!("models[{j}]")), e.to_string());
                        }
                    }
                    c.samples(at("samples"), x.samples);
                }
                Experiment::Additivity(x) => {
                    c.positive(at("t"), x.t);
                    if !(x.s >= 0.0 && x.s.is_finite()) {
                        c.push(at("s"), format!("must be nonnegative and finite, got {}", x.s));
                    }
                    if x.cell.is_empty() {
                        c.push(at("cell"), "must not be empty");
                    }
                    c.samples(at("samples"), x.samples);
                    c.level(at("alpha"), x.alpha);
                    c.positive(at("tolerance"), x.tolerance);
                }
                Experiment::Compare(x) => {
                    c.nonempty(at("core"), &x.core);
                    c.opt_positive(at("tolerance"), x.tolerance);
                    c.opt_positive(at("statistical_tolerance"), x.statistical_tolerance);
                    if x.curve_depth == Some(0) {
                        c.push(at("curve_depth"), "must be at least 1");
                    }
                    if x.returns.is_some_and(|n| n < 2) {
                        c.push(at("returns"), "need at least 2");
                    }
                    if x.suspension_window.is_some_and(|w| w < 1) {
                        c.push(at("suspension_window"), "must be at least 1");
                    }
                    if x.replicas == Some(0) {
                        c.push(at("replicas"), "must be at least 1");
                    }
                }
            }
        }
        c.out
    }
}
