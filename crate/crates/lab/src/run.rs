//! Scenario execution.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use poisson_entropy::entropy::{
    cylinder_entropy_curve, parry_markov_step_entropy, CurveOptions, EntropyCurve, LocalPartition, PlugInOptions,
};
use poisson_entropy::induced::{
    krengel_entropy_abramov, krengel_entropy_markov, quasi_finiteness, EntropyEstimate, Estimator, Method,
    QuasiFiniteOptions,
};
use poisson_entropy::rng::child_seed;
use poisson_entropy::stats::bonferroni;
use poisson_entropy::suspension::{
    additivity_scaling_check, covariance_identity_check, independence_check, marked_conditional_entropy,
    poisson_marginal_check, stationarity_check, suspension_entropy_estimate, SuspensionOptions,
};
use poisson_entropy::systems::{BuiltSystem, ChainKind, MarkovSystem, State, TowerSystem, Width};
use serde::Serialize;

use crate::report::{emit_plot_data, Check, Class, CompareRow, ExperimentReport, Report, TracePoint};
use crate::scenario::{
    Additivity, Compare, CylinderCurve, Experiment, MarkedLemma, MarkovEntropy, QuasiFinite, Scenario, SuspensionTests,
    TowerCriterion,
};
use crate::LabError;

const KRENGEL: &str = "krengel formula";
const DEFAULT_HORIZON: u64 = 4096;
const DEFAULT_MAX_PRUNED: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub budget: Option<Duration>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Runtime {
    pub index: usize,
    pub kind: String,
    pub millis: u128,
}

/// Wall-clock facts kept out of the report so reruns compare equal.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub scenario: String,
    pub version: &'static str,
    pub started_unix_ms: u128,
    pub total_millis: u128,
    pub budget_seconds: Option<f64>,
    pub runtimes: Vec<Runtime>,
}

pub struct Outcome {
    pub report: Report,
    pub metadata: Metadata,
}

impl Outcome {
    /// `report.json`, `metadata.json` and the CSV bundle.
    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.report.to_json())?;
        let mut meta = serde_json::to_string_pretty(&self.metadata)?;
        meta.push('\n');
        fs::write(dir.join("metadata.json"), meta)?;
        emit_plot_data(&self.report, dir)
    }
}

enum Target {
    None,
    Markov(MarkovSystem<f64>),
    Tower(BuiltSystem),
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

/// Runs every experiment in order. The budget is checked between
/// experiments; once exceeded the rest are skipped and the report is
/// marked incomplete.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<Outcome, LabError> {
    let problems = scenario.validate();
    if !problems.is_empty() {
        return Err(LabError::Invalid(problems));
    }
    let target = match &scenario.system {
        None => Target::None,
        Some(spec) => match spec.build().map_err(|e| LabError::Config(format!("system: {e}")))? {
            BuiltSystem::Markov(m) => Target::Markov(m),
            t => Target::Tower(t),
        },
    };
    let root = opts.seed.unwrap_or(scenario.seed);
    let started_unix_ms = now_ms();
    let clock = Instant::now();
    let mut experiments = Vec::new();
    let mut runtimes = Vec::new();
    let mut complete = true;
    for (i, e) in scenario.experiments.iter().enumerate() {
        if opts.budget.is_some_and(|b| clock.elapsed() > b) {
            complete = false;
            break;
        }
        let seed = e.seed().unwrap_or_else(|| child_seed(root, i as u64));
        let mut rep = ExperimentReport::new(i, e.kind(), e.is_randomized().then_some(seed));
        let t0 = Instant::now();
        if let Err(err) = run_experiment(e, &target, seed, &mut rep) {
            rep.error = Some(err.to_string());
        }
        runtimes.push(Runtime {
            index: i,
            kind: e.kind().into(),
            millis: t0.elapsed().as_millis(),
        });
        experiments.push(rep);
    }
    let passed = experiments.iter().all(|e| e.passed());
    Ok(Outcome {
        report: Report {
            scenario: scenario.clone(),
            seed: root,
            complete,
            passed,
            experiments,
        },
        metadata: Metadata {
            scenario: scenario.name.clone(),
            version: env!("CARGO_PKG_VERSION"),
            started_unix_ms,
            total_millis: clock.elapsed().as_millis(),
            budget_seconds: opts.budget.map(|b| b.as_secs_f64()),
            runtimes,
        },
    })
}

fn run_experiment(e: &Experiment, target: &Target, seed: u64, rep: &mut ExperimentReport) -> Result<(), LabError> {
    match (e, target) {
        (Experiment::MarkedLemma(x), _) => marked(x, seed, rep),
        (Experiment::TowerCriterion(x), Target::Tower(t)) => tower(x, t, rep),
        (_, Target::Markov(sys)) => match e {
            Experiment::MarkovEntropy(x) => markov_entropy(x, sys, rep),
            Experiment::QuasiFinite(x) => quasi(x, sys, rep),
            Experiment::CylinderCurve(x) => curve(x, sys, rep),
            Experiment::SuspensionTests(x) => suspension(x, sys, seed, rep),
            Experiment::Additivity(x) => additivity(x, sys, seed, rep),
            Experiment::Compare(x) => compare(x, sys, seed, rep),
            Experiment::MarkedLemma(_) | Experiment::TowerCriterion(_) => unreachable!("handled above"),
        },
        _ => Err(LabError::Config(format!(
            "`{}` does not apply to this system",
            e.kind()
        ))),
    }
}

/// `[1]` for renewal chains, the middle state otherwise.
fn default_core(sys: &MarkovSystem<f64>) -> Vec<State> {
    match sys.kind() {
        ChainKind::Renewal => vec![1],
        _ => vec![sys.states()[sys.states().len() / 2]],
    }
}

/// For a renewal chain induced on `{1}` the returns are i.i.d., so
/// `H(ρ_{1})` is the Krengel entropy itself.
fn return_partition_is_exact(sys: &MarkovSystem<f64>, core: &[State]) -> bool {
    sys.kind() == ChainKind::Renewal && core == [1]
}

fn curve_estimate(c: &EntropyCurve) -> Option<EntropyEstimate<f64>> {
    let p = c.points.last()?;
    Some(EntropyEstimate::new(p.value, p.lower, p.upper, Method::CylinderSum))
}

fn curve_checks(
    sys: &MarkovSystem<f64>,
    alpha: &LocalPartition,
    opts: CurveOptions,
    reference: f64,
    tolerance: f64,
    max_pruned: f64,
    rep: &mut ExperimentReport,
) -> Result<(), LabError> {
    let c = cylinder_entropy_curve(sys, alpha, opts)?;
    let Some(last) = curve_estimate(&c) else {
        return Err(LabError::Config("the curve has no points".into()));
    };
    rep.checks.push(Check::distance(
        "cylinder curve at final depth",
        Class::Exact,
        reference,
        KRENGEL,
        &last,
        tolerance,
    ));
    rep.checks.push(Check::at_most(
        "cylinder curve pruning band",
        Class::Exact,
        last.upper - last.lower,
        max_pruned,
        "declared pruning error",
    ));
    rep.checks.push(Check::equals(
        "cylinder curve depth reached",
        &c.requested_depth.to_string(),
        &c.points.len().to_string(),
        "requested depth",
    ));
    rep.curve = Some(c.points);
    Ok(())
}

fn markov_entropy(x: &MarkovEntropy, sys: &MarkovSystem<f64>, rep: &mut ExperimentReport) -> Result<(), LabError> {
    let k = krengel_entropy_markov(sys)?;
    let parry = parry_markov_step_entropy(sys)?;
    rep.checks.push(Check::distance(
        "parry step entropy",
        Class::Exact,
        k.value,
        KRENGEL,
        &parry,
        x.tolerance,
    ));
    let core = x.core.clone().unwrap_or_else(|| default_core(sys));
    if return_partition_is_exact(sys, &core) {
        let q = quasi_finiteness(
            sys,
            &core,
            QuasiFiniteOptions::new(x.horizon.unwrap_or(DEFAULT_HORIZON)),
        )?;
        rep.checks.push(Check::distance(
            "return-time partition entropy",
            Class::Exact,
            k.value,
            KRENGEL,
            &q.entropy,
            x.tolerance,
        ));
    }
    if let (Some(depth), Some(tol)) = (x.curve_depth, x.curve_tolerance) {
        let alpha = LocalPartition::singletons(&core)?;
        let max_pruned = x.max_pruned.unwrap_or(DEFAULT_MAX_PRUNED);
        curve_checks(sys, &alpha, CurveOptions::new(depth), k.value, tol, max_pruned, rep)?;
    }
    Ok(())
}

fn quasi(x: &QuasiFinite, sys: &MarkovSystem<f64>, rep: &mut ExperimentReport) -> Result<(), LabError> {
    let core = x.core.clone().unwrap_or_else(|| default_core(sys));
    let mut opts = QuasiFiniteOptions::new(x.horizon);
    opts.unseen_cells = x.unseen_cells;
    let r = quasi_finiteness(sys, &core, opts)?;
    let status = serde_json::to_value(r.status)?;
    let status = status.as_str().unwrap_or_default();
    if let Some(want) = &x.expect {
        rep.checks
            .push(Check::equals("quasi-finiteness status", want, status, "declared"));
    }
    if return_partition_is_exact(sys, &core) {
        let k = krengel_entropy_markov(sys)?;
        rep.checks.push(Check::distance(
            "return-time partition entropy",
            Class::Exact,
            k.value,
            KRENGEL,
            &r.entropy,
            x.tolerance,
        ));
    }
    Ok(())
}

fn curve(x: &CylinderCurve, sys: &MarkovSystem<f64>, rep: &mut ExperimentReport) -> Result<(), LabError> {
    let alpha = match (&x.cells, &x.core) {
        (Some(cells), _) => LocalPartition::new(cells.clone())?,
        (None, core) => LocalPartition::singletons(&core.clone().unwrap_or_else(|| default_core(sys)))?,
    };
    let mut opts = CurveOptions::new(x.depth);
    if let Some(p) = x.prune_tol {
        opts.prune_tol = p;
    }
    if let Some(b) = x.node_budget {
        opts.node_budget = b;
    }
    let k = krengel_entropy_markov(sys)?;
    curve_checks(
        sys,
        &alpha,
        opts,
        k.value,
        x.tolerance,
        x.max_pruned.unwrap_or(DEFAULT_MAX_PRUNED),
        rep,
    )
}

fn criterion_of<W: Width>(t: &TowerSystem<W>, x: &TowerCriterion, rep: &mut ExperimentReport) {
    let r = t.criterion(x.tolerance, x.floor.unwrap_or(x.tolerance));
    let verdict = serde_json::to_value(r.verdict).expect("verdict");
    rep.checks.push(Check::equals(
        "tower criterion verdict",
        &x.expect,
        verdict.as_str().unwrap_or_default(),
        "declared",
    ));
    rep.criterion = Some(r.sequence);
}

fn tower(x: &TowerCriterion, t: &BuiltSystem, rep: &mut ExperimentReport) -> Result<(), LabError> {
    match t {
        BuiltSystem::ExactTower(t) => criterion_of(t, x, rep),
        BuiltSystem::FloatTower(t) => criterion_of(t, x, rep),
        BuiltSystem::Markov(_) => return Err(LabError::Config("`tower-criterion` needs a tower".into())),
    }
    Ok(())
}

fn suspension(
    x: &SuspensionTests,
    sys: &MarkovSystem<f64>,
    seed: u64,
    rep: &mut ExperimentReport,
) -> Result<(), LabError> {
    let (a, b) = (&x.cells[0], &x.cells[1]);
    let ind = independence_check(sys, a, b, x.samples, child_seed(seed, 2))?;
    let mut tests = vec![
        (
            "poisson marginal, cell 0",
            poisson_marginal_check(sys, a, x.samples, child_seed(seed, 0))?.test,
        ),
        (
            "poisson marginal, cell 1",
            poisson_marginal_check(sys, b, x.samples, child_seed(seed, 1))?.test,
        ),
        ("independence chi-square", ind.chi_square),
        ("independence G-test", ind.g_test),
        (
            "stationarity, cell 0",
            stationarity_check(sys, a, x.horizon, x.samples, child_seed(seed, 3))?,
        ),
    ];
    if let Some(ks) = ind.ks {
        tests.push(("batch p-values uniform (KS)", ks));
    }
    let level = bonferroni(x.alpha, tests.len());
    for (name, t) in tests {
        rep.test(name, t, level);
    }
    let union: Vec<State> = a.iter().chain(b.iter()).copied().collect();
    let n = x.covariance_samples.unwrap_or(x.samples);
    let cov = covariance_identity_check(sys, &union, b, n, child_seed(seed, 4))?;
    rep.checks.push(Check::within_3se(
        "covariance of overlapping cells",
        cov.estimate,
        cov.standard_error,
        cov.reference,
        "intersection mass",
    ));
    Ok(())
}

fn marked(x: &MarkedLemma, seed: u64, rep: &mut ExperimentReport) -> Result<(), LabError> {
    for (j, m) in x.models.iter().enumerate() {
        let r = marked_conditional_entropy(m, x.samples, child_seed(seed, j as u64))?;
        rep.checks.push(Check::within_3se(
            &format!("model {j} conditional mark entropy"),
            r.estimate.value,
            r.standard_error,
            r.reference,
            "intensity-weighted mark entropy integral",
        ));
    }
    Ok(())
}

fn additivity(x: &Additivity, sys: &MarkovSystem<f64>, seed: u64, rep: &mut ExperimentReport) -> Result<(), LabError> {
    let r = additivity_scaling_check(sys, x.t, x.s, &x.cell, x.samples, seed)?;
    rep.checks.push(Check::at_most(
        "scaling h(t·q) = t·h(q)",
        Class::Exact,
        r.linearity_residual,
        x.tolerance,
        "relative residual",
    ));
    rep.checks.push(Check::at_most(
        "additivity h((t+s)·q) = t·h(q) + s·h(q)",
        Class::Exact,
        r.additivity_residual,
        x.tolerance,
        "relative residual",
    ));
    let tests: Vec<(&str, _)> = [
        ("superposition equals joint sample", r.superposition),
        ("superposition is Poisson", r.superposition_fit),
    ]
    .into_iter()
    .filter_map(|(n, t)| t.map(|t| (n, t)))
    .collect();
    let level = bonferroni(x.alpha, tests.len().max(1));
    for (name, t) in tests {
        rep.test(name, t, level);
    }
    Ok(())
}

fn row(quantity: &str, class: Class, role: &str, est: &Result<EntropyEstimate<f64>, String>) -> CompareRow {
    use poisson_entropy::induced::json_number;
    match est {
        Ok(e) => CompareRow {
            quantity: quantity.into(),
            class,
            role: role.into(),
            value: Some(json_number(e.value)),
            interval: Some([json_number(e.lower), json_number(e.upper)]),
            rejected: None,
            consistent: None,
        },
        Err(reason) => CompareRow {
            quantity: quantity.into(),
            class,
            role: role.into(),
            value: None,
            interval: None,
            rejected: Some(reason.clone()),
            consistent: None,
        },
    }
}

/// `(quantity, class, role, result, check against the formula)`.
type Entry<'a> = (
    &'a str,
    Class,
    &'a str,
    &'a Result<EntropyEstimate<f64>, String>,
    Option<Check>,
);

fn compare(x: &Compare, sys: &MarkovSystem<f64>, seed: u64, rep: &mut ExperimentReport) -> Result<(), LabError> {
    let core = x.core.clone().unwrap_or_else(|| default_core(sys));
    let tol = x.tolerance.unwrap_or(1e-9);
    let stol = x.statistical_tolerance.unwrap_or(0.2);
    let returns = x.returns.unwrap_or(100_000);
    let recurrent = sys.recurrence().is_recurrent();
    let guard =
        |f: &dyn Fn() -> poisson_entropy::Result<EntropyEstimate<f64>>| -> Result<EntropyEstimate<f64>, String> {
            if recurrent {
                f().map_err(|e| e.to_string())
            } else {
                Err(format!(
                    "{} system: the entropy identities need a recurrent system",
                    format!("{:?}", sys.recurrence()).to_lowercase()
                ))
            }
        };
    let alpha = LocalPartition::singletons(&core)?;
    let formula = guard(&|| krengel_entropy_markov(sys));
    let parry = guard(&|| parry_markov_step_entropy(sys));
    let horizon = x.horizon.unwrap_or(DEFAULT_HORIZON);
    let quasi = guard(&|| quasi_finiteness(sys, &core, QuasiFiniteOptions::new(horizon)).map(|r| r.entropy));
    let abramov = |n: usize| {
        guard(&|| krengel_entropy_abramov(sys, &core, n, &Estimator::PlugIn(PlugInOptions::default()), seed))
    };
    let sim = abramov(returns);
    let curve = guard(&|| {
        let c = cylinder_entropy_curve(sys, &alpha, CurveOptions::new(x.curve_depth.unwrap_or(12)))?;
        Ok(curve_estimate(&c).expect("depth ≥ 1"))
    });
    let mut opts = SuspensionOptions::default();
    if let Some(r) = x.replicas {
        opts.replicas = r;
    }
    let susp = guard(&|| {
        suspension_entropy_estimate(
            sys,
            &alpha,
            x.suspension_window.unwrap_or(8),
            x.suspension_horizon.unwrap_or(2000),
            child_seed(seed, 1),
            &opts,
        )
    });

    let reference = formula.as_ref().ok().map(|e| e.value);
    let infinite = reference.is_some_and(f64::is_infinite);
    let est_role = if infinite { "lower-bound" } else { "estimate" };
    let mut table = vec![row("krengel formula", Class::Exact, "formula", &formula)];
    let mut entries: Vec<Entry> = Vec::new();
    let exact_pair = return_partition_is_exact(sys, &core);
    if let Some(r) = reference {
        let dist = |name: &str, class, e: &Result<EntropyEstimate<f64>, String>, t| {
            e.as_ref().ok().map(|e| Check::distance(name, class, r, KRENGEL, e, t))
        };
        let lower = |name: &str, e: &Result<EntropyEstimate<f64>, String>| {
            e.as_ref().ok().map(|e| Check::lower_bound(name, r, KRENGEL, e, stol))
        };
        entries.push((
            "parry step entropy",
            Class::Exact,
            "formula",
            &parry,
            dist("parry step entropy", Class::Exact, &parry, tol),
        ));
        let q_check = exact_pair
            .then(|| dist("return-time partition entropy", Class::Exact, &quasi, tol))
            .flatten();
        entries.push((
            "return-time partition entropy",
            Class::Exact,
            if exact_pair { "formula" } else { "return-partition" },
            &quasi,
            q_check,
        ));
        let (sim_c, curve_c) = if infinite {
            (lower("abramov simulation", &sim), lower("cylinder curve", &curve))
        } else {
            (
                dist("abramov simulation", Class::Statistical, &sim, stol),
                dist("cylinder curve", Class::Statistical, &curve, stol),
            )
        };
        entries.push(("abramov simulation", Class::Statistical, est_role, &sim, sim_c));
        entries.push(("cylinder curve", Class::Statistical, est_role, &curve, curve_c));
        entries.push((
            "suspension estimate",
            Class::Statistical,
            "lower-bound",
            &susp,
            lower("suspension estimate", &susp),
        ));
    } else {
        entries.push(("parry step entropy", Class::Exact, "formula", &parry, None));
        entries.push((
            "return-time partition entropy",
            Class::Exact,
            "return-partition",
            &quasi,
            None,
        ));
        entries.push(("abramov simulation", Class::Statistical, est_role, &sim, None));
        entries.push(("cylinder curve", Class::Statistical, est_role, &curve, None));
        entries.push(("suspension estimate", Class::Statistical, "lower-bound", &susp, None));
    }
    for (name, class, role, est, check) in entries {
        let mut r = row(name, class, role, est);
        if let Some(c) = check {
            r.consistent = Some(c.pass);
            rep.checks.push(c);
        }
        table.push(r);
    }
    if let (true, Ok(full)) = (recurrent, &sim) {
        let mut trace = Vec::new();
        for n in [returns / 16, returns / 4] {
            if n >= 2 {
                if let Ok(e) = abramov(n) {
                    trace.push(trace_point(n, &e));
                }
            }
        }
        trace.push(trace_point(returns, full));
        rep.trace = Some(trace);
    }
    rep.table = Some(table);
    Ok(())
}

fn trace_point(n: usize, e: &EntropyEstimate<f64>) -> TracePoint {
    use poisson_entropy::induced::json_number;
    TracePoint {
        estimator: "abramov-plug-in".into(),
        length: n,
        value: json_number(e.value),
        lower: json_number(e.lower),
        upper: json_number(e.upper),
    }
}
