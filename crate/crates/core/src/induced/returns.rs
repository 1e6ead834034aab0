//! Return-time partitions by taboo iteration.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::induced::estimate::{EntropyEstimate, Method};
use crate::numerics::KahanSum;
use crate::scalar::{Enclosure, Real};
use crate::systems::{ChainKind, MarkovSystem, ReturnDistribution, State};

/// Cells beyond the horizon known in closed form: `μ(A ∩ {φ_A = n}) = factor · f_{n + shift}`.
#[derive(Debug, Clone)]
pub struct AnalyticTail<R> {
    pub factor: R,
    pub shift: u64,
    pub law: ReturnDistribution<R>,
}

impl<R: Real> AnalyticTail<R> {
    pub fn cell(&self, n: u64) -> R {
        self.factor * self.law.prob(n + self.shift)
    }

    /// Total mass of the cells `n > horizon`.
    pub fn mass_beyond(&self, horizon: u64) -> R {
        self.factor * self.law.survival(horizon + self.shift)
    }

    /// Enclosure of `Σ_{n > horizon} η(cell n)` with `η(x) = x log(1/x)`.
    pub fn entropy_beyond(&self, horizon: u64) -> Enclosure<R> {
        // η(c f) = c η(f) + f η(c).
        let k = horizon + self.shift;
        self.law
            .entropy_beyond(k)
            .scale(self.factor)
            .shift(self.law.survival(k) * self.factor.neg_x_log_x())
    }
}

/// The partition `ρ_A` of `A` by first-return time.
#[derive(Debug, Clone)]
pub struct ReturnPartition<R> {
    pub core: Vec<State>,
    pub core_mass: R,
    /// `cell_masses[n - 1] = μ(A ∩ {φ_A = n})` for `n = 1..=horizon`.
    pub cell_masses: Vec<R>,
    /// Mass of `A` not represented by `cell_masses` (nor by `tail`).
    pub truncation_bound: R,
    pub tail: Option<AnalyticTail<R>>,
    pub warnings: Vec<String>,
}

impl<R: Real> ReturnPartition<R> {
    pub fn horizon(&self) -> u64 {
        self.cell_masses.len() as u64
    }

    /// `μ(A ∩ {φ_A = n})` where known.
    pub fn cell(&self, n: u64) -> Option<R> {
        if n == 0 {
            return Some(R::zero());
        }
        match self.cell_masses.get((n - 1) as usize) {
            Some(&m) => Some(m),
            None => self.tail.as_ref().map(|t| t.cell(n)),
        }
    }

    pub fn represented_mass(&self) -> R {
        let s: KahanSum = self.cell_masses.iter().map(|m| m.as_f64()).collect();
        let tail = self.tail.as_ref().map_or(R::zero(), |t| t.mass_beyond(self.horizon()));
        R::lit(s.value()) + tail
    }
}

fn normalize_core(sys: &impl CoreDomain, core: &[State]) -> Result<Vec<State>> {
    let set: BTreeSet<State> = core.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::InvalidArgument("the set A is empty".into()));
    }
    for &a in &set {
        if !sys.has(a) {
            return Err(Error::InvalidArgument(format!(
                "state {a} of A is outside the represented window"
            )));
        }
    }
    Ok(set.into_iter().collect())
}

trait CoreDomain {
    fn has(&self, a: State) -> bool;
}

impl<R: Real> CoreDomain for MarkovSystem<R> {
    fn has(&self, a: State) -> bool {
        self.contains(a)
    }
}

pub(crate) fn core_states<R: Real>(sys: &MarkovSystem<R>, core: &[State]) -> Result<Vec<State>> {
    normalize_core(sys, core)
}

/// Masses of `A ∩ {φ_A = n}` for `n ≤ horizon`, by propagating the
/// sub-probability flow that has left `A` and not yet come back.
///
/// For renewal chains the mass that jumps above the window descends
/// deterministically, so it is placed analytically instead of being lost.
/// `tail_tol` only controls the warning about unrepresented mass.
pub fn return_time_distribution<R: Real>(
    sys: &MarkovSystem<R>,
    core: &[State],
    horizon: u64,
    tail_tol: f64,
) -> Result<ReturnPartition<R>> {
    let core = normalize_core(sys, core)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let states = sys.states();
    let n = states.len();
    let idx = |s: State| sys.window_index(s);
    let in_core: Vec<bool> = states.iter().map(|s| core.binary_search(s).is_ok()).collect();
    let rows: Vec<_> = states.iter().map(|&a| sys.row(a).expect("window state")).collect();
    let core_mass: R = core
        .iter()
        .map(|&a| sys.stationary_at(a).expect("core in window"))
        .fold(R::zero(), |x, y| x + y);

    let renewal = sys.kind() == ChainKind::Renewal;
    let law = sys.renewal_law();
    let (_, hi) = sys.window();
    let top_core = *core.last().expect("nonempty");
    // Return time of a jump 1 → m above the window, counted from the jump.
    let above_return = |m: u64| 1 + m - top_core as u64;

    let mut cells = vec![R::zero(); horizon as usize];
    let mut lost = KahanSum::new();
    let mut beyond = KahanSum::new();
    // Escape from state 1 at flow step k with mass w lands on m > window.
    let place_above = |cells: &mut Vec<R>, k: u64, w: R, beyond: &mut KahanSum| {
        let f = law.expect("renewal");
        let first = hi as u64 + 1;
        let t0 = k + above_return(first);
        for t in t0..=horizon {
            let m = t - k - 1 + top_core as u64;
            cells[(t - 1) as usize] = cells[(t - 1) as usize] + w * f.prob(m);
        }
        let covered_to = horizon.saturating_sub(k + 1) + top_core as u64;
        beyond.add((w * f.survival(covered_to.max(hi as u64))).as_f64());
    };

    // Step 1 out of A.
    let mut flow = vec![R::zero(); n];
    let mut analytic_from_core = None;
    for (i, &a) in states.iter().enumerate() {
        if !in_core[i] {
            continue;
        }
        let qa = sys.stationary_at(a)?;
        for &(b, p) in &rows[i].entries {
            let j = idx(b).expect("window entry");
            if in_core[j] {
                cells[0] = cells[0] + qa * p;
            } else {
                flow[j] = flow[j] + qa * p;
            }
        }
        let esc = qa * rows[i].escape;
        if esc > R::zero() {
            if renewal && a == 1 {
                analytic_from_core = Some(qa);
            } else {
                lost.add(esc.as_f64());
            }
        }
    }
    if let Some(q1) = analytic_from_core {
        let f = law.expect("renewal");
        let missing = (R::one() - f.total_mass()).max(R::zero());
        lost.add((q1 * missing).as_f64());
        place_above(&mut cells, 0, q1, &mut beyond);
    }

    for t in 2..=horizon {
        let mut next = vec![R::zero(); n];
        let mut ret = R::zero();
        for (i, &w) in flow.iter().enumerate() {
            if w == R::zero() {
                continue;
            }
            for &(b, p) in &rows[i].entries {
                let j = idx(b).expect("window entry");
                if in_core[j] {
                    ret = ret + w * p;
                } else {
                    next[j] = next[j] + w * p;
                }
            }
            let esc = w * rows[i].escape;
            if esc > R::zero() {
                if renewal && states[i] == 1 {
                    let f = law.expect("renewal");
                    let missing = (R::one() - f.total_mass()).max(R::zero());
                    lost.add((w * missing).as_f64());
                    place_above(&mut cells, t - 1, w, &mut beyond);
                } else {
                    lost.add(esc.as_f64());
                }
            }
        }
        cells[(t - 1) as usize] = cells[(t - 1) as usize] + ret;
        flow = next;
    }
    let residual: KahanSum = flow.iter().map(|w| w.as_f64()).collect();

    // A closed-form tail exists when the only way above the window is the
    // jump out of state 1 ∈ A: cell n = q_1 f_{n + max A − 1}.
    let tail = match (renewal, analytic_from_core) {
        (true, Some(q1)) if core[0] == 1 => Some(AnalyticTail {
            factor: q1,
            shift: top_core as u64 - 1,
            law: law.expect("renewal").clone(),
        }),
        _ => None,
    };
    let mut truncation = residual.value() + lost.value();
    if tail.is_none() {
        truncation += beyond.value();
    } else {
        // Mass above the horizon is exactly the analytic tail; whatever the
        // jump lost to a defective law stays in `lost`.
    }
    let mut warnings = Vec::new();
    if truncation > tail_tol {
        warnings.push(format!(
            "unrepresented mass {truncation:.3e} exceeds tolerance {tail_tol:.1e} at horizon {horizon}"
        ));
    }
    Ok(ReturnPartition {
        core,
        core_mass,
        cell_masses: cells,
        truncation_bound: R::lit(truncation),
        tail,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuasiFiniteStatus {
    /// `H(ρ_A) < ∞` is certified by the returned interval.
    Finite,
    /// Divergence certified (closed-form tail or partial sums above the cap).
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct QuasiFiniteReport<R> {
    pub entropy: EntropyEstimate<R>,
    pub status: QuasiFiniteStatus,
    pub partition: ReturnPartition<R>,
}

#[derive(Debug, Clone, Copy)]
pub struct QuasiFiniteOptions {
    pub horizon: u64,
    pub tail_tol: f64,
    /// Number of unseen cells the residual mass may spread over. The upper
    /// bound is only valid when this really bounds them; the default
    /// (horizon) is a guess.
    pub unseen_cells: Option<u64>,
    /// Partial sums above this count as a divergence indicator.
    pub cap: f64,
}

impl QuasiFiniteOptions {
    pub fn new(horizon: u64) -> Self {
        Self {
            horizon,
            tail_tol: 1e-6,
            unseen_cells: None,
            cap: 100.0,
        }
    }
}

/// `H(ρ_A) = Σ_n μ(A ∩ {φ_A = n}) log(1 / μ(A ∩ {φ_A = n}))`, with an interval.
///
/// Without a closed-form tail the residual mass `m` is assumed to spread over
/// at most `K` unseen cells, adding at most `m log(K/m)`; with one, the
/// tail enclosure is exact.
pub fn quasi_finiteness<R: Real>(
    sys: &MarkovSystem<R>,
    core: &[State],
    opts: QuasiFiniteOptions,
) -> Result<QuasiFiniteReport<R>> {
    let part = return_time_distribution(sys, core, opts.horizon, opts.tail_tol)?;
    let partial: KahanSum = part.cell_masses.iter().map(|m| m.neg_x_log_x().as_f64()).collect();
    let partial = R::lit(partial.value());
    let m = part.truncation_bound;
    let k = opts.unseen_cells.unwrap_or(opts.horizon).max(1);
    let (mut lower, mut upper) = (partial, partial);
    let mut status;
    let mut est_meta = Vec::new();
    if let Some(tail) = &part.tail {
        let e = tail.entropy_beyond(part.horizon());
        lower = lower + e.lo;
        upper = upper + e.hi;
        status = if e.hi.is_finite() {
            QuasiFiniteStatus::Finite
        } else {
            QuasiFiniteStatus::Divergent
        };
        est_meta.push(("tail", "closed-form"));
    } else {
        status = QuasiFiniteStatus::Finite;
        est_meta.push(("tail", "unseen-cell-bound"));
    }
    if m > R::zero() {
        // Concavity: spread evenly over K cells maximizes, one cell minimizes.
        lower = lower + m.neg_x_log_x().min(R::zero());
        upper = upper + m * (R::from_count(k) / m).ln();
        if m.as_f64() > opts.tail_tol && status == QuasiFiniteStatus::Finite {
            status = QuasiFiniteStatus::Inconclusive;
        }
    }
    if partial.as_f64() > opts.cap {
        status = QuasiFiniteStatus::Divergent;
        upper = R::infinity();
    }
    let value = match status {
        QuasiFiniteStatus::Divergent => R::infinity(),
        _ if part.tail.is_some() => (lower + upper) / R::lit(2.0),
        _ => partial.max(lower).min(upper),
    };
    if status == QuasiFiniteStatus::Divergent {
        upper = R::infinity();
    }
    let mut entropy = EntropyEstimate::new(value, lower, upper, Method::ExactFormula)
        .with_meta("status", serde_json::to_value(status).expect("status"))
        .with_meta("horizon", part.horizon())
        .with_meta("unseen_cells", k)
        .with_meta_number("truncation_mass", m.as_f64())
        .with_meta_number("partial_sum", partial.as_f64());
    for (key, v) in est_meta {
        entropy = entropy.with_meta(key, v);
    }
    Ok(QuasiFiniteReport {
        entropy,
        status,
        partition: part,
    })
}
