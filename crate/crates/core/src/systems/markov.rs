//! Countable-state Markov shifts presented as a finite explicit window plus
//! analytic structure outside it.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::KahanSum;
use crate::rng;
use crate::scalar::Real;

use super::distribution::{Recurrence, ReturnDistribution, MASS_TOL};

/// Default explicit window for renewal chains with an infinite tail.
pub const DEFAULT_TAIL_WINDOW: u64 = 256;

/// Row sums must be within this of 1.
pub const ROW_TOL: f64 = 1e-12;

/// `qP = q` must hold within this on the window.
pub const STATIONARITY_TOL: f64 = 1e-10;

pub type State = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    Renewal,
    RandomWalk,
    GeneralTruncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "kebab-case")]
pub enum Warning {
    /// Return law has mass below one.
    TransientInput { missing_mass: f64 },
    /// The state graph splits into several communicating classes.
    Reducible { classes: u64 },
    /// Some represented rows send mass outside the window and nothing is
    /// known about the chain there.
    TruncatedRows { max_escape: f64 },
    /// Recurrence class was supplied rather than derived.
    AssumedRecurrence,
}

/// One row of the kernel restricted to the window.
#[derive(Debug, Clone)]
pub struct Row<R> {
    pub entries: Vec<(State, R)>,
    /// Mass sent to states outside the window.
    pub escape: R,
}

#[derive(Debug, Clone)]
struct MatrixKernel<R> {
    index: HashMap<State, usize>,
    rows: Vec<Vec<(State, R)>>,
    escape: Vec<R>,
    cdfs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
enum Kernel<R> {
    Renewal(ReturnDistribution<R>),
    Walk { steps: Vec<(i64, R)>, cdf: Vec<f64> },
    Matrix(MatrixKernel<R>),
}

/// A recurrent (or flagged transient) Markov shift with stationary measure `q`.
///
/// Normalization: `q_1 = 1` for renewal chains, `q ≡ 1` for random walks and
/// `Σ q = 1` for closed finite chains, all multiplied by [`scale`](Self::scale).
#[derive(Debug, Clone)]
pub struct MarkovSystem<R> {
    kind: ChainKind,
    kernel: Kernel<R>,
    states: Vec<State>,
    stationary: Vec<R>,
    scale: R,
    recurrence: Recurrence,
    warnings: Vec<Warning>,
}

/// Mass of a cylinder `[a_0, …, a_{n−1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder<R> {
    pub word: Vec<State>,
    pub mass: R,
}

/// Starting rule for [`sample_path`].
#[derive(Debug, Clone)]
pub enum Start {
    State(State),
    /// Drawn from `q` restricted to the given states.
    StationaryOn(Vec<State>),
}

/// Renewal chain on `{1, 2, …}`: `p_{1,n} = f_n`, `p_{n,n−1} = 1` for `n > 1`.
///
/// `window` bounds the explicit state range; it defaults to the support for
/// finite laws and to [`DEFAULT_TAIL_WINDOW`] otherwise.
pub fn build_renewal_chain<R: Real>(f: ReturnDistribution<R>, window: Option<u64>) -> Result<MarkovSystem<R>> {
    let width = match window {
        Some(0) => return Err(Error::InvalidArgument("renewal window must contain state 1".into())),
        Some(w) => w,
        None => f
            .support_len()
            .unwrap_or_else(|| (f.prefix().len() as u64).max(DEFAULT_TAIL_WINDOW)),
    }
    .max(1);
    let recurrence = f.classify();
    let mut warnings = Vec::new();
    let total = f.total_mass();
    if recurrence == Recurrence::Transient {
        warnings.push(Warning::TransientInput {
            missing_mass: 1.0 - total.as_f64(),
        });
    }
    // q_n = S(n−1) / S(0), stationary even when S(0) < 1.
    let surv = f.survivals(width);
    let stationary = (1..=width).map(|n| surv[(n - 1) as usize] / total).collect();
    Ok(MarkovSystem {
        kind: ChainKind::Renewal,
        kernel: Kernel::Renewal(f),
        states: (1..=width as i64).collect(),
        stationary,
        scale: R::one(),
        recurrence,
        warnings,
    })
}

/// Random walk on ℤ with a finitely supported step law, stationary counting measure.
pub fn build_random_walk<R: Real>(step: &[(i64, R)], window: (i64, i64)) -> Result<MarkovSystem<R>> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
    }
    let mut merged: Vec<(i64, R)> = Vec::new();
    for &(s, p) in step {
        if !(p.is_finite() && p >= R::zero()) {
            return Err(Error::InvalidKernel(format!("step {s} has weight {p}")));
        }
        if p == R::zero() {
            continue;
        }
        match merged.iter_mut().find(|(t, _)| *t == s) {
            Some(e) => e.1 = e.1 + p,
            None => merged.push((s, p)),
        }
    }
    if merged.is_empty() {
        return Err(Error::InvalidKernel("empty step support".into()));
    }
    merged.sort_by_key(|e| e.0);
    let total: KahanSum = merged.iter().map(|e| e.1.as_f64()).collect();
    if (total.value() - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidKernel(format!("step weights sum to {}", total.value())));
    }
    let mean: f64 = merged.iter().map(|&(s, p)| s as f64 * p.as_f64()).sum();
    let mut warnings = Vec::new();
    let recurrence = if mean.abs() > 1e-12 {
        Recurrence::Transient
    } else if merged.len() == 1 {
        // Only the zero step: every point is a fixed point of finite mass.
        warnings.push(Warning::Reducible { classes: u64::MAX });
        Recurrence::PositiveRecurrent
    } else {
        Recurrence::NullRecurrent
    };
    let g = merged
        .iter()
        .fold(0u64, |g, &(s, _)| num_integer::gcd(g, s.unsigned_abs()));
    if g > 1 {
        warnings.push(Warning::Reducible { classes: g });
    }
    let mut acc = 0.0;
    let cdf = merged
        .iter()
        .map(|e| {
            acc += e.1.as_f64();
            acc
        })
        .collect();
    Ok(MarkovSystem {
        kind: ChainKind::RandomWalk,
        kernel: Kernel::Walk { steps: merged, cdf },
        states: (lo..=hi).collect(),
        stationary: vec![R::one(); (hi - lo + 1) as usize],
        scale: R::one(),
        recurrence,
        warnings,
    })
}

/// Chain given by explicit sparse rows on a finite set of states.
///
/// Rows may sum to less than one (truncated countable chain); the missing
/// mass is treated as escaping the window. For closed chains the stationary
/// probability vector is computed; truncated chains must supply `stationary`
/// and the recurrence class.
pub fn build_general_chain<R: Real>(
    states: Vec<State>,
    rows: Vec<Vec<(State, R)>>,
    stationary: Option<Vec<R>>,
    recurrence: Option<Recurrence>,
) -> Result<MarkovSystem<R>> {
    if states.is_empty() || states.len() != rows.len() {
        return Err(Error::InvalidKernel("need one row per state".into()));
    }
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by_key(|&i| states[i]);
    let sorted: Vec<State> = order.iter().map(|&i| states[i]).collect();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidKernel("duplicate state labels".into()));
    }
    let index: HashMap<State, usize> = sorted.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut new_rows = Vec::with_capacity(rows.len());
    let mut escape = Vec::with_capacity(rows.len());
    let mut cdfs = Vec::with_capacity(rows.len());
    for &i in &order {
        let mut row: Vec<(State, R)> = Vec::new();
        for &(b, p) in &rows[i] {
            if !(p.is_finite() && p >= R::zero()) {
                return Err(Error::InvalidKernel(format!("p({}, {b}) = {p}", states[i])));
            }
            if !index.contains_key(&b) {
                return Err(Error::InvalidKernel(format!("target {b} is not a declared state")));
            }
            if p > R::zero() {
                match row.iter_mut().find(|e| e.0 == b) {
                    Some(e) => e.1 = e.1 + p,
                    None => row.push((b, p)),
                }
            }
        }
        row.sort_by_key(|e| e.0);
        let sum: KahanSum = row.iter().map(|e| e.1.as_f64()).collect();
        let sum = sum.value();
        if sum > 1.0 + ROW_TOL {
            return Err(Error::InvalidKernel(format!("row {} sums to {sum}", states[i])));
        }
        let mut acc = 0.0;
        cdfs.push(
            row.iter()
                .map(|e| {
                    acc += e.1.as_f64();
                    acc
                })
                .collect(),
        );
        escape.push(R::lit((1.0 - sum).max(0.0)));
        new_rows.push(row);
    }
    let kernel = MatrixKernel {
        index,
        rows: new_rows,
        escape,
        cdfs,
    };
    let max_escape = kernel.escape.iter().map(|e| e.as_f64()).fold(0.0, f64::max);
    let closed = max_escape <= ROW_TOL;
    let mut warnings = Vec::new();
    let classes = communicating_classes(&sorted, &kernel);
    if classes > 1 {
        warnings.push(Warning::Reducible { classes });
    }
    if !closed {
        warnings.push(Warning::TruncatedRows { max_escape });
    }
    let stationary = match stationary {
        Some(q) => {
            if q.len() != sorted.len() || q.iter().any(|x| !(x.is_finite() && *x >= R::zero())) {
                return Err(Error::InvalidKernel(
                    "stationary vector must be finite, nonnegative, one per state".into(),
                ));
            }
            order.iter().map(|&i| q[i]).collect()
        }
        None if closed => solve_stationary(&sorted, &kernel)?,
        None => {
            return Err(Error::InvalidKernel(
                "truncated chain needs an explicit stationary measure".into(),
            ))
        }
    };
    let recurrence = match recurrence {
        Some(r) => {
            warnings.push(Warning::AssumedRecurrence);
            r
        }
        None if closed => Recurrence::PositiveRecurrent,
        None => {
            return Err(Error::InvalidKernel(
                "truncated chain needs an explicit recurrence class".into(),
            ))
        }
    };
    Ok(MarkovSystem {
        kind: ChainKind::GeneralTruncated,
        kernel: Kernel::Matrix(kernel),
        states: sorted,
        stationary,
        scale: R::one(),
        recurrence,
        warnings,
    })
}

fn communicating_classes<R: Real>(states: &[State], k: &MatrixKernel<R>) -> u64 {
    let n = states.len();
    let fwd: Vec<Vec<usize>> = k
        .rows
        .iter()
        .map(|r| r.iter().map(|e| k.index[&e.0]).collect())
        .collect();
    let mut bwd = vec![Vec::new(); n];
    for (a, outs) in fwd.iter().enumerate() {
        for &b in outs {
            bwd[b].push(a);
        }
    }
    let reach = |adj: &Vec<Vec<usize>>, s: usize| {
        let mut seen = vec![false; n];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(a) = stack.pop() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen
    };
    let mut class = vec![usize::MAX; n];
    let mut count = 0;
    for s in 0..n {
        if class[s] != usize::MAX {
            continue;
        }
        let (f, b) = (reach(&fwd, s), reach(&bwd, s));
        for t in 0..n {
            if f[t] && b[t] {
                class[t] = count;
            }
        }
        count += 1;
    }
    count as u64
}

/// Solves `qP = q`, `Σq = 1` by Gaussian elimination; falls back to the
/// uniform vector for doubly stochastic reducible kernels.
fn solve_stationary<R: Real>(states: &[State], k: &MatrixKernel<R>) -> Result<Vec<R>> {
    let n = states.len();
    // A = Pᵀ − I with the last equation replaced by Σ q = 1.
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for (i, row) in k.rows.iter().enumerate() {
        for &(b, p) in row {
            a[k.index[&b]][i] += p.as_f64();
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] -= 1.0;
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    let mut singular = false;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("nonempty");
        if a[piv][col].abs() < 1e-13 {
            singular = true;
            break;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / a[col][col];
                if factor != 0.0 {
                    for c in col..=n {
                        a[r][c] -= factor * a[col][c];
                    }
                }
            }
        }
    }
    if !singular {
        return Ok((0..n).map(|i| R::lit(a[i][n] / a[i][i])).collect());
    }
    let uniform = 1.0 / n as f64;
    let mut col_sums = vec![0.0; n];
    for row in &k.rows {
        for &(b, p) in row {
            col_sums[k.index[&b]] += p.as_f64();
        }
    }
    if col_sums.iter().all(|c| (c - 1.0).abs() < ROW_TOL) {
        Ok(vec![R::lit(uniform); n])
    } else {
        Err(Error::InvalidKernel(
            "stationary measure is not unique; supply one explicitly".into(),
        ))
    }
}

impl<R: Real> MarkovSystem<R> {
    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn recurrence(&self) -> Recurrence {
        self.recurrence
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Explicitly represented states, sorted.
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn window(&self) -> (State, State) {
        (self.states[0], *self.states.last().expect("nonempty"))
    }

    pub fn scale(&self) -> R {
        self.scale
    }

    /// Same chain with stationary measure `t·q`.
    pub fn with_scale(&self, t: R) -> Result<Self> {
        if !(t.is_finite() && t > R::zero()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {t}")));
        }
        let mut out = self.clone();
        out.scale = self.scale * t;
        Ok(out)
    }

    pub fn renewal_law(&self) -> Option<&ReturnDistribution<R>> {
        match &self.kernel {
            Kernel::Renewal(f) => Some(f),
            _ => None,
        }
    }

    pub fn step_law(&self) -> Option<&[(i64, R)]> {
        match &self.kernel {
            Kernel::Walk { steps, .. } => Some(steps),
            _ => None,
        }
    }

    /// Largest jump of a random walk.
    pub fn max_step(&self) -> Option<u64> {
        self.step_law()
            .map(|s| s.iter().map(|e| e.0.unsigned_abs()).max().unwrap_or(0))
    }

    pub fn contains(&self, a: State) -> bool {
        let (lo, hi) = self.window();
        match self.kind {
            ChainKind::GeneralTruncated => self.states.binary_search(&a).is_ok(),
            _ => lo <= a && a <= hi,
        }
    }

    /// Whether the kernel and `q` are known at `a` (possibly analytically).
    pub fn in_domain(&self, a: State) -> bool {
        match &self.kernel {
            Kernel::Renewal(_) => a >= 1,
            Kernel::Walk { .. } => true,
            Kernel::Matrix(k) => k.index.contains_key(&a),
        }
    }

    fn check_domain(&self, a: State) -> Result<()> {
        if self.in_domain(a) {
            Ok(())
        } else {
            Err(Error::StateOutOfDomain(a))
        }
    }

    /// Whether the chain lives on finitely many states with no escaping mass.
    pub fn is_closed_finite(&self) -> bool {
        match &self.kernel {
            Kernel::Renewal(f) => f.support_len().is_some_and(|l| l <= self.states.len() as u64),
            Kernel::Walk { .. } => false,
            Kernel::Matrix(k) => k.escape.iter().all(|e| e.as_f64() <= ROW_TOL),
        }
    }

    /// Stationary mass `q_a`, including states outside the window where it is
    /// known analytically.
    pub fn stationary_at(&self, a: State) -> Result<R> {
        self.check_domain(a)?;
        if let Some(i) = self.window_index(a) {
            return Ok(self.stationary[i] * self.scale);
        }
        match &self.kernel {
            Kernel::Renewal(f) => Ok(f.survival((a - 1) as u64) / f.total_mass() * self.scale),
            Kernel::Walk { .. } => Ok(self.scale),
            Kernel::Matrix(_) => Err(Error::StateOutOfDomain(a)),
        }
    }

    /// Unscaled-then-scaled stationary vector over [`states`](Self::states).
    pub fn stationary(&self) -> Vec<R> {
        self.stationary.iter().map(|&q| q * self.scale).collect()
    }

    pub fn window_index(&self, a: State) -> Option<usize> {
        match self.kind {
            ChainKind::GeneralTruncated => self.states.binary_search(&a).ok(),
            _ => {
                let lo = self.states[0];
                let i = a.checked_sub(lo)?;
                (i >= 0 && (i as usize) < self.states.len()).then_some(i as usize)
            }
        }
    }

    /// Transition probability `p_{a,b}`.
    pub fn prob(&self, a: State, b: State) -> Result<R> {
        self.check_domain(a)?;
        self.check_domain(b)?;
        Ok(match &self.kernel {
            Kernel::Renewal(f) => {
                if a == 1 {
                    f.prob(b as u64)
                } else if b == a - 1 {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Kernel::Walk { steps, .. } => steps.iter().find(|e| e.0 == b - a).map_or(R::zero(), |e| e.1),
            Kernel::Matrix(k) => k.rows[k.index[&a]].iter().find(|e| e.0 == b).map_or(R::zero(), |e| e.1),
        })
    }

    /// Row of `a` restricted to the window; the remainder is reported as escape.
    pub fn row(&self, a: State) -> Result<Row<R>> {
        self.check_domain(a)?;
        let (lo, hi) = self.window();
        Ok(match &self.kernel {
            Kernel::Renewal(f) => {
                if a == 1 {
                    let entries: Vec<_> = (1..=hi)
                        .map(|b| (b, f.prob(b as u64)))
                        .filter(|e| e.1 > R::zero())
                        .collect();
                    let missing = R::one() - f.total_mass();
                    Row {
                        entries,
                        escape: f.survival(hi as u64) + missing.max(R::zero()),
                    }
                } else if a - 1 <= hi {
                    Row {
                        entries: vec![(a - 1, R::one())],
                        escape: R::zero(),
                    }
                } else {
                    Row {
                        entries: vec![],
                        escape: R::one(),
                    }
                }
            }
            Kernel::Walk { steps, .. } => {
                let mut entries = Vec::with_capacity(steps.len());
                let mut escape = R::zero();
                for &(s, p) in steps {
                    let b = a + s;
                    if lo <= b && b <= hi {
                        entries.push((b, p));
                    } else {
                        escape = escape + p;
                    }
                }
                Row { entries, escape }
            }
            Kernel::Matrix(k) => {
                let i = k.index[&a];
                Row {
                    entries: k.rows[i].clone(),
                    escape: k.escape[i],
                }
            }
        })
    }

    /// Largest `|Σ_b p_{a,b} − 1|` over the window (escape mass included).
    ///
    /// Truncated rows of a general chain count their escape as known mass.
    pub fn max_row_defect(&self) -> R {
        self.states
            .iter()
            .map(|&a| {
                let row = self.row(a).expect("window state");
                let s: KahanSum = row.entries.iter().map(|e| e.1.as_f64()).collect();
                R::lit((s.value() + row.escape.as_f64() - 1.0).abs())
            })
            .fold(R::zero(), R::max)
    }

    /// Largest `|(qP)_b − q_b|` over the window, using analytic predecessors.
    pub fn stationarity_defect(&self) -> R {
        let mut worst = 0.0f64;
        for &b in &self.states {
            let qb = self.stationary_at(b).expect("window").as_f64();
            let inflow = match &self.kernel {
                Kernel::Renewal(f) => {
                    let q1 = self.stationary_at(1).expect("state 1").as_f64();
                    let above = self.stationary_at(b + 1).expect("renewal").as_f64();
                    q1 * f.prob(b as u64).as_f64() + above
                }
                Kernel::Walk { steps, .. } => steps
                    .iter()
                    .map(|&(s, p)| self.stationary_at(b - s).expect("walk").as_f64() * p.as_f64())
                    .sum(),
                Kernel::Matrix(k) => {
                    let mut acc = KahanSum::new();
                    for (i, row) in k.rows.iter().enumerate() {
                        if let Some(e) = row.iter().find(|e| e.0 == b) {
                            acc.add(self.stationary[i].as_f64() * self.scale.as_f64() * e.1.as_f64());
                        }
                    }
                    acc.value()
                }
            };
            worst = worst.max((inflow - qb).abs());
        }
        R::lit(worst)
    }

    /// Draws the successor of `a`. `None` means the chain left every state it
    /// can describe (transient escape or truncated row).
    pub fn sample_next<G: Rng + ?Sized>(&self, a: State, rng: &mut G) -> Option<State> {
        match &self.kernel {
            Kernel::Renewal(f) => {
                if a == 1 {
                    f.sample(rng).map(|n| i64::try_from(n).unwrap_or(i64::MAX))
                } else {
                    Some(a - 1)
                }
            }
            Kernel::Walk { steps, cdf } => {
                let u: f64 = rng.random::<f64>() * cdf.last().copied().unwrap_or(1.0);
                let i = cdf.partition_point(|&c| c <= u).min(steps.len() - 1);
                Some(a + steps[i].0)
            }
            Kernel::Matrix(k) => {
                let i = *k.index.get(&a)?;
                let u: f64 = rng.random();
                let cdf = &k.cdfs[i];
                let j = cdf.partition_point(|&c| c <= u);
                k.rows[i].get(j).map(|e| e.0)
            }
        }
    }

    /// For renewal chains, where the deterministic descent from `a` hits
    /// `targets` (sorted) first: `(state, steps)`.
    pub(crate) fn renewal_descent_hit(&self, a: State, targets: &[State]) -> Option<(State, u64)> {
        if self.kind != ChainKind::Renewal || a <= 1 {
            return None;
        }
        let i = targets.partition_point(|&t| t < a);
        let below = if i == 0 { None } else { Some(targets[i - 1]) };
        let hit = below.filter(|&t| t >= 1).unwrap_or(1);
        Some((hit, (a - hit) as u64))
    }
}

/// `μ([a_0, …, a_{n−1}]) = q_{a_0} ∏ p_{a_{i−1}, a_i}`.
pub fn cylinder_measure<R: Real>(sys: &MarkovSystem<R>, word: &[State]) -> Result<Cylinder<R>> {
    let (&first, rest) = word
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty cylinder word".into()))?;
    let mut mass = sys.stationary_at(first)?;
    let mut prev = first;
    for &b in rest {
        mass = mass * sys.prob(prev, b)?;
        prev = b;
    }
    Ok(Cylinder {
        word: word.to_vec(),
        mass,
    })
}

/// Samples `length` consecutive states. The path stops early if the chain
/// escapes (transient return law or truncated row).
pub fn sample_path<R: Real>(sys: &MarkovSystem<R>, start: &Start, length: usize, seed: u64) -> Result<Vec<State>> {
    if length == 0 {
        return Err(Error::InvalidArgument("path length must be at least 1".into()));
    }
    let mut g = rng::stream(seed, 0);
    let x0 = match start {
        Start::State(a) => {
            if sys.stationary_at(*a)? <= R::zero() {
                return Err(Error::InvalidArgument(format!(
                    "start state {a} has zero stationary mass"
                )));
            }
            *a
        }
        Start::StationaryOn(set) => pick_stationary(sys, set, &mut g)?,
    };
    let mut path = Vec::with_capacity(length);
    path.push(x0);
    let mut x = x0;
    while path.len() < length {
        match sys.sample_next(x, &mut g) {
            Some(y) => {
                path.push(y);
                x = y;
            }
            None => break,
        }
    }
    Ok(path)
}

pub(crate) fn pick_stationary<R: Real, G: Rng + ?Sized>(
    sys: &MarkovSystem<R>,
    set: &[State],
    g: &mut G,
) -> Result<State> {
    let weights: Vec<f64> = set
        .iter()
        .map(|&a| sys.stationary_at(a).map(|q| q.as_f64()))
        .collect::<Result<_>>()?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidArgument(
            "start set has no finite positive stationary mass".into(),
        ));
    }
    let mut u = g.random::<f64>() * total;
    for (&a, w) in set.iter().zip(&weights) {
        if u < *w {
            return Ok(a);
        }
        u -= w;
    }
    Ok(*set.last().expect("nonempty"))
}

/// Classification helper re-exported for callers holding only a law.
pub fn is_transient_mass(total: f64) -> bool {
    total < 1.0 - MASS_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::distribution::TailDescriptor;

    fn half() -> MarkovSystem<f64> {
        build_renewal_chain(ReturnDistribution::finite(vec![0.5, 0.5]).unwrap(), None).unwrap()
    }

    #[test]
    fn renewal_half_half() {
        let sys = half();
        assert_eq!(sys.states(), &[1, 2]);
        assert_eq!(sys.stationary(), vec![1.0, 0.5]);
        assert_eq!(sys.recurrence(), Recurrence::PositiveRecurrent);
        assert!(sys.max_row_defect() < 1e-15);
        assert!(sys.stationarity_defect() < 1e-15);
    }

    #[test]
    fn renewal_telescoping_has_harmonic_stationary_measure() {
        let sys = build_renewal_chain(ReturnDistribution::<f64>::telescoping(), Some(500)).unwrap();
        assert_eq!(sys.recurrence(), Recurrence::NullRecurrent);
        for (i, q) in sys.stationary().iter().enumerate() {
            let n = i as f64 + 1.0;
            assert!((q - 1.0 / n).abs() < 1e-14 / n, "q_{n} = {q}");
        }
        assert!(sys.max_row_defect() < 1e-12);
        assert!(sys.stationarity_defect() < 1e-10);
        // Beyond the window, q is analytic.
        assert!((sys.stationary_at(10_000).unwrap() - 1e-4).abs() < 1e-17);
    }

    #[test]
    fn degenerate_loop() {
        let sys = build_renewal_chain(ReturnDistribution::finite(vec![1.0]).unwrap(), None).unwrap();
        assert_eq!(sys.states(), &[1]);
        assert_eq!(sys.stationary(), vec![1.0]);
        assert_eq!(sys.prob(1, 1).unwrap(), 1.0);
    }

    #[test]
    fn transient_renewal_is_flagged_not_rejected() {
        let sys = build_renewal_chain(ReturnDistribution::finite(vec![0.5]).unwrap(), None).unwrap();
        assert_eq!(sys.recurrence(), Recurrence::Transient);
        assert!(matches!(sys.warnings()[0], Warning::TransientInput { .. }));
    }

    #[test]
    fn tail_sum_identity() {
        let f =
            ReturnDistribution::<f64>::with_tail(vec![0.25, 0.25], TailDescriptor::Telescoping { scale: 1.5 }).unwrap();
        let sys = build_renewal_chain(f.clone(), Some(100)).unwrap();
        for n in 1..100i64 {
            let d = sys.stationary_at(n).unwrap() - sys.stationary_at(n + 1).unwrap();
            let fn_ = f.prob(n as u64);
            assert!((d - fn_).abs() <= 4.0 * f64::EPSILON * sys.stationary_at(n).unwrap());
        }
    }

    #[test]
    fn random_walk_examples() {
        let srw = build_random_walk(&[(1, 0.5), (-1, 0.5)], (-50, 50)).unwrap();
        assert_eq!(srw.recurrence(), Recurrence::NullRecurrent);
        assert!(srw.stationary().iter().all(|&q| q == 1.0));
        assert!(srw.stationarity_defect() < 1e-15);
        assert!(srw.warnings().is_empty());

        let drift = build_random_walk(&[(1, 1.0)], (0, 10)).unwrap();
        assert_eq!(drift.recurrence(), Recurrence::Transient);

        let parity = build_random_walk(&[(2, 0.5), (-2, 0.5)], (-10, 10)).unwrap();
        assert!(parity.warnings().contains(&Warning::Reducible { classes: 2 }));

        assert!(build_random_walk::<f64>(&[], (0, 1)).is_err());
        assert!(build_random_walk(&[(1, 0.0)], (0, 1)).is_err());
    }

    #[test]
    fn cylinder_examples() {
        let sys = half();
        assert_eq!(cylinder_measure(&sys, &[1, 2]).unwrap().mass, 0.5);
        assert_eq!(cylinder_measure(&sys, &[1, 3]).unwrap().mass, 0.0);
        let tel = build_renewal_chain(ReturnDistribution::<f64>::telescoping(), Some(50)).unwrap();
        assert!((cylinder_measure(&tel, &[2, 1, 1]).unwrap().mass - 0.25).abs() < 1e-16);
        assert!(matches!(
            cylinder_measure(&tel, &[0, 1]),
            Err(Error::StateOutOfDomain(0))
        ));
        assert!(cylinder_measure(&tel, &[]).is_err());
    }

    #[test]
    fn general_chain_stationary_and_classes() {
        let rows = vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.25), (2, 0.75)], vec![(0, 1.0)]];
        let sys = build_general_chain(vec![0, 1, 2], rows, None, None).unwrap();
        let q = sys.stationary();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(sys.stationarity_defect() < 1e-14);
        assert_eq!(sys.recurrence(), Recurrence::PositiveRecurrent);

        let perm = build_general_chain::<f64>(
            vec![0, 1, 2],
            vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![(2, 1.0)]],
            None,
            None,
        )
        .unwrap();
        assert!(perm.warnings().contains(&Warning::Reducible { classes: 2 }));
        assert!(perm.stationary().iter().all(|q| (q - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn truncated_chain_requires_assumptions() {
        let rows = vec![vec![(0, 0.5)], vec![(0, 1.0)]];
        assert!(build_general_chain(vec![0, 1], rows.clone(), None, None).is_err());
        let sys = build_general_chain(vec![0, 1], rows, Some(vec![1.0, 0.5]), Some(Recurrence::NullRecurrent)).unwrap();
        assert!(sys
            .warnings()
            .iter()
            .any(|w| matches!(w, Warning::TruncatedRows { .. })));
        assert!(!sys.is_closed_finite());
    }

    #[test]
    fn sample_paths() {
        let lp = build_renewal_chain(ReturnDistribution::finite(vec![1.0]).unwrap(), None).unwrap();
        assert_eq!(sample_path(&lp, &Start::State(1), 5, 9).unwrap(), vec![1; 5]);

        let srw = build_random_walk(&[(1, 0.5), (-1, 0.5)], (-50, 50)).unwrap();
        let p = sample_path(&srw, &Start::State(0), 10, 42).unwrap();
        assert_eq!(p, sample_path(&srw, &Start::State(0), 10, 42).unwrap());
        assert!(p.windows(2).all(|w| (w[1] - w[0]).abs() == 1));

        assert!(sample_path(&srw, &Start::State(0), 0, 1).is_err());
    }
}
