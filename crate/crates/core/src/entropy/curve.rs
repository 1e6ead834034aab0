//! Local partitions and the cylinder-sum curve `n ↦ (1/n) Σ_{a ∈ α_0^{n−1}} f(μ(a))`.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::poisson_fn::poisson_entropy_function;
use crate::error::{Error, Result};
use crate::numerics::KahanSum;
use crate::scalar::Real;
use crate::systems::{ChainKind, MarkovSystem, State};

/// Finite-measure cells inside a core `A`, plus the complement of `A` as
/// the last cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalPartition {
    core: Vec<State>,
    cells: Vec<Vec<State>>,
}

impl LocalPartition {
    pub fn new(cells: Vec<Vec<State>>) -> Result<Self> {
        if cells.is_empty() || cells.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidPartition("cells must be nonempty".into()));
        }
        let mut seen = BTreeSet::new();
        let mut norm = Vec::with_capacity(cells.len());
        for c in cells {
            let set: BTreeSet<State> = c.into_iter().collect();
            for &s in &set {
                if !seen.insert(s) {
                    return Err(Error::InvalidPartition(format!("state {s} lies in two cells")));
                }
            }
            norm.push(set.into_iter().collect());
        }
        Ok(Self {
            core: seen.into_iter().collect(),
            cells: norm,
        })
    }

    /// One cell per state of the core.
    pub fn singletons(core: &[State]) -> Result<Self> {
        Self::new(core.iter().map(|&s| vec![s]).collect())
    }

    /// The core as a single cell: `{A, A^c}`.
    pub fn core_only(core: &[State]) -> Result<Self> {
        Self::new(vec![core.to_vec()])
    }

    pub fn core(&self) -> &[State] {
        &self.core
    }

    pub fn cells(&self) -> &[Vec<State>] {
        &self.cells
    }

    /// Label of the complement cell.
    pub fn complement_label(&self) -> usize {
        self.cells.len()
    }

    pub fn label_of(&self, s: State) -> usize {
        self.cells
            .iter()
            .position(|c| c.binary_search(&s).is_ok())
            .unwrap_or(self.cells.len())
    }

    pub fn validate_for<R: Real>(&self, sys: &MarkovSystem<R>) -> Result<()> {
        for &s in &self.core {
            if !sys.contains(s) {
                return Err(Error::InvalidPartition(format!("core state {s} is outside the window")));
            }
        }
        Ok(())
    }

    pub fn cell_masses<R: Real>(&self, sys: &MarkovSystem<R>) -> Result<Vec<R>> {
        self.validate_for(sys)?;
        self.cells
            .iter()
            .map(|c| c.iter().map(|&s| sys.stationary_at(s)).sum::<Result<R>>())
            .collect()
    }

    /// `μ(A^c)`: infinite unless the chain is a closed finite one.
    pub fn complement_mass<R: Real>(&self, sys: &MarkovSystem<R>) -> Result<R> {
        if !sys.is_closed_finite() {
            return Ok(R::infinity());
        }
        let total: R = sys.stationary().into_iter().fold(R::zero(), |a, b| a + b);
        let core: R = self.cell_masses(sys)?.into_iter().fold(R::zero(), |a, b| a + b);
        Ok((total - core).max(R::zero()))
    }
}

/// The kernel on an extended window, large enough that mass leaving it
/// cannot come back to the core within the enumeration depth; such mass
/// goes to a sink that stays in the complement.
struct ExtKernel {
    rows: Vec<Vec<(u32, f64)>>,
    sink: Vec<f64>,
    label: Vec<u16>,
    q: Vec<f64>,
    finite: bool,
    ignored_escape: f64,
}

impl ExtKernel {
    fn build<R: Real>(sys: &MarkovSystem<R>, alpha: &LocalPartition, depth: usize) -> Result<Self> {
        alpha.validate_for(sys)?;
        let (lo, hi) = sys.window();
        let finite = sys.is_closed_finite();
        let states: Vec<State> = match sys.kind() {
            ChainKind::Renewal if !finite => (1..=hi + depth as i64).collect(),
            ChainKind::RandomWalk => {
                let d = sys.max_step().unwrap_or(1).max(1) as i64;
                (lo - d * depth as i64..=hi + d * depth as i64).collect()
            }
            _ => sys.states().to_vec(),
        };
        let first = states[0];
        let contiguous = sys.kind() != ChainKind::GeneralTruncated;
        let index = |s: State| -> Option<usize> {
            if contiguous {
                let i = s - first;
                (i >= 0 && (i as usize) < states.len()).then_some(i as usize)
            } else {
                states.binary_search(&s).ok()
            }
        };
        let mut rows = Vec::with_capacity(states.len());
        let mut sink = Vec::with_capacity(states.len());
        let mut ignored_escape = 0.0f64;
        for &a in &states {
            let mut row = Vec::new();
            let mut out = 0.0;
            let mut kept = 0.0;
            match sys.kind() {
                ChainKind::Renewal => {
                    let f = sys.renewal_law().expect("renewal");
                    if a == 1 {
                        for (i, &b) in states.iter().enumerate() {
                            let p = f.prob(b as u64).as_f64();
                            if p > 0.0 {
                                row.push((i as u32, p));
                                kept += p;
                            }
                        }
                        out = (1.0 - kept).max(0.0);
                    } else {
                        row.push((index(a - 1).expect("descent stays in range") as u32, 1.0));
                    }
                }
                ChainKind::RandomWalk => {
                    for &(s, p) in sys.step_law().expect("walk") {
                        match index(a + s) {
                            Some(j) => row.push((j as u32, p.as_f64())),
                            None => out += p.as_f64(),
                        }
                    }
                }
                ChainKind::GeneralTruncated => {
                    let r = sys.row(a)?;
                    for &(b, p) in &r.entries {
                        row.push((index(b).expect("window") as u32, p.as_f64()));
                    }
                    out = r.escape.as_f64();
                    ignored_escape = ignored_escape.max(out);
                }
            }
            rows.push(row);
            sink.push(out);
        }
        let label = states.iter().map(|&s| alpha.label_of(s) as u16).collect();
        let q = states
            .iter()
            .map(|&s| sys.stationary_at(s).map(|x| x.as_f64()))
            .collect::<Result<_>>()?;
        Ok(Self {
            rows,
            sink,
            label,
            q,
            finite,
            ignored_escape,
        })
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    /// `(v P, sink inflow)`, not yet split by label.
    fn step(&self, v: &[f64]) -> (Vec<f64>, f64) {
        let mut next = vec![0.0; v.len()];
        let mut sink = 0.0;
        for (s, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &(t, p) in &self.rows[s] {
                next[t as usize] += w * p;
            }
            sink += w * self.sink[s];
        }
        (next, sink)
    }
}

#[derive(Clone)]
enum Node {
    /// Word `C^j` in the infinite regime: infinite measure, contributes 0.
    AllComplement(usize),
    Finite {
        vec: Vec<f64>,
        sink: f64,
        mass: f64,
    },
}

struct Enumerator<'a> {
    k: &'a ExtKernel,
    labels: usize,
    complement: usize,
    /// `ρ_j(s) = μ(x_0, …, x_{j−1} ∈ A^c, x_j = s)` for `s ∈ A`.
    rho: Vec<Vec<f64>>,
}

fn finite_node(vec: Vec<f64>, sink: f64) -> Node {
    let s: KahanSum = vec.iter().copied().collect();
    let mass = s.value() + sink;
    Node::Finite { vec, sink, mass }
}

impl<'a> Enumerator<'a> {
    fn new(k: &'a ExtKernel, alpha: &LocalPartition, depth: usize) -> Self {
        let complement = alpha.complement_label();
        let mut rho = Vec::new();
        if !k.finite {
            let in_core = |s: usize| (k.label[s] as usize) != complement;
            let q_core: Vec<f64> = (0..k.len()).map(|s| if in_core(s) { k.q[s] } else { 0.0 }).collect();
            let mut acc: Vec<KahanSum> = vec![KahanSum::new(); k.len()];
            rho.push(q_core.clone());
            let (mut t, _) = k.step(&q_core);
            for _ in 1..depth {
                for s in 0..k.len() {
                    if in_core(s) {
                        acc[s].add(t[s]);
                    }
                }
                rho.push(
                    (0..k.len())
                        .map(|s| {
                            if in_core(s) {
                                (k.q[s] - acc[s].value()).max(0.0)
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                );
                for (s, x) in t.iter_mut().enumerate() {
                    if in_core(s) {
                        *x = 0.0;
                    }
                }
                t = k.step(&t).0;
            }
        }
        Self {
            k,
            labels: complement + 1,
            complement,
            rho,
        }
    }

    fn root(&self) -> Node {
        if self.k.finite {
            finite_node(self.k.q.clone(), 0.0)
        } else {
            Node::AllComplement(0)
        }
    }

    /// Children by label, in label order. The root is the empty word, whose
    /// "vector" is `q` itself; its children are restrictions, not steps.
    fn children(&self, node: &Node, is_root: bool) -> Vec<Node> {
        let restrict = |v: &[f64], sink: f64, l: usize| {
            let out: Vec<f64> = v
                .iter()
                .zip(&self.k.label)
                .map(|(&x, &lab)| if lab as usize == l { x } else { 0.0 })
                .collect();
            finite_node(out, if l == self.complement { sink } else { 0.0 })
        };
        match node {
            Node::AllComplement(j) => (0..self.labels)
                .map(|l| {
                    if l == self.complement {
                        Node::AllComplement(j + 1)
                    } else {
                        restrict(&self.rho[*j], 0.0, l)
                    }
                })
                .collect(),
            Node::Finite { vec, sink, .. } => {
                if is_root {
                    return (0..self.labels).map(|l| restrict(vec, *sink, l)).collect();
                }
                let (next, inflow) = self.k.step(vec);
                (0..self.labels).map(|l| restrict(&next, sink + inflow, l)).collect()
            }
        }
    }
}

/// One point of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyCurve {
    pub points: Vec<CurvePoint>,
    /// `liminf` proxy: the smallest value over the second half of the depths.
    pub h_hat: f64,
    pub last: f64,
    pub requested_depth: usize,
    /// The node budget forced a shallower curve.
    pub truncated: bool,
    pub nodes: u64,
    pub pruned_mass: f64,
    /// Largest per-row escape treated as staying in the complement (truncated
    /// general chains only).
    pub assumed_escape: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CurveOptions {
    pub depth: usize,
    pub prune_tol: f64,
    pub node_budget: u64,
}

impl CurveOptions {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            prune_tol: 1e-14,
            node_budget: 50_000_000,
        }
    }
}

#[derive(Default)]
struct Tally {
    sums: Vec<KahanSum>,
    /// Per depth: (count, total mass, Σ f(mass)) of pruned nodes.
    pruned: Vec<(u64, f64, f64)>,
}

impl Tally {
    fn new(depth: usize) -> Self {
        Self {
            sums: vec![KahanSum::new(); depth + 1],
            pruned: vec![(0, 0.0, 0.0); depth + 1],
        }
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.add(b.value());
        }
        for (a, b) in self.pruned.iter_mut().zip(&other.pruned) {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        }
    }
}

fn pf(m: f64) -> f64 {
    poisson_entropy_function(m).expect("mass is nonnegative")
}

struct Search<'a> {
    e: &'a Enumerator<'a>,
    depth: usize,
    prune_tol: f64,
    budget: u64,
    nodes: &'a AtomicU64,
    over: &'a AtomicBool,
}

impl Search<'_> {
    fn visit(&self, node: &Node, d: usize, tally: &mut Tally) {
        if self.over.load(Ordering::Relaxed) {
            return;
        }
        if self.nodes.fetch_add(1, Ordering::Relaxed) >= self.budget {
            self.over.store(true, Ordering::Relaxed);
            return;
        }
        if let Node::Finite { mass, .. } = node {
            if d > 0 {
                tally.sums[d].add(pf(*mass));
            }
            if d > 0 && *mass < self.prune_tol && d < self.depth {
                let p = &mut tally.pruned[d];
                p.0 += 1;
                p.1 += mass;
                p.2 += pf(*mass);
                return;
            }
        }
        if d == self.depth {
            return;
        }
        for child in self.e.children(node, d == 0) {
            if let Node::Finite { mass, .. } = child {
                if mass <= 0.0 {
                    continue;
                }
            }
            self.visit(&child, d + 1, tally);
        }
    }
}

/// Extra lower/upper contributions at depth `d` from subtrees pruned at
/// shallower depths: `Σ f(m)` (subadditivity of `f`) and `N K f(M / (N K))`
/// with `K` the number of words a pruned node can branch into (concavity).
fn pruning_band(pruned: &[(u64, f64, f64)], labels: usize, d: usize) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (k, &(count, mass, fsum)) in pruned.iter().enumerate().take(d).skip(1) {
        if count == 0 {
            continue;
        }
        lo += fsum;
        let spread = (labels as f64).powi((d - k) as i32).min(1e300) * count as f64;
        hi += spread * pf(mass / spread);
    }
    (lo, hi)
}

fn run_curve(k: &ExtKernel, alpha: &LocalPartition, depth: usize, prune_tol: f64, budget: u64) -> Option<(Tally, u64)> {
    let e = Enumerator::new(k, alpha, depth);
    let nodes = AtomicU64::new(0);
    let over = AtomicBool::new(false);
    let search = Search {
        e: &e,
        depth,
        prune_tol,
        budget,
        nodes: &nodes,
        over: &over,
    };
    // Expand a few levels serially, then search the subtrees in parallel.
    let split = depth.min(4);
    let mut tally = Tally::new(depth);
    let mut frontier = vec![e.root()];
    for d in 0..split {
        let mut next = Vec::new();
        for node in &frontier {
            nodes.fetch_add(1, Ordering::Relaxed);
            if let Node::Finite { mass, .. } = node {
                if d > 0 {
                    tally.sums[d].add(pf(*mass));
                }
            }
            for child in e.children(node, d == 0) {
                if matches!(child, Node::Finite { mass, .. } if mass <= 0.0) {
                    continue;
                }
                next.push(child);
            }
        }
        frontier = next;
    }
    let parts: Vec<Tally> = frontier
        .par_iter()
        .map(|node| {
            let mut t = Tally::new(depth);
            search.visit(node, split, &mut t);
            t
        })
        .collect();
    if over.load(Ordering::Relaxed) {
        return None;
    }
    for p in &parts {
        tally.merge(p);
    }
    Some((tally, nodes.load(Ordering::Relaxed)))
}

/// `(1/n) Σ_{a ∈ α_0^{n−1}} f(μ(a))` for `n = 1..=depth`, by branch and bound
/// over label words. Subtrees below `prune_tol` are cut and their possible
/// contribution is carried as an error band. If the node budget runs out,
/// the curve is recomputed to a smaller depth and flagged as truncated.
pub fn cylinder_entropy_curve<R: Real>(
    sys: &MarkovSystem<R>,
    alpha: &LocalPartition,
    opts: CurveOptions,
) -> Result<EntropyCurve> {
    if opts.depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if opts.prune_tol.is_nan() || opts.prune_tol < 0.0 {
        return Err(Error::InvalidArgument("prune_tol must be nonnegative".into()));
    }
    let labels = alpha.complement_label() + 1;
    let mut depth = opts.depth;
    loop {
        let k = ExtKernel::build(sys, alpha, depth)?;
        if let Some((tally, nodes)) = run_curve(&k, alpha, depth, opts.prune_tol, opts.node_budget) {
            let mut points = Vec::with_capacity(depth);
            for n in 1..=depth {
                let s = tally.sums[n].value();
                let (lo, hi) = pruning_band(&tally.pruned, labels, n);
                let nf = n as f64;
                let (lower, upper) = ((s + lo) / nf, (s + hi) / nf);
                points.push(CurvePoint {
                    n,
                    value: 0.5 * (lower + upper),
                    lower,
                    upper,
                });
            }
            let half = depth.div_ceil(2);
            let h_hat = points[half - 1..].iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
            let last = points.last().expect("depth ≥ 1").value;
            return Ok(EntropyCurve {
                points,
                h_hat,
                last,
                requested_depth: opts.depth,
                truncated: depth < opts.depth,
                nodes,
                pruned_mass: tally.pruned.iter().map(|p| p.1).sum(),
                assumed_escape: k.ignored_escape,
            });
        }
        if depth == 1 {
            return Err(Error::InvalidArgument(format!(
                "node budget {} is too small for depth 1",
                opts.node_budget
            )));
        }
        depth -= 1;
    }
}

/// Cylinders of `α_0^{n−1}` with their masses.
#[derive(Debug, Clone, Serialize)]
pub struct RefinedPartitionTable {
    pub depth: usize,
    /// Label words (complement = `α.complement_label()`) and masses; the
    /// all-complement word of infinite measure is omitted.
    pub cells: Vec<(Vec<u16>, f64)>,
    pub pruned_mass: f64,
    pub infinite_cell: bool,
}

/// Enumerates the positive-mass cylinders of `α_0^{n−1}` (serially).
pub fn refined_partition_table<R: Real>(
    sys: &MarkovSystem<R>,
    alpha: &LocalPartition,
    depth: usize,
    prune_tol: f64,
) -> Result<RefinedPartitionTable> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let k = ExtKernel::build(sys, alpha, depth)?;
    let e = Enumerator::new(&k, alpha, depth);
    let mut cells = Vec::new();
    let mut pruned = 0.0;
    let mut stack = vec![(e.root(), Vec::<u16>::new())];
    while let Some((node, word)) = stack.pop() {
        let d = word.len();
        if let Node::Finite { mass, .. } = &node {
            if d == depth {
                cells.push((word, *mass));
                continue;
            }
            if d > 0 && *mass < prune_tol {
                pruned += mass;
                continue;
            }
        } else if d == depth {
            continue;
        }
        for (l, child) in e.children(&node, d == 0).into_iter().enumerate().rev() {
            if matches!(child, Node::Finite { mass, .. } if mass <= 0.0) {
                continue;
            }
            let mut w = word.clone();
            w.push(l as u16);
            stack.push((child, w));
        }
    }
    Ok(RefinedPartitionTable {
        depth,
        cells,
        pruned_mass: pruned,
        infinite_cell: !k.finite,
    })
}
