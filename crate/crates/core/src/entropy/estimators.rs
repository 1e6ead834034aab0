//! Entropy-rate estimators for symbol sequences: block plug-in with a
//! coverage rule, and Lempel–Ziv (1976) phrase counting.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::induced::estimate::{EntropyEstimate, Method};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlugInOptions {
    pub max_block: usize,
    /// Good–Turing coverage `1 − N₁/M` required to accept a block length.
    pub min_coverage: f64,
    /// The sequence must be at least this many times `max_block` long.
    pub min_len_factor: usize,
}

impl Default for PlugInOptions {
    fn default() -> Self {
        Self {
            max_block: 8,
            min_coverage: 0.99,
            min_len_factor: 50,
        }
    }
}

/// Counts of the length-`n` blocks of one or more sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCounts<T: Eq + Hash> {
    pub n: usize,
    pub counts: HashMap<Vec<T>, u64>,
}

impl<T: Clone + Eq + Hash> BlockCounts<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "block length must be positive");
        Self {
            n,
            counts: HashMap::new(),
        }
    }

    pub fn from_sequence(seq: &[T], n: usize) -> Self {
        let mut c = Self::new(n);
        c.add_sequence(seq);
        c
    }

    pub fn add_sequence(&mut self, seq: &[T]) {
        for w in seq.windows(self.n) {
            *self.counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.n, other.n, "merging counts of different block lengths");
        for (k, &v) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn stats(&self) -> BlockStats {
        BlockStats::from_counts(self.counts.values().copied())
    }
}

/// Summary of one block-count table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStats {
    pub total: u64,
    pub distinct: u64,
    pub singletons: u64,
    pub mle: f64,
    /// `Var(log 1/p̂)` under the empirical law.
    pub info_variance: f64,
}

impl BlockStats {
    pub fn from_counts(counts: impl Iterator<Item = u64>) -> Self {
        let mut counts: Vec<u64> = counts.filter(|&c| c > 0).collect();
        // Hash order varies between runs; a fixed order makes sums reproducible.
        counts.sort_unstable();
        let total: u64 = counts.iter().sum();
        let m = total as f64;
        let (mut h, mut h2) = (0.0, 0.0);
        for &c in &counts {
            let p = c as f64 / m;
            let i = -p.ln();
            h += p * i;
            h2 += p * i * i;
        }
        Self {
            total,
            distinct: counts.len() as u64,
            singletons: counts.iter().filter(|&&c| c == 1).count() as u64,
            mle: h,
            info_variance: (h2 - h * h).max(0.0),
        }
    }

    pub fn miller_madow(&self) -> f64 {
        self.mle + (self.distinct as f64 - 1.0) / (2.0 * self.total as f64)
    }

    pub fn coverage(&self) -> f64 {
        1.0 - self.singletons as f64 / self.total as f64
    }
}

/// Maps symbols of several sequences to shared dense ids in order of first
/// appearance.
fn densify_all<T: Eq + Hash>(seqs: &[&[T]]) -> (Vec<Vec<u32>>, usize) {
    let mut ids: HashMap<&T, u32> = HashMap::new();
    let out = seqs
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|s| {
                    let next = ids.len() as u32;
                    *ids.entry(s).or_insert(next)
                })
                .collect()
        })
        .collect();
    (out, ids.len())
}

fn densify<T: Eq + Hash>(seq: &[T]) -> Vec<u32> {
    densify_all(&[seq]).0.pop().expect("one sequence")
}

/// Conditional block entropy `h_n = H_n − H_{n−1}` (Miller–Madow corrected),
/// at the largest `n ≤ max_block` whose blocks have coverage at least
/// `min_coverage` (always at least `n = 1`).
///
/// The interval is `3 sd + |MM − MLE| + |h_n − h_{n−1}|` around the estimate.
/// If even single symbols miss the coverage target the estimate is flagged
/// `undersampled` and the upper end is raised by `(N₁/M) log M`.
pub fn plug_in_entropy_rate<T: Eq + Hash>(seq: &[T], opts: &PlugInOptions) -> Result<EntropyEstimate<f64>> {
    plug_in_entropy_rate_pooled(&[seq], opts)
}

/// [`plug_in_entropy_rate`] with block counts pooled over independent
/// sequences (blocks never straddle two sequences). For sequences drawn from
/// different ergodic components this estimates the average rate.
pub fn plug_in_entropy_rate_pooled<T: Eq + Hash>(seqs: &[&[T]], opts: &PlugInOptions) -> Result<EntropyEstimate<f64>> {
    if opts.max_block == 0 {
        return Err(Error::InvalidArgument("max_block must be at least 1".into()));
    }
    let need = opts.min_len_factor.saturating_mul(opts.max_block);
    let len: usize = seqs.iter().map(|s| s.len()).sum();
    if len < need.max(2) || seqs.iter().all(|s| s.len() < opts.max_block) {
        return Err(Error::InvalidArgument(format!(
            "sequence of length {len} is shorter than {need} for blocks up to {}",
            opts.max_block
        )));
    }
    let (ids, _) = densify_all(seqs);
    let mut stats = Vec::with_capacity(opts.max_block);
    for n in 1..=opts.max_block {
        let mut counts: HashMap<&[u32], u64> = HashMap::new();
        for seq in &ids {
            for w in seq.windows(n) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        stats.push(BlockStats::from_counts(counts.into_values()));
    }
    let mm = |n: usize| if n == 0 { 0.0 } else { stats[n - 1].miller_madow() };
    let mle = |n: usize| if n == 0 { 0.0 } else { stats[n - 1].mle };
    let h = |n: usize| mm(n) - mm(n - 1);
    let mut chosen = 1;
    for n in 1..=opts.max_block {
        if stats[n - 1].coverage() >= opts.min_coverage {
            chosen = n;
        }
    }
    let s = &stats[chosen - 1];
    let m = s.total as f64;
    let var_prev = if chosen > 1 {
        stats[chosen - 2].info_variance
    } else {
        0.0
    };
    let sd = ((s.info_variance + var_prev) / m).sqrt();
    let bias = ((mm(chosen) - mle(chosen)) - (mm(chosen - 1) - mle(chosen - 1))).abs();
    let drift = if chosen > 1 {
        (h(chosen) - h(chosen - 1)).abs()
    } else {
        0.0
    };
    let value = h(chosen).max(0.0);
    let half = 3.0 * sd + bias + drift;
    let undersampled = stats[0].coverage() < opts.min_coverage;
    let mut upper = value + half;
    if undersampled {
        upper += stats[0].singletons as f64 / stats[0].total as f64 * (stats[0].total as f64).ln();
    }
    Ok(
        EntropyEstimate::new(value, (value - half).max(0.0), upper, Method::PlugIn)
            .with_meta("block_length", chosen)
            .with_meta_number("coverage", s.coverage())
            .with_meta("undersampled", undersampled)
            .with_meta("distinct_blocks", s.distinct)
            .with_meta("length", len)
            .with_meta("sequences", seqs.len()),
    )
}

/// Suffix automaton over dense `u32` symbols.
struct SuffixAutomaton {
    len: Vec<u32>,
    link: Vec<i32>,
    next: Vec<Vec<(u32, u32)>>,
    last: u32,
}

impl SuffixAutomaton {
    fn new(capacity: usize) -> Self {
        let mut s = Self {
            len: Vec::with_capacity(2 * capacity),
            link: Vec::with_capacity(2 * capacity),
            next: Vec::with_capacity(2 * capacity),
            last: 0,
        };
        s.len.push(0);
        s.link.push(-1);
        s.next.push(Vec::new());
        s
    }

    fn go(&self, state: u32, c: u32) -> Option<u32> {
        let t = &self.next[state as usize];
        t.binary_search_by_key(&c, |e| e.0).ok().map(|i| t[i].1)
    }

    fn set(&mut self, state: u32, c: u32, to: u32) {
        let t = &mut self.next[state as usize];
        match t.binary_search_by_key(&c, |e| e.0) {
            Ok(i) => t[i].1 = to,
            Err(i) => t.insert(i, (c, to)),
        }
    }

    /// Appends `c`. `track` is a state being followed by the caller along
    /// with the length of the string it stands for; if that state is split,
    /// the string moves to the clone when it is short enough.
    fn extend(&mut self, c: u32, track: &mut (u32, u32)) {
        let cur = self.len.len() as u32;
        self.len.push(self.len[self.last as usize] + 1);
        self.link.push(0);
        self.next.push(Vec::new());
        let mut p = self.last as i32;
        while p >= 0 && self.go(p as u32, c).is_none() {
            self.set(p as u32, c, cur);
            p = self.link[p as usize];
        }
        if p >= 0 {
            let q = self.go(p as u32, c).expect("found above");
            if self.len[p as usize] + 1 == self.len[q as usize] {
                self.link[cur as usize] = q as i32;
            } else {
                let clone = self.len.len() as u32;
                self.len.push(self.len[p as usize] + 1);
                self.link.push(self.link[q as usize]);
                self.next.push(self.next[q as usize].clone());
                while p >= 0 && self.go(p as u32, c) == Some(q) {
                    self.set(p as u32, c, clone);
                    p = self.link[p as usize];
                }
                self.link[q as usize] = clone as i32;
                self.link[cur as usize] = clone as i32;
                if track.0 == q && track.1 <= self.len[clone as usize] {
                    track.0 = clone;
                }
            }
        }
        self.last = cur;
    }
}

/// Number of phrases in the Lempel–Ziv (1976) parsing: each phrase is the
/// shortest block not occurring earlier (overlaps allowed).
pub fn lz76_complexity<T: Eq + Hash>(seq: &[T]) -> u64 {
    let ids = densify(seq);
    let mut sam = SuffixAutomaton::new(ids.len());
    let mut phrases = 0u64;
    // (state for the current phrase prefix, its length)
    let mut track = (0u32, 0u32);
    for &c in &ids {
        match sam.go(track.0, c) {
            Some(t) => {
                track = (t, track.1 + 1);
                sam.extend(c, &mut track);
            }
            None => {
                phrases += 1;
                let mut dummy = (u32::MAX, 0);
                sam.extend(c, &mut dummy);
                track = (0, 0);
            }
        }
    }
    if track.1 > 0 {
        phrases += 1;
    }
    phrases
}

pub const LZ_MIN_LEN: usize = 1000;

fn lz_rate(c: u64, n: usize) -> f64 {
    let n = n as f64;
    c as f64 * n.ln() / n
}

/// `c(n) log n / n` in nats. The interval is the gap to the same estimate on
/// the first half of the sequence, on either side.
pub fn lz_entropy_rate<T: Eq + Hash>(seq: &[T]) -> Result<EntropyEstimate<f64>> {
    if seq.len() < LZ_MIN_LEN {
        return Err(Error::InvalidArgument(format!(
            "LZ estimate needs at least {LZ_MIN_LEN} symbols"
        )));
    }
    let c = lz76_complexity(seq);
    let half = seq.len() / 2;
    let c_half = lz76_complexity(&seq[..half]);
    let v = lz_rate(c, seq.len());
    let d = (lz_rate(c_half, half) - v).abs();
    Ok(EntropyEstimate::new(v, (v - d).max(0.0), v + d, Method::Lz)
        .with_meta("phrases", c)
        .with_meta("length", seq.len()))
}

/// Average of per-sequence LZ estimates (and of their interval ends).
pub fn lz_entropy_rate_pooled<T: Eq + Hash>(seqs: &[&[T]]) -> Result<EntropyEstimate<f64>> {
    if seqs.is_empty() {
        return Err(Error::InvalidArgument("no sequences".into()));
    }
    let each: Vec<EntropyEstimate<f64>> = seqs.iter().map(|s| lz_entropy_rate(s)).collect::<Result<_>>()?;
    let k = each.len() as f64;
    let mean = |f: fn(&EntropyEstimate<f64>) -> f64| each.iter().map(f).sum::<f64>() / k;
    Ok(
        EntropyEstimate::new(mean(|e| e.value), mean(|e| e.lower), mean(|e| e.upper), Method::Lz)
            .with_meta("sequences", seqs.len())
            .with_meta("length", seqs.iter().map(|s| s.len()).sum::<usize>()),
    )
}
