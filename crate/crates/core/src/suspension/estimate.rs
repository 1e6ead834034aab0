//! Entropy-rate estimates of the count process of a simulated suspension.
//!
//! Counts per cell are capped and packed into one symbol per time step. The
//! rate of that symbol sequence is the entropy of a factor of the
//! suspension, so it estimates `h(T_*)` from below. The suspension of a
//! finite measure is not ergodic (the total particle number is invariant),
//! so block statistics are pooled over independent configurations.

use std::collections::HashSet;

use serde::Serialize;

use rayon::prelude::*;

use crate::entropy::{lz_entropy_rate_pooled, plug_in_entropy_rate_pooled, LocalPartition};
use crate::error::{Error, Result};
use crate::induced::estimate::EntropyEstimate;
use crate::induced::simulate::Estimator;
use crate::rng::child_seed;
use crate::scalar::Real;
use crate::suspension::process::{evolve, sample_initial_configuration, CountSeries};
use crate::systems::MarkovSystem;

pub const DEFAULT_COUNT_CAP: u64 = 8;
pub const DEFAULT_MAX_ALPHABET: usize = 4096;
pub const DEFAULT_REPLICAS: usize = 32;

#[derive(Debug, Clone, Serialize)]
pub struct SuspensionOptions {
    #[serde(skip)]
    pub estimator: Estimator,
    pub count_cap: u64,
    /// Distinct symbols allowed before the cap is lowered.
    pub max_alphabet: usize,
    /// Independent configurations whose statistics are pooled.
    pub replicas: usize,
}

impl Default for SuspensionOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::PlugIn(Default::default()),
            count_cap: DEFAULT_COUNT_CAP,
            max_alphabet: DEFAULT_MAX_ALPHABET,
            replicas: DEFAULT_REPLICAS,
        }
    }
}

/// Symbols of a count series with every count capped at `cap`, and the
/// number of capped entries.
pub fn symbolize(series: &CountSeries, cap: u64) -> (Vec<u64>, u64) {
    let base = cap + 1;
    let mut hits = 0;
    let symbols = series
        .counts
        .iter()
        .map(|row| {
            row.iter().fold(0u64, |acc, &n| {
                if n > cap {
                    hits += 1;
                }
                acc.wrapping_mul(base).wrapping_add(n.min(cap))
            })
        })
        .collect();
    (symbols, hits)
}

/// Estimate of the entropy rate of `t ↦ (N_t(a))_{a ∈ α}`, pooled over
/// `opts.replicas` configurations each run for `horizon` steps.
pub fn suspension_entropy_estimate<R: Real>(
    sys: &MarkovSystem<R>,
    alpha: &LocalPartition,
    window_max: i64,
    horizon: u64,
    seed: u64,
    opts: &SuspensionOptions,
) -> Result<EntropyEstimate<f64>> {
    if opts.count_cap == 0 || opts.replicas == 0 {
        return Err(Error::InvalidArgument("count cap and replicas must be positive".into()));
    }
    let runs: Vec<(CountSeries, usize)> = (0..opts.replicas)
        .into_par_iter()
        .map(|i| {
            let config = sample_initial_configuration(sys, window_max, horizon, child_seed(seed, i as u64))?;
            Ok((evolve(sys, &config, horizon)?.coarsen(alpha)?, config.len()))
        })
        .collect::<Result<_>>()?;
    let mut cap = opts.count_cap;
    let (symbols, hits) = loop {
        let packed: Vec<(Vec<u64>, u64)> = runs.iter().map(|(s, _)| symbolize(s, cap)).collect();
        let distinct = packed.iter().flat_map(|p| p.0.iter()).collect::<HashSet<_>>().len();
        if distinct <= opts.max_alphabet || cap == 1 {
            let hits = packed.iter().map(|p| p.1).sum::<u64>();
            break (packed.into_iter().map(|p| p.0).collect::<Vec<_>>(), hits);
        }
        cap /= 2;
    };
    let views: Vec<&[u64]> = symbols.iter().map(|s| s.as_slice()).collect();
    let est = match &opts.estimator {
        Estimator::PlugIn(o) => plug_in_entropy_rate_pooled(&views, o)?,
        Estimator::Lz => lz_entropy_rate_pooled(&views)?,
    };
    Ok(est
        .with_meta("count_cap", cap)
        .with_meta("cap_hits", hits)
        .with_meta("coarsened", cap < opts.count_cap)
        .with_meta("replicas", opts.replicas)
        .with_meta("particles", runs.iter().map(|r| r.1).sum::<usize>())
        .with_meta("horizon", horizon)
        .with_meta("lower_bound_biased", true))
}
