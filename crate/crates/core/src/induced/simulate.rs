//! Simulated induced maps and the Abramov estimate of Krengel entropy.

use rand::Rng;
use serde::Serialize;

use crate::entropy::estimators::{lz_entropy_rate, plug_in_entropy_rate, PlugInOptions};
use crate::error::{Error, Result};
use crate::induced::estimate::{EntropyEstimate, Method};
use crate::induced::returns::core_states;
use crate::rng::{self, SimRng};
use crate::scalar::Real;
use crate::systems::markov::pick_stationary;
use crate::systems::{MarkovSystem, State};

pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

/// Retries allowed for one excursion before giving up.
const MAX_RETRIES: u64 = 10_000;

#[derive(Debug, Clone, Serialize)]
pub struct InducedSequence {
    /// Successive return times `φ_A` along the `T_A`-orbit (labels of `ρ_A` cells).
    pub returns: Vec<u64>,
    pub start: State,
    pub step_cap: u64,
    /// Excursions that hit the cap or escaped and were redrawn.
    pub retries: u64,
}

fn in_core(core: &[State], a: State) -> bool {
    core.binary_search(&a).is_ok()
}

/// One excursion from `x ∈ A`: `Some((return time, landing state))`, or
/// `None` when the cap is exceeded or the chain escapes.
fn excursion<R: Real, G: Rng + ?Sized>(
    sys: &MarkovSystem<R>,
    core: &[State],
    x: State,
    cap: u64,
    g: &mut G,
) -> Option<(u64, State)> {
    let mut y = x;
    let mut steps = 0u64;
    loop {
        y = sys.sample_next(y, g)?;
        steps += 1;
        if in_core(core, y) {
            return Some((steps, y));
        }
        if let Some((hit, k)) = sys.renewal_descent_hit(y, core) {
            steps = steps.saturating_add(k);
            y = hit;
            if steps > cap {
                return None;
            }
            if in_core(core, y) {
                return Some((steps, y));
            }
        }
        if steps >= cap {
            return None;
        }
    }
}

/// Successive return times to `A`, started from `q` restricted to `A`.
///
/// The orbit uses substream 0 of `seed`; an excursion longer than `step_cap`
/// (or one that escapes) is redrawn from the same state on the next unused
/// substream and counted in `retries`.
pub fn induced_map_simulate<R: Real>(
    sys: &MarkovSystem<R>,
    core: &[State],
    n_returns: usize,
    seed: u64,
    step_cap: u64,
) -> Result<InducedSequence> {
    if n_returns == 0 {
        return Err(Error::InvalidArgument("n_returns must be at least 1".into()));
    }
    if step_cap == 0 {
        return Err(Error::InvalidArgument("step cap must be positive".into()));
    }
    let core = core_states(sys, core)?;
    let mut main: SimRng = rng::stream(seed, 0);
    let start = pick_stationary(sys, &core, &mut main)?;
    let mut x = start;
    let mut returns = Vec::with_capacity(n_returns);
    let mut retries = 0u64;
    while returns.len() < n_returns {
        let mut outcome = excursion(sys, &core, x, step_cap, &mut main);
        let mut local = 0u64;
        while outcome.is_none() {
            retries += 1;
            local += 1;
            if local > MAX_RETRIES {
                return Err(Error::InvalidArgument(format!(
                    "{MAX_RETRIES} consecutive excursions from state {x} exceeded {step_cap} steps or escaped"
                )));
            }
            let mut fresh = rng::stream(seed, retries);
            outcome = excursion(sys, &core, x, step_cap, &mut fresh);
        }
        let (t, y) = outcome.expect("retried until success");
        returns.push(t);
        x = y;
    }
    Ok(InducedSequence {
        returns,
        start,
        step_cap,
        retries,
    })
}

#[derive(Debug, Clone)]
pub enum Estimator {
    PlugIn(PlugInOptions),
    Lz,
}

/// `μ(A) ×` entropy rate of the simulated induced return-time sequence.
pub fn krengel_entropy_abramov<R: Real>(
    sys: &MarkovSystem<R>,
    core: &[State],
    n_returns: usize,
    estimator: &Estimator,
    seed: u64,
) -> Result<EntropyEstimate<f64>> {
    let core_v = core_states(sys, core)?;
    let mass: f64 = core_v
        .iter()
        .map(|&a| sys.stationary_at(a).map(|q| q.as_f64()))
        .sum::<Result<f64>>()?;
    let seq = induced_map_simulate(sys, &core_v, n_returns, seed, DEFAULT_STEP_CAP)?;
    let rate = match estimator {
        Estimator::PlugIn(opts) => plug_in_entropy_rate(&seq.returns, opts)?,
        Estimator::Lz => lz_entropy_rate(&seq.returns)?,
    };
    let inner = rate.method;
    Ok(EntropyEstimate {
        method: Method::AbramovSim,
        ..rate.scaled(mass)
    }
    .with_meta("inner_method", serde_json::to_value(inner).expect("method"))
    .with_meta_number("core_mass", mass)
    .with_meta("returns", n_returns)
    .with_meta("retries", seq.retries)
    .with_meta("step_cap", seq.step_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_random_walk, build_renewal_chain, ReturnDistribution};

    #[test]
    fn loop_is_constant() {
        let sys = build_renewal_chain(ReturnDistribution::finite(vec![1.0]).unwrap(), None).unwrap();
        let s = induced_map_simulate(&sys, &[1], 100, 3, 10).unwrap();
        assert!(s.returns.iter().all(|&t| t == 1));
        assert_eq!(s.retries, 0);
    }

    #[test]
    fn seed_determinism() {
        let sys = build_renewal_chain(ReturnDistribution::<f64>::telescoping(), None).unwrap();
        let a = induced_map_simulate(&sys, &[1], 1000, 11, 1000).unwrap();
        let b = induced_map_simulate(&sys, &[1], 1000, 11, 1000).unwrap();
        assert_eq!(a.returns, b.returns);
        assert!(a.retries > 0, "heavy tail must hit a cap of 1000");
        assert!(a.returns.iter().all(|&t| t <= 1000));
    }

    #[test]
    fn walk_returns_are_even() {
        let srw = build_random_walk(&[(1, 0.5), (-1, 0.5)], (-10, 10)).unwrap();
        let s = induced_map_simulate(&srw, &[0], 2000, 5, 1_000_000).unwrap();
        assert!(s.returns.iter().all(|t| t % 2 == 0));
    }

    #[test]
    fn renewal_core_above_one_fast_forwards() {
        let sys = build_renewal_chain(ReturnDistribution::<f64>::telescoping(), Some(50)).unwrap();
        let s = induced_map_simulate(&sys, &[1, 4], 5000, 9, 1 << 40).unwrap();
        assert_eq!(s.retries, 0);
        assert!(s.returns.iter().all(|&t| t >= 1));
    }
}
