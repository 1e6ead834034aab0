//! Poisson suspensions of renewal shifts and random walks as finite particle
//! systems.
//!
//! A configuration samples the intensity `q` on every state that can reach
//! the observation window within the horizon: `1..=window_max + horizon` for
//! renewal chains (above 1 the motion is a deterministic descent), and the
//! window widened by `horizon × max step` on each side for walks. Counts
//! inside the window are then exact, not approximate, up to the horizon.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Serialize, Serializer};

use crate::entropy::LocalPartition;
use crate::error::{Error, Result};
use crate::rng::{self, child_seed};
use crate::scalar::Real;
use crate::systems::{ChainKind, MarkovSystem, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Particle {
    pub state: State,
    /// Steps until the particle next sits at state 1 (renewal), else 0.
    pub countdown: u64,
    /// Seed of the particle's own random stream.
    pub key: u64,
}

impl Serialize for Particle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.state, self.countdown).serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointConfiguration {
    pub particles: Vec<Particle>,
    /// Inclusive range of states whose counts are exact up to `horizon`.
    pub window: (State, State),
    pub horizon: u64,
}

impl PointConfiguration {
    pub fn empty(window: (State, State), horizon: u64) -> Self {
        Self {
            particles: Vec::new(),
            window,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// `N(A)` for a set of states.
    pub fn count_in(&self, cell: &[State]) -> u64 {
        self.particles.iter().filter(|p| cell.contains(&p.state)).count() as u64
    }

    /// Superposition of two configurations on the same window and horizon.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.window != other.window || self.horizon != other.horizon {
            return Err(Error::InvalidArgument("configurations have different windows".into()));
        }
        let mut particles = self.particles.clone();
        particles.extend_from_slice(&other.particles);
        Ok(Self {
            particles,
            window: self.window,
            horizon: self.horizon,
        })
    }

    /// JSON array of `[state, countdown]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.particles).expect("particles serialize")
    }
}

/// States sampled for a given window and horizon, plus the exact window.
fn sampled_range<R: Real>(
    sys: &MarkovSystem<R>,
    window_max: i64,
    horizon: u64,
) -> Result<((State, State), (State, State))> {
    let h = i64::try_from(horizon).map_err(|_| Error::InvalidArgument("horizon too large".into()))?;
    match sys.kind() {
        ChainKind::Renewal => {
            if window_max < 1 {
                return Err(Error::InvalidArgument("window_max must be at least 1".into()));
            }
            let top = window_max
                .checked_add(h)
                .ok_or_else(|| Error::InvalidArgument("window_max + horizon overflows".into()))?;
            Ok(((1, window_max), (1, top)))
        }
        ChainKind::RandomWalk => {
            if window_max < 0 {
                return Err(Error::InvalidArgument("window half-width must be nonnegative".into()));
            }
            let d = sys.max_step().unwrap_or(0) as i64;
            let (lo, hi) = sys.window();
            let c = lo + (hi - lo) / 2;
            let required = d
                .checked_mul(h)
                .and_then(|x| x.checked_add(window_max))
                .ok_or_else(|| Error::InvalidArgument("halo overflows".into()))?;
            let available = (c - lo).min(hi - c);
            if required > available {
                return Err(Error::InsufficientHalo {
                    horizon,
                    required,
                    available,
                });
            }
            Ok(((c - window_max, c + window_max), (c - required, c + required)))
        }
        ChainKind::GeneralTruncated => Err(Error::InvalidArgument(
            "suspensions are simulated for renewal chains and random walks only".into(),
        )),
    }
}

/// Independent Poisson(`q_s`) particle counts on every state that can reach
/// the window within `horizon` steps.
///
/// For renewal chains the window is `[1, window_max]`; for walks it is the
/// `window_max`-neighbourhood of the centre of the system window, and the
/// system window must contain the halo.
pub fn sample_initial_configuration<R: Real>(
    sys: &MarkovSystem<R>,
    window_max: i64,
    horizon: u64,
    seed: u64,
) -> Result<PointConfiguration> {
    if !sys.recurrence().is_recurrent() && sys.kind() != ChainKind::Renewal {
        return Err(Error::TransientRejected {
            operation: "sample_initial_configuration",
        });
    }
    let (window, (lo, hi)) = sampled_range(sys, window_max, horizon)?;
    let mut particles = Vec::new();
    for s in lo..=hi {
        let lambda = sys.stationary_at(s)?.as_f64();
        if lambda <= 0.0 {
            continue;
        }
        let id = s.wrapping_sub(lo) as u64;
        let mut g = rng::stream(seed, id);
        let n = Poisson::new(lambda)
            .map_err(|e| Error::InvalidArgument(format!("intensity {lambda} at state {s}: {e}")))?
            .sample(&mut g) as u64;
        for j in 0..n {
            particles.push(Particle {
                state: s,
                countdown: if sys.kind() == ChainKind::Renewal {
                    (s - 1) as u64
                } else {
                    0
                },
                key: child_seed(seed ^ 0x5A5A_0000_0000_0000, child_seed(id, j)),
            });
        }
    }
    Ok(PointConfiguration {
        particles,
        window,
        horizon,
    })
}

/// Counts per cell at times `0..=steps`. Cells of infinite measure are never
/// stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountSeries {
    pub cells: Vec<Vec<State>>,
    /// `counts[t][c]`.
    pub counts: Vec<Vec<u64>>,
}

impl CountSeries {
    pub fn steps(&self) -> usize {
        self.counts.len().saturating_sub(1)
    }

    pub fn cell(&self, c: usize) -> Vec<u64> {
        self.counts.iter().map(|row| row[c]).collect()
    }

    pub fn at(&self, t: usize) -> &[u64] {
        &self.counts[t]
    }

    /// Sum of cell counts into the cells of `alpha` (which must be unions of
    /// existing cells).
    pub fn coarsen(&self, alpha: &LocalPartition) -> Result<Self> {
        let mut map = Vec::with_capacity(self.cells.len());
        for c in &self.cells {
            let l = alpha.label_of(c[0]);
            if c.iter().any(|&s| alpha.label_of(s) != l) {
                return Err(Error::InvalidPartition("a cell straddles two target cells".into()));
            }
            map.push(l);
        }
        for (l, target) in alpha.cells().iter().enumerate() {
            let covered: usize = self
                .cells
                .iter()
                .zip(&map)
                .filter(|(_, &m)| m == l)
                .map(|(c, _)| c.len())
                .sum();
            if covered != target.len() {
                return Err(Error::InvalidPartition(format!(
                    "cell {l} reaches outside the observed window"
                )));
            }
        }
        let k = alpha.cells().len();
        let counts = self
            .counts
            .iter()
            .map(|row| {
                let mut out = vec![0; k];
                for (&n, &l) in row.iter().zip(&map) {
                    if l < k {
                        out[l] += n;
                    }
                }
                out
            })
            .collect();
        Ok(Self {
            cells: alpha.cells().to_vec(),
            counts,
        })
    }

    /// Elementwise sum of two series on the same cells.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.cells != other.cells || self.counts.len() != other.counts.len() {
            return Err(Error::InvalidArgument("count series differ in shape".into()));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(Self {
            cells: self.cells.clone(),
            counts,
        })
    }

    /// CSV with header `t,cell,count`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "cell", "count"]).map_err(csv_err)?;
        for (t, row) in self.counts.iter().enumerate() {
            for (c, n) in row.iter().enumerate() {
                out.write_record([t.to_string(), c.to_string(), n.to_string()])
                    .map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One step of a particle; `None` once it has left for good.
fn advance<R: Real, G: Rng + ?Sized>(sys: &MarkovSystem<R>, p: &mut Particle, g: &mut G) -> Option<()> {
    if sys.kind() == ChainKind::Renewal {
        if p.state > 1 {
            p.state -= 1;
        } else {
            let n = sys.renewal_law().expect("renewal").sample(g)?;
            p.state = i64::try_from(n).unwrap_or(i64::MAX);
        }
        p.countdown = (p.state - 1) as u64;
    } else {
        p.state = sys.sample_next(p.state, g)?;
    }
    Some(())
}

/// Moves every particle independently for `steps` steps and records the
/// count at each window state (singleton cells).
///
/// Each particle draws from its own stream, so evolving a union of
/// configurations gives exactly the sum of the separate count series.
pub fn evolve<R: Real>(sys: &MarkovSystem<R>, config: &PointConfiguration, steps: u64) -> Result<CountSeries> {
    if steps > config.horizon {
        return Err(Error::InvalidArgument(format!(
            "{steps} steps exceed the configuration horizon {}",
            config.horizon
        )));
    }
    let (lo, hi) = config.window;
    let width = (hi - lo + 1) as usize;
    let mut counts = vec![vec![0u64; width]; steps as usize + 1];
    for p0 in &config.particles {
        let mut p = *p0;
        let mut g = rng::stream(p.key, 0);
        for (t, row) in counts.iter_mut().enumerate() {
            if t > 0 && advance(sys, &mut p, &mut g).is_none() {
                break;
            }
            if lo <= p.state && p.state <= hi {
                row[(p.state - lo) as usize] += 1;
            } else if sys.kind() == ChainKind::Renewal && p.state > hi + (steps as i64 - t as i64) {
                // Cannot descend into the window before the end.
                break;
            }
        }
    }
    Ok(CountSeries {
        cells: (lo..=hi).map(|s| vec![s]).collect(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_random_walk, build_renewal_chain, ReturnDistribution};

    #[test]
    fn single_particle_descends() {
        let sys = build_renewal_chain(ReturnDistribution::finite(vec![0.0, 0.0, 1.0]).unwrap(), None).unwrap();
        let c = PointConfiguration {
            particles: vec![Particle {
                state: 3,
                countdown: 2,
                key: 1,
            }],
            window: (1, 3),
            horizon: 3,
        };
        let s = evolve(&sys, &c, 3).unwrap();
        assert_eq!(
            s.counts,
            vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1]]
        );
        assert_eq!(serde_json::to_string(&c.to_json()).unwrap(), "[[3,2]]");
    }

    #[test]
    fn union_is_exact() {
        let sys = build_renewal_chain(ReturnDistribution::<f64>::telescoping(), Some(64)).unwrap();
        let a = sample_initial_configuration(&sys, 5, 40, 1).unwrap();
        let b = sample_initial_configuration(&sys, 5, 40, 2).unwrap();
        let sa = evolve(&sys, &a, 40).unwrap();
        let sb = evolve(&sys, &b, 40).unwrap();
        let su = evolve(&sys, &a.union(&b).unwrap(), 40).unwrap();
        assert_eq!(su, sa.add(&sb).unwrap());
    }

    #[test]
    fn halo_rules() {
        let srw = build_random_walk(&[(1, 0.5), (-1, 0.5)], (-20, 20)).unwrap();
        assert!(sample_initial_configuration(&srw, 5, 15, 1).is_ok());
        match sample_initial_configuration(&srw, 5, 16, 1) {
            Err(Error::InsufficientHalo {
                required, available, ..
            }) => {
                assert_eq!((required, available), (21, 20));
            }
            other => panic!("{other:?}"),
        }
        let c = sample_initial_configuration(&srw, 5, 15, 3).unwrap();
        assert_eq!(c.window, (-5, 5));
        assert!(c.particles.iter().all(|p| (-20..=20).contains(&p.state)));
        assert!(evolve(&srw, &c, 16).is_err());
    }

    #[test]
    fn zero_intensity_on_window() {
        let mut f = vec![0.0; 1000];
        f[999] = 1.0;
        let sys = build_renewal_chain(ReturnDistribution::finite(f).unwrap(), None).unwrap();
        let q1 = sys.stationary_at(1).unwrap();
        assert!(q1 == 1.0);
        // Intensity is q_s = 1 for s ≤ 1000 here, so scale it down to near zero.
        let thin = sys.with_scale(1e-9).unwrap();
        let empty = (0..200)
            .filter(|&s| sample_initial_configuration(&thin, 3, 0, s).unwrap().is_empty())
            .count();
        assert!(empty >= 199);
    }

    #[test]
    fn coarsen_and_csv() {
        let sys = build_renewal_chain(ReturnDistribution::finite(vec![0.5, 0.5]).unwrap(), None).unwrap();
        let c = sample_initial_configuration(&sys, 2, 3, 9).unwrap();
        let s = evolve(&sys, &c, 3).unwrap();
        let alpha = LocalPartition::core_only(&[1, 2]).unwrap();
        let co = s.coarsen(&alpha).unwrap();
        for t in 0..=3 {
            assert_eq!(co.at(t)[0], s.at(t).iter().sum::<u64>());
        }
        let mut buf = Vec::new();
        co.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,cell,count\n0,0,"));
        assert_eq!(text.lines().count(), 5);
        assert!(s.coarsen(&LocalPartition::core_only(&[1, 2, 3]).unwrap()).is_err());
    }
}
