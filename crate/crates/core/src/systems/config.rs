//! Human-readable system definitions (TOML).
//!
//! ```toml
//! kind = "renewal"
//! f = [0.25, 0.25]
//! tail = { name = "telescoping", scale = 0.5 }
//! total = 1.0          # optional, checked to 1e-12
//! window = 200         # optional explicit state range 1..=window
//! ```
//!
//! ```toml
//! kind = "random-walk"
//! steps = [[1, 0.5], [-1, 0.5]]
//! window = [-50, 50]
//! ```
//!
//! ```toml
//! kind = "general"
//! states = [0, 1]
//! rows = [[[0, 0.5], [1, 0.5]], [[0, 1.0]]]
//! ```
//!
//! ```toml
//! kind = "tower"
//! epsilon0 = [1, 1]
//! exact = true
//! stages = [{ cuts = 2, columns = 1 }, { cuts = 2, columns = 1, spacers = 1 }]
//! ```

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::distribution::{Recurrence, ReturnDistribution, TailDescriptor};
use super::markov::{build_general_chain, build_random_walk, build_renewal_chain, MarkovSystem, State};
use super::tower::{build_tower, StageSpec, TowerSchedule, TowerSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "RawSpec")]
pub enum SystemSpec {
    Renewal {
        f: Vec<f64>,
        tail: Option<TailDescriptor>,
        total: Option<f64>,
        window: Option<u64>,
    },
    RandomWalk {
        steps: Vec<(i64, f64)>,
        window: (i64, i64),
    },
    General {
        states: Vec<State>,
        rows: Vec<Vec<(State, f64)>>,
        stationary: Option<Vec<f64>>,
        recurrence: Option<Recurrence>,
    },
    Tower {
        epsilon0: (u64, u64),
        initial_heights: Vec<u64>,
        exact: bool,
        stages: Vec<StageSpec>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Renewal,
    RandomWalk,
    General,
    Tower,
}

/// Flat form that keeps source spans for type errors; the tagged enum is
/// checked for per-kind required fields afterwards.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: Kind,
    f: Option<Vec<f64>>,
    tail: Option<TailDescriptor>,
    total: Option<f64>,
    window: Option<toml::Value>,
    steps: Option<Vec<(i64, f64)>>,
    states: Option<Vec<State>>,
    rows: Option<Vec<Vec<(State, f64)>>>,
    stationary: Option<Vec<f64>>,
    recurrence: Option<Recurrence>,
    epsilon0: Option<(u64, u64)>,
    initial_heights: Option<Vec<u64>>,
    exact: Option<bool>,
    stages: Option<Vec<StageSpec>>,
}

fn required<T>(v: Option<T>, kind: &str, field: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("kind `{kind}` requires field `{field}`"))
}

fn reject(present: bool, kind: &str, field: &str) -> Result<(), String> {
    if present {
        Err(format!("field `{field}` does not apply to kind `{kind}`"))
    } else {
        Ok(())
    }
}

impl TryFrom<RawSpec> for SystemSpec {
    type Error = String;

    fn try_from(r: RawSpec) -> Result<Self, String> {
        let markov_only = [
            ("steps", r.steps.is_some()),
            ("states", r.states.is_some()),
            ("rows", r.rows.is_some()),
        ];
        let tower_only = [
            ("epsilon0", r.epsilon0.is_some()),
            ("initial_heights", r.initial_heights.is_some()),
            ("exact", r.exact.is_some()),
            ("stages", r.stages.is_some()),
        ];
        let renewal_only = [
            ("f", r.f.is_some()),
            ("tail", r.tail.is_some()),
            ("total", r.total.is_some()),
        ];
        let general_only = [
            ("stationary", r.stationary.is_some()),
            ("recurrence", r.recurrence.is_some()),
        ];
        let check = |kind: &str, groups: &[&[(&str, bool)]]| -> Result<(), String> {
            for g in groups {
                for (field, present) in g.iter() {
                    reject(*present, kind, field)?;
                }
            }
            Ok(())
        };
        match r.kind {
            Kind::Renewal => {
                check("renewal", &[&markov_only, &tower_only, &general_only])?;
                let window = match r.window {
                    None => None,
                    Some(v) => Some(
                        v.as_integer()
                            .and_then(|w| u64::try_from(w).ok())
                            .ok_or("renewal `window` must be a nonnegative integer")?,
                    ),
                };
                Ok(Self::Renewal {
                    f: r.f.unwrap_or_default(),
                    tail: r.tail,
                    total: r.total,
                    window,
                })
            }
            Kind::RandomWalk => {
                check("random-walk", &[&renewal_only, &tower_only, &general_only])?;
                reject(r.states.is_some() || r.rows.is_some(), "random-walk", "states/rows")?;
                let window: (i64, i64) = required(r.window, "random-walk", "window")?
                    .try_into()
                    .map_err(|e| format!("random-walk `window` must be [lo, hi]: {e}"))?;
                Ok(Self::RandomWalk {
                    steps: required(r.steps, "random-walk", "steps")?,
                    window,
                })
            }
            Kind::General => {
                check("general", &[&renewal_only, &tower_only])?;
                reject(r.steps.is_some(), "general", "steps")?;
                reject(r.window.is_some(), "general", "window")?;
                Ok(Self::General {
                    states: required(r.states, "general", "states")?,
                    rows: required(r.rows, "general", "rows")?,
                    stationary: r.stationary,
                    recurrence: r.recurrence,
                })
            }
            Kind::Tower => {
                check("tower", &[&renewal_only, &markov_only, &general_only])?;
                reject(r.window.is_some(), "tower", "window")?;
                Ok(Self::Tower {
                    epsilon0: required(r.epsilon0, "tower", "epsilon0")?,
                    initial_heights: r.initial_heights.unwrap_or_else(one_column),
                    exact: r.exact.unwrap_or(true),
                    stages: required(r.stages, "tower", "stages")?,
                })
            }
        }
    }
}

fn one_column() -> Vec<u64> {
    vec![1]
}

/// A constructed system.
#[derive(Debug, Clone)]
pub enum BuiltSystem {
    Markov(MarkovSystem<f64>),
    ExactTower(TowerSystem<BigRational>),
    FloatTower(TowerSystem<f64>),
}

impl SystemSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn renewal_law(&self) -> Result<Option<ReturnDistribution<f64>>> {
        let Self::Renewal { f, tail, total, .. } = self else {
            return Ok(None);
        };
        let law = match (tail, total) {
            (_, Some(t)) => ReturnDistribution::with_declared_total(f.clone(), *tail, *t)?,
            (Some(t), None) => ReturnDistribution::with_tail(f.clone(), *t)?,
            (None, None) => ReturnDistribution::finite(f.clone())?,
        };
        Ok(Some(law))
    }

    pub fn build_markov(&self) -> Result<MarkovSystem<f64>> {
        match self {
            Self::Renewal { window, .. } => build_renewal_chain(self.renewal_law()?.expect("renewal"), *window),
            Self::RandomWalk { steps, window } => build_random_walk(steps, *window),
            Self::General {
                states,
                rows,
                stationary,
                recurrence,
            } => build_general_chain(states.clone(), rows.clone(), stationary.clone(), *recurrence),
            Self::Tower { .. } => Err(Error::Config("a tower is not a Markov system".into())),
        }
    }

    pub fn tower_schedule(&self) -> Option<TowerSchedule> {
        match self {
            Self::Tower {
                epsilon0,
                initial_heights,
                stages,
                ..
            } => Some(TowerSchedule {
                epsilon0: *epsilon0,
                initial_heights: initial_heights.clone(),
                stages: stages.clone(),
            }),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<BuiltSystem> {
        match self {
            Self::Tower { exact, .. } => {
                let sched = self.tower_schedule().expect("tower");
                Ok(if *exact {
                    BuiltSystem::ExactTower(build_tower(&sched)?)
                } else {
                    BuiltSystem::FloatTower(build_tower(&sched)?)
                })
            }
            _ => Ok(BuiltSystem::Markov(self.build_markov()?)),
        }
    }
}
