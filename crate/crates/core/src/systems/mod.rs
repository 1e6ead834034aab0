//! Concrete σ-finite systems: renewal chains, random walks, general
//! countable chains and cutting-and-stacking towers.

pub mod config;
pub mod distribution;
pub mod io;
pub mod markov;
pub mod tower;

pub use config::{BuiltSystem, SystemSpec};
pub use distribution::{classify_recurrence, Recurrence, ReturnDistribution, TailDescriptor};
pub use markov::{
    build_general_chain, build_random_walk, build_renewal_chain, cylinder_measure, sample_path, ChainKind, Cylinder,
    MarkovSystem, Row, Start, State, Warning,
};
pub use tower::{build_tower, CriterionReport, CriterionVerdict, StageSpec, TowerSchedule, TowerSystem, Width};
