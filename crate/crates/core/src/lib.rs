//! Entropy of infinite-measure-preserving systems and their Poisson
//! suspensions.
//!
//! * [`systems`]: renewal chains, random walks, truncated general chains and
//!   cutting-and-stacking towers.
//! * [`induced`]: return-time partitions, quasi-finiteness, Krengel entropy
//!   by formula and by simulated induced maps.
//! * [`entropy`]: information functions, the Poisson entropy function, the
//!   cylinder-sum curve, Parry entropy and sequence estimators.
//! * [`suspension`]: exact finite particle simulations of Poisson suspensions
//!   and statistical checks of their defining identities.
//!
//! Formula-level code is generic over [`Real`]; the aliases below fix the
//! scalar for the common cases.

pub mod entropy;
pub mod error;
pub mod induced;
pub mod numerics;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod suspension;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::{Enclosure, Real};

pub type MarkovChain = systems::MarkovSystem<f64>;
pub type MarkovChainF32 = systems::MarkovSystem<f32>;
pub type ReturnLaw = systems::ReturnDistribution<f64>;
pub type Estimate = induced::EntropyEstimate<f64>;
pub type ExactTower = systems::TowerSystem<num_rational::BigRational>;
pub type FloatTower = systems::TowerSystem<f64>;
