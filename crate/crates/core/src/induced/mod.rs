//! First-return machinery: return-time partitions, quasi-finiteness,
//! Krengel entropy by formula and by simulating the induced map.

pub mod estimate;
pub mod krengel;
pub mod returns;
pub mod simulate;

pub use estimate::{json_number, EntropyEstimate, Method};
pub use krengel::{krengel_entropy_markov, DivergenceCertificate, DIVERGENCE_CAP};
pub use returns::{
    quasi_finiteness, return_time_distribution, AnalyticTail, QuasiFiniteOptions, QuasiFiniteReport, QuasiFiniteStatus,
    ReturnPartition,
};
pub use simulate::{induced_map_simulate, krengel_entropy_abramov, Estimator, InducedSequence, DEFAULT_STEP_CAP};
