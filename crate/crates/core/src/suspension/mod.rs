//! Simulated Poisson suspensions and their statistical checks.

pub mod checks;
pub mod estimate;
pub mod marked;
pub mod process;

pub use checks::{
    additivity_scaling_check, covariance_identity_check, independence_check, no_multiplicity_check,
    poisson_marginal_check, stationarity_check, AdditivityReport, CovarianceReport, IndependenceReport, LineIntensity,
    MarginalReport, MultiplicityReport,
};
pub use estimate::{suspension_entropy_estimate, symbolize, SuspensionOptions, DEFAULT_COUNT_CAP};
pub use marked::{marked_conditional_entropy, MarkedModel, MarkedReport, Piece};
pub use process::{evolve, sample_initial_configuration, CountSeries, Particle, PointConfiguration};
