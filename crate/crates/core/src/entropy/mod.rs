//! Information functions, Poisson entropy, cylinder curves and estimators.

pub mod curve;
pub mod estimators;
pub mod information;
pub mod parry;
pub mod poisson_fn;

pub use curve::{
    cylinder_entropy_curve, refined_partition_table, CurveOptions, CurvePoint, EntropyCurve, LocalPartition,
    RefinedPartitionTable,
};
pub use estimators::{
    lz76_complexity, lz_entropy_rate, lz_entropy_rate_pooled, plug_in_entropy_rate, plug_in_entropy_rate_pooled,
    BlockCounts, BlockStats, PlugInOptions, LZ_MIN_LEN,
};
pub use information::{conditional_information, decomposition_residual, information, ConditionalTable, MeasureSpace};
pub use parry::parry_markov_step_entropy;
pub use poisson_fn::{poisson_entropy_enclosure, poisson_entropy_function, suspension_partition_entropy, SERIES_TOL};
