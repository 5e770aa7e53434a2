//! Risk oracles: the crude oracle with its noise estimate and admissible set, the
//! chained product and multiplier estimators, and the fine oracle built from them.

pub mod chained;
pub mod crude;
pub mod fine;

pub use chained::{ChainCarrier, ChainLevels, MultiplierEstimator, ProductEstimator};
pub use crude::{crude_oracle, noise_estimate, CrudeConstants, CrudeOracleOutput};
pub use fine::{build_fine_oracle, fine_oracle, mixture_estimator, FineConstants, FineOracleState, MixtureTerms};
