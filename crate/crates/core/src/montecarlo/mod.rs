//! Monte Carlo estimators.

pub mod ams;
pub mod local;
pub mod profile;
pub mod suites;
pub mod threshold;

pub use ams::AmsConfig;
pub use local::{Domain, LocalProblem, LocalWeight};
pub use profile::{divergence_exponent, integral_profile, AnnulusProfile, DivergenceFit, ProfileConfig};
pub use threshold::{estimate_threshold, ThresholdConfig, ThresholdEstimate};
