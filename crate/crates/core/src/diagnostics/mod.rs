//! Weighted norms, the virial functional and late-time detectors.

pub mod convergence;
pub mod localized;
pub mod virial;
pub mod weights;

pub use convergence::{convergence_detectors, ConvergenceReport};
pub use localized::{cutoff_sweep, localized_component_series, projection_defect_sweep, LocalizedReport};
pub use virial::{
    commutator_probe, pure_power_estimate_check, virial_bound_constant, virial_functional,
    virial_inequality_check, VirialReport,
};
pub use weights::{norm_suite, NormSuite, WeightFamily, WeightParams};
