//! Scenario harnesses: the flatness estimate, stability under mollification,
//! and the blow-up probe.

mod blowup;
mod flatness;
mod stability;

pub use blowup::{blowup_probe, BlowupReport, RadiusFit, SAMPLES_PER_AXIS};
pub use flatness::{
    calibrate, flatness_experiment, lhs_monotone_in_tau, FlatnessParameters, FlatnessReport,
    FlatnessStatus, Perturbation, CALIBRATION_FACTOR, INNER_HALF_WIDTH, OUTER_HALF_WIDTH,
};
pub use stability::{max_energy, stability_check, StabilityReport, StabilitySample, DISTANCE_FLOOR};
