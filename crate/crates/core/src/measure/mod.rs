//! Quantum programs, goodness POVMs, projective and threshold
//! implementations, shift distance and the approximate implementation.

mod api;
mod povm;
mod program;
mod projimp;
mod shift;

pub use api::{
    api_rounds, approx_threshold, sampled_api, ApiOutcome, ProjectiveFamily, API_CONSTANT,
    MAX_RETURN_STEPS,
};
pub use povm::{
    coin_operator, goodness_family, goodness_povm, goodness_povm_predicate, uniform_inputs,
    BinaryPovm, ControlledProjection, Predicate, PredicateCoin, MAX_COINS,
};
pub use program::{Evaluator, PirateOutput, QuantumProgram};
pub use projimp::{
    apply_proj_impl, apply_proj_impl_on, joint_outcome_probabilities, joint_threshold_measure,
    joint_threshold_with, proj_impl, proj_impl_with_tol, sequential_outcome_probabilities,
    threshold_impl, JointThreshold, ProjectiveImplementation, MERGE_TOL, THRESHOLD_SLACK,
};
pub use shift::{shift_distance, RealDistribution};

use serde::{Deserialize, Serialize};

/// `{"gamma", "trace", "shots", "ci95"}`; `trace` is the exact acceptance
/// probability when it was computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub gamma: f64,
    pub trace: Option<f64>,
    pub shots: u64,
    pub ci95: [f64; 2],
}

impl MeasurementReport {
    pub fn exact(gamma: f64, trace: f64) -> Self {
        Self {
            gamma,
            trace: Some(trace),
            shots: 0,
            ci95: [trace, trace],
        }
    }

    pub fn sampled(gamma: f64, accepted: u64, shots: u64) -> Self {
        Self {
            gamma,
            trace: None,
            shots,
            ci95: crate::stats::ci95(accepted, shots),
        }
    }
}

#[cfg(test)]
mod tests;
