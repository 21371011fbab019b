//! Dense state-vector and density-matrix simulation over named registers.

mod layout;
mod ops;
mod state;

pub(crate) use layout::LocalMap;
pub use layout::{Register, RegisterLayout, RegisterSpan, MIXED_QUBIT_CAP, PURE_QUBIT_CAP};
pub(crate) use ops::sample_index;
pub use ops::{
    check_gentle_bound, collapse_and_drop, gentle_check_counts, gentle_measure, gentle_measure_on,
    hadamard_all, measure_register, partial_trace, prepare_subspace_state, purify,
    register_distribution, trace_distance, GentleOutcome, MeasurementOutcome,
};
pub use state::{QuantumState, StateDump, StateForm};
