//! Open-system dynamics: master equation, jump unraveling, dilations and
//! the relaxation history experiment.

mod dilation;
mod model;
mod relaxation;
mod unravel;

pub use dilation::{dilate_to_projection, stinespring_unitary, ProjectiveDilation};
pub use model::{
    propagate, qubit_damping_model, spectral_gap, stationary_state, thermal_oscillator_model, thermal_state,
    levels_for_tail, thermal_tail_weight, Channel, ChannelMap, LindbladModel, PropagationMethod,
};
pub use relaxation::{
    channel_composition_functional, dilated_functional, relaxation_decoherence_experiment, RelaxationReport,
    RelaxationRoute, DILATION_DIM_LIMIT,
};
pub use unravel::{
    ensemble_average, jump_unravel, povm_feedback_step, step_count, step_order_fit, EnsembleConfig, EnsembleResult,
    EnsembleSnapshot, JumpEvent, JumpScheme, PovmStep, StepOrderReport, Trajectory, TrajectoryState,
};
