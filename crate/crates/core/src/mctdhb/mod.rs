//! Multi-configurational time-dependent Hartree method for bosons in 1D.

mod eom;
mod init;
mod integrate;
mod lanczos;
mod state;

pub use eom::{eom_rhs, generator, project_hamiltonian, regularized_inverse, Generator, StateDerivative, RHO1_FLOOR};
pub use init::{gram_schmidt, hermite, init_product_state, init_product_state_in, pad_modes, InitialShape};
pub use integrate::{
    diagonalize_ci, dt_halving_deviation, edge_fraction, lowdin, max_stable_dt, propagate, propagate_partial, relax,
    step, step_with_info, GroundStateResult, PropagateOptions, PropagationResult, RelaxOptions, StepInfo, TimeMode,
    TimeSeries, DEFAULT_DT, DEFAULT_EDGE_THRESHOLD, REAL_TIME_PROJECT_ABOVE, STEP_NORM_LIMIT,
};
pub use lanczos::lowest_eigenpair;
pub use state::{MctdhbState, STATE_TOLERANCE};
