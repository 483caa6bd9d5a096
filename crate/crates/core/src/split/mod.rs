//! Operator splitting for linear systems and reference integration of the damped
//! second-order dynamics behind the momentum methods.

mod damping;
mod expm;
mod lie;
mod ode;

pub use damping::{ssa1_damping_coefficient, ssa2_damping_coefficient, DampingSchedule};
pub use expm::{matrix_exp, spectral_norm};
pub use lie::{
    lie_propagator, lie_split_step, observed_order, splitting_defect, strang_propagator, strang_split_step,
    LinearSplitSystem, SplitOrder,
};
pub use ode::{integrate_second_order, SecondOrderSystem, TrajectoryPoint};
