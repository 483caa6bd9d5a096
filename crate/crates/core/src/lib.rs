//! Sequential-splitting momentum optimizers and the machinery around them.
//!
//! The crate is organised by concern:
//!
//! * [`optim`] holds the single-step update rules: gradient descent, Polyak and
//!   Nesterov momentum, the two sequential-splitting schemes (SSA1, SSA2) and the
//!   adaptive family (Adagrad, Adadelta, RMSProp, Adam, SSA1-Ada).
//! * [`split`] contains the operator-splitting tools used to study the continuous
//!   dynamics behind those schemes: dense matrix exponentials, Lie/Strang steps,
//!   splitting defects and a reference integrator for damped second-order systems.
//! * [`objectives`] provides differentiable test problems and a central-difference
//!   gradient oracle.
//! * [`nn`] is a small multilayer perceptron with backpropagation and the
//!   log-softmax / negative log-likelihood losses.
//! * [`datasets`] reads IDX (MNIST-style) files and generates seeded Gaussian blobs.
//! * [`experiment`] runs epoch/mini-batch training, records per-epoch metrics and
//!   computes timing statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod objectives;
pub mod optim;
pub mod schedule;
pub mod split;

mod vecops;

pub use error::{Error, Result};
pub use schedule::{momentum_coefficient, MomentumSchedule, VelocityExponent};
