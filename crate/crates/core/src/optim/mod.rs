//! Optimizer update rules and a name-keyed registry that drives them uniformly.
//!
//! ```
//! use splitopt::objectives::{Objective, Quadratic};
//! use splitopt::optim::{Optimizer, OptimizerKind, OptimizerSpec};
//!
//! let q = Quadratic::random(10, 1.0, 10.0, 42)?;
//! let mut opt = Optimizer::new(OptimizerSpec::new(OptimizerKind::Ssa1).with_lr(0.1), vec![1.0; 10])?;
//! for _ in 0..500 {
//!     opt.step(|u: &[f64]| q.gradient(u))?;
//! }
//! assert!(q.value(opt.params()) - q.min_value() < 1e-6);
//! # Ok::<(), splitopt::Error>(())
//! ```

pub mod adaptive;
pub mod inertial;

pub use adaptive::{
    adadelta_step, adagrad_step, adam_step, rmsprop_step, ssa1_ada_step, AdaptiveHyperParams, AdaptiveState,
    Ssa1AdaOrder,
};
pub use inertial::{
    gd_step, minibatch_sgd_step, nesterov_step, polyak_step, ssa1_step, ssa2_step, sun_stepsize, InertialState,
    NesterovForm, SplitHyperParams, Ssa1Form,
};

use crate::error::{Error, Result};
use crate::schedule::{MomentumSchedule, VelocityExponent};
use crate::vecops::check_dim;

/// Every optimizer reachable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Polyak,
    Nesterov,
    NesterovVelocity,
    NesterovConst,
    Ssa1,
    Ssa2,
    Ssa1Const,
    Ssa2Const,
    Adagrad,
    Adadelta,
    Rmsprop,
    Adam,
    Ssa1Ada,
    Ssa1AdaZFirst,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 15] = [
        OptimizerKind::Sgd,
        OptimizerKind::Polyak,
        OptimizerKind::Nesterov,
        OptimizerKind::NesterovVelocity,
        OptimizerKind::NesterovConst,
        OptimizerKind::Ssa1,
        OptimizerKind::Ssa2,
        OptimizerKind::Ssa1Const,
        OptimizerKind::Ssa2Const,
        OptimizerKind::Adagrad,
        OptimizerKind::Adadelta,
        OptimizerKind::Rmsprop,
        OptimizerKind::Adam,
        OptimizerKind::Ssa1Ada,
        OptimizerKind::Ssa1AdaZFirst,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Polyak => "polyak",
            OptimizerKind::Nesterov => "nesterov",
            OptimizerKind::NesterovVelocity => "nesterov-velocity",
            OptimizerKind::NesterovConst => "nesterov-const",
            OptimizerKind::Ssa1 => "ssa1",
            OptimizerKind::Ssa2 => "ssa2",
            OptimizerKind::Ssa1Const => "ssa1-const",
            OptimizerKind::Ssa2Const => "ssa2-const",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::Rmsprop => "rmsprop",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Ssa1Ada => "ssa1-ada",
            OptimizerKind::Ssa1AdaZFirst => "ssa1-ada-zfirst",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(
            self,
            OptimizerKind::Adagrad
                | OptimizerKind::Adadelta
                | OptimizerKind::Rmsprop
                | OptimizerKind::Adam
                | OptimizerKind::Ssa1Ada
                | OptimizerKind::Ssa1AdaZFirst
        )
    }

    /// Learning rate used when none is given: 1.0 for Adadelta and SSA1-Ada,
    /// 0.001 for everything else.
    pub fn default_lr(&self) -> f64 {
        match self {
            OptimizerKind::Adadelta | OptimizerKind::Ssa1Ada | OptimizerKind::Ssa1AdaZFirst => 1.0,
            _ => 0.001,
        }
    }

    pub fn default_momentum(&self) -> MomentumSchedule {
        match self {
            OptimizerKind::Nesterov | OptimizerKind::NesterovVelocity => MomentumSchedule::NMinus1OverNPlus2,
            OptimizerKind::NesterovConst | OptimizerKind::Ssa1Const | OptimizerKind::Ssa2Const => {
                MomentumSchedule::Constant(0.5)
            }
            OptimizerKind::Polyak => MomentumSchedule::Constant(0.5),
            _ => MomentumSchedule::NOverNPlus3,
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("optimizer", format!("unknown optimizer `{s}`")))
    }
}

/// Hyper-parameters for any registered optimizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub k: VelocityExponent,
    /// Inertial schedule; for Polyak the constant is the inertia `γ`.
    pub momentum: MomentumSchedule,
    pub rho: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub ssa1_form: Ssa1Form,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind) -> Self {
        let eps = match kind {
            OptimizerKind::Adadelta | OptimizerKind::Ssa1Ada | OptimizerKind::Ssa1AdaZFirst => 1e-6,
            _ => 1e-8,
        };
        OptimizerSpec {
            kind,
            lr: kind.default_lr(),
            k: VelocityExponent::Constant(2.0),
            momentum: kind.default_momentum(),
            rho: 0.9,
            eps,
            beta1: 0.9,
            beta2: 0.999,
            ssa1_form: Ssa1Form::Derived,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn with_momentum(mut self, momentum: MomentumSchedule) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_k(mut self, k: VelocityExponent) -> Self {
        self.k = k;
        self
    }

    fn adaptive(&self) -> AdaptiveHyperParams {
        AdaptiveHyperParams {
            h: self.lr,
            rho: self.rho,
            eps: self.eps,
            beta1: self.beta1,
            beta2: self.beta2,
            k: self.k.base(),
        }
    }

    fn split(&self) -> SplitHyperParams {
        SplitHyperParams {
            h: self.lr,
            k: self.k,
            ssa1_form: self.ssa1_form,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid(
                "lr",
                format!("must be finite and nonnegative, got {}", self.lr),
            ));
        }
        if !(self.k.base() >= 0.0) {
            return Err(Error::invalid(
                "k",
                format!("must be nonnegative, got {}", self.k.base()),
            ));
        }
        if self.kind.is_adaptive() {
            self.adaptive().validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum OptimizerState {
    Inertial(InertialState),
    Adaptive(AdaptiveState),
}

/// A configured optimizer owning its parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer {
    spec: OptimizerSpec,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec, theta0: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let state = if spec.kind.is_adaptive() {
            OptimizerState::Adaptive(AdaptiveState::new(theta0, spec.eps))
        } else {
            OptimizerState::Inertial(InertialState::new(theta0))
        };
        Ok(Optimizer { spec, state })
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        match &self.state {
            OptimizerState::Inertial(s) => &s.u,
            OptimizerState::Adaptive(s) => &s.theta,
        }
    }

    pub fn iterations(&self) -> u64 {
        match &self.state {
            OptimizerState::Inertial(s) => s.n,
            OptimizerState::Adaptive(s) => s.n,
        }
    }

    /// Advances one step. `grad_fn` may be evaluated at points other than the
    /// current parameters (extrapolated or auxiliary points).
    pub fn step<G>(&mut self, mut grad_fn: G) -> Result<()>
    where
        G: FnMut(&[f64]) -> Vec<f64>,
    {
        let spec = self.spec;
        match &mut self.state {
            OptimizerState::Inertial(s) => match spec.kind {
                OptimizerKind::Sgd => {
                    let g = grad_fn(&s.u);
                    let next = minibatch_sgd_step(&s.u, &g, spec.lr)?;
                    s.u_prev = std::mem::replace(&mut s.u, next);
                    s.n += 1;
                    Ok(())
                }
                OptimizerKind::Polyak => {
                    let g = grad_fn(&s.u);
                    let gamma = spec.momentum.beta(s.n);
                    polyak_step(s, &g, gamma, spec.lr)
                }
                OptimizerKind::Nesterov | OptimizerKind::NesterovConst => {
                    nesterov_step(s, grad_fn, spec.lr, spec.momentum, NesterovForm::TwoSequence)
                }
                OptimizerKind::NesterovVelocity => {
                    nesterov_step(s, grad_fn, spec.lr, spec.momentum, NesterovForm::Velocity)
                }
                OptimizerKind::Ssa1 | OptimizerKind::Ssa1Const => ssa1_step(s, grad_fn, &spec.split(), spec.momentum),
                OptimizerKind::Ssa2 | OptimizerKind::Ssa2Const => ssa2_step(s, grad_fn, &spec.split(), spec.momentum),
                _ => unreachable!("adaptive kind with inertial state"),
            },
            OptimizerState::Adaptive(s) => {
                let hp = spec.adaptive();
                match spec.kind {
                    OptimizerKind::Ssa1Ada => ssa1_ada_step(s, grad_fn, &hp, spec.momentum, Ssa1AdaOrder::AsWritten),
                    OptimizerKind::Ssa1AdaZFirst => ssa1_ada_step(s, grad_fn, &hp, spec.momentum, Ssa1AdaOrder::ZFirst),
                    kind => {
                        let g = grad_fn(&s.theta);
                        check_dim(s.dim(), g.len())?;
                        match kind {
                            OptimizerKind::Adagrad => adagrad_step(s, &g, &hp),
                            OptimizerKind::Adadelta => adadelta_step(s, &g, &hp),
                            OptimizerKind::Rmsprop => rmsprop_step(s, &g, &hp),
                            OptimizerKind::Adam => adam_step(s, &g, &hp),
                            _ => unreachable!("inertial kind with adaptive state"),
                        }
                    }
                }
            }
        }
    }
}
