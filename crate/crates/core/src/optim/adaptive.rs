//! Adaptive learning-rate optimizers and the adaptive splitting scheme SSA1-Ada.

use crate::error::{Error, Result};
use crate::schedule::MomentumSchedule;
use crate::vecops::check_dim;

/// Mutable record shared by the adaptive rules. Each rule touches only the
/// accumulators it needs.
///
/// `acc_grad_sq` holds `E[g²]` (Adadelta, RMSProp, SSA1-Ada), the plain sum of
/// squared gradients (Adagrad) or Adam's second moment.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveState {
    pub theta: Vec<f64>,
    /// SSA1-Ada velocity.
    pub v: Vec<f64>,
    /// SSA1-Ada auxiliary point, `z_0 = θ_0`.
    pub z: Vec<f64>,
    pub acc_grad_sq: Vec<f64>,
    pub acc_update_sq: Vec<f64>,
    /// `RMS[Δz]` from the previous SSA1-Ada step, initially `√ε`.
    pub rms_update: Vec<f64>,
    /// Adam first moment.
    pub mom: Vec<f64>,
    pub n: u64,
}

impl AdaptiveState {
    pub fn new(theta0: Vec<f64>, eps: f64) -> Self {
        let d = theta0.len();
        AdaptiveState {
            z: theta0.clone(),
            theta: theta0,
            v: vec![0.0; d],
            acc_grad_sq: vec![0.0; d],
            acc_update_sq: vec![0.0; d],
            rms_update: vec![eps.sqrt(); d],
            mom: vec![0.0; d],
            n: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn check(&self, grad_len: usize) -> Result<()> {
        let d = self.dim();
        for len in [
            self.v.len(),
            self.z.len(),
            self.acc_grad_sq.len(),
            self.acc_update_sq.len(),
            self.rms_update.len(),
            self.mom.len(),
            grad_len,
        ] {
            check_dim(d, len)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveHyperParams {
    pub h: f64,
    /// Running-average decay (`γ`, or `ρ` in Adadelta notation).
    pub rho: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// SSA1-Ada velocity exponent.
    pub k: f64,
}

impl AdaptiveHyperParams {
    const BASE: AdaptiveHyperParams = AdaptiveHyperParams {
        h: 0.001,
        rho: 0.9,
        eps: 1e-8,
        beta1: 0.9,
        beta2: 0.999,
        k: 2.0,
    };

    pub fn adagrad() -> Self {
        Self::BASE
    }

    pub fn rmsprop() -> Self {
        Self::BASE
    }

    pub fn adam() -> Self {
        Self::BASE
    }

    pub fn adadelta() -> Self {
        AdaptiveHyperParams {
            h: 1.0,
            eps: 1e-6,
            ..Self::BASE
        }
    }

    pub fn ssa1_ada() -> Self {
        Self::adadelta()
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return Err(Error::invalid(
                "h",
                format!("learning rate must be nonnegative, got {}", self.h),
            ));
        }
        for (name, value) in [("rho", self.rho), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::invalid(name, format!("{value} is outside (0, 1)")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be positive, got {}", self.eps)));
        }
        if !(self.k >= 0.0) {
            return Err(Error::invalid("k", format!("must be nonnegative, got {}", self.k)));
        }
        Ok(())
    }
}

#[inline]
fn running_average(acc: &mut f64, rho: f64, x: f64) {
    *acc = rho * *acc + (1.0 - rho) * x * x;
}

/// `acc += g²`, `θ ← θ − h·g/(√acc + ε)`.
pub fn adagrad_step(state: &mut AdaptiveState, grad: &[f64], hp: &AdaptiveHyperParams) -> Result<()> {
    state.check(grad.len())?;
    for ((theta, acc), &g) in state.theta.iter_mut().zip(state.acc_grad_sq.iter_mut()).zip(grad) {
        *acc += g * g;
        *theta -= hp.h * g / (acc.sqrt() + hp.eps);
    }
    state.n += 1;
    Ok(())
}

/// Adadelta with a multiplicative base rate `h` (1.0 reproduces the original rule).
/// The numerator uses `E[Δ²]` from the previous step.
pub fn adadelta_step(state: &mut AdaptiveState, grad: &[f64], hp: &AdaptiveHyperParams) -> Result<()> {
    state.check(grad.len())?;
    for (((theta, eg), ed), &g) in state
        .theta
        .iter_mut()
        .zip(state.acc_grad_sq.iter_mut())
        .zip(state.acc_update_sq.iter_mut())
        .zip(grad)
    {
        running_average(eg, hp.rho, g);
        let delta = -((*ed + hp.eps).sqrt() / (*eg + hp.eps).sqrt()) * g;
        running_average(ed, hp.rho, delta);
        *theta += hp.h * delta;
    }
    state.n += 1;
    Ok(())
}

/// `E[g²] ← γE[g²] + (1 − γ)g²`, `θ ← θ − h·g/√(E[g²] + ε)`.
pub fn rmsprop_step(state: &mut AdaptiveState, grad: &[f64], hp: &AdaptiveHyperParams) -> Result<()> {
    state.check(grad.len())?;
    for ((theta, eg), &g) in state.theta.iter_mut().zip(state.acc_grad_sq.iter_mut()).zip(grad) {
        running_average(eg, hp.rho, g);
        *theta -= hp.h * g / (*eg + hp.eps).sqrt();
    }
    state.n += 1;
    Ok(())
}

/// Adam with bias-corrected moments. The counter is advanced before the
/// correction, so the first call uses `n = 1`.
pub fn adam_step(state: &mut AdaptiveState, grad: &[f64], hp: &AdaptiveHyperParams) -> Result<()> {
    state.check(grad.len())?;
    state.n += 1;
    let n = i32::try_from(state.n).unwrap_or(i32::MAX);
    let c1 = 1.0 - hp.beta1.powi(n);
    let c2 = 1.0 - hp.beta2.powi(n);
    for (((theta, m), s), &g) in state
        .theta
        .iter_mut()
        .zip(state.mom.iter_mut())
        .zip(state.acc_grad_sq.iter_mut())
        .zip(grad)
    {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *s = hp.beta2 * *s + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / c1;
        let s_hat = *s / c2;
        *theta -= hp.h * m_hat / (s_hat.sqrt() + hp.eps);
    }
    Ok(())
}

/// Ordering of the SSA1-Ada step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ssa1AdaOrder {
    /// Accumulate at the previous auxiliary point `z_n`, then build `z_{n+1}` and
    /// update with the gradient there: two gradient evaluations.
    #[default]
    AsWritten,
    /// Build `z_{n+1}` first and use its gradient for every update: one evaluation.
    ZFirst,
}

/// Adaptive SSA1.
///
/// With `g_acc` the gradient used for accumulation (at `z_n` or `z_{n+1}`
/// depending on `order`) and `g` the gradient at `z_{n+1} = θ + hβv`:
///
/// ```text
/// E[g²]  ← ρE[g²] + (1 − ρ)g_acc²
/// h_n    = h · RMS[Δz]_prev / √(E[g²] + ε)          (componentwise)
/// Δz     = −h_n g_acc,  E[Δz²] ← ρE[Δz²] + (1 − ρ)Δz²,  RMS[Δz] = √(E[Δz²] + ε)
/// v'     = β^k((1 − h_nβ)v − h_n g)
/// θ'     = θ + β(1 − h_nβ)(z_{n+1} − θ) − h_n² g
/// ```
pub fn ssa1_ada_step<G>(
    state: &mut AdaptiveState,
    mut grad_fn: G,
    hp: &AdaptiveHyperParams,
    schedule: MomentumSchedule,
    order: Ssa1AdaOrder,
) -> Result<()>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    state.check(state.dim())?;
    let beta = schedule.beta(state.n);
    let boost = beta.powf(hp.k);

    let z_next: Vec<f64> = state
        .theta
        .iter()
        .zip(&state.v)
        .map(|(t, v)| t + hp.h * beta * v)
        .collect();
    let (g_acc, g) = match order {
        Ssa1AdaOrder::AsWritten => {
            let g_acc = grad_fn(&state.z);
            check_dim(state.dim(), g_acc.len())?;
            let g = grad_fn(&z_next);
            (g_acc, g)
        }
        Ssa1AdaOrder::ZFirst => {
            let g = grad_fn(&z_next);
            (g.clone(), g)
        }
    };
    check_dim(state.dim(), g.len())?;

    for i in 0..state.dim() {
        running_average(&mut state.acc_grad_sq[i], hp.rho, g_acc[i]);
        let rms_grad = (state.acc_grad_sq[i] + hp.eps).sqrt();
        let rate = hp.h * state.rms_update[i] / rms_grad;
        let dz = -rate * g_acc[i];
        running_average(&mut state.acc_update_sq[i], hp.rho, dz);
        state.rms_update[i] = (state.acc_update_sq[i] + hp.eps).sqrt();

        let damp = 1.0 - rate * beta;
        let theta = state.theta[i];
        state.v[i] = boost * (damp * state.v[i] - rate * g[i]);
        state.theta[i] = theta + beta * damp * (z_next[i] - theta) - rate * rate * g[i];
    }
    state.z = z_next;
    state.n += 1;
    Ok(())
}
