//! Non-adaptive update rules: gradient descent, Polyak and Nesterov momentum, and
//! the two sequential-splitting schemes SSA1 and SSA2.
//!
//! Every rule advances an [`InertialState`] in place and evaluates the gradient
//! oracle at most once per call.

use crate::error::{Error, Result};
use crate::schedule::{MomentumSchedule, VelocityExponent};
use crate::vecops::check_dim;

/// Position, velocity and previous position of a momentum method.
///
/// The velocity form uses `v` with `h v_n = u_n − u_{n−1}`; the two-sequence forms
/// use `u_prev`. Both are initialised consistently by [`InertialState::new`]
/// (`v_0 = 0`, `u_{−1} = u_0`).
#[derive(Clone, Debug, PartialEq)]
pub struct InertialState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub u_prev: Vec<f64>,
    pub n: u64,
}

impl InertialState {
    pub fn new(u0: Vec<f64>) -> Self {
        let d = u0.len();
        InertialState {
            u_prev: u0.clone(),
            u: u0,
            v: vec![0.0; d],
            n: 0,
        }
    }

    pub fn with_velocity(u0: Vec<f64>, v0: Vec<f64>) -> Result<Self> {
        check_dim(u0.len(), v0.len())?;
        Ok(InertialState {
            u_prev: u0.clone(),
            u: u0,
            v: v0,
            n: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    fn require_velocity(&self) -> Result<()> {
        if self.v.len() != self.u.len() {
            return Err(Error::Unpopulated("v"));
        }
        Ok(())
    }

    fn require_previous(&self) -> Result<()> {
        if self.u_prev.len() != self.u.len() {
            return Err(Error::Unpopulated("u_prev"));
        }
        Ok(())
    }
}

/// Which algebraic form of Nesterov's method to advance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NesterovForm {
    /// `y = u + β(u − u_prev)`, `u' = y − h²∇f(y)`.
    TwoSequence,
    /// `y = u + hβv`, `v' = βv − h∇f(y)`, `u' = u + hv'`.
    Velocity,
}

/// Parameter update used by SSA1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ssa1Form {
    /// `u' = u + β(1 − hβ)(y − u) − h²∇f(y)`.
    #[default]
    Derived,
    /// `u' = u + h(1 − hβ)v − h²∇f(y)`, the arithmetic of the published pseudocode
    /// (no `β²` factor on the velocity term).
    Pseudocode,
}

/// Step size, velocity exponent and SSA1 form shared by the splitting schemes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitHyperParams {
    pub h: f64,
    pub k: VelocityExponent,
    pub ssa1_form: Ssa1Form,
}

impl SplitHyperParams {
    pub fn new(h: f64, k: f64) -> Result<Self> {
        let hp = SplitHyperParams {
            h,
            k: VelocityExponent::Constant(k),
            ssa1_form: Ssa1Form::Derived,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn with_k_decay(mut self) -> Self {
        self.k = VelocityExponent::ExpDecay(self.k.base());
        self
    }

    pub fn with_ssa1_form(mut self, form: Ssa1Form) -> Self {
        self.ssa1_form = form;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::invalid(
                "h",
                format!("step size must be positive, got {}", self.h),
            ));
        }
        if !(self.k.base() >= 0.0) {
            return Err(Error::invalid(
                "k",
                format!("exponent must be nonnegative, got {}", self.k.base()),
            ));
        }
        Ok(())
    }
}

impl Default for SplitHyperParams {
    fn default() -> Self {
        SplitHyperParams {
            h: 0.1,
            k: VelocityExponent::default(),
            ssa1_form: Ssa1Form::Derived,
        }
    }
}

/// `u − h·grad`.
pub fn gd_step(u: &[f64], grad: &[f64], h: f64) -> Result<Vec<f64>> {
    check_dim(u.len(), grad.len())?;
    Ok(u.iter().zip(grad).map(|(x, g)| x - h * g).collect())
}

/// Same arithmetic as [`gd_step`]; `grad_batch` is the gradient of the loss
/// restricted to one mini-batch.
pub fn minibatch_sgd_step(theta: &[f64], grad_batch: &[f64], h: f64) -> Result<Vec<f64>> {
    gd_step(theta, grad_batch, h)
}

/// Heavy-ball step with coefficients `α_n` (inertia) and `β_n` (step size).
/// The gradient is taken at `u_n`, not at the extrapolated point.
pub fn polyak_step(state: &mut InertialState, grad_at_u: &[f64], alpha: f64, beta: f64) -> Result<()> {
    state.require_previous()?;
    check_dim(state.dim(), grad_at_u.len())?;
    let next: Vec<f64> = state
        .u
        .iter()
        .zip(&state.u_prev)
        .zip(grad_at_u)
        .map(|((&u, &up), &g)| {
            let y = u + alpha * (u - up);
            y - beta * g
        })
        .collect();
    state.u_prev = std::mem::replace(&mut state.u, next);
    state.n += 1;
    Ok(())
}

/// Step size `2(1 − α)c / L`.
pub fn sun_stepsize(alpha: f64, c: f64, lipschitz: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is outside [0, 1)")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid("c", format!("{c} is outside (0, 1)")));
    }
    if !(lipschitz > 0.0) {
        return Err(Error::invalid(
            "L",
            format!("Lipschitz constant must be positive, got {lipschitz}"),
        ));
    }
    Ok(2.0 * (1.0 - alpha) * c / lipschitz)
}

/// Nesterov's accelerated step with `s = h²`.
///
/// Both forms keep `u`, `v` and `u_prev` consistent afterwards, so the state can be
/// advanced by either form at any point.
pub fn nesterov_step<G>(
    state: &mut InertialState,
    mut grad_fn: G,
    h: f64,
    schedule: MomentumSchedule,
    form: NesterovForm,
) -> Result<()>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let beta = schedule.beta(state.n);
    match form {
        NesterovForm::Velocity => {
            state.require_velocity()?;
            let y: Vec<f64> = state.u.iter().zip(&state.v).map(|(u, v)| u + h * beta * v).collect();
            let g = grad_fn(&y);
            check_dim(state.dim(), g.len())?;
            for (v, g) in state.v.iter_mut().zip(&g) {
                *v = beta * *v - h * g;
            }
            let next: Vec<f64> = state.u.iter().zip(&state.v).map(|(u, v)| u + h * v).collect();
            state.u_prev = std::mem::replace(&mut state.u, next);
        }
        NesterovForm::TwoSequence => {
            state.require_previous()?;
            let y: Vec<f64> = state
                .u
                .iter()
                .zip(&state.u_prev)
                .map(|(u, up)| u + beta * (u - up))
                .collect();
            let g = grad_fn(&y);
            check_dim(state.dim(), g.len())?;
            let h2 = h * h;
            let next: Vec<f64> = y.iter().zip(&g).map(|(y, g)| y - h2 * g).collect();
            state.v = if h != 0.0 {
                next.iter().zip(&state.u).map(|(a, b)| (a - b) / h).collect()
            } else {
                vec![0.0; next.len()]
            };
            state.u_prev = std::mem::replace(&mut state.u, next);
        }
    }
    state.n += 1;
    Ok(())
}

/// Extrapolated point `y = u + hβv`.
fn extrapolate(u: &[f64], v: &[f64], h: f64, beta: f64) -> Vec<f64> {
    u.iter().zip(v).map(|(u, v)| u + h * beta * v).collect()
}

/// SSA1: `y = u + hβv`, `v' = β^k((1 − hβ)v − h∇f(y))`,
/// `u' = u + β(1 − hβ)(y − u) − h²∇f(y)`.
pub fn ssa1_step<G>(
    state: &mut InertialState,
    mut grad_fn: G,
    hp: &SplitHyperParams,
    schedule: MomentumSchedule,
) -> Result<()>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    state.require_velocity()?;
    let h = hp.h;
    let beta = schedule.beta(state.n);
    let boost = beta.powf(hp.k.at(state.n));
    let damp = 1.0 - h * beta;

    let y = extrapolate(&state.u, &state.v, h, beta);
    let g = grad_fn(&y);
    check_dim(state.dim(), g.len())?;

    let h2 = h * h;
    let next: Vec<f64> = match hp.ssa1_form {
        Ssa1Form::Derived => state
            .u
            .iter()
            .zip(&y)
            .zip(&g)
            .map(|((u, y), g)| u + beta * damp * (y - u) - h2 * g)
            .collect(),
        Ssa1Form::Pseudocode => state
            .u
            .iter()
            .zip(&state.v)
            .zip(&g)
            .map(|((u, v), g)| u + h * damp * v - h2 * g)
            .collect(),
    };
    for (v, g) in state.v.iter_mut().zip(&g) {
        *v = boost * (damp * *v - h * g);
    }
    state.u_prev = std::mem::replace(&mut state.u, next);
    state.n += 1;
    Ok(())
}

/// SSA2: `y = u + hβv`, `v' = β^k((1 − hβ)v − h∇f(y))`, `u' = u + h(1 − hβ)v`.
///
/// The parameter update is the division-free rewriting of
/// `u + ((1 − hβ)/β)(y − u)`, so `β = 0` is harmless.
pub fn ssa2_step<G>(
    state: &mut InertialState,
    mut grad_fn: G,
    hp: &SplitHyperParams,
    schedule: MomentumSchedule,
) -> Result<()>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    state.require_velocity()?;
    let h = hp.h;
    let beta = schedule.beta(state.n);
    let boost = beta.powf(hp.k.at(state.n));
    let damp = 1.0 - h * beta;

    let y = extrapolate(&state.u, &state.v, h, beta);
    let g = grad_fn(&y);
    check_dim(state.dim(), g.len())?;

    let next: Vec<f64> = state.u.iter().zip(&state.v).map(|(u, v)| u + h * damp * v).collect();
    for (v, g) in state.v.iter_mut().zip(&g) {
        *v = boost * (damp * *v - h * g);
    }
    state.u_prev = std::mem::replace(&mut state.u, next);
    state.n += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_grad(x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn zero_grad(x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gd_examples() {
        assert!(close(gd_step(&[1.0], &[1.0], 0.1).unwrap()[0], 0.9, 1e-15));
        assert_eq!(gd_step(&[3.0, -7.0], &[0.0, 0.0], 0.3).unwrap(), vec![3.0, -7.0]);
        assert_eq!(gd_step(&[2.0, -2.0], &[1.0, -1.0], 0.5).unwrap(), vec![1.5, -1.5]);
        assert!(matches!(
            gd_step(&[1.0, 2.0], &[1.0], 0.1),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn minibatch_sgd_examples() {
        assert!(close(minibatch_sgd_step(&[0.5], &[1.0], 0.01).unwrap()[0], 0.49, 1e-15));
        assert_eq!(minibatch_sgd_step(&[0.5], &[0.0], 0.01).unwrap(), vec![0.5]);
        let u = [0.3, -1.2, 4.0];
        let g = [0.1, 0.7, -2.0];
        assert_eq!(
            minibatch_sgd_step(&u, &g, 0.05).unwrap(),
            gd_step(&u, &g, 0.05).unwrap()
        );
    }

    #[test]
    fn polyak_examples() {
        let mut s = InertialState::new(vec![1.0]);
        polyak_step(&mut s, &[1.0], 0.0, 0.1).unwrap();
        assert!(close(s.u[0], 0.9, 1e-15));

        let mut s = InertialState::new(vec![1.0]);
        s.u_prev = vec![0.5];
        polyak_step(&mut s, &[1.0], 0.5, 0.1).unwrap();
        assert!(close(s.u[0], 1.15, 1e-15));
        assert_eq!(s.u_prev, vec![1.0]);
        assert_eq!(s.n, 1);

        let mut s = InertialState::new(vec![2.0, -1.0]);
        polyak_step(&mut s, &[0.4, 0.2], 0.8, 0.3).unwrap();
        assert_eq!(s.u, gd_step(&[2.0, -1.0], &[0.4, 0.2], 0.3).unwrap());
    }

    #[test]
    fn polyak_rejects_mismatch() {
        let mut s = InertialState::new(vec![1.0, 2.0]);
        assert!(polyak_step(&mut s, &[1.0], 0.5, 0.1).is_err());
        s.u_prev.clear();
        assert_eq!(
            polyak_step(&mut s, &[1.0, 1.0], 0.5, 0.1),
            Err(Error::Unpopulated("u_prev"))
        );
    }

    #[test]
    fn sun_examples() {
        assert!(close(sun_stepsize(0.5, 0.5, 1.0).unwrap(), 0.5, 1e-15));
        assert!(close(sun_stepsize(0.0, 0.5, 2.0).unwrap(), 0.5, 1e-15));
        let tiny = sun_stepsize(1.0 - 1e-12, 0.5, 1.0).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-11);
        assert!(sun_stepsize(1.0, 0.5, 1.0).is_err());
        assert!(sun_stepsize(0.5, 1.0, 1.0).is_err());
        assert!(sun_stepsize(0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn nesterov_velocity_example() {
        let mut s = InertialState::new(vec![1.0]);
        s.n = 1;
        let mut y_seen = Vec::new();
        nesterov_step(
            &mut s,
            |y: &[f64]| {
                y_seen.push(y[0]);
                y.to_vec()
            },
            0.1,
            MomentumSchedule::NOverNPlus3,
            NesterovForm::Velocity,
        )
        .unwrap();
        assert_eq!(y_seen, vec![1.0]);
        assert!(close(s.v[0], -0.1, 1e-15));
        assert!(close(s.u[0], 0.99, 1e-15));
    }

    #[test]
    fn nesterov_coast_without_gradient() {
        let mut s = InertialState::with_velocity(vec![1.0], vec![2.0]).unwrap();
        nesterov_step(
            &mut s,
            zero_grad,
            0.1,
            MomentumSchedule::Constant(0.5),
            NesterovForm::Velocity,
        )
        .unwrap();
        assert!(close(s.v[0], 1.0, 1e-15));
        assert!(close(s.u[0], 1.0 + 0.1 * 0.5 * 2.0, 1e-15));
    }

    #[test]
    fn nesterov_two_sequence_matches_velocity_from_rest() {
        let mut a = InertialState::new(vec![1.0]);
        let mut b = a.clone();
        nesterov_step(
            &mut a,
            identity_grad,
            0.1,
            MomentumSchedule::Constant(0.3),
            NesterovForm::TwoSequence,
        )
        .unwrap();
        nesterov_step(
            &mut b,
            identity_grad,
            0.1,
            MomentumSchedule::Constant(0.3),
            NesterovForm::Velocity,
        )
        .unwrap();
        assert!(close(a.u[0], 0.99, 1e-15));
        assert!(close(a.u[0], b.u[0], 1e-15));
    }

    #[test]
    fn nesterov_unpopulated() {
        let mut s = InertialState::new(vec![1.0]);
        s.v.clear();
        let err = nesterov_step(
            &mut s,
            identity_grad,
            0.1,
            MomentumSchedule::NOverNPlus3,
            NesterovForm::Velocity,
        );
        assert_eq!(err, Err(Error::Unpopulated("v")));
    }

    #[test]
    fn ssa1_example() {
        let mut s = InertialState::new(vec![1.0]);
        s.n = 1;
        let hp = SplitHyperParams::new(0.1, 2.0).unwrap();
        ssa1_step(&mut s, identity_grad, &hp, MomentumSchedule::NOverNPlus3).unwrap();
        assert!(close(s.v[0], -0.00625, 1e-15));
        assert!(close(s.u[0], 0.99, 1e-15));
    }

    #[test]
    fn ssa1_zero_velocity_is_gradient_step_h_squared() {
        let u0 = vec![0.7, -1.3];
        let mut s = InertialState::new(u0.clone());
        s.n = 5;
        let hp = SplitHyperParams::new(0.2, 2.0).unwrap();
        let grad = |x: &[f64]| vec![3.0 * x[0], -x[1]];
        ssa1_step(&mut s, grad, &hp, MomentumSchedule::NOverNPlus3).unwrap();
        let expect = gd_step(&u0, &grad(&u0), 0.04).unwrap();
        for (a, b) in s.u.iter().zip(&expect) {
            assert!(close(*a, *b, 1e-15));
        }
    }

    #[test]
    fn ssa1_coast() {
        let (h, v0) = (0.1, 2.0);
        let mut s = InertialState::with_velocity(vec![1.0], vec![v0]).unwrap();
        s.n = 1;
        let hp = SplitHyperParams::new(h, 2.0).unwrap();
        ssa1_step(&mut s, zero_grad, &hp, MomentumSchedule::NOverNPlus3).unwrap();
        let b: f64 = 0.25;
        assert!(close(s.v[0], b.powi(2) * (1.0 - h * b) * v0, 1e-15));
        assert!(close(s.u[0], 1.0 + h * b * b * (1.0 - h * b) * v0, 1e-15));
    }

    #[test]
    fn ssa1_pseudocode_form_drops_beta_squared() {
        let (h, v0) = (0.1, 2.0);
        let mut s = InertialState::with_velocity(vec![1.0], vec![v0]).unwrap();
        s.n = 1;
        let hp = SplitHyperParams::new(h, 2.0)
            .unwrap()
            .with_ssa1_form(Ssa1Form::Pseudocode);
        ssa1_step(&mut s, zero_grad, &hp, MomentumSchedule::NOverNPlus3).unwrap();
        assert!(close(s.u[0], 1.0 + h * (1.0 - h * 0.25) * v0, 1e-15));
    }

    #[test]
    fn ssa2_examples() {
        let hp = SplitHyperParams::new(0.1, 2.0).unwrap();
        let mut s = InertialState::new(vec![1.0]);
        s.n = 1;
        ssa2_step(
            &mut s,
            |x: &[f64]| vec![100.0 * x[0]],
            &hp,
            MomentumSchedule::NOverNPlus3,
        )
        .unwrap();
        assert_eq!(s.u, vec![1.0]);

        // y = 1.025, v' = 0.0625 (0.975 − 0.1025) = 0.05453125, u' = 1.0975
        let mut s = InertialState::with_velocity(vec![1.0], vec![1.0]).unwrap();
        s.n = 1;
        let mut ys = Vec::new();
        ssa2_step(
            &mut s,
            |x: &[f64]| {
                ys.push(x[0]);
                x.to_vec()
            },
            &hp,
            MomentumSchedule::NOverNPlus3,
        )
        .unwrap();
        assert!(close(ys[0], 1.025, 1e-15));
        assert!(close(s.v[0], 0.05453125, 1e-15));
        assert!(close(s.u[0], 1.0975, 1e-15));

        let mut s = InertialState::with_velocity(vec![1.0], vec![2.0]).unwrap();
        s.n = 1;
        ssa2_step(&mut s, zero_grad, &hp, MomentumSchedule::NOverNPlus3).unwrap();
        assert!(close(s.v[0], 0.0625 * 0.975 * 2.0, 1e-15));
        assert!(close(s.u[0], 1.0 + 0.1 * 0.975 * 2.0, 1e-15));
    }

    #[test]
    fn ssa2_first_step_with_zero_beta_is_finite() {
        let hp = SplitHyperParams::new(0.1, 2.0).unwrap();
        let mut s = InertialState::with_velocity(vec![1.0], vec![1.0]).unwrap();
        ssa2_step(&mut s, identity_grad, &hp, MomentumSchedule::NOverNPlus3).unwrap();
        assert!(s.u[0].is_finite() && s.v[0].is_finite());
        assert_eq!(s.v[0], 0.0);
    }

    #[test]
    fn hyper_params_validate() {
        assert!(SplitHyperParams::new(0.0, 2.0).is_err());
        assert!(SplitHyperParams::new(0.1, -1.0).is_err());
        assert!(SplitHyperParams::new(0.1, 0.0).is_ok());
    }
}
