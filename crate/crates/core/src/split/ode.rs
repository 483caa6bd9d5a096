use crate::error::{Error, Result};

type Damping<'a> = Box<dyn Fn(f64) -> f64 + 'a>;
type Field<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;

/// `ü + γ(t)u̇ = −∇f(u)`, integrated as the first-order pair
/// `u̇ = v`, `v̇ = −γ(t)v − ∇f(u)` from `(t0, u0, v0)`.
pub struct SecondOrderSystem<'a> {
    pub damping: Damping<'a>,
    pub gradient: Field<'a>,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub t0: f64,
}

impl<'a> SecondOrderSystem<'a> {
    pub fn new(
        damping: impl Fn(f64) -> f64 + 'a,
        gradient: impl Fn(&[f64]) -> Vec<f64> + 'a,
        u0: Vec<f64>,
        v0: Vec<f64>,
    ) -> Self {
        SecondOrderSystem {
            damping: Box::new(damping),
            gradient: Box::new(gradient),
            u0,
            v0,
            t0: 0.0,
        }
    }

    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Constant unit damping, the common large-time limit of the splitting dynamics.
    pub fn unit_damping(gradient: impl Fn(&[f64]) -> Vec<f64> + 'a, u0: Vec<f64>, v0: Vec<f64>) -> Self {
        Self::new(|_| 1.0, gradient, u0, v0)
    }

    /// Nesterov's `3/t` damping, started at `t0 > 0`.
    pub fn nesterov(gradient: impl Fn(&[f64]) -> Vec<f64> + 'a, u0: Vec<f64>, v0: Vec<f64>, t0: f64) -> Self {
        Self::new(|t| 3.0 / t, gradient, u0, v0).starting_at(t0)
    }

    fn rhs(&self, t: f64, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gamma = (self.damping)(t);
        let g = (self.gradient)(u);
        let dv = v.iter().zip(&g).map(|(v, g)| -gamma * v - g).collect();
        (v.to_vec(), dv)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Classical fourth-order Runge–Kutta over `[t0, horizon]` with `steps` equal
/// steps. Returns `steps + 1` points including the initial one.
pub fn integrate_second_order(sys: &SecondOrderSystem<'_>, horizon: f64, steps: usize) -> Result<Vec<TrajectoryPoint>> {
    if steps == 0 {
        return Err(Error::invalid("steps", "at least one step is required"));
    }
    if !(horizon > sys.t0) {
        return Err(Error::invalid(
            "horizon",
            format!("{horizon} must exceed t0 = {}", sys.t0),
        ));
    }
    if sys.u0.len() != sys.v0.len() {
        return Err(Error::DimensionMismatch {
            expected: sys.u0.len(),
            actual: sys.v0.len(),
        });
    }
    let dt = (horizon - sys.t0) / steps as f64;
    let axpy = |x: &[f64], a: f64, d: &[f64]| -> Vec<f64> { x.iter().zip(d).map(|(x, d)| x + a * d).collect() };

    let mut u = sys.u0.clone();
    let mut v = sys.v0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(TrajectoryPoint {
        t: sys.t0,
        u: u.clone(),
        v: v.clone(),
    });
    for i in 0..steps {
        let t = sys.t0 + i as f64 * dt;
        let (k1u, k1v) = sys.rhs(t, &u, &v);
        let (k2u, k2v) = sys.rhs(t + 0.5 * dt, &axpy(&u, 0.5 * dt, &k1u), &axpy(&v, 0.5 * dt, &k1v));
        let (k3u, k3v) = sys.rhs(t + 0.5 * dt, &axpy(&u, 0.5 * dt, &k2u), &axpy(&v, 0.5 * dt, &k2v));
        let (k4u, k4v) = sys.rhs(t + dt, &axpy(&u, dt, &k3u), &axpy(&v, dt, &k3v));
        for j in 0..u.len() {
            u[j] += dt / 6.0 * (k1u[j] + 2.0 * k2u[j] + 2.0 * k3u[j] + k4u[j]);
            v[j] += dt / 6.0 * (k1v[j] + 2.0 * k2v[j] + 2.0 * k3v[j] + k4v[j]);
        }
        let t_next = sys.t0 + (i + 1) as f64 * dt;
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { t: t_next });
        }
        out.push(TrajectoryPoint {
            t: t_next,
            u: u.clone(),
            v: v.clone(),
        });
    }
    Ok(out)
}
