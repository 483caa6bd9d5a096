use crate::error::{Error, Result};

/// Continuous counterpart of the `(n − 1)/(n + 2)` momentum schedule:
/// `δ(t) = (t − δ)/(t + 2δ)`. With offset `δ = h`, `δ(nh) = β_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingSchedule {
    offset: f64,
}

impl DampingSchedule {
    pub fn new(offset: f64) -> Result<Self> {
        if !(offset > 0.0) || !offset.is_finite() {
            return Err(Error::invalid("offset", format!("must be positive, got {offset}")));
        }
        Ok(DampingSchedule { offset })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `(δ(t), δ̇(t))` with `δ̇(t) = 3δ/(t + 2δ)²`.
    pub fn delta(&self, t: f64) -> (f64, f64) {
        let d = self.offset;
        let denom = t + 2.0 * d;
        ((t - d) / denom, 3.0 * d / (denom * denom))
    }
}

/// Velocity damping `δ(t) − 2δ̇(t)/δ(t)` of the SSA1 dynamics.
/// The pole at `t = δ` is reported within `1e-9`.
pub fn ssa1_damping_coefficient(t: f64, schedule: &DampingSchedule) -> Result<f64> {
    if (t - schedule.offset()).abs() <= 1e-9 {
        return Err(Error::Singularity { t });
    }
    let (delta, rate) = schedule.delta(t);
    Ok(delta - 2.0 * rate / delta)
}

/// Velocity damping `δ(t)` of the SSA2 dynamics.
pub fn ssa2_damping_coefficient(t: f64, schedule: &DampingSchedule) -> f64 {
    schedule.delta(t).0
}
