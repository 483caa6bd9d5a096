//! Momentum coefficient rules and the velocity boost exponent.

use crate::error::{Error, Result};

/// Rule producing the inertial coefficient `β_n` at iteration `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentumSchedule {
    /// `β_n = n / (n + 3)`.
    NOverNPlus3,
    /// `β_n = (n − 1) / (n + 2)`, clamped to 0 at `n = 0`.
    NMinus1OverNPlus2,
    /// `β_n = β` for every `n`.
    Constant(f64),
}

impl MomentumSchedule {
    /// Constant schedule. `β = 1` is accepted for the undamped-limit studies.
    pub fn constant(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid("beta", format!("{beta} is outside [0, 1]")));
        }
        Ok(MomentumSchedule::Constant(beta))
    }

    pub fn beta(&self, n: u64) -> f64 {
        let nf = n as f64;
        match *self {
            MomentumSchedule::NOverNPlus3 => nf / (nf + 3.0),
            MomentumSchedule::NMinus1OverNPlus2 => {
                if n == 0 {
                    0.0
                } else {
                    (nf - 1.0) / (nf + 2.0)
                }
            }
            MomentumSchedule::Constant(beta) => beta,
        }
    }

    /// `1 − β_n`, evaluated from the rational form for the ratio kinds so that no
    /// cancellation occurs as `β_n → 1`.
    pub fn complement(&self, n: u64) -> f64 {
        let nf = n as f64;
        match *self {
            MomentumSchedule::NOverNPlus3 => 3.0 / (nf + 3.0),
            MomentumSchedule::NMinus1OverNPlus2 => {
                if n == 0 {
                    1.0
                } else {
                    3.0 / (nf + 2.0)
                }
            }
            MomentumSchedule::Constant(beta) => 1.0 - beta,
        }
    }

    /// Parses `n/(n+3)`, `(n-1)/(n+2)` (or the aliases `ratio3`, `ratio2`) or a
    /// numeric constant.
    pub fn parse(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.as_str() {
            "n/(n+3)" | "ratio3" | "n-over-n-plus-3" => Ok(MomentumSchedule::NOverNPlus3),
            "(n-1)/(n+2)" | "ratio2" | "n-minus-1-over-n-plus-2" => Ok(MomentumSchedule::NMinus1OverNPlus2),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::invalid("momentum", format!("unrecognised schedule `{s}`")))
                .and_then(MomentumSchedule::constant),
        }
    }
}

impl std::fmt::Display for MomentumSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MomentumSchedule::NOverNPlus3 => write!(f, "n/(n+3)"),
            MomentumSchedule::NMinus1OverNPlus2 => write!(f, "(n-1)/(n+2)"),
            MomentumSchedule::Constant(b) => write!(f, "{b}"),
        }
    }
}

/// Convenience wrapper over [`MomentumSchedule::beta`].
pub fn momentum_coefficient(n: u64, schedule: MomentumSchedule) -> f64 {
    schedule.beta(n)
}

/// Exponent `k` applied as `β_n^k` to the splitting velocity updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocityExponent {
    Constant(f64),
    /// `k(n) = exp(−k / n)` from `n = 1`; `n = 0` uses `k` itself.
    ExpDecay(f64),
}

impl VelocityExponent {
    pub fn at(&self, n: u64) -> f64 {
        match *self {
            VelocityExponent::Constant(k) => k,
            VelocityExponent::ExpDecay(k) if n == 0 => k,
            VelocityExponent::ExpDecay(k) => (-k / n as f64).exp(),
        }
    }

    pub fn base(&self) -> f64 {
        match *self {
            VelocityExponent::Constant(k) | VelocityExponent::ExpDecay(k) => k,
        }
    }
}

impl Default for VelocityExponent {
    fn default() -> Self {
        VelocityExponent::Constant(2.0)
    }
}
