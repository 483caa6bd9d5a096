use nalgebra::{DMatrix, DVector};

use super::expm::{matrix_exp, spectral_norm};
use crate::error::{Error, Result};

/// Pair of generators for `Ẋ = (A + B)X`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSplitSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSplitSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        for m in [&a, &b] {
            let (rows, cols) = m.shape();
            if rows != cols {
                return Err(Error::NotSquare { rows, cols });
            }
        }
        if a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                actual: b.nrows(),
            });
        }
        Ok(LinearSplitSystem { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn commutator(&self) -> DMatrix<f64> {
        &self.a * &self.b - &self.b * &self.a
    }

    /// Exact one-step propagator `e^{(A+B)h}`.
    pub fn exact_propagator(&self, h: f64) -> Result<DMatrix<f64>> {
        matrix_exp(&((&self.a + &self.b) * h))
    }
}

/// Which sub-flow a Lie step applies first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitOrder {
    /// Solve `Ẋ = AX` first, then `Ẋ = BX`: propagator `e^{Bh}e^{Ah}`.
    #[default]
    AThenB,
    BThenA,
}

/// One-step Lie propagator for the given order.
pub fn lie_propagator(sys: &LinearSplitSystem, h: f64, order: SplitOrder) -> Result<DMatrix<f64>> {
    let ea = matrix_exp(&(sys.a() * h))?;
    let eb = matrix_exp(&(sys.b() * h))?;
    Ok(match order {
        SplitOrder::AThenB => eb * ea,
        SplitOrder::BThenA => ea * eb,
    })
}

/// Symmetric propagator `e^{Ah/2} e^{Bh} e^{Ah/2}`. Not used by any optimizer;
/// kept for order comparisons.
pub fn strang_propagator(sys: &LinearSplitSystem, h: f64) -> Result<DMatrix<f64>> {
    let half = matrix_exp(&(sys.a() * (0.5 * h)))?;
    let eb = matrix_exp(&(sys.b() * h))?;
    Ok(&half * eb * &half)
}

/// Advances `x` by one Lie step: the A-subproblem, then the B-subproblem from
/// its result (or the reverse for [`SplitOrder::BThenA`]).
pub fn lie_split_step(sys: &LinearSplitSystem, x: &DVector<f64>, h: f64, order: SplitOrder) -> Result<DVector<f64>> {
    check_step(sys, x, h)?;
    Ok(lie_propagator(sys, h, order)? * x)
}

pub fn strang_split_step(sys: &LinearSplitSystem, x: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    check_step(sys, x, h)?;
    Ok(strang_propagator(sys, h)? * x)
}

fn check_step(sys: &LinearSplitSystem, x: &DVector<f64>, h: f64) -> Result<()> {
    if x.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            actual: x.len(),
        });
    }
    if !(h >= 0.0) {
        return Err(Error::invalid("h", format!("time step must be nonnegative, got {h}")));
    }
    Ok(())
}

/// `‖e^{(A+B)h} − e^{Ah}e^{Bh}‖₂`.
pub fn splitting_defect(sys: &LinearSplitSystem, h: f64) -> Result<f64> {
    let exact = sys.exact_propagator(h)?;
    let split = lie_propagator(sys, h, SplitOrder::BThenA)?;
    Ok(spectral_norm(&(exact - split)))
}

/// `log₂(e(h) / e(h/2))` for errors measured at halved step sizes.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
