//! Fixtures shared by the criterion benchmarks.

use splitopt::nn::{Batch, MlpModel};
use splitopt::objectives::{Objective, Quadratic};

/// Random well-conditioned quadratic of the given dimension.
pub fn quadratic(dim: usize) -> Quadratic {
    Quadratic::random(dim, 1.0, 10.0, 7).expect("valid quadratic")
}

/// Starting point away from the minimiser.
pub fn start(q: &Quadratic) -> Vec<f64> {
    (0..q.dim()).map(|i| 1.0 + 0.1 * i as f64).collect()
}

/// MNIST-shaped MLP and a deterministic batch.
pub fn mlp_fixture(batch: usize) -> (MlpModel, Batch) {
    let model = MlpModel::new(&[784, 32, 10], 3).expect("valid sizes");
    let inputs: Vec<f64> = (0..batch * 784).map(|i| ((i * 37) % 255) as f64 / 255.0).collect();
    let targets: Vec<usize> = (0..batch).map(|i| i % 10).collect();
    (model, Batch::new(inputs, targets, 784).expect("valid batch"))
}
