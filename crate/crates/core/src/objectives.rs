//! Differentiable test problems with analytic gradients, and a central-difference
//! gradient oracle for checking them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::vecops::{check_dim, dot};

/// A differentiable function `f: ℝ^d → ℝ`.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;

    fn minimizer(&self) -> Option<Vec<f64>> {
        None
    }

    /// Lipschitz constant of the gradient, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// `f(u) = ½uᵀQu − bᵀu` with `Q` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
    minimizer: Vec<f64>,
    lipschitz: f64,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        let (rows, cols) = q.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        check_dim(rows, b.len())?;
        let scale = q.abs().max().max(1.0);
        if (&q - q.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = q.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let b = DVector::from_vec(b);
        let minimizer = chol.solve(&b).iter().copied().collect();
        let eig = q.clone().symmetric_eigen();
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Quadratic {
            lipschitz: eig.eigenvalues.max(),
            q,
            b,
            minimizer,
        })
    }

    /// Random `d`-dimensional quadratic `Q = VΛVᵀ` with a seeded orthogonal `V`,
    /// eigenvalues spread evenly over `[λ_min, λ_max]` and Gaussian `b`.
    pub fn random(dim: usize, lambda_min: f64, lambda_max: f64, seed: u64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_max >= lambda_min) {
            return Err(Error::invalid(
                "lambda",
                format!("need 0 < {lambda_min} <= {lambda_max}"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = g.qr().q();
        let spectrum = DVector::from_fn(dim, |i, _| {
            if dim == 1 {
                lambda_min
            } else {
                lambda_min + (lambda_max - lambda_min) * i as f64 / (dim - 1) as f64
            }
        });
        let q = &v * DMatrix::from_diagonal(&spectrum) * v.transpose();
        let q = (&q + q.transpose()) * 0.5;
        let b = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Quadratic::new(q, b)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `f(u*)`.
    pub fn min_value(&self) -> f64 {
        self.value(&self.minimizer)
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let x = DVector::from_column_slice(u);
        0.5 * x.dot(&(&self.q * &x)) - self.b.dot(&x)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(u);
        (&self.q * x - &self.b).iter().copied().collect()
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(self.minimizer.clone())
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// `f(x, y) = (1 − x)² + 100(y − x²)²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rosenbrock;

impl Rosenbrock {
    pub fn evaluate(u: [f64; 2]) -> (f64, [f64; 2]) {
        let [x, y] = u;
        let r = y - x * x;
        let value = (1.0 - x).powi(2) + 100.0 * r * r;
        let grad = [-2.0 * (1.0 - x) - 400.0 * x * r, 200.0 * r];
        (value, grad)
    }
}

/// Value and analytic gradient of the Rosenbrock function.
pub fn rosenbrock(u: [f64; 2]) -> (f64, [f64; 2]) {
    Rosenbrock::evaluate(u)
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, u: &[f64]) -> f64 {
        Rosenbrock::evaluate([u[0], u[1]]).0
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        Rosenbrock::evaluate([u[0], u[1]]).1.to_vec()
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(vec![1.0, 1.0])
    }
}

/// Mean logistic loss of a linear classifier with bias over a fixed 2-class
/// sample. Parameters are `(w_1, …, w_d, bias)`.
#[derive(Clone, Debug)]
pub struct LogisticRegression {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    l2: f64,
}

impl LogisticRegression {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<bool>, l2: f64) -> Result<Self> {
        check_dim(features.len(), labels.len())?;
        let d = features.first().map_or(0, Vec::len);
        for row in &features {
            check_dim(d, row.len())?;
        }
        Ok(LogisticRegression {
            features,
            labels: labels.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
            l2,
        })
    }

    /// Two Gaussian clouds centred at `±1` along every axis.
    pub fn synthetic(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let positive = i % 2 == 0;
            let centre = if positive { 1.0 } else { -1.0 };
            features.push(
                (0..dim)
                    .map(|_| centre + rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            labels.push(positive);
        }
        LogisticRegression::new(features, labels, 1e-3).expect("consistent synthetic sample")
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Objective for LogisticRegression {
    fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len) + 1
    }

    fn value(&self, u: &[f64]) -> f64 {
        let d = self.dim() - 1;
        let (w, bias) = (&u[..d], u[d]);
        let n = self.features.len() as f64;
        let data: f64 = self
            .features
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| {
                let z = dot(w, x) + bias;
                softplus(z) - y * z
            })
            .sum::<f64>()
            / n;
        data + 0.5 * self.l2 * dot(w, w)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim() - 1;
        let (w, bias) = (&u[..d], u[d]);
        let n = self.features.len() as f64;
        let mut grad = vec![0.0; d + 1];
        for (x, &y) in self.features.iter().zip(&self.labels) {
            let r = sigmoid(dot(w, x) + bias) - y;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += r * xi / n;
            }
            grad[d] += r / n;
        }
        for (g, wi) in grad.iter_mut().zip(w) {
            *g += self.l2 * wi;
        }
        grad
    }
}

/// Central differences `(f(u + s·eᵢ) − f(u − s·eᵢ)) / 2s` per component.
pub fn fd_gradient<F>(f: F, u: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::invalid("step", format!("must be positive, got {step}")));
    }
    let mut x = u.to_vec();
    let mut grad = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = f(&x);
        x[i] = orig - step;
        let minus = f(&x);
        x[i] = orig;
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}
