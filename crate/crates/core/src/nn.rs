//! A small multilayer perceptron trained by backpropagation.
//!
//! Hidden layers use the rectifier; the output head is log-softmax. Parameters
//! are stored as one flat vector `θ` laid out layer by layer, weights (row-major,
//! `out × in`) followed by biases, so any optimizer can drive them directly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vecops::check_dim;

/// Mean and standard deviation used to normalise MNIST pixels.
pub const MNIST_MEAN: f64 = 0.1307;
pub const MNIST_STD: f64 = 0.3081;

/// `(x − 0.1307) / 0.3081`.
pub fn normalize(x: f64) -> f64 {
    (x - MNIST_MEAN) / MNIST_STD
}

pub fn normalize_all(xs: &mut [f64]) {
    for x in xs {
        *x = normalize(*x);
    }
}

/// Log-softmax with max subtraction.
pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

fn check_targets(targets: &[usize], rows: usize, classes: usize) -> Result<()> {
    check_dim(rows, targets.len())?;
    if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::invalid(
            "target",
            format!("class {t} is out of range for {classes} classes"),
        ));
    }
    Ok(())
}

/// Mean of `−log_probs[i, target_i]` over the `m × classes` row-major matrix.
pub fn nll_loss(log_probs: &[f64], classes: usize, targets: &[usize]) -> Result<f64> {
    if classes == 0 || !log_probs.len().is_multiple_of(classes) {
        return Err(Error::invalid(
            "log_probs",
            "length is not a multiple of the class count",
        ));
    }
    let rows = log_probs.len() / classes;
    check_targets(targets, rows, classes)?;
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| -log_probs[i * classes + t])
        .sum();
    Ok(total / rows as f64)
}

/// `nll_loss(log_softmax(logits))`, fused row by row.
pub fn cross_entropy_loss(logits: &[f64], classes: usize, targets: &[usize]) -> Result<f64> {
    if classes == 0 || !logits.len().is_multiple_of(classes) {
        return Err(Error::invalid("logits", "length is not a multiple of the class count"));
    }
    let rows = logits.len() / classes;
    check_targets(targets, rows, classes)?;
    let total: f64 = logits
        .chunks(classes)
        .zip(targets)
        .map(|(row, &t)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[t]
        })
        .sum();
    Ok(total / rows as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossKind {
    /// Log-softmax head followed by the negative log-likelihood.
    #[default]
    Nll,
    CrossEntropy,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nll" => Ok(LossKind::Nll),
            "xent" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            other => Err(Error::invalid("loss", format!("unknown loss `{other}`"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Nll => "nll",
            LossKind::CrossEntropy => "xent",
        })
    }
}

/// Inputs (`m × dim`, row-major) with their class targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    targets: Vec<usize>,
    dim: usize,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, targets: Vec<usize>, dim: usize) -> Result<Self> {
        if dim == 0 || inputs.len() != targets.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: targets.len() * dim,
                actual: inputs.len(),
            });
        }
        Ok(Batch { inputs, targets, dim })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }
}

/// Fully connected network with rectified hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    theta: Vec<f64>,
}

struct Forward {
    /// Pre-activations per layer (`m × out`).
    pre: Vec<Vec<f64>>,
    /// Layer inputs: the batch, then each hidden activation.
    acts: Vec<Vec<f64>>,
}

impl MlpModel {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(
                "sizes",
                format!("need at least two nonzero layer sizes, got {sizes:?}"),
            ));
        }
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(MlpModel {
            sizes: sizes.to_vec(),
            theta: vec![0.0; count],
        })
    }

    /// Seeded uniform initialisation in `±1/√fan_in` for weights and biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let len = w[0] * w[1] + w[1];
            for p in &mut model.theta[offset..offset + len] {
                *p = rng.gen_range(-bound..bound);
            }
            offset += len;
        }
        Ok(model)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().expect("validated sizes")
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.theta.clone()
    }

    pub fn unflatten(&mut self, theta: &[f64]) -> Result<()> {
        check_dim(self.theta.len(), theta.len())?;
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    /// Weights (`out × in`) and biases of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset: usize = self.sizes.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum();
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.theta[offset..offset + n_in * n_out];
        let b = &self.theta[offset + n_in * n_out..offset + n_in * n_out + n_out];
        (w, b)
    }

    fn run(&self, inputs: &[f64], rows: usize) -> Forward {
        let layers = self.sizes.len() - 1;
        let mut pre = Vec::with_capacity(layers);
        let mut acts = Vec::with_capacity(layers);
        acts.push(inputs.to_vec());
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let a = &acts[l];
            let mut z = vec![0.0; rows * n_out];
            for r in 0..rows {
                let x = &a[r * n_in..(r + 1) * n_in];
                for o in 0..n_out {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    z[r * n_out + o] = b[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                }
            }
            if l + 1 < layers {
                acts.push(z.iter().map(|v| v.max(0.0)).collect());
            }
            pre.push(z);
        }
        Forward { pre, acts }
    }

    /// Raw output-layer activations, `rows × classes`.
    pub fn logits(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if !inputs.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: inputs.len(),
            });
        }
        let mut fwd = self.run(inputs, inputs.len() / d);
        Ok(fwd.pre.pop().expect("at least one layer"))
    }

    /// Log-probabilities, `rows × classes`.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let logits = self.logits(inputs)?;
        Ok(logits.chunks(self.classes()).flat_map(log_softmax).collect())
    }

    /// Loss value and gradient with respect to `θ`, both averaged over the batch.
    pub fn forward_backward(&self, batch: &Batch, loss: LossKind) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::invalid("batch", "batch is empty"));
        }
        check_dim(self.input_dim(), batch.dim())?;
        let classes = self.classes();
        let rows = batch.len();
        let fwd = self.run(batch.inputs(), rows);
        let logits = fwd.pre.last().expect("at least one layer");

        let value = match loss {
            LossKind::Nll => {
                let lp: Vec<f64> = logits.chunks(classes).flat_map(log_softmax).collect();
                nll_loss(&lp, classes, batch.targets())?
            }
            LossKind::CrossEntropy => cross_entropy_loss(logits, classes, batch.targets())?,
        };

        // d loss / d logits = (softmax − onehot) / m
        let mut delta: Vec<f64> = Vec::with_capacity(logits.len());
        for (row, &t) in logits.chunks(classes).zip(batch.targets()) {
            let lp = log_softmax(row);
            for (c, l) in lp.iter().enumerate() {
                let p = l.exp() - if c == t { 1.0 } else { 0.0 };
                delta.push(p / rows as f64);
            }
        }

        let mut grad = vec![0.0; self.theta.len()];
        let offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();
        for l in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let a = &fwd.acts[l];
            let offset = offsets[l];
            {
                let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for r in 0..rows {
                    let x = &a[r * n_in..(r + 1) * n_in];
                    for o in 0..n_out {
                        let d = delta[r * n_out + o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                            *g += d * xi;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let z_prev = &fwd.pre[l - 1];
            let mut next = vec![0.0; rows * n_in];
            for r in 0..rows {
                for o in 0..n_out {
                    let d = delta[r * n_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (i, wv) in w[o * n_in..(o + 1) * n_in].iter().enumerate() {
                        next[r * n_in + i] += d * wv;
                    }
                }
                // rectifier derivative, 0 at the kink
                for i in 0..n_in {
                    if z_prev[r * n_in + i] <= 0.0 {
                        next[r * n_in + i] = 0.0;
                    }
                }
            }
            delta = next;
        }
        Ok((value, grad))
    }
}

/// Seeded per-epoch shuffling of `0..n` into mini-batches of size `m`.
///
/// Epoch `e` uses the permutation drawn from seed `seed + e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpochIterator {
    n: usize,
    batch_size: usize,
    seed: u64,
}

impl EpochIterator {
    pub fn batch_count(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    pub fn batches(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(epoch));
        let mut perm: Vec<usize> = (0..self.n).collect();
        perm.shuffle(&mut rng);
        perm.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

pub fn epoch_iterator(n: usize, batch_size: usize, seed: u64) -> Result<EpochIterator> {
    if n == 0 {
        return Err(Error::invalid("n", "dataset is empty"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be at least 1"));
    }
    Ok(EpochIterator { n, batch_size, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::fd_gradient;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn log_softmax_examples() {
        let out = log_softmax(&[0.0, 0.0]);
        assert!(out.iter().all(|v| (v + std::f64::consts::LN_2).abs() < 1e-15));
        let big = log_softmax(&[1000.0, 0.0]);
        assert!(big[0].abs() < 1e-15 && (big[1] + 1000.0).abs() < 1e-12);
    }

    #[test]
    fn nll_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((nll_loss(&[-ln2, -ln2], 2, &[0]).unwrap() - ln2).abs() < 1e-15);
        assert_eq!(nll_loss(&[0.0, -1e30], 2, &[0]).unwrap(), 0.0);
        let mean = nll_loss(&[-0.2, -1.7, -0.9, -0.5], 2, &[0, 1]).unwrap();
        assert!((mean - 0.35).abs() < 1e-15);
        assert!(nll_loss(&[-0.2, -1.7], 2, &[2]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert!((cross_entropy_loss(&[0.0, 0.0], 2, &[0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(cross_entropy_loss(&[50.0, -50.0], 2, &[0]).unwrap() < 1e-40);
        assert!(cross_entropy_loss(&[0.0, 0.0], 2, &[5]).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(0.1307), 0.0);
        assert!((normalize(0.4388) - 1.0).abs() < 1e-12);
        assert!((normalize(0.0) + 0.1307 / 0.3081).abs() < 1e-15);
    }

    #[test]
    fn zero_model_uniform_output() {
        let model = MlpModel::zeros(&[3, 4, 5]).unwrap();
        let batch = Batch::new(vec![0.1, 0.2, 0.3, -1.0, 0.5, 2.0], vec![1, 4], 3).unwrap();
        let (loss, grad) = model.forward_backward(&batch, LossKind::Nll).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-14);
        let (_, gb) = {
            let offset = 3 * 4 + 4 + 4 * 5;
            (0, &grad[offset..offset + 5])
        };
        // mean over the two rows of (0.2 − onehot)
        let expected = [0.2, 0.2 - 0.5, 0.2, 0.2, 0.2 - 0.5];
        for (g, e) in gb.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn single_layer_hand_gradient() {
        // Two features, two classes, W = I, b = 0, x = (1, 0), target 1.
        let mut model = MlpModel::zeros(&[2, 2]).unwrap();
        model.unflatten(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let batch = Batch::new(vec![1.0, 0.0], vec![1], 2).unwrap();
        let (loss, grad) = model.forward_backward(&batch, LossKind::CrossEntropy).unwrap();
        let e = std::f64::consts::E;
        let p0 = e / (e + 1.0);
        let p1 = 1.0 / (e + 1.0);
        assert!((loss + p1.ln()).abs() < 1e-15);
        let expected = [p0, 0.0, p1 - 1.0, 0.0, p0, p1 - 1.0];
        for (g, e) in grad.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = MlpModel::new(&[4, 6, 3], 9).unwrap();
        let m = 5;
        let inputs: Vec<f64> = (0..m * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets: Vec<usize> = (0..m).map(|_| rng.gen_range(0..3)).collect();
        let batch = Batch::new(inputs, targets, 4).unwrap();
        let theta = model.flatten();
        let (_, grad) = model.forward_backward(&batch, LossKind::Nll).unwrap();
        let fd = fd_gradient(
            |t| {
                let mut probe = model.clone();
                probe.unflatten(t).unwrap();
                probe.forward_backward(&batch, LossKind::Nll).unwrap().0
            },
            &theta,
            1e-5,
        )
        .unwrap();
        let num: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "relative error {}", num / den);
        model.unflatten(&theta).unwrap();
    }

    #[test]
    fn rejects_mismatched_batch() {
        let model = MlpModel::zeros(&[3, 2]).unwrap();
        let batch = Batch::new(vec![0.0; 4], vec![0, 1], 2).unwrap();
        assert!(model.forward_backward(&batch, LossKind::Nll).is_err());
        assert!(Batch::new(vec![0.0; 5], vec![0, 1], 2).is_err());
        assert!(MlpModel::zeros(&[3]).is_err());
    }

    #[test]
    fn epoch_batches() {
        let it = epoch_iterator(5, 2, 1).unwrap();
        let sizes: Vec<usize> = it.batches(0).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        assert_eq!(
            epoch_iterator(4, 2, 1).unwrap().batches(0),
            epoch_iterator(4, 2, 1).unwrap().batches(0)
        );
        assert_eq!(epoch_iterator(3, 10, 1).unwrap().batches(0).len(), 1);
        assert!(epoch_iterator(0, 1, 1).is_err());
        assert!(epoch_iterator(3, 0, 1).is_err());
    }

    proptest! {
        #[test]
        fn log_softmax_rows_normalised(x in proptest::collection::vec(-500.0f64..500.0, 1..12), c in -1e3f64..1e3) {
            let out = log_softmax(&x);
            let sum: f64 = out.iter().map(|v| v.exp()).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(out.iter().all(|v| *v <= 0.0));
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let out2 = log_softmax(&shifted);
            for (a, b) in out.iter().zip(&out2) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn losses_agree_and_nonnegative(
            logits in proptest::collection::vec(-30.0f64..30.0, 12),
            targets in proptest::collection::vec(0usize..3, 4),
        ) {
            let lp: Vec<f64> = logits.chunks(3).flat_map(log_softmax).collect();
            let nll = nll_loss(&lp, 3, &targets).unwrap();
            let ce = cross_entropy_loss(&logits, 3, &targets).unwrap();
            prop_assert!((nll - ce).abs() <= 1e-12 * nll.abs().max(1.0));
            prop_assert!(nll >= 0.0 && ce >= 0.0);
        }

        #[test]
        fn epoch_is_permutation(n in 1usize..200, m in 1usize..50, seed in any::<u64>(), epoch in 0u64..5) {
            let it = epoch_iterator(n, m, seed).unwrap();
            let batches = it.batches(epoch);
            prop_assert_eq!(batches.len(), n.div_ceil(m));
            let mut all: Vec<usize> = batches.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn flatten_unflatten_identity(seed in any::<u64>()) {
            let model = MlpModel::new(&[3, 5, 2], seed).unwrap();
            let mut other = MlpModel::zeros(&[3, 5, 2]).unwrap();
            other.unflatten(&model.flatten()).unwrap();
            prop_assert_eq!(other, model);
        }
    }
}
