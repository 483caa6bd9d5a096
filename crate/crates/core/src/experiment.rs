//! Epoch/mini-batch training runs, per-epoch metrics, timing statistics and the
//! splitting-defect sweep.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::datasets::{load_idx, synth_blobs, Dataset, DatasetError};
use crate::nn::{cross_entropy_loss, epoch_iterator, normalize_all, Batch, LossKind, MlpModel};
use crate::optim::{Optimizer, OptimizerKind, OptimizerSpec, Ssa1Form};
use crate::schedule::{MomentumSchedule, VelocityExponent};
use crate::split::{observed_order, spectral_norm, splitting_defect, strang_propagator, LinearSplitSystem};

/// Header of the per-epoch metrics CSV.
pub const METRICS_HEADER: [&str; 6] = [
    "epoch",
    "train_loss",
    "train_acc",
    "test_loss",
    "test_acc",
    "epoch_time_s",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Numeric(#[from] crate::Error),

    /// Training produced a non-finite loss or parameter. `records` holds every
    /// epoch completed before the failure.
    #[error("training diverged during epoch {epoch}")]
    Diverged { epoch: usize, records: Vec<MetricsRecord> },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// Training and test data for a run.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    /// Gaussian blobs; the test split uses `max(1, n_per_class / 5)` samples per
    /// class drawn from seed `seed + 1_000_003`.
    Synthetic {
        n_per_class: usize,
        classes: usize,
        dim: usize,
        separation: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic {
            n_per_class: 500,
            classes: 2,
            dim: 2,
            separation: 6.0,
        }
    }
}

impl DatasetSpec {
    /// `synth:[n_per_class=..,classes=..,dim=..,separation=..]` or
    /// `idx:train-img,train-lbl,test-img,test-lbl`.
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        if let Some(rest) = s.strip_prefix("synth") {
            let rest = rest.strip_prefix(':').unwrap_or(rest);
            let DatasetSpec::Synthetic {
                mut n_per_class,
                mut classes,
                mut dim,
                mut separation,
            } = DatasetSpec::default()
            else {
                unreachable!()
            };
            for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (key, value) = item
                    .split_once('=')
                    .ok_or_else(|| config_err(format!("synthetic option `{item}` is not key=value")))?;
                let bad = |_| config_err(format!("bad value for `{key}`: `{value}`"));
                match key.trim() {
                    "n_per_class" | "n" => n_per_class = value.trim().parse().map_err(bad)?,
                    "classes" => classes = value.trim().parse().map_err(bad)?,
                    "dim" => dim = value.trim().parse().map_err(bad)?,
                    "separation" | "sep" => {
                        separation = value
                            .trim()
                            .parse()
                            .map_err(|_| config_err(format!("bad separation `{value}`")))?
                    }
                    other => return Err(config_err(format!("unknown synthetic option `{other}`"))),
                }
            }
            Ok(DatasetSpec::Synthetic {
                n_per_class,
                classes,
                dim,
                separation,
            })
        } else if let Some(rest) = s.strip_prefix("idx:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            let [a, b, c, d] = parts.as_slice() else {
                return Err(config_err("idx dataset needs four comma-separated paths"));
            };
            Ok(DatasetSpec::Idx {
                train_images: a.into(),
                train_labels: b.into(),
                test_images: c.into(),
                test_labels: d.into(),
            })
        } else {
            Err(config_err(format!("unrecognised dataset `{s}`")))
        }
    }

    /// Loads `(train, test)`; pixels are still in `[0, 1]`.
    pub fn load(&self, seed: u64) -> Result<(Dataset, Dataset), ExperimentError> {
        match self {
            DatasetSpec::Synthetic {
                n_per_class,
                classes,
                dim,
                separation,
            } => {
                let train = synth_blobs(*n_per_class, *classes, *dim, *separation, seed)?;
                let test = synth_blobs(
                    (*n_per_class / 5).max(1),
                    *classes,
                    *dim,
                    *separation,
                    seed.wrapping_add(1_000_003),
                )?;
                Ok((train, test))
            }
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => Ok((
                load_idx(train_images, train_labels)?,
                load_idx(test_images, test_labels)?,
            )),
        }
    }
}

impl std::fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetSpec::Synthetic {
                n_per_class,
                classes,
                dim,
                separation,
            } => write!(
                f,
                "synth:n_per_class={n_per_class},classes={classes},dim={dim},separation={separation}"
            ),
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => write!(
                f,
                "idx:{},{},{},{}",
                train_images.display(),
                train_labels.display(),
                test_images.display(),
                test_labels.display()
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub optimizer: OptimizerSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub loss: LossKind,
    pub hidden: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(optimizer: OptimizerSpec) -> Self {
        ExperimentConfig {
            optimizer,
            epochs: 10,
            batch_size: 32,
            seed: 1,
            dataset: DatasetSpec::default(),
            loss: LossKind::Nll,
            hidden: 32,
            out: None,
        }
    }

    /// Builds a configuration from `key = value` settings. Recognised keys match
    /// the long flags of `bench run` (`optimizer`, `lr`, `k`, `k-decay`,
    /// `momentum`, `epochs`, `batch-size`, `seed`, `dataset`, `loss`, `out`,
    /// `hidden`, `rho`, `eps`, `beta1`, `beta2`, `ssa1-form`).
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self, ExperimentError> {
        let get = |k: &str| settings.get(k).map(String::as_str);
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ExperimentError> {
            value
                .trim()
                .parse()
                .map_err(|_| config_err(format!("bad value for `{key}`: `{value}`")))
        }

        let known = [
            "optimizer",
            "lr",
            "k",
            "k-decay",
            "momentum",
            "epochs",
            "batch-size",
            "seed",
            "dataset",
            "loss",
            "out",
            "hidden",
            "rho",
            "eps",
            "beta1",
            "beta2",
            "ssa1-form",
        ];
        if let Some(unknown) = settings.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(config_err(format!("unknown setting `{unknown}`")));
        }

        let kind: OptimizerKind = get("optimizer")
            .ok_or_else(|| config_err("missing `optimizer`"))?
            .parse()
            .map_err(|e: crate::Error| config_err(e.to_string()))?;
        let mut spec = OptimizerSpec::new(kind);
        if let Some(v) = get("lr") {
            spec.lr = num("lr", v)?;
        }
        let k = match get("k") {
            Some(v) => num("k", v)?,
            None => spec.k.base(),
        };
        let decay = match get("k-decay") {
            Some(v) => num::<bool>("k-decay", v)?,
            None => false,
        };
        spec.k = if decay {
            VelocityExponent::ExpDecay(k)
        } else {
            VelocityExponent::Constant(k)
        };
        if let Some(v) = get("momentum") {
            spec.momentum = MomentumSchedule::parse(v).map_err(|e| config_err(e.to_string()))?;
        }
        if let Some(v) = get("rho") {
            spec.rho = num("rho", v)?;
        }
        if let Some(v) = get("eps") {
            spec.eps = num("eps", v)?;
        }
        if let Some(v) = get("beta1") {
            spec.beta1 = num("beta1", v)?;
        }
        if let Some(v) = get("beta2") {
            spec.beta2 = num("beta2", v)?;
        }
        if let Some(v) = get("ssa1-form") {
            spec.ssa1_form = match v.trim() {
                "derived" => Ssa1Form::Derived,
                "pseudocode" => Ssa1Form::Pseudocode,
                other => return Err(config_err(format!("unknown ssa1-form `{other}`"))),
            };
        }
        spec.validate().map_err(|e| config_err(e.to_string()))?;

        let mut cfg = ExperimentConfig::new(spec);
        if let Some(v) = get("epochs") {
            cfg.epochs = num("epochs", v)?;
        }
        if let Some(v) = get("batch-size") {
            cfg.batch_size = num("batch-size", v)?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = num("seed", v)?;
        }
        if let Some(v) = get("hidden") {
            cfg.hidden = num("hidden", v)?;
        }
        if let Some(v) = get("dataset") {
            cfg.dataset = DatasetSpec::parse(v.trim())?;
        }
        if let Some(v) = get("loss") {
            cfg.loss = v.trim().parse().map_err(|e: crate::Error| config_err(e.to_string()))?;
        }
        if let Some(v) = get("out") {
            cfg.out = Some(PathBuf::from(v.trim()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.epochs == 0 {
            return Err(config_err("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch size must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(config_err("hidden layer size must be at least 1"));
        }
        self.optimizer.validate().map_err(|e| config_err(e.to_string()))
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>, ExperimentError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected key=value", lineno + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

/// Loss and accuracy at the end of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub epoch_time_s: f64,
}

/// Mean loss and accuracy of `model` over the whole dataset.
pub fn evaluate(model: &MlpModel, data: &Dataset, loss: LossKind) -> Result<(f64, f64), ExperimentError> {
    let classes = model.classes();
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    let chunk = 1024;
    for start in (0..data.len()).step_by(chunk) {
        let end = (start + chunk).min(data.len());
        let xs = &data.images()[start * data.dim()..end * data.dim()];
        let ys = &data.labels()[start..end];
        let logits = model.logits(xs)?;
        let batch_loss = match loss {
            LossKind::Nll => {
                let lp = model.forward(xs)?;
                crate::nn::nll_loss(&lp, classes, ys)?
            }
            LossKind::CrossEntropy => cross_entropy_loss(&logits, classes, ys)?,
        };
        total_loss += batch_loss * (end - start) as f64;
        for (row, &y) in logits.chunks(classes).zip(ys) {
            let pred = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (i, &v)| if v > best.1 { (i, v) } else { best },
                )
                .0;
            if pred == y {
                correct += 1;
            }
        }
    }
    Ok((total_loss / data.len() as f64, correct as f64 / data.len() as f64))
}

/// Initial model, optimizer and normalised datasets for a configuration.
pub struct Prepared {
    pub model: MlpModel,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, ExperimentError> {
    config.validate()?;
    let (train, test) = config.dataset.load(config.seed)?;
    if train.dim() != test.dim() {
        return Err(config_err(format!(
            "train dimension {} differs from test dimension {}",
            train.dim(),
            test.dim()
        )));
    }
    let classes = train.classes().max(test.classes());
    let normalise = |ds: Dataset| -> Result<Dataset, ExperimentError> {
        let mut images = ds.images().to_vec();
        normalize_all(&mut images);
        Ok(Dataset::new(images, ds.labels().to_vec(), ds.dim(), ds.source.clone())?)
    };
    let model = MlpModel::new(&[train.dim(), config.hidden, classes], config.seed)?;
    Ok(Prepared {
        model,
        train: normalise(train)?,
        test: normalise(test)?,
    })
}

/// Trains for `config.epochs` epochs and evaluates train and test sets after each.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsRecord>, ExperimentError> {
    let Prepared { mut model, train, test } = prepare(config)?;
    let mut optimizer = Optimizer::new(config.optimizer, model.flatten())?;
    let shuffler = epoch_iterator(train.len(), config.batch_size, config.seed)?;
    let mut records = Vec::with_capacity(config.epochs);
    let mut probe = model.clone();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut finite = true;
        for indices in shuffler.batches(epoch as u64 - 1) {
            let (xs, ys) = train.select(&indices);
            let batch = Batch::new(xs, ys, train.dim())?;
            let mut failure = None;
            optimizer.step(|theta: &[f64]| {
                let result = probe
                    .unflatten(theta)
                    .and_then(|_| probe.forward_backward(&batch, config.loss));
                match result {
                    Ok((loss, grad)) => {
                        if !loss.is_finite() {
                            finite = false;
                        }
                        grad
                    }
                    Err(e) => {
                        failure = Some(e);
                        vec![0.0; theta.len()]
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            if !finite || optimizer.params().iter().any(|p| !p.is_finite()) {
                return Err(ExperimentError::Diverged { epoch, records });
            }
        }
        let epoch_time_s = started.elapsed().as_secs_f64();

        model.unflatten(optimizer.params())?;
        let (train_loss, train_acc) = evaluate(&model, &train, config.loss)?;
        let (test_loss, test_acc) = evaluate(&model, &test, config.loss)?;
        if !train_loss.is_finite() || !test_loss.is_finite() {
            return Err(ExperimentError::Diverged { epoch, records });
        }
        records.push(MetricsRecord {
            epoch,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
            epoch_time_s,
        });
    }
    Ok(records)
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes the metrics CSV (6 significant digits, integer epoch).
pub fn write_metrics<W: Write>(records: &[MetricsRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            format_sig(r.train_loss, 6),
            format_sig(r.train_acc, 6),
            format_sig(r.test_loss, 6),
            format_sig(r.test_acc, 6),
            format_sig(r.epoch_time_s, 6),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_metrics(records: &[MetricsRecord], path: &Path) -> Result<(), ExperimentError> {
    let io_err = |message: String| ExperimentError::Io {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::create(path).map_err(|e| io_err(e.to_string()))?;
    write_metrics(records, std::io::BufWriter::new(file)).map_err(|e| io_err(e.to_string()))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, ExperimentError> {
    let io_err = |message: String| ExperimentError::Io {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| io_err(e.to_string()))?.clone();
    if headers.iter().ne(METRICS_HEADER) {
        return Err(io_err(format!(
            "unexpected header `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| io_err(e.to_string()))?;
        let field = |i: usize| -> Result<f64, ExperimentError> {
            row[i]
                .parse()
                .map_err(|_| io_err(format!("bad value `{}` in column {}", &row[i], METRICS_HEADER[i])))
        };
        out.push(MetricsRecord {
            epoch: row[0].parse().map_err(|_| io_err(format!("bad epoch `{}`", &row[0])))?,
            train_loss: field(1)?,
            train_acc: field(2)?,
            test_loss: field(3)?,
            test_acc: field(4)?,
            epoch_time_s: field(5)?,
        });
    }
    Ok(out)
}

/// Summary of epoch wall times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator, 0 for a single sample).
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
    pub sum: f64,
}

pub fn timing_stats(samples: &[f64]) -> Result<TimingStats, ExperimentError> {
    if samples.is_empty() {
        return Err(config_err("timing statistics need at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let sum: f64 = sorted.iter().sum();
    let mean = sum / n as f64;
    let std = if n > 1 {
        (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let quantile = |q: f64| {
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    Ok(TimingStats {
        count: n,
        mean,
        std,
        min: sorted[0],
        q25: quantile(0.25),
        q50: quantile(0.5),
        q75: quantile(0.75),
        max: sorted[n - 1],
        sum,
    })
}

impl TimingStats {
    /// Rows of `(statistic, seconds)` in the usual summary order.
    pub fn rows(&self) -> [(&'static str, f64); 9] {
        [
            ("count", self.count as f64),
            ("mean", self.mean),
            ("std", self.std),
            ("min", self.min),
            ("25%", self.q25),
            ("50%", self.q50),
            ("75%", self.q75),
            ("max", self.max),
            ("sum", self.sum),
        ]
    }

    pub fn write_table<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["statistic", "seconds"])?;
        for (name, value) in self.rows() {
            w.write_record([name.to_string(), format_sig(value, 6)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of the splitting sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyRow {
    pub h: f64,
    pub defect: f64,
    /// `log₂(defect(2h) / defect(h))`; `None` for the first row.
    pub observed_order: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StudyScheme {
    #[default]
    Lie,
    Strang,
}

/// Non-commuting nilpotent pair `A = [[0,1],[0,0]]`, `B = [[0,0],[1,0]]`.
pub fn reference_pair() -> LinearSplitSystem {
    LinearSplitSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
    )
    .expect("2x2 pair")
}

/// One-step defects for `h = h0, h0/2, …` (`levels` values) with the observed
/// local order between consecutive rows.
pub fn splitting_study(
    sys: &LinearSplitSystem,
    h0: f64,
    levels: usize,
    scheme: StudyScheme,
) -> Result<Vec<StudyRow>, ExperimentError> {
    let mut rows: Vec<StudyRow> = Vec::with_capacity(levels);
    let mut h = h0;
    for _ in 0..levels {
        let defect = match scheme {
            StudyScheme::Lie => splitting_defect(sys, h)?,
            StudyScheme::Strang => {
                let exact = sys.exact_propagator(h)?;
                spectral_norm(&(exact - strang_propagator(sys, h)?))
            }
        };
        let order = rows.last().map(|prev| observed_order(prev.defect, defect));
        rows.push(StudyRow {
            h,
            defect,
            observed_order: order,
        });
        h *= 0.5;
    }
    Ok(rows)
}

pub fn write_study<W: Write>(rows: &[StudyRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["h", "defect", "observed_order"])?;
    for r in rows {
        w.write_record([
            format_sig(r.h, 6),
            format_sig(r.defect, 6),
            r.observed_order.map(|o| format_sig(o, 6)).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
