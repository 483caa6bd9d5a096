//! IDX (MNIST-style) ingestion and seeded synthetic blobs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: unexpected magic number 0x{found:08x} (expected 0x{expected:08x})")]
    Magic {
        file: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("{file}: truncated payload, expected {expected} bytes but found {actual}")]
    Length {
        file: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("dataset is empty")]
    Empty,

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Idx {
        images: Option<PathBuf>,
        labels: Option<PathBuf>,
    },
    Synthetic {
        n_per_class: usize,
        classes: usize,
        dim: usize,
        separation: f64,
        seed: u64,
    },
}

/// `n` samples of dimension `dim` with values in `[0, 1]` and integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    classes: usize,
    pub source: DatasetSource,
}

impl Dataset {
    pub fn new(images: Vec<f64>, labels: Vec<usize>, dim: usize, source: DatasetSource) -> Result<Self, DatasetError> {
        if labels.is_empty() || dim == 0 {
            return Err(DatasetError::Empty);
        }
        if images.len() != labels.len() * dim {
            return Err(DatasetError::CountMismatch {
                images: images.len() / dim,
                labels: labels.len(),
            });
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            images,
            labels,
            dim,
            classes,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One more than the largest label.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn images(&self) -> &[f64] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * self.dim..(i + 1) * self.dim]
    }

    /// Gathers the rows in `indices`.
    pub fn select(&self, indices: &[usize]) -> (Vec<f64>, Vec<usize>) {
        let mut xs = Vec::with_capacity(indices.len() * self.dim);
        let mut ys = Vec::with_capacity(indices.len());
        for &i in indices {
            xs.extend_from_slice(self.image(i));
            ys.push(self.labels[i]);
        }
        (xs, ys)
    }
}

fn read_be_u32(bytes: &[u8], at: usize, file: &'static str) -> Result<u32, DatasetError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DatasetError::Length {
            file,
            expected: at + 4,
            actual: bytes.len(),
        })
}

/// Parses an IDX image file (`0x00000803`, dims `N × rows × cols`) and its label
/// file (`0x00000801`, `N` entries). Pixels are scaled to `[0, 1]` by `/255`.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let magic = read_be_u32(image_bytes, 0, "images")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DatasetError::Magic {
            file: "images",
            found: magic,
            expected: IDX_IMAGE_MAGIC,
        });
    }
    let count = read_be_u32(image_bytes, 4, "images")? as usize;
    let rows = read_be_u32(image_bytes, 8, "images")? as usize;
    let cols = read_be_u32(image_bytes, 12, "images")? as usize;
    let dim = rows * cols;
    let expected = 16 + count * dim;
    if image_bytes.len() < expected {
        return Err(DatasetError::Length {
            file: "images",
            expected,
            actual: image_bytes.len(),
        });
    }

    let magic = read_be_u32(label_bytes, 0, "labels")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(DatasetError::Magic {
            file: "labels",
            found: magic,
            expected: IDX_LABEL_MAGIC,
        });
    }
    let label_count = read_be_u32(label_bytes, 4, "labels")? as usize;
    if label_bytes.len() < 8 + label_count {
        return Err(DatasetError::Length {
            file: "labels",
            expected: 8 + label_count,
            actual: label_bytes.len(),
        });
    }
    if label_count != count {
        return Err(DatasetError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let images = image_bytes[16..expected]
        .iter()
        .map(|&p| f64::from(p) / 255.0)
        .collect();
    let labels = label_bytes[8..8 + count].iter().map(|&l| usize::from(l)).collect();
    Dataset::new(
        images,
        labels,
        dim,
        DatasetSource::Idx {
            images: None,
            labels: None,
        },
    )
}

/// Reads and parses an image/label file pair.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset, DatasetError> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|source| DatasetError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let mut ds = parse_idx(&read(images)?, &read(labels)?)?;
    ds.source = DatasetSource::Idx {
        images: Some(images.to_path_buf()),
        labels: Some(labels.to_path_buf()),
    };
    Ok(ds)
}

/// Serialises to IDX bytes as an `N × rows × cols` image file and a label file.
/// Pixels are quantised by rounding `x·255`.
pub fn to_idx(ds: &Dataset, rows: usize, cols: usize) -> Result<(Vec<u8>, Vec<u8>), DatasetError> {
    if rows * cols != ds.dim() {
        return Err(DatasetError::Spec(format!(
            "{rows}x{cols} does not match dimension {}",
            ds.dim()
        )));
    }
    let n = ds.len() as u32;
    let mut images = Vec::with_capacity(16 + ds.images().len());
    for word in [IDX_IMAGE_MAGIC, n, rows as u32, cols as u32] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    images.extend(ds.images().iter().map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8));

    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    for &l in ds.labels() {
        let byte = u8::try_from(l).map_err(|_| DatasetError::Spec(format!("label {l} does not fit in a byte")))?;
        labels.push(byte);
    }
    Ok((images, labels))
}

/// Class means in raw (pre-scaling) coordinates: `(separation/√2)·e_c` when the
/// classes fit on the axes (all pairwise distances equal `separation`), otherwise
/// evenly spaced along the first axis.
fn blob_means(classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            let mut mean = vec![0.0; dim];
            if classes <= dim {
                mean[c] = separation / std::f64::consts::SQRT_2;
            } else {
                mean[0] = c as f64 * separation;
            }
            mean
        })
        .collect()
}

/// Seeded unit-variance Gaussian clusters whose means are `separation` apart.
///
/// Samples are mapped into `[0, 1]` by the affine map sending
/// `[min mean − 4, max mean + 4]` (per coordinate) onto `[0, 1]`, then clipped.
/// Labels cycle through the classes so every class has exactly `n_per_class`
/// samples.
pub fn synth_blobs(
    n_per_class: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    if n_per_class == 0 || classes == 0 || dim == 0 {
        return Err(DatasetError::Spec("counts must be at least 1".into()));
    }
    if !(separation > 0.0) {
        return Err(DatasetError::Spec(format!(
            "separation must be positive, got {separation}"
        )));
    }
    let means = blob_means(classes, dim, separation);
    let lo: Vec<f64> = (0..dim)
        .map(|j| means.iter().map(|m| m[j]).fold(f64::INFINITY, f64::min) - 4.0)
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|j| means.iter().map(|m| m[j]).fold(f64::NEG_INFINITY, f64::max) + 4.0)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * classes;
    let mut images = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for j in 0..dim {
            let raw = means[c][j] + rng.sample::<f64, _>(StandardNormal);
            images.push(((raw - lo[j]) / (hi[j] - lo[j])).clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    Dataset::new(
        images,
        labels,
        dim,
        DatasetSource::Synthetic {
            n_per_class,
            classes,
            dim,
            separation,
            seed,
        },
    )
}
