//! Datasets: IDX (MNIST-family) files, synthetic Gaussian blobs, seeded
//! splits and epoch batching.

use std::io::Read;
use std::ops::Range;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::prng::{self, Distribution, Stream};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Environment variable naming the directory that holds the IDX files.
pub const DATA_DIR_ENV: &str = "RBD_DATA_DIR";

/// Row-major inputs in `[0, 1]` with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub input_dim: usize,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<f64>,
        labels: Vec<usize>,
        input_dim: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != labels.len() * input_dim {
            return Err(Error::Data(format!(
                "{} inputs for {} rows of width {input_dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Data(format!("label {y} >= class count {num_classes}")));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite input".into()));
        }
        Ok(Self {
            name: name.into(),
            inputs,
            labels,
            input_dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// Contiguous rows as a batch.
    pub fn batch_of(&self, rows: Range<usize>) -> Batch {
        Batch {
            inputs: self.inputs[rows.start * self.input_dim..rows.end * self.input_dim].to_vec(),
            labels: self.labels[rows].to_vec(),
        }
    }

    /// Arbitrary rows, in the given order.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_dim);
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
        }
        Batch {
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let b = self.gather(indices);
        Dataset {
            name: name.into(),
            inputs: b.inputs,
            labels: b.labels,
            input_dim: self.input_dim,
            num_classes: self.num_classes,
        }
    }

    /// First `n` rows (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        self.subset(&idx, self.name.clone())
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], pos: usize, path: &Path) -> Result<u32> {
    bytes
        .get(pos..pos + 4)
        .map(|s| u32::from_be_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::IdxTruncated {
            path: path.to_path_buf(),
            needed: pos + 4,
            available: bytes.len(),
        })
}

/// Parses an IDX image file: magic 2051, count, rows, cols, then bytes.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let dim = rows * cols;
    let needed = 16 + count * dim;
    if bytes.len() < needed {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    let pixels = bytes[16..needed].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((count, dim, pixels))
}

/// Parses an IDX label file: magic 2049, count, then one byte per label.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    Ok(bytes[8..needed].iter().map(|&b| usize::from(b)).collect())
}

/// Loads an image/label IDX pair (optionally gzip-compressed).
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img_bytes = read_maybe_gz(images)?;
    let lbl_bytes = read_maybe_gz(labels)?;
    let (count, dim, pixels) = parse_idx_images(&img_bytes, images)?;
    let labels_v = parse_idx_labels(&lbl_bytes, labels)?;
    if count != labels_v.len() {
        return Err(Error::IdxCountMismatch {
            images: count,
            labels: labels_v.len(),
        });
    }
    let classes = labels_v.iter().max().map_or(0, |m| m + 1).max(10);
    let name = images
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, pixels, labels_v, dim, classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxSplit {
    Train,
    Test,
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [stem.to_string(), format!("{stem}.gz"), stem.replace("-idx", ".idx")] {
        let p = dir.join(&candidate);
        if p.exists() {
            return Ok(p);
        }
    }
    Err(Error::Data(format!("{stem}[.gz] not found in {}", dir.display())))
}

/// Loads `train-*` or `t10k-*` IDX files with the standard names from `dir`.
pub fn load_mnist_dir(dir: &Path, split: IdxSplit) -> Result<Dataset> {
    let prefix = match split {
        IdxSplit::Train => "train",
        IdxSplit::Test => "t10k",
    };
    let images = find_file(dir, &format!("{prefix}-images-idx3-ubyte"))?;
    let labels = find_file(dir, &format!("{prefix}-labels-idx1-ubyte"))?;
    let mut ds = load_idx(&images, &labels)?;
    ds.name = format!("{}:{prefix}", dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
    Ok(ds)
}

/// Gaussian clusters with unit spread around centers placed at distance
/// `separation` from the origin along random unit directions. Labels cycle
/// through the classes; the whole set is then affinely rescaled into [0, 1].
pub fn synthetic_blobs(classes: usize, dim: usize, samples: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::Data("synthetic_blobs needs at least two classes".into()));
    }
    if dim == 0 || samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut centers = Vec::with_capacity(classes);
    for k in 0..classes {
        let key = prng::derive_stream_key(seed, 0, 0, prng::domain::SYNTHETIC, k as u64);
        let mut c = prng::sample_direction(key, dim, Distribution::Gaussian, true)?;
        for v in &mut c {
            *v *= separation;
        }
        centers.push(c);
    }
    let noise_key = prng::derive_stream_key(seed, 1, 0, prng::domain::SYNTHETIC, 0);
    let noise = Stream::new(noise_key)?;
    let mut inputs = vec![0.0; samples * dim];
    noise.fill(0, &mut inputs, Distribution::Gaussian)?;
    let labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
    for (row, &y) in inputs.chunks_exact_mut(dim).zip(&labels) {
        for (x, c) in row.iter_mut().zip(&centers[y]) {
            *x += c;
        }
    }
    let lo = inputs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = inputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    for x in &mut inputs {
        *x = (*x - lo) / span;
    }
    Dataset::new(format!("blobs(c={classes},d={dim},sep={separation})"), inputs, labels, dim, classes)
}

/// Fisher-Yates permutation of `0..n` driven by the counter stream `key`.
pub fn permutation(n: usize, key: prng::StreamKey) -> Vec<usize> {
    let stream = Stream::new(key).expect("permutation key in range");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (stream.word(i as u64) % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Random disjoint split: the first part gets `floor(fraction * M)` rows.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction {fraction} not in (0, 1)")));
    }
    let (a, b) = split_indices(dataset.len(), fraction, seed);
    Ok((
        dataset.subset(&a, format!("{}[split a]", dataset.name)),
        dataset.subset(&b, format!("{}[split b]", dataset.name)),
    ))
}

/// Index sets of [`split`], each sorted ascending.
pub fn split_indices(m: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let perm = permutation(m, prng::derive_stream_key(seed, 0, 0, prng::domain::SPLIT, 0));
    let n_a = (fraction * m as f64).floor() as usize;
    let mut a = perm[..n_a].to_vec();
    let mut b = perm[n_a..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Shuffled mini-batching; the permutation of an epoch depends only on
/// `(seed, epoch)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub seed: u64,
}

impl BatchPlan {
    pub const DEFAULT_BATCH_SIZE: usize = 32;

    pub fn new(batch_size: usize, seed: u64) -> Self {
        Self { batch_size, seed }
    }

    pub fn epoch_order(&self, m: usize, epoch: u64) -> Vec<usize> {
        permutation(m, prng::derive_stream_key(self.seed, epoch, 0, prng::domain::SHUFFLE, 0))
    }

    pub fn num_batches(&self, m: usize) -> usize {
        m.div_ceil(self.batch_size)
    }
}

/// All batches of one epoch; the final short batch is kept.
pub fn batches(dataset: &Dataset, plan: &BatchPlan, epoch: u64) -> Vec<Batch> {
    let order = plan.epoch_order(dataset.len(), epoch);
    order
        .chunks(plan.batch_size.max(1))
        .map(|idx| dataset.gather(idx))
        .collect()
}
