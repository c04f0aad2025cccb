//! Fully-connected ReLU networks with softmax cross-entropy, operating on a
//! single flat parameter vector.
//!
//! Layout: for each layer, the `fan_out x fan_in` weight matrix in row-major
//! order (row = output unit) followed by the `fan_out` biases.

use std::io::{Read, Write};
use std::ops::{Deref, DerefMut, Range};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::prng::{self, Distribution, Stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    widths: Vec<usize>,
}

/// Location of one layer inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Range<usize>,
    pub biases: Range<usize>,
}

impl LayerLayout {
    /// Weights followed by biases.
    pub fn span(&self) -> Range<usize> {
        self.weights.start..self.biases.end
    }
}

impl NetworkSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidNetwork(
                "need at least an input and an output width".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidNetwork(format!("zero width in {widths:?}")));
        }
        if *widths.last().unwrap() < 2 {
            return Err(Error::InvalidNetwork("need at least two classes".into()));
        }
        Ok(Self { widths })
    }

    /// 784-128-10, the fully-connected (F)MNIST network.
    pub fn fc_mnist() -> Self {
        Self {
            widths: vec![784, 128, 10],
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Total parameter count D.
    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset table; the segments tile `[0, D)` in order.
    pub fn layout(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = offset..offset + fan_in * fan_out;
                let biases = weights.end..weights.end + fan_out;
                offset = biases.end;
                LayerLayout {
                    fan_in,
                    fan_out,
                    weights,
                    biases,
                }
            })
            .collect()
    }

    /// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))` for a layer.
    pub fn init_bound(fan_in: usize, fan_out: usize) -> f64 {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }
}

impl std::fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Flat parameter (or gradient) vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A mini-batch: `labels.len()` rows of `input_dim` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Shape("batch must contain at least one sample".into()));
        }
        if inputs.len() % labels.len() != 0 {
            return Err(Error::Shape(format!(
                "{} inputs do not divide into {} rows",
                inputs.len(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Loss and raw outputs of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub loss: f64,
    /// `B x classes`, row-major.
    pub logits: Vec<f64>,
}

impl ForwardOutput {
    /// Number of rows whose argmax (lowest index on ties) equals the label.
    pub fn correct(&self, labels: &[usize]) -> usize {
        let classes = self.logits.len() / labels.len();
        self.logits
            .chunks_exact(classes)
            .zip(labels)
            .filter(|(row, &y)| argmax(row) == y)
            .count()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Weights uniform in `[-bound, bound)` with the Glorot bound per layer,
/// biases zero. Each layer draws from its own counter stream under `seed`.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> ParamVector {
    let mut theta = vec![0.0; spec.num_params()];
    for (l, layer) in spec.layout().iter().enumerate() {
        let bound = NetworkSpec::init_bound(layer.fan_in, layer.fan_out);
        let key = prng::derive_stream_key(seed, 0, 0, prng::domain::INIT, l as u64);
        let stream = Stream::new(key).expect("init key in range");
        let w = &mut theta[layer.weights.clone()];
        stream
            .fill(0, w, Distribution::Uniform)
            .expect("layer fits in one stream");
        for v in w.iter_mut() {
            *v *= bound;
        }
    }
    ParamVector(theta)
}

fn check_shapes(spec: &NetworkSpec, theta: &[f64], batch: &Batch) -> Result<()> {
    if theta.len() != spec.num_params() {
        return Err(Error::Shape(format!(
            "parameter vector has {} entries, network needs {}",
            theta.len(),
            spec.num_params()
        )));
    }
    if batch.inputs.len() != batch.len() * spec.input_dim() {
        return Err(Error::Shape(format!(
            "batch rows have {} inputs, network expects {}",
            batch.inputs.len() / batch.len().max(1),
            spec.input_dim()
        )));
    }
    if let Some(&y) = batch.labels.iter().find(|&&y| y >= spec.num_classes()) {
        return Err(Error::Shape(format!(
            "label {y} out of range for {} classes",
            spec.num_classes()
        )));
    }
    Ok(())
}

/// Activations of every layer (index 0 = inputs), each `B x width`.
fn activations(spec: &NetworkSpec, theta: &[f64], batch: &Batch) -> Result<Vec<Vec<f64>>> {
    let b = batch.len();
    let layout = spec.layout();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layout.len() + 1);
    acts.push(batch.inputs.clone());
    for (l, layer) in layout.iter().enumerate() {
        let w = &theta[layer.weights.clone()];
        let bias = &theta[layer.biases.clone()];
        let input = &acts[l];
        let last = l + 1 == layout.len();
        let mut out = vec![0.0; b * layer.fan_out];
        for (row_in, row_out) in input
            .chunks_exact(layer.fan_in)
            .zip(out.chunks_exact_mut(layer.fan_out))
        {
            for (o, z) in row_out.iter_mut().enumerate() {
                let w_row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                let mut acc = bias[o];
                for (wi, xi) in w_row.iter().zip(row_in) {
                    acc += wi * xi;
                }
                *z = if last { acc } else { acc.max(0.0) };
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: l });
        }
        acts.push(out);
    }
    Ok(acts)
}

/// Mean softmax cross-entropy over rows, and per-row probabilities.
fn softmax_xent(logits: &[f64], labels: &[usize], classes: usize) -> (f64, Vec<f64>) {
    let mut probs = vec![0.0; logits.len()];
    let mut total = 0.0;
    for ((row, p), &y) in logits
        .chunks_exact(classes)
        .zip(probs.chunks_exact_mut(classes))
        .zip(labels)
    {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (pi, zi) in p.iter_mut().zip(row) {
            *pi = (zi - m).exp();
            sum += *pi;
        }
        for pi in p.iter_mut() {
            *pi /= sum;
        }
        total += m + sum.ln() - row[y];
    }
    (total / labels.len() as f64, probs)
}

/// Batch-mean loss and logits.
pub fn forward(spec: &NetworkSpec, theta: &[f64], batch: &Batch) -> Result<ForwardOutput> {
    check_shapes(spec, theta, batch)?;
    let mut acts = activations(spec, theta, batch)?;
    let logits = acts.pop().unwrap();
    let (loss, _) = softmax_xent(&logits, &batch.labels, spec.num_classes());
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            layer: spec.num_layers() - 1,
        });
    }
    Ok(ForwardOutput { loss, logits })
}

/// Forward pass plus the gradient of the batch-mean loss, in parameter layout.
pub fn gradient(spec: &NetworkSpec, theta: &[f64], batch: &Batch) -> Result<(ForwardOutput, ParamVector)> {
    check_shapes(spec, theta, batch)?;
    let acts = activations(spec, theta, batch)?;
    let logits = acts.last().unwrap().clone();
    let classes = spec.num_classes();
    let (loss, probs) = softmax_xent(&logits, &batch.labels, classes);
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            layer: spec.num_layers() - 1,
        });
    }
    let b = batch.len();
    let inv_b = 1.0 / b as f64;

    // dL/dz for the output layer
    let mut delta = probs;
    for (row, &y) in delta.chunks_exact_mut(classes).zip(&batch.labels) {
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v *= inv_b;
        }
    }

    let layout = spec.layout();
    let mut grad = vec![0.0; theta.len()];
    for (l, layer) in layout.iter().enumerate().rev() {
        let input = &acts[l];
        {
            let (gw, gb) = grad[layer.weights.start..layer.biases.end].split_at_mut(layer.weights.len());
            for (row_in, row_delta) in input
                .chunks_exact(layer.fan_in)
                .zip(delta.chunks_exact(layer.fan_out))
            {
                for (o, &d) in row_delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let gw_row = &mut gw[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (g, x) in gw_row.iter_mut().zip(row_in) {
                        *g += d * x;
                    }
                }
            }
        }
        if l == 0 {
            break;
        }
        // propagate through weights and the ReLU of the previous layer
        let w = &theta[layer.weights.clone()];
        let mut prev = vec![0.0; b * layer.fan_in];
        for ((row_prev, row_delta), row_act) in prev
            .chunks_exact_mut(layer.fan_in)
            .zip(delta.chunks_exact(layer.fan_out))
            .zip(input.chunks_exact(layer.fan_in))
        {
            for (o, &d) in row_delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let w_row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                for (p, wi) in row_prev.iter_mut().zip(w_row) {
                    *p += d * wi;
                }
            }
            for (p, a) in row_prev.iter_mut().zip(row_act) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
        }
        delta = prev;
    }
    Ok((ForwardOutput { loss, logits }, ParamVector(grad)))
}

/// Accuracy and mean loss over a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

const EVAL_CHUNK: usize = 1000;

pub fn evaluate(spec: &NetworkSpec, theta: &[f64], dataset: &Dataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    let n = dataset.len();
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let batch = dataset.batch_of(start..end);
        let out = forward(spec, theta, &batch)?;
        correct += out.correct(&batch.labels);
        loss_sum += out.loss * batch.len() as f64;
        start = end;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        loss: loss_sum / n as f64,
    })
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"RBCK";
const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint layout (little-endian): `b"RBCK"`, u32 version, u32 width
/// count, u32 widths, u64 D, then D f64 values.
pub fn write_checkpoint<W: Write>(mut w: W, spec: &NetworkSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.num_params() {
        return Err(Error::Shape("checkpoint parameters do not match network".into()));
    }
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(spec.widths.len() as u32).to_le_bytes())?;
    for &width in &spec.widths {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    w.write_all(&(theta.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(theta.len() * 8);
    for v in theta {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(NetworkSpec, ParamVector)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {pos}")))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = u32_at(take(4)?) as usize;
    let mut widths = Vec::with_capacity(count);
    for _ in 0..count {
        widths.push(u32_at(take(4)?) as usize);
    }
    let spec = NetworkSpec::new(widths)?;
    let d = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    if d != spec.num_params() {
        return Err(Error::Checkpoint(format!(
            "stored {d} parameters, widths imply {}",
            spec.num_params()
        )));
    }
    let raw = take(d * 8)?;
    let theta = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((spec, ParamVector(theta)))
}
