//! Random bases over the parameter vector.
//!
//! A basis is never materialized. Each direction is regenerated from its
//! [`StreamKey`] in chunks of [`CHUNK_SIZE`] elements whenever it is needed, so
//! projecting or reconstructing holds one chunk buffer plus the `d`
//! coordinates and per-direction scales in memory.
//!
//! Accumulation order, which all bit-exactness guarantees rely on:
//!
//! * projection: `c_i = s_i * Σ_j r_ij g_j`, with the sum over `j` ascending
//!   inside the compartment and, in the same pass, `Σ_j r_ij²` ascending;
//! * reconstruction: for every direction in ascending order (compartment,
//!   then direction index), `u_j += (c_i s_i) * r_ij` for ascending `j`,
//!   where `s_i` is first recomputed by a separate sum-of-squares pass.
//!
//! `r_ij` is the raw stream sample and `s_i = 1 / sqrt(Σ_j r_ij²)` (or 1 when
//! the basis is not normalized).

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{NetworkSpec, ParamVector};
use crate::prng::{self, Distribution, Stream, StreamKey, RESAMPLE_DIRECTION_OFFSET};

/// Elements regenerated per chunk.
pub const CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// One compartment spanning all parameters.
    Single,
    /// `K` contiguous compartments whose lengths differ by at most one.
    Even(usize),
    /// One compartment per layer (weights and biases), equal budgets.
    Layerwise,
    /// One compartment per layer, budgets proportional to layer size.
    LayerwiseProportional,
}

impl SchemeKind {
    pub fn name(&self) -> String {
        match self {
            SchemeKind::Single => "single".into(),
            SchemeKind::Even(k) => format!("even({k})"),
            SchemeKind::Layerwise => "layerwise".into(),
            SchemeKind::LayerwiseProportional => "layerwise_proportional".into(),
        }
    }

    fn code(&self) -> (u32, u32) {
        match self {
            SchemeKind::Single => (0, 0),
            SchemeKind::Even(k) => (1, *k as u32),
            SchemeKind::Layerwise => (2, 0),
            SchemeKind::LayerwiseProportional => (3, 0),
        }
    }

    fn from_code(code: u32, arg: u32) -> Result<Self> {
        Ok(match code {
            0 => SchemeKind::Single,
            1 => SchemeKind::Even(arg as usize),
            2 => SchemeKind::Layerwise,
            3 => SchemeKind::LayerwiseProportional,
            other => return Err(Error::MessageFormat(format!("unknown scheme code {other}"))),
        })
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

/// Contiguous range of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compartment {
    pub offset: usize,
    pub len: usize,
}

impl Compartment {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Partition of `[0, D)` into compartments, before budgets are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub kind: SchemeKind,
    pub compartments: Vec<Compartment>,
}

impl Partition {
    pub fn single(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Scheme("parameter dimension must be positive".into()));
        }
        Ok(Self {
            kind: SchemeKind::Single,
            compartments: vec![Compartment { offset: 0, len: dim }],
        })
    }

    /// `k` compartments; the `dim % k` remainder goes one element at a time to
    /// the lowest-index compartments.
    pub fn even(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::Scheme(format!(
                "cannot split {dim} parameters into {k} compartments"
            )));
        }
        let base = dim / k;
        let extra = dim % k;
        let mut offset = 0;
        let compartments = (0..k)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let c = Compartment { offset, len };
                offset += len;
                c
            })
            .collect();
        Ok(Self {
            kind: SchemeKind::Even(k),
            compartments,
        })
    }

    /// One compartment per contiguous segment (typically a layer's weights and biases).
    pub fn from_segments(kind: SchemeKind, segments: &[Range<usize>]) -> Result<Self> {
        let mut expected = 0;
        for s in segments {
            if s.start != expected || s.is_empty() {
                return Err(Error::Scheme(format!("segments do not tile the parameters at {expected}")));
            }
            expected = s.end;
        }
        if segments.is_empty() {
            return Err(Error::Scheme("no segments".into()));
        }
        Ok(Self {
            kind,
            compartments: segments
                .iter()
                .map(|s| Compartment {
                    offset: s.start,
                    len: s.len(),
                })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.compartments.last().map_or(0, |c| c.offset + c.len)
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.compartments.iter().map(|c| c.len).collect()
    }
}

/// Partitions a network's parameters according to `kind`.
pub fn partition(spec: &NetworkSpec, kind: SchemeKind) -> Result<Partition> {
    partition_segments(&layer_segments(spec), kind)
}

/// Like [`partition`], for an arbitrary layer segmentation of `[0, D)`.
pub fn partition_segments(segments: &[Range<usize>], kind: SchemeKind) -> Result<Partition> {
    let dim = segments.last().map_or(0, |s| s.end);
    match kind {
        SchemeKind::Single => Partition::single(dim),
        SchemeKind::Even(k) => Partition::even(dim, k),
        SchemeKind::Layerwise | SchemeKind::LayerwiseProportional => {
            Partition::from_segments(kind, segments)
        }
    }
}

pub fn layer_segments(spec: &NetworkSpec) -> Vec<Range<usize>> {
    spec.layout().iter().map(|l| l.span()).collect()
}

/// Budgets proportional to compartment length, rounded by largest remainder
/// with a minimum of one coordinate per compartment.
///
/// Quotas `d·len/D` are floored and clamped to at least one. If that leaves
/// coordinates unassigned, they go to the largest fractional remainders; if
/// the clamping overshoots, coordinates are taken back from the smallest
/// remainders among compartments holding more than one. Ties go to the lower
/// index.
pub fn allocate_budgets(lengths: &[usize], d_total: usize) -> Result<Vec<usize>> {
    let k = lengths.len();
    if k == 0 {
        return Err(Error::Scheme("no compartments".into()));
    }
    if d_total < k {
        return Err(Error::Scheme(format!(
            "{d_total} coordinates cannot cover {k} compartments"
        )));
    }
    let dim: usize = lengths.iter().sum();
    // exact rational quotas: d_total * len / dim
    let mut budgets = Vec::with_capacity(k);
    let mut remainders = Vec::with_capacity(k);
    for &len in lengths {
        let num = d_total as u128 * len as u128;
        let q = (num / dim as u128) as usize;
        let r = num % dim as u128;
        budgets.push(q.max(1));
        remainders.push(if q == 0 { 0 } else { r });
    }
    let assigned: usize = budgets.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    if assigned < d_total {
        order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
        for &i in order.iter().cycle().take(d_total - assigned) {
            budgets[i] += 1;
        }
    } else if assigned > d_total {
        order.sort_by(|&a, &b| remainders[a].cmp(&remainders[b]).then(a.cmp(&b)));
        let mut excess = assigned - d_total;
        while excess > 0 {
            for &i in &order {
                if excess == 0 {
                    break;
                }
                if budgets[i] > 1 {
                    budgets[i] -= 1;
                    excess -= 1;
                }
            }
        }
    }
    Ok(budgets)
}

/// Equal budgets, remainder to the lowest-index compartments.
pub fn allocate_equal(k: usize, d_total: usize) -> Result<Vec<usize>> {
    if k == 0 || d_total < k {
        return Err(Error::Scheme(format!(
            "{d_total} coordinates cannot cover {k} compartments"
        )));
    }
    Ok((0..k).map(|i| d_total / k + usize::from(i < d_total % k)).collect())
}

/// Compartments plus their coordinate budgets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompartmentScheme {
    pub kind: SchemeKind,
    pub compartments: Vec<Compartment>,
    pub budgets: Vec<usize>,
}

impl CompartmentScheme {
    /// Assigns `d_total` coordinates: equal split for `Layerwise`,
    /// proportional for everything else.
    pub fn new(partition: Partition, d_total: usize) -> Result<Self> {
        let budgets = match partition.kind {
            SchemeKind::Layerwise => allocate_equal(partition.compartments.len(), d_total)?,
            _ => allocate_budgets(&partition.lengths(), d_total)?,
        };
        Self::with_budgets(partition, budgets)
    }

    pub fn with_budgets(partition: Partition, budgets: Vec<usize>) -> Result<Self> {
        if budgets.len() != partition.compartments.len() {
            return Err(Error::Scheme("one budget per compartment required".into()));
        }
        if budgets.iter().any(|&b| b == 0) {
            return Err(Error::Scheme("every compartment needs at least one coordinate".into()));
        }
        Ok(Self {
            kind: partition.kind,
            compartments: partition.compartments,
            budgets,
        })
    }

    /// Convenience: partition a network and assign budgets.
    pub fn for_network(spec: &NetworkSpec, kind: SchemeKind, d_total: usize) -> Result<Self> {
        Self::new(partition(spec, kind)?, d_total)
    }

    pub fn dim(&self) -> usize {
        self.compartments.last().map_or(0, |c| c.offset + c.len)
    }

    pub fn d_total(&self) -> usize {
        self.budgets.iter().sum()
    }

    /// Coordinate index ranges of each compartment in the concatenated vector.
    pub fn coordinate_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.budgets
            .iter()
            .map(|&b| {
                let r = start..start + b;
                start += b;
                r
            })
            .collect()
    }
}

/// Concatenated per-compartment coordinate vectors.
pub type Coordinates = Vec<f64>;

/// Seed material that fully determines one random basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisDescriptor {
    pub global_seed: u64,
    pub step: u64,
    pub worker: u64,
    pub scheme: Arc<CompartmentScheme>,
    pub distribution: Distribution,
    pub normalize: bool,
}

impl BasisDescriptor {
    pub fn key(&self, compartment: usize, direction: usize) -> StreamKey {
        prng::derive_stream_key(
            self.global_seed,
            self.step,
            self.worker,
            compartment as u64,
            direction as u64,
        )
    }

    /// Little-endian: the five stream-key fields (direction = 0), a u8
    /// distribution code, a u8 normalize flag, u32 scheme code, u32 scheme
    /// argument, u32 compartment count, then per compartment u32 offset,
    /// u32 length and u32 budget.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + 12 * self.scheme.budgets.len());
        out.extend_from_slice(&self.key(0, 0).to_bytes());
        out.push(self.distribution.code());
        out.push(u8::from(self.normalize));
        let (code, arg) = self.scheme.kind.code();
        out.extend_from_slice(&code.to_le_bytes());
        out.extend_from_slice(&arg.to_le_bytes());
        out.extend_from_slice(&(self.scheme.budgets.len() as u32).to_le_bytes());
        for (c, b) in self.scheme.compartments.iter().zip(&self.scheme.budgets) {
            out.extend_from_slice(&(c.offset as u32).to_le_bytes());
            out.extend_from_slice(&(c.len as u32).to_le_bytes());
            out.extend_from_slice(&(*b as u32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let key = StreamKey::from_bytes(bytes)?;
        let need = |n: usize| {
            if bytes.len() < n {
                Err(Error::MessageTruncated(format!("descriptor needs {n} bytes, got {}", bytes.len())))
            } else {
                Ok(())
            }
        };
        need(54)?;
        let u32_at = |p: usize| u32::from_le_bytes(bytes[p..p + 4].try_into().unwrap());
        let distribution = Distribution::from_code(bytes[40])
            .ok_or_else(|| Error::MessageFormat(format!("distribution code {}", bytes[40])))?;
        let normalize = bytes[41] != 0;
        let kind = SchemeKind::from_code(u32_at(42), u32_at(46))?;
        let count = u32_at(50) as usize;
        need(54 + 12 * count)?;
        let mut compartments = Vec::with_capacity(count);
        let mut budgets = Vec::with_capacity(count);
        for i in 0..count {
            let p = 54 + 12 * i;
            compartments.push(Compartment {
                offset: u32_at(p) as usize,
                len: u32_at(p + 4) as usize,
            });
            budgets.push(u32_at(p + 8) as usize);
        }
        let scheme = CompartmentScheme::with_budgets(Partition { kind, compartments }, budgets)?;
        Ok(Self {
            global_seed: key.global_seed,
            step: key.step,
            worker: key.worker,
            scheme: Arc::new(scheme),
            distribution,
            normalize,
        })
    }
}

/// Linear map between the D-dimensional parameter space and coordinates.
pub trait Basis {
    fn dim(&self) -> usize;

    fn num_coordinates(&self) -> usize;

    /// Coordinates of `g` along the basis directions.
    fn project(&self, g: &[f64]) -> Result<Coordinates>;

    /// Adds `Σ_i c_i φ_i` to `out`.
    fn reconstruct_into(&self, coords: &[f64], out: &mut [f64]) -> Result<()>;

    fn reconstruct(&self, coords: &[f64]) -> Result<ParamVector> {
        let mut out = vec![0.0; self.dim()];
        self.reconstruct_into(coords, &mut out)?;
        Ok(ParamVector(out))
    }

    /// `project` followed by `reconstruct`. Streamed bases override this to
    /// regenerate each direction once instead of twice; the result is
    /// bit-identical either way.
    fn project_reconstruct(&self, g: &[f64]) -> Result<(Coordinates, ParamVector)> {
        let c = self.project(g)?;
        let u = self.reconstruct(&c)?;
        Ok((c, u))
    }
}

/// Basis regenerated from a [`BasisDescriptor`].
#[derive(Debug, Clone)]
pub struct StreamedBasis {
    pub descriptor: BasisDescriptor,
}

impl StreamedBasis {
    pub fn new(descriptor: BasisDescriptor) -> Self {
        Self { descriptor }
    }
}

/// Stream used for direction `i` of compartment `kappa` after skipping any
/// all-zero raw draws.
fn resolve_stream(
    desc: &BasisDescriptor,
    kappa: usize,
    i: usize,
    len: usize,
    buf: &mut [f64],
) -> Result<(Stream, f64)> {
    prng::direction_scale(desc.key(kappa, i), len, desc.distribution, desc.normalize, buf)
}

impl Basis for StreamedBasis {
    fn dim(&self) -> usize {
        self.descriptor.scheme.dim()
    }

    fn num_coordinates(&self) -> usize {
        self.descriptor.scheme.d_total()
    }

    fn project(&self, g: &[f64]) -> Result<Coordinates> {
        project_gradient(g, &self.descriptor)
    }

    fn reconstruct_into(&self, coords: &[f64], out: &mut [f64]) -> Result<()> {
        reconstruct_into(coords, &self.descriptor, out)
    }

    fn project_reconstruct(&self, g: &[f64]) -> Result<(Coordinates, ParamVector)> {
        let mut out = vec![0.0; self.dim()];
        let c = project_accumulate(g, &self.descriptor, &mut out, |_, c| c)?;
        Ok((c, ParamVector(out)))
    }
}

fn check_dim(desc: &BasisDescriptor, len: usize, what: &str) -> Result<()> {
    if len != desc.scheme.dim() {
        return Err(Error::Shape(format!(
            "{what} has {len} entries, basis spans {}",
            desc.scheme.dim()
        )));
    }
    Ok(())
}

/// `c_{i,κ} = ⟨φ_{i,κ}, g_κ⟩` for every compartment κ and direction i.
pub fn project_gradient(g: &[f64], desc: &BasisDescriptor) -> Result<Coordinates> {
    check_dim(desc, g.len(), "gradient")?;
    let scheme = &desc.scheme;
    let mut coords = Vec::with_capacity(scheme.d_total());
    let mut buf = vec![0.0; CHUNK_SIZE];
    for (kappa, (comp, &budget)) in scheme.compartments.iter().zip(&scheme.budgets).enumerate() {
        let g_k = &g[comp.range()];
        for i in 0..budget {
            let mut key = desc.key(kappa, i);
            let c = loop {
                let stream = Stream::new(key)?;
                let mut dot = 0.0;
                let mut ss = 0.0;
                let mut offset = 0;
                while offset < comp.len {
                    let len = CHUNK_SIZE.min(comp.len - offset);
                    let chunk = &mut buf[..len];
                    stream.fill(offset as u64, chunk, desc.distribution)?;
                    for (r, x) in chunk.iter().zip(&g_k[offset..offset + len]) {
                        dot += r * x;
                        ss += r * r;
                    }
                    offset += len;
                }
                if !desc.normalize {
                    break dot;
                }
                if desc.distribution == Distribution::Bernoulli {
                    ss = comp.len as f64;
                }
                if ss > 0.0 {
                    break dot * (1.0 / ss.sqrt());
                }
                key = key.with_direction(key.direction + RESAMPLE_DIRECTION_OFFSET);
            };
            coords.push(c);
        }
    }
    Ok(coords)
}

/// Accumulates `Σ_i c_{i,κ} φ_{i,κ}` into each compartment of `out`.
pub fn reconstruct_into(coords: &[f64], desc: &BasisDescriptor, out: &mut [f64]) -> Result<()> {
    check_dim(desc, out.len(), "output")?;
    let scheme = &desc.scheme;
    if coords.len() != scheme.d_total() {
        return Err(Error::Shape(format!(
            "{} coordinates for a basis of {} directions",
            coords.len(),
            scheme.d_total()
        )));
    }
    let mut buf = vec![0.0; CHUNK_SIZE];
    let ranges = scheme.coordinate_ranges();
    for (kappa, comp) in scheme.compartments.iter().enumerate() {
        let out_k = &mut out[comp.range()];
        for (i, &c) in coords[ranges[kappa].clone()].iter().enumerate() {
            let (stream, scale) = resolve_stream(desc, kappa, i, comp.len, &mut buf)?;
            let w = c * scale;
            let mut offset = 0;
            while offset < comp.len {
                let len = CHUNK_SIZE.min(comp.len - offset);
                let chunk = &mut buf[..len];
                stream.fill(offset as u64, chunk, desc.distribution)?;
                for (o, r) in out_k[offset..offset + len].iter_mut().zip(chunk.iter()) {
                    *o += w * r;
                }
                offset += len;
            }
        }
    }
    Ok(())
}

/// Single pass over the basis: for each direction (in reconstruction order)
/// computes its coordinate `c = ⟨φ, g⟩`, then adds `map(i, c) · φ` to `out`,
/// where `i` is the coordinate's global index. Returns all coordinates.
///
/// Each direction is generated once into a buffer of its compartment's
/// length, so peak extra memory is one compartment, never the basis.
/// Coordinates equal [`project_gradient`] and the accumulation equals
/// [`reconstruct_into`] on the mapped coordinates, bit for bit.
pub fn project_accumulate(
    g: &[f64],
    desc: &BasisDescriptor,
    out: &mut [f64],
    mut map: impl FnMut(usize, f64) -> f64,
) -> Result<Coordinates> {
    check_dim(desc, g.len(), "gradient")?;
    check_dim(desc, out.len(), "output")?;
    let scheme = &desc.scheme;
    let longest = scheme.compartments.iter().map(|c| c.len).max().unwrap_or(0);
    let mut buf = vec![0.0; longest];
    let mut coords = Vec::with_capacity(scheme.d_total());
    for (kappa, (comp, &budget)) in scheme.compartments.iter().zip(&scheme.budgets).enumerate() {
        let g_k = &g[comp.range()];
        let out_k = &mut out[comp.range()];
        let dir = &mut buf[..comp.len];
        for i in 0..budget {
            let mut key = desc.key(kappa, i);
            let (c, scale) = loop {
                Stream::new(key)?.fill(0, dir, desc.distribution)?;
                let mut dot = 0.0;
                let mut ss = 0.0;
                for (r, x) in dir.iter().zip(g_k) {
                    dot += r * x;
                    ss += r * r;
                }
                if !desc.normalize {
                    break (dot, 1.0);
                }
                if desc.distribution == Distribution::Bernoulli {
                    ss = comp.len as f64;
                }
                if ss > 0.0 {
                    let scale = 1.0 / ss.sqrt();
                    break (dot * scale, scale);
                }
                key = key.with_direction(key.direction + RESAMPLE_DIRECTION_OFFSET);
            };
            let w = map(coords.len(), c) * scale;
            for (o, r) in out_k.iter_mut().zip(dir.iter()) {
                *o += w * r;
            }
            coords.push(c);
        }
    }
    Ok(coords)
}

/// `Σ_i c_i φ_i` as a fresh D-vector.
pub fn reconstruct_update(coords: &[f64], desc: &BasisDescriptor) -> Result<ParamVector> {
    let mut out = vec![0.0; desc.scheme.dim()];
    reconstruct_into(coords, desc, &mut out)?;
    Ok(ParamVector(out))
}

/// Several streamed bases used as one, in the given order. Reconstruction
/// accumulates part 0 completely, then part 1, and so on.
#[derive(Debug, Clone)]
pub struct ConcatBasis {
    pub parts: Vec<BasisDescriptor>,
}

impl Basis for ConcatBasis {
    fn dim(&self) -> usize {
        self.parts.first().map_or(0, |p| p.scheme.dim())
    }

    fn num_coordinates(&self) -> usize {
        self.parts.iter().map(|p| p.scheme.d_total()).sum()
    }

    fn project(&self, g: &[f64]) -> Result<Coordinates> {
        let mut out = Vec::with_capacity(self.num_coordinates());
        for p in &self.parts {
            out.extend(project_gradient(g, p)?);
        }
        Ok(out)
    }

    fn project_reconstruct(&self, g: &[f64]) -> Result<(Coordinates, ParamVector)> {
        let mut out = vec![0.0; self.dim()];
        let mut coords = Vec::with_capacity(self.num_coordinates());
        for p in &self.parts {
            coords.extend(project_accumulate(g, p, &mut out, |_, c| c)?);
        }
        Ok((coords, ParamVector(out)))
    }

    fn reconstruct_into(&self, coords: &[f64], out: &mut [f64]) -> Result<()> {
        if coords.len() != self.num_coordinates() {
            return Err(Error::Shape("coordinate count mismatch".into()));
        }
        let mut start = 0;
        for p in &self.parts {
            let n = p.scheme.d_total();
            reconstruct_into(&coords[start..start + n], p, out)?;
            start += n;
        }
        Ok(())
    }
}

/// Explicitly stored directions (each of full length D). Used for
/// orthonormalized bases and small-scale analysis; never for training at scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBasis {
    dim: usize,
    directions: Vec<Vec<f64>>,
}

impl DenseBasis {
    pub fn new(dim: usize, directions: Vec<Vec<f64>>) -> Result<Self> {
        if directions.iter().any(|d| d.len() != dim) {
            return Err(Error::Shape("direction length differs from dimension".into()));
        }
        Ok(Self { dim, directions })
    }

    /// Materializes every direction of a descriptor, zero outside its compartment.
    pub fn materialize(desc: &BasisDescriptor) -> Result<Self> {
        let dim = desc.scheme.dim();
        let mut directions = Vec::with_capacity(desc.scheme.d_total());
        for (kappa, (comp, &budget)) in desc.scheme.compartments.iter().zip(&desc.scheme.budgets).enumerate() {
            for i in 0..budget {
                let mut full = vec![0.0; dim];
                let phi = prng::sample_direction(desc.key(kappa, i), comp.len, desc.distribution, desc.normalize)?;
                full[comp.range()].copy_from_slice(&phi);
                directions.push(full);
            }
        }
        Ok(Self { dim, directions })
    }

    /// `count` Gaussian directions orthonormalized by two rounds of modified
    /// Gram-Schmidt. Requires `count <= dim`.
    pub fn orthonormal_gaussian(dim: usize, count: usize, seed: u64, step: u64) -> Result<Self> {
        if count > dim {
            return Err(Error::Shape(format!("cannot fit {count} orthonormal directions in {dim} dimensions")));
        }
        let mut directions: Vec<Vec<f64>> = Vec::with_capacity(count);
        for i in 0..count {
            let key = prng::derive_stream_key(seed, step, 0, 0, i as u64);
            let mut v = prng::sample_chunk(key, 0, dim, Distribution::Gaussian)?;
            for _ in 0..2 {
                for q in &directions {
                    let p: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                    for (x, qi) in v.iter_mut().zip(q) {
                        *x -= p * qi;
                    }
                }
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-12 {
                return Err(Error::Shape("degenerate direction during orthonormalization".into()));
            }
            for x in &mut v {
                *x /= n;
            }
            directions.push(v);
        }
        Ok(Self { dim, directions })
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Norm of the part of `v` orthogonal to the span of the directions
    /// (least squares via normal equations solved by Cholesky).
    pub fn residual_norm(&self, v: &[f64]) -> Result<f64> {
        let n = self.directions.len();
        let mut gram = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = dot(&self.directions[i], v);
            for j in 0..=i {
                let g = dot(&self.directions[i], &self.directions[j]);
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        let coef = cholesky_solve(&mut gram, &mut rhs, n)?;
        let mut r = v.to_vec();
        for (c, d) in coef.iter().zip(&self.directions) {
            for (x, di) in r.iter_mut().zip(d) {
                *x -= c * di;
            }
        }
        Ok(r.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(Error::Shape("basis directions are linearly dependent".into()));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b.to_vec())
}

impl Basis for DenseBasis {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_coordinates(&self) -> usize {
        self.directions.len()
    }

    fn project(&self, g: &[f64]) -> Result<Coordinates> {
        if g.len() != self.dim {
            return Err(Error::Shape("gradient length mismatch".into()));
        }
        Ok(self.directions.iter().map(|d| dot(d, g)).collect())
    }

    fn reconstruct_into(&self, coords: &[f64], out: &mut [f64]) -> Result<()> {
        if coords.len() != self.directions.len() || out.len() != self.dim {
            return Err(Error::Shape("coordinate or output length mismatch".into()));
        }
        for (c, d) in coords.iter().zip(&self.directions) {
            for (o, x) in out.iter_mut().zip(d) {
                *o += c * x;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(scheme: CompartmentScheme, dist: Distribution) -> BasisDescriptor {
        BasisDescriptor {
            global_seed: 5,
            step: 3,
            worker: 0,
            scheme: Arc::new(scheme),
            distribution: dist,
            normalize: true,
        }
    }

    #[test]
    fn even_partition_lengths() {
        assert_eq!(Partition::even(10, 2).unwrap().lengths(), vec![5, 5]);
        assert_eq!(Partition::even(10, 3).unwrap().lengths(), vec![4, 3, 3]);
        assert!(Partition::even(3, 4).is_err());
        let p = Partition::even(101_770, 7).unwrap();
        let l = p.lengths();
        assert_eq!(l.iter().sum::<usize>(), 101_770);
        assert!(l.iter().max().unwrap() - l.iter().min().unwrap() <= 1);
    }

    #[test]
    fn layerwise_fc_mnist() {
        let p = partition(&NetworkSpec::fc_mnist(), SchemeKind::Layerwise).unwrap();
        assert_eq!(p.lengths(), vec![100_480, 1_290]);
    }

    #[test]
    fn proportional_budgets() {
        assert_eq!(allocate_budgets(&[100_480, 1_290], 250).unwrap(), vec![247, 3]);
        assert_eq!(allocate_budgets(&[7; 5], 1250).unwrap(), vec![250; 5]);
        assert_eq!(allocate_budgets(&[101_770], 250).unwrap(), vec![250]);
        // tiny compartment clamped to one, taken back from the big one
        assert_eq!(allocate_budgets(&[1000, 1], 2).unwrap(), vec![1, 1]);
        assert_eq!(allocate_budgets(&[1000, 1, 1], 4).unwrap(), vec![2, 1, 1]);
        assert!(allocate_budgets(&[3, 3], 1).is_err());
    }

    #[test]
    fn budgets_sum_and_minimum() {
        for d in 3..60 {
            let b = allocate_budgets(&[50, 3, 900, 1], d).unwrap_or_default();
            if d >= 4 {
                assert_eq!(b.iter().sum::<usize>(), d);
                assert!(b.iter().all(|&x| x >= 1));
            }
        }
    }

    #[test]
    fn unit_gradient_picks_first_element() {
        let scheme = CompartmentScheme::new(Partition::single(6).unwrap(), 2).unwrap();
        let d = desc(scheme, Distribution::Gaussian);
        let mut g = vec![0.0; 6];
        g[0] = 1.0;
        let c = project_gradient(&g, &d).unwrap();
        let phi = prng::sample_direction(d.key(0, 0), 6, Distribution::Gaussian, true).unwrap();
        assert!((c[0] - phi[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_coordinates_give_zero_update() {
        let scheme = CompartmentScheme::new(Partition::even(20, 3).unwrap(), 5).unwrap();
        let d = desc(scheme, Distribution::Uniform);
        let u = reconstruct_update(&[0.0; 5], &d).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn orthonormal_expansion() {
        let b = DenseBasis::orthonormal_gaussian(8, 3, 1, 0).unwrap();
        let dirs = b.directions();
        let g: Vec<f64> = (0..8).map(|j| 2.0 * dirs[0][j] - dirs[1][j]).collect();
        let c = b.project(&g).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
        assert!((c[1] + 1.0).abs() < 1e-12);
        assert!(c[2].abs() < 1e-12);
    }

    #[test]
    fn descriptor_bytes_round_trip() {
        let scheme = CompartmentScheme::for_network(
            &NetworkSpec::new(vec![4, 3, 2]).unwrap(),
            SchemeKind::LayerwiseProportional,
            6,
        )
        .unwrap();
        let d = desc(scheme, Distribution::Bernoulli);
        let bytes = d.to_bytes();
        assert_eq!(bytes.len(), 54 + 12 * 2);
        assert_eq!(BasisDescriptor::from_bytes(&bytes).unwrap(), d);
        assert!(BasisDescriptor::from_bytes(&bytes[..60]).is_err());
    }

    #[test]
    fn shape_mismatch_errors() {
        let scheme = CompartmentScheme::new(Partition::single(5).unwrap(), 2).unwrap();
        let d = desc(scheme, Distribution::Gaussian);
        assert!(project_gradient(&[0.0; 4], &d).is_err());
        assert!(reconstruct_update(&[0.0; 3], &d).is_err());
    }
}
