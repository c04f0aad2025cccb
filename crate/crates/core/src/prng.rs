//! Counter-based random streams.
//!
//! Every random value used for a basis is addressed by a [`StreamKey`] and an
//! element index. The generator is Philox4x32-10: the 64-bit global seed is the
//! cipher key and the counter packs the stream indices together with the
//! element position, so any element of any direction can be regenerated on
//! any worker without replaying a sequential state.
//!
//! Counter layout (128 bits, little end first):
//!
//! ```text
//! word 0       : element pair index (two elements per cipher block)
//! words 1..=3  : step << 72 | worker << 48 | compartment << 24 | direction
//! ```
//!
//! Each of the four stream indices therefore has 24 bits of range.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Exclusive upper bound for every stream index field.
pub const INDEX_LIMIT: u64 = 1 << 24;

/// Number of elements a single stream can address.
pub const STREAM_CAPACITY: u64 = 1 << 33;

/// When a raw direction draw is exactly zero it cannot be normalized; the
/// direction is redrawn from `direction + RESAMPLE_DIRECTION_OFFSET`.
pub const RESAMPLE_DIRECTION_OFFSET: u64 = 1 << 23;

/// Compartment indices at the top of the range are reserved for non-basis
/// streams (initialization, shuffling, splitting, synthetic data).
pub mod domain {
    pub const INIT: u64 = super::INDEX_LIMIT - 1;
    pub const SHUFFLE: u64 = super::INDEX_LIMIT - 2;
    pub const SPLIT: u64 = super::INDEX_LIMIT - 3;
    pub const SYNTHETIC: u64 = super::INDEX_LIMIT - 4;
    pub const ANALYSIS: u64 = super::INDEX_LIMIT - 5;
}

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

#[inline(always)]
fn philox_round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
    let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        c = philox_round(c, k);
    }
    c
}

/// Box-Muller on two raw words.
#[inline(always)]
fn gaussian_pair(a: u64, b: u64) -> [f64; 2] {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = ((a >> 11) + 1) as f64 * TWO_POW_M53;
    let u2 = (b >> 11) as f64 * TWO_POW_M53;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    [r * c, r * s]
}

#[inline(always)]
fn uniform(a: u64) -> f64 {
    2.0 * ((a >> 11) as f64 * TWO_POW_M53) - 1.0
}

#[inline(always)]
fn sign(a: u64) -> f64 {
    if a >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Address of one deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub global_seed: u64,
    pub step: u64,
    pub worker: u64,
    pub compartment: u64,
    pub direction: u64,
}

/// Builds the key for one basis direction.
pub fn derive_stream_key(
    global_seed: u64,
    step: u64,
    worker: u64,
    compartment: u64,
    direction: u64,
) -> StreamKey {
    StreamKey {
        global_seed,
        step,
        worker,
        compartment,
        direction,
    }
}

impl StreamKey {
    pub const ENCODED_LEN: usize = 40;

    /// Five little-endian u64 values in field order.
    pub fn to_bytes(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        let fields = [
            self.global_seed,
            self.step,
            self.worker,
            self.compartment,
            self.direction,
        ];
        for (chunk, v) in out.chunks_exact_mut(8).zip(fields) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < Self::ENCODED_LEN {
            return Err(Error::MessageTruncated(format!(
                "stream key needs {} bytes, got {}",
                Self::ENCODED_LEN,
                bytes.len()
            )));
        }
        let f = |i: usize| u64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap());
        Ok(Self {
            global_seed: f(0),
            step: f(1),
            worker: f(2),
            compartment: f(3),
            direction: f(4),
        })
    }

    /// Same key with a different direction index.
    pub fn with_direction(self, direction: u64) -> Self {
        Self { direction, ..self }
    }

    fn counter_words(&self) -> Result<[u32; 3]> {
        for (field, value) in [
            ("step", self.step),
            ("worker", self.worker),
            ("compartment", self.compartment),
            ("direction", self.direction),
        ] {
            if value >= INDEX_LIMIT {
                return Err(Error::KeyRange {
                    field,
                    value,
                    max: INDEX_LIMIT - 1,
                });
            }
        }
        let packed: u128 = (u128::from(self.step) << 72)
            | (u128::from(self.worker) << 48)
            | (u128::from(self.compartment) << 24)
            | u128::from(self.direction);
        Ok([packed as u32, (packed >> 32) as u32, (packed >> 64) as u32])
    }
}

/// Distribution of the raw (pre-normalization) direction elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Standard normal, via Box-Muller on one cipher block per element pair.
    Gaussian,
    /// Uniform on [-1, 1).
    Uniform,
    /// +1 or -1 with equal probability.
    Bernoulli,
}

impl Distribution {
    pub const ALL: [Distribution; 3] = [
        Distribution::Gaussian,
        Distribution::Uniform,
        Distribution::Bernoulli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Uniform => "uniform",
            Distribution::Bernoulli => "bernoulli",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Distribution::Gaussian => 0,
            Distribution::Uniform => 1,
            Distribution::Bernoulli => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.code() == code)
    }
}

impl std::str::FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "uniform" => Ok(Distribution::Uniform),
            "bernoulli" => Ok(Distribution::Bernoulli),
            other => Err(format!(
                "unknown distribution `{other}` (expected gaussian, uniform or bernoulli)"
            )),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// A validated key ready for random access sampling.
#[derive(Debug, Clone, Copy)]
pub struct Stream {
    key: StreamKey,
    cipher_key: [u32; 2],
    words: [u32; 3],
}

impl Stream {
    pub fn new(key: StreamKey) -> Result<Self> {
        let words = key.counter_words()?;
        Ok(Self {
            key,
            cipher_key: [key.global_seed as u32, (key.global_seed >> 32) as u32],
            words,
        })
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    #[inline(always)]
    fn block(&self, pair: u64) -> (u64, u64) {
        let r = philox4x32_10(
            [pair as u32, self.words[0], self.words[1], self.words[2]],
            self.cipher_key,
        );
        (
            u64::from(r[0]) | (u64::from(r[1]) << 32),
            u64::from(r[2]) | (u64::from(r[3]) << 32),
        )
    }

    #[inline(always)]
    fn pair_values(&self, pair: u64, dist: Distribution) -> [f64; 2] {
        let (a, b) = self.block(pair);
        match dist {
            Distribution::Gaussian => gaussian_pair(a, b),
            Distribution::Uniform => [uniform(a), uniform(b)],
            Distribution::Bernoulli => [sign(a), sign(b)],
        }
    }

    fn check_range(offset: u64, len: usize) -> Result<()> {
        let end = offset.checked_add(len as u64).unwrap_or(u64::MAX);
        if end > STREAM_CAPACITY {
            return Err(Error::CounterOverflow {
                offset,
                end,
                capacity: STREAM_CAPACITY,
            });
        }
        Ok(())
    }

    /// Writes elements `[offset, offset + out.len())` of the stream into `out`.
    pub fn fill(&self, offset: u64, out: &mut [f64], dist: Distribution) -> Result<()> {
        Self::check_range(offset, out.len())?;
        let mut pos = offset;
        let mut rest = out;
        if pos % 2 == 1 && !rest.is_empty() {
            rest[0] = self.pair_values(pos / 2, dist)[1];
            rest = &mut rest[1..];
            pos += 1;
        }
        let rest_len = rest.len() as u64;
        let mut pairs = rest.chunks_exact_mut(2);
        for (k, chunk) in (&mut pairs).enumerate() {
            let v = self.pair_values(pos / 2 + k as u64, dist);
            chunk[0] = v[0];
            chunk[1] = v[1];
        }
        let tail = pairs.into_remainder();
        if let Some(last) = tail.first_mut() {
            let last_pos = pos + (rest_len - 1);
            *last = self.pair_values(last_pos / 2, dist)[0];
        }
        Ok(())
    }

    /// Raw uniformly distributed 64-bit word at `index` (used for shuffles).
    pub fn word(&self, index: u64) -> u64 {
        let (a, b) = self.block(index / 2);
        if index % 2 == 0 {
            a
        } else {
            b
        }
    }

    /// Sum of squares of elements `[0, dim)`, accumulated sequentially in
    /// chunks of `buf.len()`.
    pub fn sum_of_squares(&self, dim: usize, dist: Distribution, buf: &mut [f64]) -> Result<f64> {
        Self::check_range(0, dim)?;
        if let Distribution::Bernoulli = dist {
            // every element is +-1
            return Ok(dim as f64);
        }
        let mut acc = 0.0;
        let mut offset = 0usize;
        while offset < dim {
            let len = buf.len().min(dim - offset);
            let chunk = &mut buf[..len];
            self.fill(offset as u64, chunk, dist)?;
            for v in chunk.iter() {
                acc += v * v;
            }
            offset += len;
        }
        Ok(acc)
    }
}

/// Samples elements `[offset, offset + len)` of the stream `key`.
///
/// The result depends only on absolute element positions, so any chunk
/// decomposition concatenates to the one-shot sample.
pub fn sample_chunk(key: StreamKey, offset: u64, len: usize, dist: Distribution) -> Result<Vec<f64>> {
    let stream = Stream::new(key)?;
    let mut out = vec![0.0; len];
    stream.fill(offset, &mut out, dist)?;
    Ok(out)
}

/// Scale that maps a raw direction to unit norm, together with the key that
/// was actually used (differs from the input only after a zero draw).
pub(crate) fn direction_scale(
    key: StreamKey,
    dim: usize,
    dist: Distribution,
    normalize: bool,
    buf: &mut [f64],
) -> Result<(Stream, f64)> {
    let mut current = key;
    loop {
        let stream = Stream::new(current)?;
        if !normalize {
            return Ok((stream, 1.0));
        }
        let ss = stream.sum_of_squares(dim, dist, buf)?;
        if ss > 0.0 {
            return Ok((stream, 1.0 / ss.sqrt()));
        }
        current = current.with_direction(current.direction + RESAMPLE_DIRECTION_OFFSET);
    }
}

/// One random direction of length `dim`, optionally scaled to unit L2 norm.
pub fn sample_direction(key: StreamKey, dim: usize, dist: Distribution, normalize: bool) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::Shape("direction dimension must be at least 1".into()));
    }
    let mut buf = vec![0.0; crate::subspace::CHUNK_SIZE.min(dim)];
    let (stream, scale) = direction_scale(key, dim, dist, normalize, &mut buf)?;
    let mut out = vec![0.0; dim];
    stream.fill(0, &mut out, dist)?;
    if normalize {
        for v in &mut out {
            *v *= scale;
        }
    }
    Ok(out)
}
