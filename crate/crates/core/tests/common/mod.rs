//! Test-side oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use random_bases::nn::{self, Batch, NetworkSpec};
use random_bases::prng::{self, Distribution};
use random_bases::subspace::BasisDescriptor;

/// Deterministic vector with entries in [-scale, scale).
pub fn vector(len: usize, seed: u64, scale: f64) -> Vec<f64> {
    let key = prng::derive_stream_key(seed, 7, 7, 7, 7);
    prng::sample_chunk(key, 0, len, Distribution::Uniform)
        .unwrap()
        .into_iter()
        .map(|v| v * scale)
        .collect()
}

pub fn batch(spec: &NetworkSpec, rows: usize, seed: u64) -> Batch {
    let inputs = vector(rows * spec.input_dim(), seed, 1.0);
    let labels = (0..rows).map(|i| (i * 7 + seed as usize) % spec.num_classes()).collect();
    Batch::new(inputs, labels).unwrap()
}

pub fn loss(spec: &NetworkSpec, theta: &[f64], batch: &Batch) -> f64 {
    nn::forward(spec, theta, batch).unwrap().loss
}

/// Central difference of `f` along coordinate `j`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[j] = x[j] + h;
    let up = f(&p);
    p[j] = x[j] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Raw (unnormalized) stream rows and normalization scales of a basis,
/// materialized compartment by compartment: `rows[i]` is a full-length
/// vector that is zero outside its compartment.
pub struct DenseOracle {
    pub rows: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
}

impl DenseOracle {
    pub fn build(desc: &BasisDescriptor) -> Self {
        let scheme = &desc.scheme;
        let dim = scheme.dim();
        let mut rows = Vec::new();
        let mut scales = Vec::new();
        for (kappa, (comp, &budget)) in scheme.compartments.iter().zip(&scheme.budgets).enumerate() {
            for i in 0..budget {
                let raw = prng::sample_chunk(desc.key(kappa, i), 0, comp.len, desc.distribution).unwrap();
                let mut ss = 0.0;
                for r in &raw {
                    ss += r * r;
                }
                if desc.distribution == Distribution::Bernoulli {
                    ss = comp.len as f64;
                }
                assert!(ss > 0.0, "all-zero draw in oracle fixture");
                let scale = if desc.normalize { 1.0 / ss.sqrt() } else { 1.0 };
                let mut row = vec![0.0; dim];
                row[comp.range()].copy_from_slice(&raw);
                rows.push(row);
                scales.push(scale);
            }
        }
        Self { rows, scales }
    }

    /// Unit-norm directions.
    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .zip(&self.scales)
            .map(|(r, s)| r.iter().map(|v| v * s).collect())
            .collect()
    }

    /// `c_i = s_i · Σ_j r_ij g_j`, summed in element order within the
    /// direction's compartment.
    pub fn project(&self, desc: &BasisDescriptor, g: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0;
        for (comp, &budget) in desc.scheme.compartments.iter().zip(&desc.scheme.budgets) {
            for _ in 0..budget {
                let mut dot = 0.0;
                for j in comp.range() {
                    dot += self.rows[i][j] * g[j];
                }
                out.push(if desc.normalize { dot * self.scales[i] } else { dot });
                i += 1;
            }
        }
        out
    }

    /// `u_j = Σ_i (c_i · s_i) · r_ij`, directions in order.
    pub fn reconstruct(&self, desc: &BasisDescriptor, c: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; desc.scheme.dim()];
        let mut i = 0;
        for (comp, &budget) in desc.scheme.compartments.iter().zip(&desc.scheme.budgets) {
            for _ in 0..budget {
                let w = c[i] * self.scales[i];
                for j in comp.range() {
                    u[j] += w * self.rows[i][j];
                }
                i += 1;
            }
        }
        u
    }
}

/// Norm of the component of `v` orthogonal to span(`directions`), by
/// modified Gram-Schmidt run twice.
pub fn residual_outside_span(directions: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for d in directions {
        let mut w = d.clone();
        for _ in 0..2 {
            for b in &q {
                let p: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            q.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in &q {
            let p: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in r.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
    }
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
