//! Diagnostics: gradient correlation with SGD, quasi-orthogonality of random
//! directions, and one-dimensional loss slices.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn;
use crate::objective::Objective;
use crate::optim::{self, Optimizer, OptimizerConfig, TrainerState, TrainingRun};
use crate::output::write_header_lines;
use crate::prng::{self, domain, Distribution};

/// Sample Pearson correlation of two equal-length vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("lengths {} and {} differ", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::ZeroVariance);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Large-dimension mean of `|cos|` between independent isotropic directions.
pub fn expected_abs_cosine(dim: usize) -> f64 {
    (2.0 / (std::f64::consts::PI * dim as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityRow {
    pub dim: usize,
    pub pairs: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_abs: f64,
    pub std_abs: f64,
    pub expected_abs: f64,
}

impl OrthogonalityRow {
    /// Standard error of `mean_abs`.
    pub fn abs_standard_error(&self) -> f64 {
        self.std_abs / (self.pairs as f64).sqrt()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

pub const DEFAULT_PAIRS: usize = 100;

/// Cosine similarity statistics of `pairs` independent Gaussian direction
/// pairs for each dimension. Pair `p` at dimension `n` uses streams
/// `(seed, p, n, ANALYSIS, 0|1)`.
pub fn orthogonality_study(dims: &[usize], pairs: usize, seed: u64) -> Result<Vec<OrthogonalityRow>> {
    if pairs == 0 {
        return Err(Error::InvalidConfig("pairs must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        let mut cos = Vec::with_capacity(pairs);
        for p in 0..pairs {
            let key = |i| prng::derive_stream_key(seed, p as u64, dim as u64, domain::ANALYSIS, i);
            let a = prng::sample_direction(key(0), dim, Distribution::Gaussian, true)?;
            let b = prng::sample_direction(key(1), dim, Distribution::Gaussian, true)?;
            cos.push(cosine(&a, &b));
        }
        let abs: Vec<f64> = cos.iter().map(|c| c.abs()).collect();
        let (mean, std) = mean_std(&cos);
        let (mean_abs, std_abs) = mean_std(&abs);
        rows.push(OrthogonalityRow {
            dim,
            pairs,
            mean,
            std,
            mean_abs,
            std_abs,
            expected_abs: expected_abs_cosine(dim),
        });
    }
    Ok(rows)
}

pub const DEFAULT_SLICE_DIRECTIONS: usize = 25;

/// 21 evenly spaced points on [-1, 1].
pub fn default_displacements() -> Vec<f64> {
    (0..21).map(|i| -1.0 + i as f64 * 0.1).map(|s: f64| if s.abs() < 1e-12 { 0.0 } else { s }).collect()
}

/// Mean loss along random directions at each displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceProfile {
    pub displacements: Vec<f64>,
    /// `None` where any direction produced a non-finite loss.
    pub mean_losses: Vec<Option<f64>>,
    /// `per_direction[k][s]`, `None` for non-finite losses.
    pub per_direction: Vec<Vec<Option<f64>>>,
    pub distribution: Distribution,
}

impl SliceProfile {
    pub fn directions(&self) -> usize {
        self.per_direction.len()
    }
}

/// Normalized full-length direction `k` of a slice study.
pub fn slice_direction(dim: usize, dist: Distribution, seed: u64, k: usize) -> Result<Vec<f64>> {
    let key = prng::derive_stream_key(seed, 0, 1, domain::ANALYSIS, k as u64);
    prng::sample_direction(key, dim, dist, true)
}

/// Loss slice along caller-supplied directions. At displacement 0 the loss
/// is evaluated at `theta` itself.
pub fn landscape_slice_along(
    objective: &dyn Objective,
    theta: &[f64],
    directions: &[Vec<f64>],
    displacements: &[f64],
    distribution: Distribution,
) -> Result<SliceProfile> {
    if !displacements.contains(&0.0) {
        return Err(Error::InvalidConfig("displacements must include 0".into()));
    }
    if directions.is_empty() {
        return Err(Error::InvalidConfig("at least one direction is required".into()));
    }
    let base = objective.loss(theta).ok().filter(|l| l.is_finite());
    let mut point = vec![0.0; theta.len()];
    let mut per_direction = Vec::with_capacity(directions.len());
    for phi in directions {
        if phi.len() != theta.len() {
            return Err(Error::Shape(format!("direction of length {} for {} parameters", phi.len(), theta.len())));
        }
        let mut row = Vec::with_capacity(displacements.len());
        for &s in displacements {
            if s == 0.0 {
                row.push(base);
                continue;
            }
            for ((p, t), f) in point.iter_mut().zip(theta).zip(phi) {
                *p = t + s * f;
            }
            row.push(objective.loss(&point).ok().filter(|l| l.is_finite()));
        }
        per_direction.push(row);
    }
    let n = directions.len() as f64;
    let mean_losses = (0..displacements.len())
        .map(|j| {
            let mut sum = 0.0;
            for row in &per_direction {
                sum += row[j]?;
            }
            Some(sum / n)
        })
        .collect();
    Ok(SliceProfile {
        displacements: displacements.to_vec(),
        mean_losses,
        per_direction,
        distribution,
    })
}

/// Loss slice along `n_directions` seeded normalized directions drawn from
/// `dist` over all parameters.
pub fn landscape_slice(
    objective: &dyn Objective,
    theta: &[f64],
    dist: Distribution,
    n_directions: usize,
    displacements: &[f64],
    seed: u64,
) -> Result<SliceProfile> {
    let directions = (0..n_directions)
        .map(|k| slice_direction(theta.len(), dist, seed, k))
        .collect::<Result<Vec<_>>>()?;
    landscape_slice_along(objective, theta, &directions, displacements, dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub d: usize,
    pub seed: u64,
    pub mean_correlation: f64,
    pub samples: usize,
    pub final_accuracy: f64,
}

/// Settings for [`correlation_vs_dimension`].
#[derive(Debug, Clone)]
pub struct CorrelationStudy {
    /// RBD configuration; `d_total` and `basis_seed` are overridden per run.
    pub template: OptimizerConfig,
    pub epochs: u64,
    /// Measure the correlation every this many steps.
    pub every: u64,
    pub init_seed: u64,
}

/// Runs RBD at each `d` and basis seed (all from the same initialization), recording the mean Pearson correlation
/// between the reconstructed update (before the learning rate) and the
/// full gradient on the same batch, plus the final validation accuracy.
pub fn correlation_vs_dimension(
    study: &CorrelationStudy,
    run: &TrainingRun<'_>,
    ds: &[usize],
    seeds: &[u64],
) -> Result<Vec<CorrelationRow>> {
    let every = study.every.max(1);
    let mut rows = Vec::new();
    for &d in ds {
        if d == 0 {
            return Err(Error::InvalidConfig("d must be at least 1".into()));
        }
        for &seed in seeds {
            let mut cfg = study.template.clone();
            cfg.rule = optim::Rule::Rbd;
            cfg.d_total = d;
            cfg.basis_seed = seed;
            let opt = Optimizer::for_network(cfg, run.spec)?;
            let mut state = TrainerState::new(nn::init_params(run.spec, study.init_seed));
            let mut sum = 0.0;
            let mut count = 0usize;
            let records = optim::train_epochs(run, &opt, &mut state, study.epochs, &mut |obs| {
                if obs.step % every != 0 {
                    return;
                }
                if let (Some(g), Some(u)) = (&obs.report.gradient, &obs.report.update) {
                    if let Ok(r) = pearson(u, g) {
                        sum += r;
                        count += 1;
                    }
                }
            })?;
            rows.push(CorrelationRow {
                d,
                seed,
                mean_correlation: if count > 0 { sum / count as f64 } else { f64::NAN },
                samples: count,
                final_accuracy: records.last().map_or(f64::NAN, |r| r.val_acc),
            });
        }
    }
    Ok(rows)
}

pub fn write_orthogonality_csv<W: Write>(mut w: W, header: &[(String, String)], rows: &[OrthogonalityRow]) -> Result<()> {
    write_header_lines(&mut w, header)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["dim", "pairs", "mean", "std", "mean_abs", "std_abs", "expected_abs"])?;
    for r in rows {
        csv.write_record([
            r.dim.to_string(),
            r.pairs.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.mean_abs.to_string(),
            r.std_abs.to_string(),
            r.expected_abs.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_slice_csv<W: Write>(mut w: W, header: &[(String, String)], label: &str, profile: &SliceProfile) -> Result<()> {
    write_header_lines(&mut w, header)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["label", "distribution", "displacement", "mean_loss", "directions"])?;
    for (s, m) in profile.displacements.iter().zip(&profile.mean_losses) {
        csv.write_record([
            label.to_string(),
            profile.distribution.name().to_string(),
            s.to_string(),
            m.map(|v| v.to_string()).unwrap_or_default(),
            profile.directions().to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_correlation_csv<W: Write>(mut w: W, header: &[(String, String)], rows: &[CorrelationRow]) -> Result<()> {
    write_header_lines(&mut w, header)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["d", "seed", "correlation", "samples", "accuracy"])?;
    for r in rows {
        csv.write_record([
            r.d.to_string(),
            r.seed.to_string(),
            r.mean_correlation.to_string(),
            r.samples.to_string(),
            r.final_accuracy.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Quadratic;

    #[test]
    fn pearson_basic_cases() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b: Vec<f64> = a.iter().map(|x| -2.0 * x).collect();
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&a, &[1.0; 4]), Err(Error::ZeroVariance)));
        assert!(pearson(&a, &[1.0]).is_err());
    }

    #[test]
    fn one_dimensional_directions_are_collinear() {
        let rows = orthogonality_study(&[1], 20, 3).unwrap();
        assert_eq!(rows[0].mean_abs, 1.0);
        assert_eq!(rows[0].std_abs, 0.0);
    }

    #[test]
    fn quadratic_slice_is_parabola() {
        let q = Quadratic::bowl(30);
        let theta = vec![0.0; 30];
        let p = landscape_slice(&q, &theta, Distribution::Uniform, 5, &default_displacements(), 2).unwrap();
        for (s, m) in p.displacements.iter().zip(&p.mean_losses) {
            assert!((m.unwrap() - s * s).abs() < 1e-12);
        }
        assert_eq!(p.displacements[10], 0.0);
    }

    #[test]
    fn slice_requires_zero_displacement() {
        let q = Quadratic::bowl(3);
        assert!(landscape_slice(&q, &[0.0; 3], Distribution::Gaussian, 2, &[0.5], 0).is_err());
    }
}
