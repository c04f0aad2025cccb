//! Training rules: plain SGD, random bases descent (RBD), fixed projection
//! descent (FPD) and the evolution-strategies estimator (NES), plus hybrid
//! schedules and the power-of-two learning-rate sweep.
//!
//! No rule uses momentum or a learning-rate schedule.

use std::io::Write;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{self, BatchPlan, Dataset};
use crate::error::{Error, Result};
use crate::nn::{self, NetworkSpec, ParamVector};
use crate::objective::{Evaluated, NetworkObjective, Objective};
use crate::prng::{self, Distribution, Stream};
use crate::subspace::{
    self, Basis, BasisDescriptor, CompartmentScheme, Coordinates, SchemeKind, StreamedBasis,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Sgd,
    Rbd,
    Fpd,
    Nes,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::Sgd, Rule::Rbd, Rule::Fpd, Rule::Nes];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Sgd => "sgd",
            Rule::Rbd => "rbd",
            Rule::Fpd => "fpd",
            Rule::Nes => "nes",
        }
    }

    /// Whether the rule works in a random subspace of dimension d.
    pub fn uses_subspace(self) -> bool {
        !matches!(self, Rule::Sgd)
    }
}

impl std::str::FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(Rule::Sgd),
            "rbd" => Ok(Rule::Rbd),
            "fpd" => Ok(Rule::Fpd),
            "nes" | "es" => Ok(Rule::Nes),
            other => Err(format!("unknown rule `{other}` (expected sgd, rbd, fpd or nes)")),
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Learning rate, remembered as a power-of-two exponent when it is one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRate {
    pub exponent: Option<i32>,
    pub value: f64,
}

impl LearningRate {
    pub fn pow2(exponent: i32) -> Self {
        Self {
            exponent: Some(exponent),
            value: 2f64.powi(exponent),
        }
    }

    pub fn raw(value: f64) -> Self {
        Self {
            exponent: None,
            value,
        }
    }
}

/// Everything a rule needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub rule: Rule,
    pub learning_rate: LearningRate,
    /// Total number of random directions d.
    pub d_total: usize,
    pub scheme: SchemeKind,
    pub distribution: Distribution,
    pub normalize: bool,
    /// NES perturbation scale.
    pub sigma: f64,
    /// NES: evaluate mirrored pairs `±φ` instead of independent draws.
    pub antithetic: bool,
    pub batch_size: usize,
    pub basis_seed: u64,
}

impl OptimizerConfig {
    pub const DEFAULT_SIGMA: f64 = 1e-2;

    pub fn new(rule: Rule, exponent: i32) -> Self {
        Self {
            rule,
            learning_rate: LearningRate::pow2(exponent),
            d_total: 250,
            scheme: SchemeKind::Single,
            distribution: Distribution::Gaussian,
            normalize: true,
            sigma: Self::DEFAULT_SIGMA,
            antithetic: false,
            batch_size: BatchPlan::DEFAULT_BATCH_SIZE,
            basis_seed: 0,
        }
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d_total = d;
        self
    }

    pub fn with_scheme(mut self, scheme: SchemeKind) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_distribution(mut self, distribution: Distribution) -> Self {
        self.distribution = distribution;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.basis_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate.value;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {lr}")));
        }
        if self.rule == Rule::Nes && !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.rule.uses_subspace() && self.d_total == 0 {
            return Err(Error::InvalidConfig("d must be at least 1".into()));
        }
        Ok(())
    }
}

/// FPD's frozen subspace: `θ = anchor + Σ c_i φ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpdState {
    pub anchor: ParamVector,
    pub coords: Coordinates,
    pub descriptor: BasisDescriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub theta: ParamVector,
    pub step: u64,
    pub epoch: u64,
    pub fpd: Option<FpdState>,
}

impl TrainerState {
    pub fn new(theta: ParamVector) -> Self {
        Self {
            theta,
            step: 0,
            epoch: 0,
            fpd: None,
        }
    }
}

/// What a single step saw and did.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Loss at the pre-step parameters.
    pub eval: Evaluated,
    pub gradient: Option<ParamVector>,
    /// Direction applied as `θ' = θ − η·update` (for FPD, the change in
    /// the subspace reconstruction divided by η).
    pub update: Option<ParamVector>,
}

fn check_finite(g: &[f64], step: u64) -> Result<()> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { step });
    }
    Ok(())
}

/// `θ' = θ − η g`.
pub fn sgd_step(state: &mut TrainerState, objective: &dyn Objective, lr: f64) -> Result<StepReport> {
    let (eval, g) = objective.evaluate_with_gradient(&state.theta)?;
    check_finite(&g, state.step)?;
    for (t, gi) in state.theta.iter_mut().zip(g.iter()) {
        *t -= lr * gi;
    }
    state.step += 1;
    state.fpd = None;
    Ok(StepReport {
        eval,
        gradient: Some(g),
        update: None,
    })
}

/// One RBD step in an arbitrary basis: coordinates by projecting the
/// gradient, then `θ' = θ − η Σ c_i φ_i`.
pub fn rbd_step_with_basis(
    state: &mut TrainerState,
    objective: &dyn Objective,
    lr: f64,
    basis: &dyn Basis,
) -> Result<StepReport> {
    let (eval, g) = objective.evaluate_with_gradient(&state.theta)?;
    check_finite(&g, state.step)?;
    let (_, update) = basis.project_reconstruct(&g)?;
    for (t, u) in state.theta.iter_mut().zip(update.iter()) {
        *t -= lr * u;
    }
    state.step += 1;
    state.fpd = None;
    Ok(StepReport {
        eval,
        gradient: Some(g),
        update: Some(update),
    })
}

/// Descriptor of the fresh basis RBD draws at `step`.
pub fn step_descriptor(
    config: &OptimizerConfig,
    scheme: &Arc<CompartmentScheme>,
    step: u64,
    worker: u64,
) -> BasisDescriptor {
    BasisDescriptor {
        global_seed: config.basis_seed,
        step,
        worker,
        scheme: Arc::clone(scheme),
        distribution: config.distribution,
        normalize: config.normalize,
    }
}

/// RBD with a basis drawn from the step counter.
pub fn rbd_step(
    state: &mut TrainerState,
    objective: &dyn Objective,
    config: &OptimizerConfig,
    scheme: &Arc<CompartmentScheme>,
) -> Result<StepReport> {
    let basis = StreamedBasis::new(step_descriptor(config, scheme, state.step, 0));
    rbd_step_with_basis(state, objective, config.learning_rate.value, &basis)
}

/// FPD: descend the coordinates of a subspace frozen at the first FPD step.
/// The frozen basis is regenerated from its step-0 descriptor every step.
pub fn fpd_step(
    state: &mut TrainerState,
    objective: &dyn Objective,
    config: &OptimizerConfig,
    scheme: &Arc<CompartmentScheme>,
) -> Result<StepReport> {
    let lr = config.learning_rate.value;
    let mut fpd = match state.fpd.take() {
        Some(f) => f,
        None => FpdState {
            anchor: state.theta.clone(),
            coords: vec![0.0; scheme.d_total()],
            descriptor: step_descriptor(config, scheme, 0, 0),
        },
    };
    let (eval, g) = objective.evaluate_with_gradient(&state.theta)?;
    check_finite(&g, state.step)?;
    // c' = c − η·project(g) and θ₀-offset Σ c'_i φ_i in one pass.
    let mut offset = vec![0.0; state.theta.len()];
    let coords = &mut fpd.coords;
    subspace::project_accumulate(&g, &fpd.descriptor, &mut offset, |i, dc| {
        coords[i] -= lr * dc;
        coords[i]
    })?;
    let mut update = ParamVector::zeros(state.theta.len());
    for (((t, a), o), u) in state
        .theta
        .iter_mut()
        .zip(fpd.anchor.iter())
        .zip(offset.iter())
        .zip(update.iter_mut())
    {
        let next = a + o;
        *u = (*t - next) / lr;
        *t = next;
    }
    state.step += 1;
    state.fpd = Some(fpd);
    Ok(StepReport {
        eval,
        gradient: Some(g),
        update: Some(update),
    })
}

/// Evolution-strategies gradient estimate
/// `g = Σ_n L(θ + σ φ_n) / (σ d) · φ_n` with raw standard-normal `φ_n`.
///
/// Direction `n` comes from stream `(seed, step, worker, 0, n)`. With
/// `antithetic`, sample `2m+1` reuses the draw of sample `2m` negated.
#[allow(clippy::too_many_arguments)]
pub fn es_gradient(
    objective: &dyn Objective,
    theta: &[f64],
    sigma: f64,
    d: usize,
    seed: u64,
    step: u64,
    worker: u64,
    antithetic: bool,
) -> Result<ParamVector> {
    let dim = theta.len();
    let mut g = vec![0.0; dim];
    let mut phi = vec![0.0; dim];
    let mut perturbed = vec![0.0; dim];
    let denom = sigma * d as f64;
    for n in 0..d {
        let (draw, sign) = if antithetic { (n / 2, if n % 2 == 0 { 1.0 } else { -1.0 }) } else { (n, 1.0) };
        if !antithetic || n % 2 == 0 {
            let key = prng::derive_stream_key(seed, step, worker, 0, draw as u64);
            Stream::new(key)?.fill(0, &mut phi, Distribution::Gaussian)?;
        }
        for ((p, t), f) in perturbed.iter_mut().zip(theta).zip(&phi) {
            *p = t + sigma * (sign * f);
        }
        let loss = match objective.loss(&perturbed) {
            Ok(l) if l.is_finite() => l,
            Ok(_) | Err(Error::NonFinite { .. }) | Err(Error::NonFiniteLoss { .. }) => {
                return Err(Error::NonFiniteLoss { index: n })
            }
            Err(e) => return Err(e),
        };
        let w = loss / denom;
        for (gi, f) in g.iter_mut().zip(&phi) {
            *gi += w * (sign * f);
        }
    }
    Ok(ParamVector(g))
}

/// NES step: all perturbations are evaluated on the same objective (batch).
pub fn nes_step(state: &mut TrainerState, objective: &dyn Objective, config: &OptimizerConfig) -> Result<StepReport> {
    let lr = config.learning_rate.value;
    let eval = objective.evaluate(&state.theta)?;
    let g = es_gradient(
        objective,
        &state.theta,
        config.sigma,
        config.d_total,
        config.basis_seed,
        state.step,
        0,
        config.antithetic,
    )?;
    check_finite(&g, state.step)?;
    for (t, gi) in state.theta.iter_mut().zip(g.iter()) {
        *t -= lr * gi;
    }
    state.step += 1;
    state.fpd = None;
    Ok(StepReport {
        eval,
        gradient: None,
        update: Some(g),
    })
}

/// A configured rule bound to a parameter layout.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    scheme: Option<Arc<CompartmentScheme>>,
}

impl Optimizer {
    /// `segments` are the layer spans of the parameter vector (one segment
    /// covering everything for objectives without layers).
    pub fn new(config: OptimizerConfig, segments: &[Range<usize>]) -> Result<Self> {
        config.validate()?;
        let scheme = match config.rule {
            Rule::Rbd | Rule::Fpd => {
                let p = subspace::partition_segments(segments, config.scheme)?;
                Some(Arc::new(CompartmentScheme::new(p, config.d_total)?))
            }
            Rule::Sgd | Rule::Nes => None,
        };
        Ok(Self { config, scheme })
    }

    pub fn for_network(config: OptimizerConfig, spec: &NetworkSpec) -> Result<Self> {
        Self::new(config, &subspace::layer_segments(spec))
    }

    pub fn for_dim(config: OptimizerConfig, dim: usize) -> Result<Self> {
        Self::new(config, &[0..dim])
    }

    pub fn rule(&self) -> Rule {
        self.config.rule
    }

    pub fn scheme(&self) -> Option<&Arc<CompartmentScheme>> {
        self.scheme.as_ref()
    }

    /// Number of trainable coordinates per step (D for SGD).
    pub fn trainable_dim(&self, dim: usize) -> usize {
        match self.config.rule {
            Rule::Sgd => dim,
            _ => self.scheme.as_ref().map_or(self.config.d_total, |s| s.d_total()),
        }
    }

    pub fn step(&self, state: &mut TrainerState, objective: &dyn Objective) -> Result<StepReport> {
        let step = state.step;
        let result = match self.config.rule {
            Rule::Sgd => sgd_step(state, objective, self.config.learning_rate.value),
            Rule::Rbd => rbd_step(state, objective, &self.config, self.scheme.as_ref().unwrap()),
            Rule::Fpd => fpd_step(state, objective, &self.config, self.scheme.as_ref().unwrap()),
            Rule::Nes => nes_step(state, objective, &self.config),
        };
        result.map_err(|e| match e {
            Error::AtStep { .. } => e,
            other => Error::AtStep {
                step,
                source: Box::new(other),
            },
        })
    }
}

/// One row of a training trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub rule: Rule,
    pub lr_exponent: Option<i32>,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Network, data and batching for epoch-based training.
#[derive(Debug, Clone, Copy)]
pub struct TrainingRun<'a> {
    pub spec: &'a NetworkSpec,
    pub train: &'a Dataset,
    pub val: Option<&'a Dataset>,
    pub plan: BatchPlan,
    /// Truncate every epoch after this many steps (smoke runs).
    pub max_steps_per_epoch: Option<usize>,
}

/// Per-step hook for diagnostics.
pub struct StepObservation<'r> {
    pub step: u64,
    pub epoch: u64,
    pub theta: &'r [f64],
    pub report: &'r StepReport,
}

/// Runs `epochs` epochs; train metrics are means over the epoch's batches
/// (loss and accuracy before each update), validation metrics are measured
/// at the end of each epoch.
pub fn train_epochs(
    run: &TrainingRun<'_>,
    optimizer: &Optimizer,
    state: &mut TrainerState,
    epochs: u64,
    observer: &mut dyn FnMut(&StepObservation<'_>),
) -> Result<Vec<EpochRecord>> {
    let mut records = Vec::with_capacity(epochs as usize);
    for _ in 0..epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        // Batches are gathered one at a time to avoid copying the epoch.
        let order = run.plan.epoch_order(run.train.len(), state.epoch);
        let limit = run.max_steps_per_epoch.unwrap_or(usize::MAX);
        for idx in order.chunks(run.plan.batch_size.max(1)).take(limit) {
            let batch = run.train.gather(idx);
            let objective = NetworkObjective::new(run.spec, &batch);
            let report = optimizer.step(state, &objective)?;
            loss_sum += report.eval.loss * batch.len() as f64;
            correct += report.eval.correct.unwrap_or(0);
            seen += batch.len();
            observer(&StepObservation {
                step: state.step - 1,
                epoch: state.epoch,
                theta: &state.theta,
                report: &report,
            });
        }
        state.epoch += 1;
        let (val_loss, val_acc) = match run.val {
            Some(v) => {
                let e = nn::evaluate(run.spec, &state.theta, v)?;
                (e.loss, e.accuracy)
            }
            None => (f64::NAN, f64::NAN),
        };
        records.push(EpochRecord {
            epoch: state.epoch,
            rule: optimizer.rule(),
            lr_exponent: optimizer.config.learning_rate.exponent,
            train_loss: loss_sum / seen.max(1) as f64,
            train_acc: correct as f64 / seen.max(1) as f64,
            val_loss,
            val_acc,
        });
    }
    Ok(records)
}

/// Rule A for `switch_epoch` epochs, then rule B on the same parameters until
/// `total_epochs`. Each rule keeps its own learning rate across the switch.
pub fn hybrid_train(
    first: &Optimizer,
    second: &Optimizer,
    switch_epoch: u64,
    total_epochs: u64,
    run: &TrainingRun<'_>,
    theta0: ParamVector,
) -> Result<Vec<EpochRecord>> {
    if switch_epoch > total_epochs {
        return Err(Error::InvalidConfig(format!(
            "switch epoch {switch_epoch} beyond total {total_epochs}"
        )));
    }
    let mut state = TrainerState::new(theta0);
    let mut records = train_epochs(run, first, &mut state, switch_epoch, &mut |_| {})?;
    records.extend(train_epochs(run, second, &mut state, total_epochs - switch_epoch, &mut |_| {})?);
    Ok(records)
}

pub const SWEEP_MAX_EXPONENT: i32 = 7;
pub const SWEEP_MIN_EXPONENT: i32 = -19;

/// Exponents from `max` down to `min`, inclusive.
pub fn exponent_grid(max: i32, min: i32) -> Vec<i32> {
    (min..=max).rev().collect()
}

/// Default grid, 2^7 down to 2^-19.
pub fn default_exponent_grid() -> Vec<i32> {
    exponent_grid(SWEEP_MAX_EXPONENT, SWEEP_MIN_EXPONENT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best_exponent: i32,
    /// Held-out loss per exponent; infinite where the candidate diverged.
    pub losses: Vec<(i32, f64)>,
}

/// Selects the exponent with the lowest held-out loss returned by `trial`.
/// Failed or non-finite trials count as diverged; ties keep the earlier
/// (larger) exponent.
pub fn lr_sweep<F>(exponents: &[i32], mut trial: F) -> Result<SweepResult>
where
    F: FnMut(i32) -> Result<f64>,
{
    if exponents.is_empty() {
        return Err(Error::InvalidConfig("empty exponent range".into()));
    }
    let mut losses = Vec::with_capacity(exponents.len());
    let mut best: Option<(i32, f64)> = None;
    for &e in exponents {
        let loss = match trial(e) {
            Ok(l) if l.is_finite() => l,
            _ => f64::INFINITY,
        };
        losses.push((e, loss));
        if loss.is_finite() && best.map_or(true, |(_, b)| loss < b) {
            best = Some((e, loss));
        }
    }
    match best {
        Some((best_exponent, _)) => Ok(SweepResult { best_exponent, losses }),
        None => Err(Error::SweepDiverged(losses)),
    }
}

/// Sweep on a network: train each candidate on a 75% split of `train` and
/// score the mean loss on the remaining 25%.
pub fn sweep_network(
    template: &OptimizerConfig,
    spec: &NetworkSpec,
    train: &Dataset,
    epochs: u64,
    split_seed: u64,
    init_seed: u64,
    plan: BatchPlan,
    max_steps_per_epoch: Option<usize>,
    exponents: &[i32],
) -> Result<SweepResult> {
    let (fit, held_out) = data::split(train, 0.75, split_seed)?;
    lr_sweep(exponents, |e| {
        let mut cfg = template.clone();
        cfg.learning_rate = LearningRate::pow2(e);
        let opt = Optimizer::for_network(cfg, spec)?;
        let run = TrainingRun {
            spec,
            train: &fit,
            val: None,
            plan,
            max_steps_per_epoch,
        };
        let mut state = TrainerState::new(nn::init_params(spec, init_seed));
        train_epochs(&run, &opt, &mut state, epochs, &mut |_| {})?;
        Ok(nn::evaluate(spec, &state.theta, &held_out)?.loss)
    })
}

pub const TRAJECTORY_HEADER: [&str; 7] = [
    "epoch",
    "rule",
    "lr_exponent",
    "train_loss",
    "train_acc",
    "val_loss",
    "val_acc",
];

/// Writes `# key=value` header lines followed by the trajectory CSV.
pub fn write_trajectory_csv<W: Write>(mut w: W, header: &[(String, String)], records: &[EpochRecord]) -> Result<()> {
    crate::output::write_header_lines(&mut w, header)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(TRAJECTORY_HEADER)?;
    for r in records {
        csv.write_record([
            r.epoch.to_string(),
            r.rule.name().to_string(),
            r.lr_exponent.map(|e| e.to_string()).unwrap_or_default(),
            r.train_loss.to_string(),
            r.train_acc.to_string(),
            r.val_loss.to_string(),
            r.val_acc.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
