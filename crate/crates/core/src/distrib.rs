//! Simulated multi-worker RBD. Workers exchange only their coordinates and
//! regenerate each other's bases from the shared seed.
//!
//! Wire format of one [`WorkerMessage`], little-endian:
//!
//! | bytes | field |
//! |------:|-------|
//! | 4 | magic `0x52424431` |
//! | 4 | worker id |
//! | 8 | step |
//! | 4 | coordinate count `d_k` |
//! | 4 | reserved, always 0 |
//! | 4 | seed tag (low and high halves of the global seed xor-folded) |
//! | 8·d_k | coordinates, f64 |
//! | 4 | CRC32 of everything before it |

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, ParamVector};
use crate::objective::{NetworkObjective, Objective};
use crate::optim::{EpochRecord, LearningRate, Rule, TrainingRun};
use crate::prng::Distribution;
use crate::subspace::{self, BasisDescriptor, CompartmentScheme, Coordinates, SchemeKind};

pub const MESSAGE_MAGIC: u32 = 0x5242_4431;
pub const HEADER_BYTES: usize = 28;
pub const CHECKSUM_BYTES: usize = 4;

/// Encoded size of a message carrying `d_k` coordinates.
pub const fn message_len(d_k: usize) -> usize {
    HEADER_BYTES + 8 * d_k + CHECKSUM_BYTES
}

/// 32-bit fingerprint of the global seed carried in every message.
pub fn seed_tag(global_seed: u64) -> u32 {
    (global_seed as u32) ^ ((global_seed >> 32) as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerMessage {
    pub worker: u32,
    pub step: u64,
    pub seed_tag: u32,
    pub coords: Coordinates,
}

pub fn encode_message(msg: &WorkerMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(message_len(msg.coords.len()));
    out.extend_from_slice(&MESSAGE_MAGIC.to_le_bytes());
    out.extend_from_slice(&msg.worker.to_le_bytes());
    out.extend_from_slice(&msg.step.to_le_bytes());
    out.extend_from_slice(&(msg.coords.len() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&msg.seed_tag.to_le_bytes());
    for c in &msg.coords {
        out.extend_from_slice(&c.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_message(bytes: &[u8]) -> Result<WorkerMessage> {
    if bytes.len() < HEADER_BYTES + CHECKSUM_BYTES {
        return Err(Error::MessageTruncated(format!(
            "{} bytes, header and checksum need {}",
            bytes.len(),
            HEADER_BYTES + CHECKSUM_BYTES
        )));
    }
    let u32_at = |p: usize| u32::from_le_bytes(bytes[p..p + 4].try_into().unwrap());
    let magic = u32_at(0);
    if magic != MESSAGE_MAGIC {
        return Err(Error::MessageFormat(format!("bad magic {magic:#010x}")));
    }
    let d_k = u32_at(16) as usize;
    let total = message_len(d_k);
    if bytes.len() < total {
        return Err(Error::MessageTruncated(format!(
            "{} bytes, {d_k} coordinates need {total}",
            bytes.len()
        )));
    }
    if bytes.len() > total {
        return Err(Error::MessageFormat(format!("{} trailing bytes", bytes.len() - total)));
    }
    let body = total - CHECKSUM_BYTES;
    let stored = u32_at(body);
    let computed = crc32fast::hash(&bytes[..body]);
    if stored != computed {
        return Err(Error::MessageChecksum { computed, stored });
    }
    if u32_at(20) != 0 {
        return Err(Error::MessageFormat("reserved field is not zero".into()));
    }
    let coords = bytes[HEADER_BYTES..body]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(WorkerMessage {
        worker: u32_at(4),
        step: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
        seed_tag: u32_at(24),
        coords,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParallelMode {
    /// Each worker samples its own basis; the update sums all of them.
    BasisParallel,
    /// Workers share one basis and average coordinates from different data.
    DataParallel,
}

impl std::str::FromStr for ParallelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "basis_parallel" | "basis" => Ok(Self::BasisParallel),
            "data_parallel" | "data" => Ok(Self::DataParallel),
            other => Err(format!("unknown mode `{other}` (expected basis_parallel or data_parallel)")),
        }
    }
}

impl std::fmt::Display for ParallelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::BasisParallel => "basis_parallel",
            Self::DataParallel => "data_parallel",
        })
    }
}

/// Which mini-batch each worker sees during [`run_cluster`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    Shared,
    PerWorker,
}

impl std::str::FromStr for Batching {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Self::Shared),
            "per_worker" => Ok(Self::PerWorker),
            other => Err(format!("unknown batching `{other}` (expected shared or per_worker)")),
        }
    }
}

impl std::fmt::Display for Batching {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Shared => "shared",
            Self::PerWorker => "per_worker",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub workers: usize,
    pub mode: ParallelMode,
    pub batching: Batching,
    /// Directions per worker, d_k.
    pub per_worker_d: usize,
    pub global_seed: u64,
    pub learning_rate: LearningRate,
    pub scheme: SchemeKind,
    pub distribution: Distribution,
    pub normalize: bool,
    /// Reconstruct and checksum every replica. When off only worker 0's
    /// copy is materialized, which saves K−1 reconstructions per step.
    pub verify_replicas: bool,
}

impl ClusterConfig {
    pub fn new(workers: usize, per_worker_d: usize, exponent: i32) -> Self {
        Self {
            workers,
            mode: ParallelMode::BasisParallel,
            batching: Batching::Shared,
            per_worker_d,
            global_seed: 0,
            learning_rate: LearningRate::pow2(exponent),
            scheme: SchemeKind::Single,
            distribution: Distribution::Gaussian,
            normalize: true,
            verify_replicas: true,
        }
    }
}

/// A validated cluster bound to a parameter layout.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub config: ClusterConfig,
    scheme: Arc<CompartmentScheme>,
}

impl Cluster {
    pub fn new(config: ClusterConfig, segments: &[Range<usize>]) -> Result<Self> {
        if config.workers == 0 {
            return Err(Error::InvalidConfig("cluster needs at least one worker".into()));
        }
        if config.workers as u64 >= crate::prng::INDEX_LIMIT {
            return Err(Error::InvalidConfig(format!("{} workers exceed the stream key range", config.workers)));
        }
        let lr = config.learning_rate.value;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {lr}")));
        }
        let p = subspace::partition_segments(segments, config.scheme)?;
        let scheme = Arc::new(CompartmentScheme::new(p, config.per_worker_d)?);
        Ok(Self { config, scheme })
    }

    pub fn for_network(config: ClusterConfig, spec: &nn::NetworkSpec) -> Result<Self> {
        Self::new(config, &subspace::layer_segments(spec))
    }

    pub fn scheme(&self) -> &Arc<CompartmentScheme> {
        &self.scheme
    }

    pub fn workers(&self) -> usize {
        self.config.workers
    }

    /// Basis worker `k` uses at `step`. In data-parallel mode all workers
    /// share worker 0's basis.
    pub fn descriptor(&self, step: u64, worker: usize) -> BasisDescriptor {
        let owner = match self.config.mode {
            ParallelMode::BasisParallel => worker as u64,
            ParallelMode::DataParallel => 0,
        };
        BasisDescriptor {
            global_seed: self.config.global_seed,
            step,
            worker: owner,
            scheme: Arc::clone(&self.scheme),
            distribution: self.config.distribution,
            normalize: self.config.normalize,
        }
    }

    /// Bytes of one worker's message.
    pub fn message_bytes(&self) -> usize {
        message_len(self.scheme.d_total())
    }

    /// Update direction (before the learning rate) from every worker's
    /// coordinates, indexed by worker id. Summation order is fixed: worker
    /// 0..K, then compartments and directions ascending.
    pub fn combine(&self, step: u64, coords: &[Coordinates]) -> Result<ParamVector> {
        let mut u = vec![0.0; self.scheme.dim()];
        match self.config.mode {
            ParallelMode::BasisParallel => {
                for (k, c) in coords.iter().enumerate() {
                    subspace::reconstruct_into(c, &self.descriptor(step, k), &mut u)?;
                }
            }
            ParallelMode::DataParallel => {
                let mut avg = vec![0.0; self.scheme.d_total()];
                for c in coords {
                    for (a, x) in avg.iter_mut().zip(c) {
                        *a += x;
                    }
                }
                let k = coords.len() as f64;
                for a in &mut avg {
                    *a /= k;
                }
                subspace::reconstruct_into(&avg, &self.descriptor(step, 0), &mut u)?;
            }
        }
        Ok(ParamVector(u))
    }

    /// Decodes received messages and orders them by worker id. Every worker
    /// must be present exactly once.
    pub fn collect_coordinates(&self, step: u64, messages: &[Vec<u8>]) -> Result<Vec<Coordinates>> {
        let k = self.workers();
        let tag = seed_tag(self.config.global_seed);
        let mut slots: Vec<Option<Coordinates>> = vec![None; k];
        for bytes in messages {
            let m = decode_message(bytes)?;
            let w = m.worker as usize;
            if w >= k {
                return Err(Error::MessageFormat(format!("worker id {w} outside cluster of {k}")));
            }
            if m.step != step {
                return Err(Error::MessageFormat(format!("message for step {} during step {step}", m.step)));
            }
            if m.seed_tag != tag {
                return Err(Error::MessageFormat(format!("seed tag {:#010x} does not match", m.seed_tag)));
            }
            if m.coords.len() != self.scheme.d_total() {
                return Err(Error::MessageFormat(format!(
                    "worker {w} sent {} coordinates, expected {}",
                    m.coords.len(),
                    self.scheme.d_total()
                )));
            }
            if slots[w].replace(m.coords).is_some() {
                return Err(Error::MessageFormat(format!("duplicate message from worker {w}")));
            }
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(worker, s)| s.ok_or(Error::MissingMessage { step, worker }))
            .collect()
    }
}

/// Point-to-point message passing between simulated workers.
pub trait Transport {
    /// Sends `bytes` from worker `from` to every other worker.
    fn broadcast(&mut self, from: usize, bytes: &[u8]);

    /// Drains everything delivered to worker `to`.
    fn receive(&mut self, to: usize) -> Vec<Vec<u8>>;
}

/// Mailboxes in memory, with traffic counters.
#[derive(Debug, Clone, Default)]
pub struct InMemoryTransport {
    inboxes: Vec<Vec<Vec<u8>>>,
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

impl InMemoryTransport {
    pub fn new(workers: usize) -> Self {
        Self {
            inboxes: vec![Vec::new(); workers],
            messages_sent: 0,
            bytes_sent: 0,
        }
    }
}

impl Transport for InMemoryTransport {
    fn broadcast(&mut self, from: usize, bytes: &[u8]) {
        for (to, inbox) in self.inboxes.iter_mut().enumerate() {
            if to != from {
                inbox.push(bytes.to_vec());
                self.messages_sent += 1;
                self.bytes_sent += bytes.len() as u64;
            }
        }
    }

    fn receive(&mut self, to: usize) -> Vec<Vec<u8>> {
        std::mem::take(&mut self.inboxes[to])
    }
}

/// Traffic and outcome of one parallel step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTraffic {
    pub step: u64,
    pub messages: u64,
    pub bytes: u64,
    /// Encoded size of each worker's message.
    pub message_bytes: usize,
    /// CRC32 of worker 0's parameters after the step.
    pub theta_checksum: u32,
    /// Mean pre-step loss over the workers' objectives.
    pub mean_loss: f64,
}

pub fn theta_checksum(theta: &[f64]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for v in theta {
        h.update(&v.to_le_bytes());
    }
    h.finalize()
}

/// One synchronous step of the cluster. `replicas[k]` is worker k's copy of
/// θ and `objectives[k]` its loss on its own mini-batch. Each worker computes
/// its coordinates, broadcasts them, and applies the reconstructed update to
/// its own replica after receiving from every other worker. Nothing is
/// applied unless every message arrives and decodes.
///
/// With `verify_replicas` off only `replicas[0]` is updated.
pub fn parallel_rbd_step(
    cluster: &Cluster,
    replicas: &mut [ParamVector],
    step: u64,
    objectives: &[&dyn Objective],
    transport: &mut dyn Transport,
) -> Result<(StepTraffic, Vec<Vec<u8>>)> {
    let k = cluster.workers();
    if replicas.len() != k || objectives.len() != k {
        return Err(Error::Shape(format!(
            "{} replicas and {} objectives for {k} workers",
            replicas.len(),
            objectives.len()
        )));
    }
    let tag = seed_tag(cluster.config.global_seed);
    let mut local = Vec::with_capacity(k);
    let mut sent = Vec::with_capacity(k);
    let mut loss_sum = 0.0;
    for w in 0..k {
        let (eval, g) = objectives[w].evaluate_with_gradient(&replicas[w])?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { step });
        }
        loss_sum += eval.loss;
        let coords = subspace::project_gradient(&g, &cluster.descriptor(step, w))?;
        let bytes = encode_message(&WorkerMessage {
            worker: w as u32,
            step,
            seed_tag: tag,
            coords: coords.clone(),
        });
        transport.broadcast(w, &bytes);
        sent.push(bytes);
        local.push(coords);
    }

    let lr = cluster.config.learning_rate.value;
    let active = if cluster.config.verify_replicas { k } else { 1 };
    // Gather and validate everything before touching any replica.
    let mut per_worker = Vec::with_capacity(active);
    for w in 0..k {
        let mut inbox = transport.receive(w);
        if w >= active {
            continue;
        }
        inbox.push(sent[w].clone());
        let mut coords = cluster.collect_coordinates(step, &inbox)?;
        // The worker's own coordinates never leave it; use the local copy.
        coords[w] = local[w].clone();
        per_worker.push(coords);
    }
    let mut updates = Vec::with_capacity(active);
    for coords in &per_worker {
        updates.push(cluster.combine(step, coords)?);
    }
    for (theta, u) in replicas.iter_mut().zip(&updates) {
        for (t, x) in theta.iter_mut().zip(u.iter()) {
            *t -= lr * x;
        }
    }
    let reference = theta_checksum(&replicas[0]);
    for (w, theta) in replicas.iter().enumerate().take(active).skip(1) {
        if theta_checksum(theta) != reference || **theta != *replicas[0] {
            return Err(Error::ReplicaDivergence { step, worker: w });
        }
    }
    let messages = (k * (k - 1)) as u64;
    Ok((
        StepTraffic {
            step,
            messages,
            bytes: messages * cluster.message_bytes() as u64,
            message_bytes: cluster.message_bytes(),
            theta_checksum: reference,
            mean_loss: loss_sum / k as f64,
        },
        sent,
    ))
}

/// Recomputes `θ_{t+1}` from `θ_t` and the messages broadcast at step `t`.
pub fn replay_step(cluster: &Cluster, theta: &mut ParamVector, step: u64, messages: &[Vec<u8>]) -> Result<()> {
    let coords = cluster.collect_coordinates(step, messages)?;
    let u = cluster.combine(step, &coords)?;
    let lr = cluster.config.learning_rate.value;
    for (t, x) in theta.iter_mut().zip(u.iter()) {
        *t -= lr * x;
    }
    Ok(())
}

/// Per-step traffic of a cluster run, optionally with every broadcast
/// message (one copy per sender, in worker order).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub workers: usize,
    pub dim: usize,
    pub steps: Vec<StepTraffic>,
    #[serde(skip)]
    pub messages: Vec<Vec<Vec<u8>>>,
}

impl Transcript {
    pub fn total_bytes(&self) -> u64 {
        self.steps.iter().map(|s| s.bytes).sum()
    }

    /// Size of one dense f64 gradient, the per-worker payload a plain
    /// data-parallel SGD exchange would need.
    pub fn dense_gradient_bytes(&self) -> u64 {
        8 * self.dim as u64
    }

    /// Largest single-worker payload seen in any step.
    pub fn max_message_bytes(&self) -> usize {
        self.steps.iter().map(|s| s.message_bytes).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub records: Vec<EpochRecord>,
    pub transcript: Transcript,
    pub theta: ParamVector,
}

/// Trains a network with the cluster. With shared batching every worker
/// sees the same mini-batch each step; with per-worker batching a step
/// consumes K consecutive batches of the epoch order and an incomplete
/// final group is dropped.
pub fn run_cluster(
    cluster: &Cluster,
    run: &TrainingRun<'_>,
    theta0: ParamVector,
    epochs: u64,
    keep_messages: bool,
) -> Result<ClusterRun> {
    let k = cluster.workers();
    let mut replicas = vec![theta0; if cluster.config.verify_replicas { k } else { 1 }];
    let mut transport = InMemoryTransport::new(k);
    let mut transcript = Transcript {
        workers: k,
        dim: run.spec.num_params(),
        ..Default::default()
    };
    let mut records = Vec::new();
    let mut step = 0u64;
    for epoch in 0..epochs {
        let order = run.plan.epoch_order(run.train.len(), epoch);
        let chunks: Vec<&[usize]> = order.chunks(run.plan.batch_size.max(1)).collect();
        let per_step = match cluster.config.batching {
            Batching::Shared => 1,
            Batching::PerWorker => k,
        };
        let limit = run.max_steps_per_epoch.unwrap_or(usize::MAX);
        let mut loss_sum = 0.0;
        let mut n = 0usize;
        for group in chunks.chunks_exact(per_step).take(limit) {
            let batches: Vec<nn::Batch> = group.iter().map(|idx| run.train.gather(idx)).collect();
            let objectives: Vec<NetworkObjective<'_>> = (0..k)
                .map(|w| NetworkObjective::new(run.spec, &batches[w % batches.len()]))
                .collect();
            let dyn_objs: Vec<&dyn Objective> = objectives.iter().map(|o| o as &dyn Objective).collect();
            let traffic = if cluster.config.verify_replicas {
                parallel_rbd_step(cluster, &mut replicas, step, &dyn_objs, &mut transport)
            } else {
                step_unverified(cluster, &mut replicas[0], step, &dyn_objs, &mut transport)
            }
            .map_err(|e| Error::AtStep {
                step,
                source: Box::new(e),
            })?;
            loss_sum += traffic.0.mean_loss;
            n += 1;
            transcript.steps.push(traffic.0);
            if keep_messages {
                transcript.messages.push(traffic.1);
            }
            step += 1;
        }
        let (val_loss, val_acc) = match run.val {
            Some(v) => {
                let e = nn::evaluate(run.spec, &replicas[0], v)?;
                (e.loss, e.accuracy)
            }
            None => (f64::NAN, f64::NAN),
        };
        records.push(EpochRecord {
            epoch: epoch + 1,
            rule: Rule::Rbd,
            lr_exponent: cluster.config.learning_rate.exponent,
            train_loss: loss_sum / n.max(1) as f64,
            train_acc: f64::NAN,
            val_loss,
            val_acc,
        });
    }
    let theta = replicas.swap_remove(0);
    Ok(ClusterRun {
        records,
        transcript,
        theta,
    })
}

fn step_unverified(
    cluster: &Cluster,
    theta: &mut ParamVector,
    step: u64,
    objectives: &[&dyn Objective],
    transport: &mut dyn Transport,
) -> Result<(StepTraffic, Vec<Vec<u8>>)> {
    // All workers hold the same θ, so one copy serves every gradient.
    let mut replicas = vec![theta.clone(); cluster.workers()];
    let mut quiet = cluster.clone();
    quiet.config.verify_replicas = false;
    let out = parallel_rbd_step(&quiet, &mut replicas, step, objectives, transport)?;
    *theta = replicas.swap_remove(0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Quadratic;
    use crate::subspace::{Basis, ConcatBasis};

    #[test]
    fn message_sizes() {
        assert_eq!(message_len(0), 32);
        assert_eq!(message_len(250), 2032);
        let m = WorkerMessage {
            worker: 3,
            step: 1 << 40,
            seed_tag: 7,
            coords: vec![1.5, -0.0, f64::MIN_POSITIVE],
        };
        let b = encode_message(&m);
        assert_eq!(b.len(), message_len(3));
        assert_eq!(decode_message(&b).unwrap(), m);
    }

    #[test]
    fn corrupted_and_truncated_messages_fail() {
        let m = WorkerMessage {
            worker: 0,
            step: 2,
            seed_tag: 0,
            coords: vec![1.0; 4],
        };
        let mut b = encode_message(&m);
        assert!(matches!(decode_message(&b[..b.len() - 1]), Err(Error::MessageTruncated(_))));
        b[30] ^= 1;
        assert!(matches!(decode_message(&b), Err(Error::MessageChecksum { .. })));
    }

    fn quad_cluster(k: usize, d: usize, mode: ParallelMode) -> Cluster {
        let mut c = ClusterConfig::new(k, d, -3);
        c.mode = mode;
        c.global_seed = 11;
        Cluster::new(c, &[0..40]).unwrap()
    }

    #[test]
    fn basis_parallel_matches_concatenated_basis() {
        let q = Quadratic::new((0..40).map(|i| 1.0 + i as f64 / 10.0).collect(), vec![0.3; 40]).unwrap();
        let cluster = quad_cluster(3, 5, ParallelMode::BasisParallel);
        let theta0 = ParamVector((0..40).map(|i| (i as f64).sin()).collect());
        let mut replicas = vec![theta0.clone(); 3];
        let objs: Vec<&dyn Objective> = vec![&q, &q, &q];
        let mut t = InMemoryTransport::new(3);
        parallel_rbd_step(&cluster, &mut replicas, 0, &objs, &mut t).unwrap();
        assert_eq!(t.messages_sent, 6);

        let concat = ConcatBasis {
            parts: (0..3).map(|w| cluster.descriptor(0, w)).collect(),
        };
        let (_, g) = q.evaluate_with_gradient(&theta0).unwrap();
        let u = concat.reconstruct(&concat.project(&g).unwrap()).unwrap();
        let expect: Vec<f64> = theta0.iter().zip(u.iter()).map(|(t, x)| t - 0.125 * x).collect();
        assert_eq!(&replicas[0][..], &expect[..]);
    }

    #[test]
    fn dropped_message_applies_nothing() {
        struct Lossy(InMemoryTransport);
        impl Transport for Lossy {
            fn broadcast(&mut self, from: usize, bytes: &[u8]) {
                if from != 1 {
                    self.0.broadcast(from, bytes);
                }
            }
            fn receive(&mut self, to: usize) -> Vec<Vec<u8>> {
                self.0.receive(to)
            }
        }
        let q = Quadratic::bowl(40);
        let cluster = quad_cluster(2, 3, ParallelMode::BasisParallel);
        let theta0 = ParamVector(vec![1.0; 40]);
        let mut replicas = vec![theta0.clone(); 2];
        let objs: Vec<&dyn Objective> = vec![&q, &q];
        let r = parallel_rbd_step(&cluster, &mut replicas, 0, &objs, &mut Lossy(InMemoryTransport::new(2)));
        assert!(matches!(r, Err(Error::MissingMessage { step: 0, worker: 1 })));
        assert_eq!(replicas[0], theta0);
        assert_eq!(replicas[1], theta0);
    }

    #[test]
    fn data_parallel_pair_equals_single_worker() {
        let q = Quadratic::bowl(40);
        let theta0 = ParamVector((0..40).map(|i| i as f64 / 7.0).collect());
        let one = quad_cluster(1, 6, ParallelMode::DataParallel);
        let two = quad_cluster(2, 6, ParallelMode::DataParallel);
        let mut a = vec![theta0.clone()];
        let mut b = vec![theta0.clone(); 2];
        parallel_rbd_step(&one, &mut a, 4, &[&q], &mut InMemoryTransport::new(1)).unwrap();
        parallel_rbd_step(&two, &mut b, 4, &[&q, &q], &mut InMemoryTransport::new(2)).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn replay_reproduces_step() {
        let q = Quadratic::bowl(40);
        let cluster = quad_cluster(4, 2, ParallelMode::BasisParallel);
        let theta0 = ParamVector(vec![0.5; 40]);
        let mut replicas = vec![theta0.clone(); 4];
        let objs: Vec<&dyn Objective> = vec![&q; 4];
        let (_, sent) = parallel_rbd_step(&cluster, &mut replicas, 9, &objs, &mut InMemoryTransport::new(4)).unwrap();
        let mut replayed = theta0;
        replay_step(&cluster, &mut replayed, 9, &sent).unwrap();
        assert_eq!(replayed, replicas[0]);
    }
}
