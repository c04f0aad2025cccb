//! Config-driven runs: single training runs, experiment suites and the
//! learning-rate sweep. Every output file starts with `# key=value` lines
//! holding the resolved configuration and seeds.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis;
use crate::config::{scheme_string, DataSource, ExperimentConfig, Seeds};
use crate::data::{self, BatchPlan, Dataset, IdxSplit, DATA_DIR_ENV};
use crate::distrib::{self, Cluster, ClusterConfig, InMemoryTransport, ParallelMode};
use crate::error::{Error, Result};
use crate::nn::{self, ParamVector};
use crate::objective::{NetworkObjective, Objective};
use crate::optim::{self, EpochRecord, Optimizer, OptimizerConfig, Rule, TrainerState, TrainingRun};
use crate::output::write_header_lines;
use crate::prng::Distribution;
use crate::subspace::{ConcatBasis, SchemeKind};

pub const SUITES: [&str; 8] = [
    "table1",
    "table2",
    "hybrid",
    "compartments",
    "distributed",
    "ortho",
    "landscape",
    "dimscan",
];

/// Training and validation sets named by the config.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let (train, val) = match &cfg.source {
        DataSource::Mnist { dir } => {
            let dir = match dir {
                Some(d) => d.clone(),
                None => std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).ok_or_else(|| {
                    Error::Data(format!("no MNIST directory: set data.dir or {DATA_DIR_ENV}"))
                })?,
            };
            (
                data::load_mnist_dir(&dir, IdxSplit::Train)?,
                data::load_mnist_dir(&dir, IdxSplit::Test)?,
            )
        }
        DataSource::Synthetic {
            classes,
            dim,
            train,
            val,
            separation,
        } => {
            let all = data::synthetic_blobs(*classes, *dim, train + val, *separation, cfg.seeds.data)?;
            let fraction = *train as f64 / (train + val) as f64;
            data::split(&all, fraction, cfg.seeds.split)?
        }
    };
    let train = match cfg.train_limit {
        Some(n) => train.take(n),
        None => train,
    };
    let val = match cfg.val_limit {
        Some(n) => val.take(n),
        None => val,
    };
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let spec = &cfg.network;
    if spec.input_dim() != train.input_dim || spec.num_classes() < train.num_classes {
        return Err(Error::InvalidConfig(format!(
            "`network.widths`: network {} does not fit data with {} inputs and {} classes",
            spec, train.input_dim, train.num_classes
        )));
    }
    Ok((train, val))
}

/// Seeds of repetition `rep` of a suite run.
pub fn repetition_seeds(seeds: &Seeds, rep: usize) -> Seeds {
    let r = rep as u64;
    Seeds {
        data: seeds.data,
        init: seeds.init + r,
        basis: seeds.basis + r,
        shuffle: seeds.shuffle + r,
        split: seeds.split,
    }
}

fn plan(cfg: &ExperimentConfig, seeds: &Seeds) -> BatchPlan {
    BatchPlan::new(cfg.optimizer.batch_size, seeds.shuffle)
}

/// Trains one configuration from the seeded initialization.
pub fn train_run(
    cfg: &ExperimentConfig,
    optimizer: &OptimizerConfig,
    seeds: &Seeds,
    train: &Dataset,
    val: &Dataset,
    epochs: u64,
) -> Result<(Vec<EpochRecord>, ParamVector)> {
    let mut oc = optimizer.clone();
    oc.basis_seed = seeds.basis;
    let opt = Optimizer::for_network(oc, &cfg.network)?;
    let run = TrainingRun {
        spec: &cfg.network,
        train,
        val: Some(val),
        plan: plan(cfg, seeds),
        max_steps_per_epoch: cfg.max_steps_per_epoch,
    };
    let mut state = TrainerState::new(nn::init_params(&cfg.network, seeds.init));
    let records = optim::train_epochs(&run, &opt, &mut state, epochs, &mut |_| {})?;
    Ok((records, state.theta))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub rule: Rule,
    pub lr_exponent: Option<i32>,
    pub epochs: u64,
    /// Parameter count D.
    pub num_params: usize,
    /// Trainable directions per step (D for SGD).
    pub d_total: usize,
    pub reduction_factor: f64,
    pub final_val_acc: f64,
    pub best_val_acc: f64,
    pub final_val_loss: f64,
    pub config: BTreeMap<String, String>,
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Trains the configured rule and writes `trajectory.csv`,
/// `checkpoint.bin` and `summary.json` to `out`.
pub fn run_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainSummary> {
    cfg.check_files()?;
    let (train, val) = load_data(cfg)?;
    let (records, theta) = train_run(cfg, &cfg.optimizer, &cfg.seeds, &train, &val, cfg.epochs)?;
    create_dir(out)?;
    let header = cfg.resolved();
    optim::write_trajectory_csv(writer(&out.join("trajectory.csv"))?, &header, &records)?;
    nn::write_checkpoint(writer(&out.join("checkpoint.bin"))?, &cfg.network, &theta)?;
    let d_total = match cfg.optimizer.rule {
        Rule::Sgd => cfg.network.num_params(),
        _ => cfg.optimizer.d_total,
    };
    let summary = TrainSummary {
        rule: cfg.optimizer.rule,
        lr_exponent: cfg.optimizer.learning_rate.exponent,
        epochs: cfg.epochs,
        num_params: cfg.network.num_params(),
        d_total,
        reduction_factor: cfg.network.num_params() as f64 / d_total as f64,
        final_val_acc: records.last().map_or(f64::NAN, |r| r.val_acc),
        best_val_acc: records.iter().map(|r| r.val_acc).fold(f64::NAN, f64::max),
        final_val_loss: records.last().map_or(f64::NAN, |r| r.val_loss),
        config: header.into_iter().collect(),
    };
    let mut w = writer(&out.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(summary)
}

/// Writes one suite table: header lines, then CSV.
fn write_table(path: &Path, header: &[(String, String)], columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    write_header_lines(&mut w, header)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(columns)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteManifest {
    pub suite: String,
    pub files: Vec<String>,
    pub runs: usize,
    pub config: BTreeMap<String, String>,
    /// Per-suite findings, e.g. the distributed equivalence check.
    pub checks: BTreeMap<String, String>,
}

/// Runs a named experiment family, writing `<suite>.csv` and
/// `manifest.json` into `out`.
pub fn run_suite(name: &str, cfg: &ExperimentConfig, out: &Path) -> Result<SuiteManifest> {
    if !SUITES.contains(&name) {
        return Err(Error::InvalidConfig(format!(
            "unknown suite `{name}`; valid suites: {}",
            SUITES.join(", ")
        )));
    }
    cfg.check_files()?;
    create_dir(out)?;
    let mut header = cfg.resolved();
    header.insert(0, ("suite".into(), name.into()));
    let mut checks = BTreeMap::new();
    let (columns, rows, runs): (Vec<&str>, Vec<Vec<String>>, usize) = match name {
        "ortho" => {
            let rows = analysis::orthogonality_study(&cfg.suite.dims, cfg.suite.pairs, cfg.seeds.basis)?;
            let path = out.join("ortho.csv");
            analysis::write_orthogonality_csv(writer(&path)?, &header, &rows)?;
            return finish(name, out, &header, vec!["ortho.csv".into()], rows.len(), checks);
        }
        "dimscan" => {
            let (train, val) = load_data(cfg)?;
            let mut all = Vec::new();
            for rep in 0..cfg.suite.seeds {
                let seeds = repetition_seeds(&cfg.seeds, rep);
                let study = analysis::CorrelationStudy {
                    template: cfg.optimizer_for(Rule::Rbd),
                    epochs: cfg.epochs,
                    every: cfg.suite.correlation_every,
                    init_seed: seeds.init,
                };
                let run = TrainingRun {
                    spec: &cfg.network,
                    train: &train,
                    val: Some(&val),
                    plan: plan(cfg, &seeds),
                    max_steps_per_epoch: cfg.max_steps_per_epoch,
                };
                let mut rows =
                    analysis::correlation_vs_dimension(&study, &run, &cfg.suite.d_values, &[seeds.basis])?;
                for r in &mut rows {
                    r.seed = rep as u64;
                }
                all.extend(rows);
            }
            analysis::write_correlation_csv(writer(&out.join("dimscan.csv"))?, &header, &all)?;
            return finish(name, out, &header, vec!["dimscan.csv".into()], all.len(), checks);
        }
        "table1" => {
            let (train, val) = load_data(cfg)?;
            let mut rows = Vec::new();
            let mut runs = 0;
            for rule in Rule::ALL {
                for rep in 0..cfg.suite.seeds {
                    let seeds = repetition_seeds(&cfg.seeds, rep);
                    let (records, _) = train_run(cfg, &cfg.optimizer_for(rule), &seeds, &train, &val, cfg.epochs)?;
                    runs += 1;
                    rows.extend(records.iter().map(|r| record_row(&[rep.to_string()], r)));
                }
            }
            (columns_with(&["repetition"]), rows, runs)
        }
        "table2" => {
            let (train, val) = load_data(cfg)?;
            let mut rows = Vec::new();
            let mut runs = 0;
            for dist in Distribution::ALL {
                for rep in 0..cfg.suite.seeds {
                    let seeds = repetition_seeds(&cfg.seeds, rep);
                    let oc = cfg.optimizer_for(Rule::Rbd).with_distribution(dist);
                    let (records, _) = train_run(cfg, &oc, &seeds, &train, &val, cfg.epochs)?;
                    runs += 1;
                    rows.extend(records.iter().map(|r| record_row(&[dist.name().into(), rep.to_string()], r)));
                }
            }
            (columns_with(&["distribution", "repetition"]), rows, runs)
        }
        "compartments" => {
            let (train, val) = load_data(cfg)?;
            let mut schemes: Vec<SchemeKind> = cfg
                .suite
                .compartments
                .iter()
                .map(|&k| if k <= 1 { SchemeKind::Single } else { SchemeKind::Even(k) })
                .collect();
            schemes.push(SchemeKind::Layerwise);
            schemes.push(SchemeKind::LayerwiseProportional);
            let mut rows = Vec::new();
            let mut runs = 0;
            for scheme in schemes {
                for rep in 0..cfg.suite.seeds {
                    let seeds = repetition_seeds(&cfg.seeds, rep);
                    let oc = cfg.optimizer_for(Rule::Rbd).with_scheme(scheme);
                    let (records, _) = train_run(cfg, &oc, &seeds, &train, &val, cfg.epochs)?;
                    runs += 1;
                    rows.extend(records.iter().map(|r| record_row(&[scheme_string(scheme), rep.to_string()], r)));
                }
            }
            (columns_with(&["scheme", "repetition"]), rows, runs)
        }
        "hybrid" => hybrid_suite(cfg)?,
        "landscape" => landscape_suite(cfg)?,
        "distributed" => distributed_suite(cfg, &mut checks)?,
        _ => unreachable!(),
    };
    let file = format!("{name}.csv");
    write_table(&out.join(&file), &header, &columns, &rows)?;
    finish(name, out, &header, vec![file], runs, checks)
}

fn finish(
    name: &str,
    out: &Path,
    header: &[(String, String)],
    files: Vec<String>,
    runs: usize,
    checks: BTreeMap<String, String>,
) -> Result<SuiteManifest> {
    let manifest = SuiteManifest {
        suite: name.into(),
        files,
        runs,
        config: header.iter().cloned().collect(),
        checks,
    };
    let mut w = writer(&out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(manifest)
}

const RECORD_COLUMNS: [&str; 7] = optim::TRAJECTORY_HEADER;

fn columns_with(prefix: &[&'static str]) -> Vec<&'static str> {
    prefix.iter().copied().chain(RECORD_COLUMNS).collect()
}

fn record_row(prefix: &[String], r: &EpochRecord) -> Vec<String> {
    let mut row = prefix.to_vec();
    row.extend([
        r.epoch.to_string(),
        r.rule.name().to_string(),
        r.lr_exponent.map(|e| e.to_string()).unwrap_or_default(),
        r.train_loss.to_string(),
        r.train_acc.to_string(),
        r.val_loss.to_string(),
        r.val_acc.to_string(),
    ]);
    row
}

type Table = (Vec<&'static str>, Vec<Vec<String>>, usize);

fn hybrid_suite(cfg: &ExperimentConfig) -> Result<Table> {
    let (train, val) = load_data(cfg)?;
    let mut rows = Vec::new();
    let mut runs = 0;
    let mut pairs = vec![(Rule::Rbd, Rule::Rbd, 0), (Rule::Sgd, Rule::Sgd, 0)];
    for &s in cfg.suite.switch_epochs.iter().filter(|&&s| s < cfg.epochs) {
        pairs.push((Rule::Rbd, Rule::Sgd, s));
        pairs.push((Rule::Sgd, Rule::Rbd, s));
    }
    for (a, b, switch) in pairs {
        for rep in 0..cfg.suite.seeds {
            let seeds = repetition_seeds(&cfg.seeds, rep);
            let mk = |rule| -> Result<Optimizer> {
                let mut oc = cfg.optimizer_for(rule);
                oc.basis_seed = seeds.basis;
                Optimizer::for_network(oc, &cfg.network)
            };
            let run = TrainingRun {
                spec: &cfg.network,
                train: &train,
                val: Some(&val),
                plan: plan(cfg, &seeds),
                max_steps_per_epoch: cfg.max_steps_per_epoch,
            };
            let switch_at = if a == b { cfg.epochs } else { switch };
            let records = optim::hybrid_train(
                &mk(a)?,
                &mk(b)?,
                switch_at,
                cfg.epochs,
                &run,
                nn::init_params(&cfg.network, seeds.init),
            )?;
            runs += 1;
            let prefix = [a.name().to_string(), b.name().to_string(), switch.to_string(), rep.to_string()];
            rows.extend(records.iter().map(|r| record_row(&prefix, r)));
        }
    }
    Ok((columns_with(&["first", "second", "switch_epoch", "repetition"]), rows, runs))
}

fn landscape_suite(cfg: &ExperimentConfig) -> Result<Table> {
    let (train, val) = load_data(cfg)?;
    let seeds = cfg.seeds;
    // One fixed training batch for every slice.
    let order = plan(cfg, &seeds).epoch_order(train.len(), 0);
    let batch = train.gather(&order[..cfg.optimizer.batch_size.min(order.len())]);
    let objective = NetworkObjective::new(&cfg.network, &batch);
    let displacements = analysis::default_displacements();
    let mut rows = Vec::new();
    let mut runs = 0;
    for dist in Distribution::ALL {
        let oc = cfg.optimizer_for(Rule::Rbd).with_distribution(dist);
        let mut slice = |epoch: u64, theta: &[f64]| -> Result<()> {
            let p = analysis::landscape_slice(
                &objective,
                theta,
                dist,
                cfg.suite.slice_directions,
                &displacements,
                seeds.basis,
            )?;
            for (s, m) in p.displacements.iter().zip(&p.mean_losses) {
                rows.push(vec![
                    dist.name().to_string(),
                    epoch.to_string(),
                    s.to_string(),
                    m.map(|v| v.to_string()).unwrap_or_default(),
                ]);
            }
            Ok(())
        };
        slice(0, &nn::init_params(&cfg.network, seeds.init))?;
        let (_, theta) = train_run(cfg, &oc, &seeds, &train, &val, cfg.epochs)?;
        runs += 1;
        slice(cfg.epochs, &theta)?;
    }
    Ok((vec!["distribution", "epoch", "displacement", "mean_loss"], rows, runs))
}

/// Runs `steps` shared-batch steps of a basis-parallel cluster next to a
/// single worker using the concatenation of the cluster's bases, and reports
/// whether the parameters agreed bit for bit after every step.
pub fn check_basis_parallel_equivalence(
    cluster: &Cluster,
    objectives: &[&dyn Objective],
    theta0: &ParamVector,
) -> Result<bool> {
    if cluster.config.mode != ParallelMode::BasisParallel {
        return Err(Error::InvalidConfig("equivalence check needs basis_parallel mode".into()));
    }
    let k = cluster.workers();
    let mut replicas = vec![theta0.clone(); k];
    let mut single = TrainerState::new(theta0.clone());
    let mut transport = InMemoryTransport::new(k);
    let lr = cluster.config.learning_rate.value;
    for (t, obj) in objectives.iter().enumerate() {
        let step = t as u64;
        let shared = vec![*obj; k];
        distrib::parallel_rbd_step(cluster, &mut replicas, step, &shared, &mut transport)?;
        let basis = ConcatBasis {
            parts: (0..k).map(|w| cluster.descriptor(step, w)).collect(),
        };
        optim::rbd_step_with_basis(&mut single, *obj, lr, &basis)?;
        if replicas.iter().any(|r| r.0 != single.theta.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Directions per worker for a cluster of `k`.
pub fn per_worker_d(cfg: &ExperimentConfig, k: usize) -> usize {
    cfg.distributed.per_worker_d.unwrap_or(match cfg.distributed.mode {
        ParallelMode::BasisParallel => (cfg.optimizer.d_total / k).max(1),
        ParallelMode::DataParallel => cfg.optimizer.d_total,
    })
}

pub fn cluster_config(cfg: &ExperimentConfig, k: usize) -> ClusterConfig {
    let mut c = ClusterConfig::new(k, per_worker_d(cfg, k), cfg.exponent_for(Rule::Rbd));
    c.mode = cfg.distributed.mode;
    c.batching = cfg.distributed.batching;
    c.global_seed = cfg.seeds.basis;
    c.scheme = cfg.optimizer.scheme;
    c.distribution = cfg.optimizer.distribution;
    c.normalize = cfg.optimizer.normalize;
    c.verify_replicas = cfg.distributed.verify_replicas;
    c
}

fn distributed_suite(cfg: &ExperimentConfig, checks: &mut BTreeMap<String, String>) -> Result<Table> {
    let (train, val) = load_data(cfg)?;
    let seeds = cfg.seeds;
    let mut rows = Vec::new();
    let mut runs = 0;
    for &k in &cfg.distributed.workers {
        let cc = cluster_config(cfg, k);
        let cluster = Cluster::for_network(cc.clone(), &cfg.network)?;
        let theta0 = nn::init_params(&cfg.network, seeds.init);

        let exact = if cc.mode == ParallelMode::BasisParallel && cfg.distributed.check_steps > 0 {
            let order = plan(cfg, &seeds).epoch_order(train.len(), 0);
            let batches: Vec<nn::Batch> = order
                .chunks(cfg.optimizer.batch_size)
                .take(cfg.distributed.check_steps as usize)
                .map(|idx| train.gather(idx))
                .collect();
            let objs: Vec<NetworkObjective<'_>> =
                batches.iter().map(|b| NetworkObjective::new(&cfg.network, b)).collect();
            let dyn_objs: Vec<&dyn Objective> = objs.iter().map(|o| o as &dyn Objective).collect();
            let mut shared = cluster.clone();
            shared.config.verify_replicas = true;
            let ok = check_basis_parallel_equivalence(&shared, &dyn_objs, &theta0)?;
            checks.insert(format!("equivalence_k{k}"), if ok { "pass" } else { "fail" }.into());
            ok.to_string()
        } else {
            String::new()
        };

        let run = TrainingRun {
            spec: &cfg.network,
            train: &train,
            val: Some(&val),
            plan: plan(cfg, &seeds),
            max_steps_per_epoch: cfg.max_steps_per_epoch,
        };
        let result = distrib::run_cluster(&cluster, &run, theta0, cfg.epochs, false)?;
        runs += 1;
        let t = &result.transcript;
        let steps = t.steps.len().max(1) as u64;
        let msg = t.max_message_bytes();
        let dense = t.dense_gradient_bytes();
        rows.push(vec![
            k.to_string(),
            cc.mode.to_string(),
            cc.batching.to_string(),
            cc.per_worker_d.to_string(),
            t.steps.len().to_string(),
            msg.to_string(),
            (t.total_bytes() / steps).to_string(),
            dense.to_string(),
            (dense as f64 / msg as f64).to_string(),
            exact,
            result.records.last().map_or(f64::NAN, |r| r.val_acc).to_string(),
        ]);
    }
    Ok((
        vec![
            "workers",
            "mode",
            "batching",
            "per_worker_d",
            "steps",
            "message_bytes",
            "bytes_per_step",
            "dense_gradient_bytes",
            "reduction",
            "exact_equivalence",
            "final_val_acc",
        ],
        rows,
        runs,
    ))
}

/// Learning-rate sweep for the configured rule on a 75/25 split of the
/// training data; writes `sweep.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<optim::SweepResult> {
    cfg.check_files()?;
    let (train, _) = load_data(cfg)?;
    let exponents = optim::exponent_grid(cfg.sweep_range.0, cfg.sweep_range.1);
    let result = optim::sweep_network(
        &cfg.optimizer,
        &cfg.network,
        &train,
        cfg.sweep_epochs,
        cfg.seeds.split,
        cfg.seeds.init,
        plan(cfg, &cfg.seeds),
        cfg.max_steps_per_epoch,
        &exponents,
    );
    create_dir(out)?;
    let mut header = cfg.resolved();
    let losses = match &result {
        Ok(r) => {
            header.push(("best_exponent".into(), r.best_exponent.to_string()));
            r.losses.clone()
        }
        Err(Error::SweepDiverged(l)) => l.clone(),
        Err(_) => Vec::new(),
    };
    let rows: Vec<Vec<String>> = losses
        .iter()
        .map(|(e, l)| vec![e.to_string(), l.to_string()])
        .collect();
    write_table(&out.join("sweep.csv"), &header, &["exponent", "heldout_loss"], &rows)?;
    result
}
