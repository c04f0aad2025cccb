//! Four simulated workers, each drawing its own directions. Only
//! coordinates cross the wire; every replica ends up bit-identical.

use random_bases::data::{self, BatchPlan};
use random_bases::distrib::{self, Batching, Cluster, ClusterConfig};
use random_bases::nn::{self, NetworkSpec};
use random_bases::optim::TrainingRun;

fn main() -> random_bases::Result<()> {
    let spec = NetworkSpec::new(vec![20, 32, 10])?;
    let all = data::synthetic_blobs(10, 20, 3000, 4.0, 0)?;
    let (train, val) = data::split(&all, 0.8, 1)?;

    for batching in [Batching::Shared, Batching::PerWorker] {
        let mut config = ClusterConfig::new(4, 12, 2);
        config.batching = batching;
        let cluster = Cluster::for_network(config, &spec)?;
        let run = TrainingRun {
            spec: &spec,
            train: &train,
            val: Some(&val),
            plan: BatchPlan::new(32, 3),
            max_steps_per_epoch: None,
        };
        let out = distrib::run_cluster(&cluster, &run, nn::init_params(&spec, 1), 3, false)?;
        let t = &out.transcript;
        println!(
            "{batching}: {} steps, {} B per message, {} B total, val acc {:.3}, θ crc {:08x}",
            t.steps.len(),
            t.max_message_bytes(),
            t.total_bytes(),
            out.records.last().map_or(f64::NAN, |r| r.val_acc),
            distrib::theta_checksum(&out.theta),
        );
    }
    let dense = 8 * spec.num_params();
    println!("a dense gradient would be {dense} B per worker per step");
    Ok(())
}
