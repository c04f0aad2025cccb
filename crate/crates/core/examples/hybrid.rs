//! Switching rules mid-run: RBD first, then SGD on the same weights.

use random_bases::data::{self, BatchPlan};
use random_bases::nn::{self, NetworkSpec};
use random_bases::optim::{self, Optimizer, OptimizerConfig, Rule, TrainingRun};

fn main() -> random_bases::Result<()> {
    let spec = NetworkSpec::new(vec![20, 32, 10])?;
    let all = data::synthetic_blobs(10, 20, 3000, 4.0, 0)?;
    let (train, val) = data::split(&all, 0.8, 1)?;
    let run = TrainingRun {
        spec: &spec,
        train: &train,
        val: Some(&val),
        plan: BatchPlan::new(32, 3),
        max_steps_per_epoch: None,
    };
    let rbd = Optimizer::for_network(OptimizerConfig::new(Rule::Rbd, 2).with_d(20), &spec)?;
    let sgd = Optimizer::for_network(OptimizerConfig::new(Rule::Sgd, -2), &spec)?;
    let total = 6;
    for switch in [0, 2, 4, total] {
        let records = optim::hybrid_train(&rbd, &sgd, switch, total, &run, nn::init_params(&spec, 1))?;
        let accs: Vec<String> = records.iter().map(|r| format!("{:.2}", r.val_acc)).collect();
        println!("RBD for {switch} epochs, then SGD: {}", accs.join(" "));
    }
    Ok(())
}
