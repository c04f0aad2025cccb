//! All four rules on the same small synthetic problem.
//!
//! cargo run --release --example train_synthetic -- [epochs]

use random_bases::data::{self, BatchPlan};
use random_bases::nn::{self, NetworkSpec};
use random_bases::optim::{self, Optimizer, OptimizerConfig, Rule, TrainerState, TrainingRun};

fn main() -> random_bases::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
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
    println!("D = {}, d = 50, {} training rows", spec.num_params(), train.len());

    for (rule, exponent) in [(Rule::Sgd, -1), (Rule::Rbd, 2), (Rule::Fpd, 0), (Rule::Nes, -13)] {
        let opt = Optimizer::for_network(OptimizerConfig::new(rule, exponent).with_d(50), &spec)?;
        let mut state = TrainerState::new(nn::init_params(&spec, 1));
        let records = optim::train_epochs(&run, &opt, &mut state, epochs, &mut |_| {})?;
        let last = records.last().expect("at least one epoch");
        println!(
            "{rule:>4} lr 2^{exponent:<3} val acc {:.3}  val loss {:.3}",
            last.val_acc, last.val_loss
        );
    }
    Ok(())
}
