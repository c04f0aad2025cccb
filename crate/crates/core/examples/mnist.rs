//! FC (784,128,10) on MNIST. Needs the four IDX files in `RBD_DATA_DIR`.
//!
//! cargo run --release --example mnist -- [rule] [lr exponent] [epochs] [d]

use std::path::PathBuf;

use random_bases::data::{self, BatchPlan, IdxSplit};
use random_bases::nn::{self, NetworkSpec};
use random_bases::optim::{self, Optimizer, OptimizerConfig, Rule, TrainerState, TrainingRun};

fn main() -> random_bases::Result<()> {
    let Some(dir) = std::env::var_os(data::DATA_DIR_ENV).map(PathBuf::from) else {
        eprintln!("set {} to a directory with the MNIST IDX files", data::DATA_DIR_ENV);
        std::process::exit(3);
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    let rule: Rule = args.first().map_or(Ok(Rule::Rbd), |s| s.parse()).map_err(random_bases::Error::InvalidConfig)?;
    let exponent = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let d = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(250);

    let train = data::load_mnist_dir(&dir, IdxSplit::Train)?;
    let test = data::load_mnist_dir(&dir, IdxSplit::Test)?;
    let spec = NetworkSpec::fc_mnist();
    let opt = Optimizer::for_network(OptimizerConfig::new(rule, exponent).with_d(d), &spec)?;
    let run = TrainingRun {
        spec: &spec,
        train: &train,
        val: Some(&test),
        plan: BatchPlan::new(32, 3),
        max_steps_per_epoch: None,
    };
    let mut state = TrainerState::new(nn::init_params(&spec, 1));
    let records = optim::train_epochs(&run, &opt, &mut state, epochs, &mut |obs| {
        if obs.step % 200 == 0 {
            eprintln!("step {:>6} loss {:.4}", obs.step, obs.report.eval.loss);
        }
    })?;
    for r in records {
        println!("epoch {:>3} train acc {:.4} test acc {:.4}", r.epoch, r.train_acc, r.val_acc);
    }
    Ok(())
}
