//! One-dimensional loss slices around a trained point, along directions
//! from each distribution.

use random_bases::analysis;
use random_bases::data::{self, BatchPlan};
use random_bases::nn::{self, NetworkSpec};
use random_bases::objective::NetworkObjective;
use random_bases::optim::{self, Optimizer, OptimizerConfig, Rule, TrainerState, TrainingRun};
use random_bases::Distribution;

fn main() -> random_bases::Result<()> {
    let spec = NetworkSpec::new(vec![20, 32, 10])?;
    let all = data::synthetic_blobs(10, 20, 2000, 4.0, 0)?;
    let (train, val) = data::split(&all, 0.8, 1)?;
    let run = TrainingRun {
        spec: &spec,
        train: &train,
        val: None,
        plan: BatchPlan::new(32, 3),
        max_steps_per_epoch: None,
    };
    let opt = Optimizer::for_network(OptimizerConfig::new(Rule::Sgd, -1), &spec)?;
    let mut state = TrainerState::new(nn::init_params(&spec, 1));
    optim::train_epochs(&run, &opt, &mut state, 3, &mut |_| {})?;

    let batch = val.batch_of(0..val.len());
    let objective = NetworkObjective::new(&spec, &batch);
    let steps = analysis::default_displacements();
    println!("{:>9} {}", "s", steps.iter().map(|s| format!("{s:>7.1}")).collect::<String>());
    for dist in Distribution::ALL {
        let p = analysis::landscape_slice(&objective, &state.theta, dist, 10, &steps, 5)?;
        let row: String = p
            .mean_losses
            .iter()
            .map(|l| l.map_or("    nan".into(), |l| format!("{l:>7.3}")))
            .collect();
        println!("{:>9} {row}", dist.name());
    }
    Ok(())
}
