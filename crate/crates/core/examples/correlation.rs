//! How well the RBD update lines up with the full gradient as d grows.

use random_bases::analysis::{self, CorrelationStudy};
use random_bases::data::{self, BatchPlan};
use random_bases::nn::NetworkSpec;
use random_bases::optim::{OptimizerConfig, Rule, TrainingRun};

fn main() -> random_bases::Result<()> {
    let spec = NetworkSpec::new(vec![20, 32, 10])?;
    let all = data::synthetic_blobs(10, 20, 2000, 4.0, 0)?;
    let (train, val) = data::split(&all, 0.8, 1)?;
    let run = TrainingRun {
        spec: &spec,
        train: &train,
        val: Some(&val),
        plan: BatchPlan::new(32, 3),
        max_steps_per_epoch: None,
    };
    let study = CorrelationStudy {
        template: OptimizerConfig::new(Rule::Rbd, 0),
        epochs: 2,
        every: 10,
        init_seed: 1,
    };
    let rows = analysis::correlation_vs_dimension(&study, &run, &[1, 4, 16, 64, 256], &[0, 1])?;
    for r in rows {
        println!(
            "d {:>4} seed {}  corr {:.4} over {} steps  val acc {:.3}",
            r.d, r.seed, r.mean_correlation, r.samples, r.final_accuracy
        );
    }
    println!("D = {}", spec.num_params());
    Ok(())
}
