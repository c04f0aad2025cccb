//! Power-of-two learning-rate search, scored on a held-out quarter.

use random_bases::data::{self, BatchPlan};
use random_bases::nn::NetworkSpec;
use random_bases::optim::{self, OptimizerConfig, Rule};

fn main() -> random_bases::Result<()> {
    let spec = NetworkSpec::new(vec![20, 32, 10])?;
    let train = data::synthetic_blobs(10, 20, 2000, 4.0, 0)?;
    for rule in [Rule::Sgd, Rule::Rbd] {
        let template = OptimizerConfig::new(rule, 0).with_d(50);
        let r = optim::sweep_network(
            &template,
            &spec,
            &train,
            1,
            4,
            1,
            BatchPlan::new(32, 3),
            None,
            &optim::exponent_grid(4, -10),
        )?;
        let losses: Vec<String> = r.losses.iter().map(|(e, l)| format!("{e}:{l:.2}")).collect();
        println!("{rule}: best 2^{}  [{}]", r.best_exponent, losses.join(" "));
    }
    Ok(())
}
