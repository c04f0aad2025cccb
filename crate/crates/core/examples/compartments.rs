//! The same coordinate budget spread over one basis or over per-layer bases.

use random_bases::data::{self, BatchPlan};
use random_bases::nn::{self, NetworkSpec};
use random_bases::optim::{self, Optimizer, OptimizerConfig, Rule, TrainerState, TrainingRun};
use random_bases::SchemeKind;

fn main() -> random_bases::Result<()> {
    let spec = NetworkSpec::new(vec![20, 32, 16, 10])?;
    let all = data::synthetic_blobs(10, 20, 3000, 4.0, 0)?;
    let (train, val) = data::split(&all, 0.8, 1)?;
    let run = TrainingRun {
        spec: &spec,
        train: &train,
        val: Some(&val),
        plan: BatchPlan::new(32, 3),
        max_steps_per_epoch: None,
    };
    let schemes = [
        SchemeKind::Single,
        SchemeKind::Even(4),
        SchemeKind::Layerwise,
        SchemeKind::LayerwiseProportional,
    ];
    for scheme in schemes {
        let opt = Optimizer::for_network(OptimizerConfig::new(Rule::Rbd, 2).with_d(48).with_scheme(scheme), &spec)?;
        let budgets = opt.scheme().map(|s| s.budgets.clone()).unwrap_or_default();
        let mut state = TrainerState::new(nn::init_params(&spec, 1));
        let records = optim::train_epochs(&run, &opt, &mut state, 4, &mut |_| {})?;
        println!(
            "{:<24} budgets {:<16} val acc {:.3}",
            scheme.name(),
            format!("{budgets:?}"),
            records.last().map_or(f64::NAN, |r| r.val_acc)
        );
    }
    Ok(())
}
