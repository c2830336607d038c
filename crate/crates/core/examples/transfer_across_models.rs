//! Learn a sampling distribution with softmax regression, then train an MLP
//! on it.
//!
//! ```bash
//! cargo run --release --example transfer_across_models
//! ```

use autosampling::analysis::{replay_run, static_distribution, transfer_run, StaticSource};
use autosampling::rng::{Domain, RngStream};
use autosampling::search::{run_autosampling, uniform_run_schedule, SearchConfig};
use autosampling::trainer::{gen_synthetic_dataset, Architecture, LrSchedule, SyntheticSpec, TrainHyper};

fn main() -> autosampling::error::Result<()> {
    let data =
        gen_synthetic_dataset(&SyntheticSpec::default(), &mut RngStream::for_domain(3, Domain::Dataset, 0, 0))?.dataset;
    let config = SearchConfig {
        seed: 3,
        trainer: TrainHyper {
            schedule: LrSchedule::StepDecay { factor: 0.1, boundaries: vec![500, 750] },
            ..Default::default()
        },
        ..Default::default()
    };

    let source = run_autosampling(&config, &data)?;
    let learned = static_distribution(&source.schedule, StaticSource::FullRun, config.smoothing)?;
    println!("source (softmax) accuracy {:.3}", source.final_eval.metric);

    let mlp = Architecture { feature_dim: data.feature_dim(), hidden_dim: Some(32), num_classes: data.num_classes() };
    let (_, transferred) = transfer_run(&learned, mlp, &config, &data)?;
    let uniform = uniform_run_schedule(&config, data.num_samples())?;
    let (_, baseline) = replay_run(&uniform, mlp, &config.trainer, &data, config.seed)?;
    println!("mlp-32 on learned distribution {:.3}", transferred.metric);
    println!("mlp-32 on shuffled epochs      {:.3}", baseline.metric);
    Ok(())
}
