//! Generate the synthetic task and train both built-in models with plain
//! shuffled-epoch SGD.
//!
//! ```bash
//! cargo run --release --example train_builtin_learner
//! ```

use autosampling::rng::{Domain, RngStream};
use autosampling::sampling::draw_uniform_epoch_schedule;
use autosampling::trainer::{
    evaluate_indices, gen_synthetic_dataset, init_model, train_step, Architecture, LrSchedule, SyntheticSpec,
    TrainHyper,
};

fn main() -> autosampling::error::Result<()> {
    let spec = SyntheticSpec::default();
    let synth = gen_synthetic_dataset(&spec, &mut RngStream::for_domain(0, Domain::Dataset, 0, 0))?;
    let data = &synth.dataset;
    println!(
        "{} training rows ({} with flipped labels), {} validation rows, {} classes",
        data.num_samples(),
        synth.flipped.len(),
        data.num_val(),
        data.num_classes()
    );

    let hyper = TrainHyper {
        base_lr: 0.1,
        momentum: 0.9,
        schedule: LrSchedule::StepDecay { factor: 0.1, boundaries: vec![500, 750] },
    };
    let schedule = draw_uniform_epoch_schedule(
        data.num_samples(),
        1000,
        20,
        &mut RngStream::for_domain(0, Domain::UniformRun, 0, 0),
    )?;

    for hidden in [None, Some(32)] {
        let arch =
            Architecture { feature_dim: data.feature_dim(), hidden_dim: hidden, num_classes: data.num_classes() };
        let mut model = init_model(arch, &mut RngStream::for_domain(0, Domain::ModelInit, 0, 0))?;
        for (i, batch) in schedule.batches().iter().enumerate() {
            let loss = train_step(&mut model, batch, data, &hyper)?;
            if i % 250 == 0 {
                println!("  {hidden:?} step {i:>4} loss {loss:.4}");
            }
        }
        let eval = evaluate_indices(&model, data, None)?;
        println!(
            "{:<10} {} params  val accuracy {:.3}  val loss {:.4}",
            label(hidden),
            arch.num_params(),
            eval.metric,
            eval.loss
        );
    }
    Ok(())
}

fn label(hidden: Option<usize>) -> String {
    hidden.map_or("softmax".into(), |h| format!("mlp-{h}"))
}
