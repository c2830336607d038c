//! Plug a custom learner into the search. This one wraps the built-in model
//! but rewards children by negative validation loss instead of accuracy.
//!
//! ```bash
//! cargo run --release --example custom_learner
//! ```

use autosampling::dataset::Dataset;
use autosampling::error::Result;
use autosampling::rng::{Domain, RngStream};
use autosampling::schedule::MiniBatch;
use autosampling::search::{initial_model, run_autosampling_with, SearchConfig};
use autosampling::trainer::{gen_synthetic_dataset, BuiltinLearner, EvalResult, Learner, ModelState, SyntheticSpec};

struct LossReward(BuiltinLearner);

impl Learner for LossReward {
    type State = ModelState;

    fn train_step(&self, state: &mut ModelState, batch: &MiniBatch, data: &Dataset) -> Result<f64> {
        self.0.train_step(state, batch, data)
    }

    fn evaluate(&self, state: &ModelState, data: &Dataset, indices: Option<&[usize]>) -> Result<EvalResult> {
        let e = self.0.evaluate(state, data, indices)?;
        Ok(EvalResult { metric: -e.loss, ..e })
    }

    fn encode_state(&self, state: &ModelState) -> Vec<u8> {
        self.0.encode_state(state)
    }
}

fn main() -> Result<()> {
    let config = SearchConfig { seed: 2, ..Default::default() };
    let data =
        gen_synthetic_dataset(&SyntheticSpec::default(), &mut RngStream::for_domain(2, Domain::Dataset, 0, 0))?.dataset;

    let builtin = BuiltinLearner::new(config.trainer.clone());
    let by_loss = LossReward(builtin.clone());
    let a = run_autosampling_with(&builtin, initial_model(&config, &data)?, &config, &data)?;
    let b = run_autosampling_with(&by_loss, initial_model(&config, &data)?, &config, &data)?;

    let acc = builtin.evaluate(&b.model, &data, None)?;
    println!("accuracy reward: accuracy {:.3}, loss {:.4}", a.final_eval.metric, a.final_eval.loss);
    println!("loss reward:     accuracy {:.3}, loss {:.4}", acc.metric, acc.loss);
    println!("schedules differ: {}", a.schedule != b.schedule);
    Ok(())
}
