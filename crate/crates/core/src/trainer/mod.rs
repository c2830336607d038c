//! The trainable-model contract and the built-in desk-scale learner.

mod model;
pub mod synthetic;

pub use model::{
    batch_loss, eval_subset_indices, evaluate, evaluate_indices, init_model, loss_and_gradient, per_sample_losses,
    softmax, train_step, Architecture, EvalResult, LrSchedule, ModelState, TrainHyper,
};
pub use synthetic::{gen_synthetic_dataset, SyntheticDataset, SyntheticSpec};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::format;
use crate::schedule::MiniBatch;

/// What the search engine needs from a model: advance it by one batch,
/// score it on validation rows, and serialize its full training state so
/// population members can be compared byte for byte.
pub trait Learner: Sync {
    type State: Clone + Send + Sync;

    fn train_step(&self, state: &mut Self::State, batch: &MiniBatch, data: &Dataset) -> Result<f64>;

    /// Scores `state` on the validation rows `indices`, or all of them.
    fn evaluate(&self, state: &Self::State, data: &Dataset, indices: Option<&[usize]>) -> Result<EvalResult>;

    fn encode_state(&self, state: &Self::State) -> Vec<u8>;
}

/// SGD with momentum on [`ModelState`].
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinLearner {
    pub hyper: TrainHyper,
}

impl BuiltinLearner {
    pub fn new(hyper: TrainHyper) -> Self {
        BuiltinLearner { hyper }
    }
}

impl Learner for BuiltinLearner {
    type State = ModelState;

    fn train_step(&self, state: &mut ModelState, batch: &MiniBatch, data: &Dataset) -> Result<f64> {
        train_step(state, batch, data, &self.hyper)
    }

    fn evaluate(&self, state: &ModelState, data: &Dataset, indices: Option<&[usize]>) -> Result<EvalResult> {
        evaluate_indices(state, data, indices)
    }

    fn encode_state(&self, state: &ModelState) -> Vec<u8> {
        format::encode_model(state)
    }
}
