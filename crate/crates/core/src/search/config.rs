use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{MixtureMode, SmoothingParams};
use crate::trainer::{Architecture, TrainHyper};

/// How per-worker schedules are generated between multi-exploitation steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplorationType {
    /// Plain training: one worker on shuffled uniform epochs.
    Uniform,
    /// Every worker gets its own shuffled uniform epochs.
    Random,
    /// Workers draw from the smoothed distribution estimated from the last
    /// winning schedule.
    Mixture,
}

impl fmt::Display for ExplorationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ExplorationType::Uniform => "uniform",
            ExplorationType::Random => "random",
            ExplorationType::Mixture => "mixture",
        })
    }
}

impl FromStr for ExplorationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ExplorationType::Uniform),
            "random" => Ok(ExplorationType::Random),
            "mixture" => Ok(ExplorationType::Mixture),
            other => Err(Error::param("exploration", format!("unknown exploration type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Number of child models trained in parallel.
    pub population_size: usize,
    /// Exploitation intervals per multi-exploitation step.
    pub intervals_per_exploitation: usize,
    /// Batches per exploitation interval.
    pub interval_len: usize,
    pub batch_size: usize,
    pub smoothing: SmoothingParams,
    pub mixture_mode: MixtureMode,
    pub exploration: ExplorationType,
    /// Batches trained before the first distribution-based exploration.
    pub warmup_batches: usize,
    /// Number of explore / multi-exploitation rounds.
    pub total_alternations: usize,
    pub seed: u64,
    /// Validation rows scored per exploit; `None` scores all of them.
    pub eval_subset: Option<usize>,
    /// Hidden layer width of the built-in learner; `None` is softmax regression.
    pub hidden_dim: Option<usize>,
    /// Worker threads; `None` uses one per child, up to the core count.
    /// Results do not depend on this value.
    pub workers: Option<usize>,
    pub trainer: TrainHyper,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population_size: 8,
            intervals_per_exploitation: 10,
            interval_len: 10,
            batch_size: 20,
            smoothing: SmoothingParams::default(),
            mixture_mode: MixtureMode::PerDraw,
            exploration: ExplorationType::Mixture,
            warmup_batches: 0,
            total_alternations: 10,
            seed: 0,
            eval_subset: None,
            hidden_dim: None,
            workers: None,
            trainer: TrainHyper::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: usize, field: &'static str| {
            if v == 0 {
                Err(Error::param(field, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive(self.population_size, "population_size")?;
        positive(self.intervals_per_exploitation, "intervals_per_exploitation")?;
        positive(self.interval_len, "interval_len")?;
        positive(self.batch_size, "batch_size")?;
        positive(self.total_alternations, "total_alternations")?;
        if self.eval_subset == Some(0) {
            return Err(Error::param("eval_subset", "must be at least 1 when set"));
        }
        if self.workers == Some(0) {
            return Err(Error::param("workers", "must be at least 1 when set"));
        }
        if self.hidden_dim == Some(0) {
            return Err(Error::param("hidden_dim", "must be at least 1 when set"));
        }
        self.smoothing.validate()?;
        self.trainer.validate()
    }

    /// Children actually trained. Uniform exploration is plain training.
    pub fn effective_population(&self) -> usize {
        match self.exploration {
            ExplorationType::Uniform => 1,
            _ => self.population_size,
        }
    }

    /// Batches consumed per child per multi-exploitation step (`T * N_s`).
    pub fn batches_per_alternation(&self) -> usize {
        self.intervals_per_exploitation * self.interval_len
    }

    /// Samples consumed per child per multi-exploitation step.
    pub fn samples_per_alternation(&self) -> usize {
        self.batches_per_alternation() * self.batch_size
    }

    pub fn total_batches(&self) -> usize {
        self.batches_per_alternation() * self.total_alternations
    }

    /// Whether alternation `n` still falls inside the warm-up span.
    pub fn in_warmup(&self, alternation: usize) -> bool {
        alternation * self.batches_per_alternation() < self.warmup_batches
    }

    pub fn architecture(&self, feature_dim: usize, num_classes: usize) -> Architecture {
        Architecture { feature_dim, hidden_dim: self.hidden_dim, num_classes }
    }

    /// Pool size: `workers` when set, otherwise the population capped by the
    /// available parallelism.
    pub fn worker_threads(&self) -> usize {
        let cap = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        self.workers.unwrap_or_else(|| self.effective_population().min(cap)).max(1)
    }
}
