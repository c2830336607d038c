//! Experiment configuration files.
//!
//! A TOML file with a `[search]` table holding every [`SearchConfig`] field
//! and a `[dataset]` table selecting synthetic data or CSV files:
//!
//! ```toml
//! [search]
//! population_size = 8
//! intervals_per_exploitation = 10
//! interval_len = 10
//! batch_size = 20
//! exploration = "mixture"
//! total_alternations = 10
//! seed = 0
//!
//! [search.smoothing]
//! beta = 1.0
//! n_uniform = 3
//!
//! [search.trainer]
//! base_lr = 0.1
//! momentum = 0.9
//! schedule = { kind = "constant" }
//!
//! [dataset]
//! kind = "synthetic"
//! num_clusters = 5
//! samples_per_cluster = 200
//! feature_dim = 10
//! separation = 2.0
//! redundancy_factor = 4
//! label_noise_fraction = 0.2
//! val_fraction = 0.5
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{Domain, RngStream};
use crate::sampling::MixtureMode;
use crate::search::{ExplorationType, SearchConfig};
use crate::trainer::{gen_synthetic_dataset, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Generated from the experiment seed.
    Synthetic(SyntheticSpec),
    /// `id,label,f0,..` files; relative paths resolve against the config file.
    Csv { train: PathBuf, val: PathBuf, num_classes: Option<usize> },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub dataset: DatasetSource,
    /// Directory relative dataset paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| {
            Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("invalid config: ")))
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        match &self.dataset {
            DatasetSource::Synthetic(spec) => spec.validate(),
            DatasetSource::Csv { .. } => Ok(()),
        }
    }

    /// Builds the dataset. Synthetic data derives from `search.seed`.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Synthetic(spec) => {
                let mut rng = RngStream::for_domain(self.search.seed, Domain::Dataset, 0, 0);
                Ok(gen_synthetic_dataset(spec, &mut rng)?.dataset)
            }
            DatasetSource::Csv { train, val, num_classes } => {
                Dataset::read_csv(&self.base_dir.join(train), &self.base_dir.join(val), *num_classes)
            }
        }
    }

    /// Makes relative dataset paths absolute so the config can be stored
    /// elsewhere. Clears `base_dir`.
    pub fn with_absolute_paths(mut self) -> Self {
        if let DatasetSource::Csv { train, val, .. } = &mut self.dataset {
            let abs = |p: &Path, base: &Path| std::path::absolute(base.join(p)).unwrap_or_else(|_| base.join(p));
            *train = abs(train, &self.base_dir);
            *val = abs(val, &self.base_dir);
        }
        self.base_dir = PathBuf::new();
        self
    }
}

/// Command-line overrides, one per search field.
#[derive(Debug, Clone, Default, Args)]
pub struct SearchOverrides {
    #[arg(long)]
    pub population_size: Option<usize>,
    #[arg(long)]
    pub intervals_per_exploitation: Option<usize>,
    #[arg(long)]
    pub interval_len: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n_uniform: Option<u32>,
    #[arg(long, value_parser = parse_mixture_mode)]
    pub mixture_mode: Option<MixtureMode>,
    #[arg(long)]
    pub exploration: Option<ExplorationType>,
    #[arg(long)]
    pub warmup_batches: Option<usize>,
    #[arg(long)]
    pub total_alternations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eval_subset: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub base_lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
}

fn parse_mixture_mode(s: &str) -> std::result::Result<MixtureMode, String> {
    match s {
        "per-draw" => Ok(MixtureMode::PerDraw),
        "union" => Ok(MixtureMode::Union),
        _ => Err(format!("unknown mixture mode `{s}` (per-draw, union)")),
    }
}

impl SearchOverrides {
    pub fn apply(&self, c: &mut SearchConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            population_size => c.population_size,
            intervals_per_exploitation => c.intervals_per_exploitation,
            interval_len => c.interval_len,
            batch_size => c.batch_size,
            beta => c.smoothing.beta,
            n_uniform => c.smoothing.n_uniform,
            mixture_mode => c.mixture_mode,
            exploration => c.exploration,
            warmup_batches => c.warmup_batches,
            total_alternations => c.total_alternations,
            seed => c.seed,
            base_lr => c.trainer.base_lr,
            momentum => c.trainer.momentum,
        }
        if self.eval_subset.is_some() {
            c.eval_subset = self.eval_subset;
        }
        if self.hidden_dim.is_some() {
            c.hidden_dim = self.hidden_dim;
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
    }
}

impl clap::ValueEnum for ExplorationType {
    fn value_variants<'a>() -> &'a [Self] {
        &[ExplorationType::Uniform, ExplorationType::Random, ExplorationType::Mixture]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            ExplorationType::Uniform => "uniform",
            ExplorationType::Random => "random",
            ExplorationType::Mixture => "mixture",
        }))
    }
}
