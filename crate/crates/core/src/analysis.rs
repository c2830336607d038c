//! Post-hoc harnesses: segment histograms of schedules, sampling frequency
//! against per-sample loss, fixed-schedule replays, and the
//! uniform / static / dynamic comparison.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distribution::SamplingDistribution;
use crate::error::{Error, Result};
use crate::rng::{Domain, RngStream};
use crate::sampling::{draw_schedule, estimate_distribution, smooth_distribution, SmoothingParams};
use crate::schedule::{Provenance, SamplingSchedule};
use crate::search::{run_autosampling, uniform_run_schedule, SearchConfig};
use crate::trainer::{evaluate_indices, init_model, train_step, Architecture, EvalResult, ModelState, TrainHyper};

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

/// Appearance counts of contiguous id ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentHistogram {
    pub num_segments: usize,
    pub counts: Vec<u64>,
    /// Display order of segments; `ordering[rank]` is a segment index.
    pub ordering: Vec<usize>,
}

/// Counts appearances of ids in `[s*k, (s+1)*k)` for every segment `s`, where
/// `k = dataset_size / num_segments`.
pub fn segment_histogram(
    schedule: &SamplingSchedule,
    dataset_size: usize,
    num_segments: usize,
) -> Result<SegmentHistogram> {
    if num_segments == 0 || !dataset_size.is_multiple_of(num_segments) {
        return Err(Error::param(
            "num_segments",
            format!("{num_segments} segments do not evenly divide {dataset_size} samples"),
        ));
    }
    let width = dataset_size / num_segments;
    let mut counts = vec![0u64; num_segments];
    for id in schedule.ids() {
        if id.index() >= dataset_size {
            return Err(Error::IdOutOfRange { id: id.0, dataset_size });
        }
        counts[id.index() / width] += 1;
    }
    Ok(SegmentHistogram { num_segments, counts, ordering: (0..num_segments).collect() })
}

impl SegmentHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Display order that ranks segments by `reference` counts, largest
    /// first, ties by segment index.
    pub fn ordered_like(mut self, reference: &SegmentHistogram) -> Self {
        let mut order: Vec<usize> = (0..reference.num_segments).collect();
        order.sort_by(|&a, &b| reference.counts[b].cmp(&reference.counts[a]).then(a.cmp(&b)));
        self.ordering = order;
        self
    }

    /// Counts in display order.
    pub fn ordered_counts(&self) -> Vec<u64> {
        self.ordering.iter().map(|&s| self.counts[s]).collect()
    }

    /// `rank,segment,count` in display order.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["rank", "segment", "count"]).map_err(csv_err(path))?;
        for (rank, &s) in self.ordering.iter().enumerate() {
            w.write_record([rank.to_string(), s.to_string(), self.counts[s].to_string()]).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Pearson correlation, or `None` when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqLossRow {
    pub id: u32,
    pub frequency: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqLossTable {
    pub rows: Vec<FreqLossRow>,
    /// `None` when frequencies or losses are constant.
    pub correlation: Option<f64>,
}

/// Pairs each sample's appearance count in `schedule` with its loss.
pub fn frequency_loss_table(schedule: &SamplingSchedule, losses: &[f64]) -> Result<FreqLossTable> {
    if losses.len() != schedule.dataset_size() {
        return Err(Error::Dimension(format!(
            "{} losses for a dataset of {} samples",
            losses.len(),
            schedule.dataset_size()
        )));
    }
    let counts = schedule.counts();
    let rows: Vec<FreqLossRow> = counts
        .iter()
        .zip(losses)
        .enumerate()
        .map(|(i, (&frequency, &loss))| FreqLossRow { id: i as u32, frequency, loss })
        .collect();
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok(FreqLossTable { correlation: pearson(&freqs, losses), rows })
}

impl FreqLossTable {
    pub fn total_frequency(&self) -> u64 {
        self.rows.iter().map(|r| r.frequency).sum()
    }

    /// `sample_id,frequency,loss` rows followed by nothing else; the
    /// correlation goes to its own file via [`FreqLossTable::correlation_label`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["sample_id", "frequency", "loss"]).map_err(csv_err(path))?;
        for r in &self.rows {
            w.write_record([r.id.to_string(), r.frequency.to_string(), r.loss.to_string()]).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn correlation_label(&self) -> String {
        self.correlation.map_or_else(|| "undefined".to_string(), |c| c.to_string())
    }
}

/// A whole-run schedule of i.i.d. draws from `p`, tagged static.
pub fn make_static_schedule(
    p: &SamplingDistribution,
    total_batches: usize,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<SamplingSchedule> {
    Ok(draw_schedule(p, total_batches, batch_size, rng)?.with_provenance(Provenance::Static))
}

/// Trains a freshly initialized model (weights from `seed`) over every batch
/// of `schedule` and scores it on the full validation split.
pub fn replay_run(
    schedule: &SamplingSchedule,
    arch: Architecture,
    hyper: &TrainHyper,
    data: &Dataset,
    seed: u64,
) -> Result<(ModelState, EvalResult)> {
    if schedule.dataset_size() != data.num_samples() {
        return Err(Error::Dimension(format!(
            "schedule covers {} samples, dataset has {}",
            schedule.dataset_size(),
            data.num_samples()
        )));
    }
    let mut model = init_model(arch, &mut RngStream::for_domain(seed, Domain::ModelInit, 0, 0))?;
    for batch in schedule.batches() {
        train_step(&mut model, batch, data, hyper)?;
    }
    let eval = evaluate_indices(&model, data, None)?;
    Ok((model, eval))
}

/// Which part of a recorded schedule a static distribution is estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StaticSource {
    /// Every alternation.
    #[default]
    FullRun,
    /// Only the last alternation present in the schedule.
    FinalAlternation,
}

/// Estimates a distribution from a recorded schedule and smooths it, ready for
/// static replays and transfer.
pub fn static_distribution(
    schedule: &SamplingSchedule,
    source: StaticSource,
    smoothing: SmoothingParams,
) -> Result<SamplingDistribution> {
    let slice = match source {
        StaticSource::FullRun => schedule.clone(),
        StaticSource::FinalAlternation => {
            let last = schedule
                .provenance()
                .iter()
                .filter_map(|p| match p {
                    Provenance::Alternation(n) => Some(*n),
                    _ => None,
                })
                .max()
                .ok_or(Error::EmptySchedule)?;
            schedule.alternation(last)
        }
    };
    let p = estimate_distribution(&slice, schedule.dataset_size())?;
    smooth_distribution(&p, smoothing)
}

/// Static replay of `distribution` on `arch`, sized like a full search run of
/// `config`. With a different architecture than the search used this is the
/// cross-model transfer experiment.
pub fn transfer_run(
    distribution: &SamplingDistribution,
    arch: Architecture,
    config: &SearchConfig,
    data: &Dataset,
) -> Result<(ModelState, EvalResult)> {
    let mut rng = RngStream::for_domain(config.seed, Domain::Static, 0, 0);
    let schedule = make_static_schedule(distribution, config.total_batches(), config.batch_size, &mut rng)?;
    replay_run(&schedule, arch, &config.trainer, data, config.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Condition {
    Uniform,
    Static,
    Dynamic,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Uniform, Condition::Static, Condition::Dynamic];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Condition::Uniform => "UNIFORM",
            Condition::Static => "STATIC",
            Condition::Dynamic => "DYNAMIC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: Condition,
    /// Final validation metric per seed, in seed order.
    pub metrics: Vec<f64>,
    /// Training samples consumed per seed.
    pub samples: Vec<usize>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<ConditionRow>,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ComparisonTable {
    pub fn row(&self, c: Condition) -> &ConditionRow {
        self.rows.iter().find(|r| r.condition == c).expect("all conditions present")
    }

    /// `condition,seed_<s>...,mean,std`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let mut header = vec!["condition".to_string()];
        header.extend(self.seeds.iter().map(|s| format!("seed_{s}")));
        header.extend(["mean".to_string(), "std".to_string()]);
        w.write_record(&header).map_err(csv_err(path))?;
        for r in &self.rows {
            let mut rec = vec![r.condition.to_string()];
            rec.extend(r.metrics.iter().map(|m| m.to_string()));
            rec.extend([r.mean.to_string(), r.std.to_string()]);
            w.write_record(&rec).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Per-seed results of the three conditions, before aggregation.
#[derive(Debug, Clone)]
pub struct SeedArms {
    pub seed: u64,
    pub uniform: EvalResult,
    pub static_: EvalResult,
    pub dynamic: EvalResult,
    pub samples: [usize; 3],
}

/// Runs the three conditions for one seed: the search itself (DYNAMIC), a
/// static replay of the distribution it learned (STATIC), and plain uniform
/// training (UNIFORM). All three consume the same number of samples and start
/// from the same weights.
pub fn run_condition_arms(config: &SearchConfig, data: &Dataset, source: StaticSource) -> Result<SeedArms> {
    config.validate()?;
    let arch = config.architecture(data.feature_dim(), data.num_classes());
    let search = run_autosampling(config, data)?;

    let p = static_distribution(&search.schedule, source, config.smoothing)?;
    let mut rng = RngStream::for_domain(config.seed, Domain::Static, 0, 0);
    let static_sched = make_static_schedule(&p, config.total_batches(), config.batch_size, &mut rng)?;
    let (_, static_eval) = replay_run(&static_sched, arch, &config.trainer, data, config.seed)?;

    let uniform_sched = uniform_run_schedule(config, data.num_samples())?;
    let (_, uniform_eval) = replay_run(&uniform_sched, arch, &config.trainer, data, config.seed)?;

    Ok(SeedArms {
        seed: config.seed,
        uniform: uniform_eval,
        static_: static_eval,
        dynamic: search.final_eval,
        samples: [uniform_sched.num_samples(), static_sched.num_samples(), search.schedule.num_samples()],
    })
}

/// UNIFORM / STATIC / DYNAMIC over several seeds, with mean and standard
/// deviation per condition.
pub fn compare_conditions(config: &SearchConfig, data: &Dataset, seeds: &[u64]) -> Result<ComparisonTable> {
    compare_conditions_with(config, data, seeds, StaticSource::FullRun)
}

pub fn compare_conditions_with(
    config: &SearchConfig,
    data: &Dataset,
    seeds: &[u64],
    source: StaticSource,
) -> Result<ComparisonTable> {
    if seeds.len() < 2 {
        return Err(Error::param("seeds", "need at least two seeds"));
    }
    let arms = seeds
        .iter()
        .map(|&seed| run_condition_arms(&SearchConfig { seed, ..config.clone() }, data, source))
        .collect::<Result<Vec<_>>>()?;
    let rows = Condition::ALL
        .iter()
        .enumerate()
        .map(|(k, &condition)| {
            let metrics: Vec<f64> = arms
                .iter()
                .map(|a| match condition {
                    Condition::Uniform => a.uniform.metric,
                    Condition::Static => a.static_.metric,
                    Condition::Dynamic => a.dynamic.metric,
                })
                .collect();
            let (mean, std) = mean_std(&metrics);
            ConditionRow { condition, samples: arms.iter().map(|a| a.samples[k]).collect(), metrics, mean, std }
        })
        .collect();
    Ok(ComparisonTable { seeds: seeds.to_vec(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::draw_uniform_epoch_schedule;
    use crate::schedule::MiniBatch;

    #[test]
    fn one_epoch_histogram_is_flat() {
        let mut rng = RngStream::for_domain(1, Domain::User(0), 0, 0);
        let s = draw_uniform_epoch_schedule(100, 10, 10, &mut rng).unwrap();
        let h = segment_histogram(&s, 100, 10).unwrap();
        assert!(h.counts.iter().all(|&c| c == 10));
        assert_eq!(h.total(), 100);
    }

    #[test]
    fn point_mass_histogram() {
        let mut s = SamplingSchedule::new(100, 5).unwrap();
        for _ in 0..4 {
            s.push(MiniBatch::from_indices([0; 5]), Provenance::Static).unwrap();
        }
        let h = segment_histogram(&s, 100, 10).unwrap();
        assert_eq!(h.counts[0], 20);
        assert!(h.counts[1..].iter().all(|&c| c == 0));
        assert!(segment_histogram(&s, 100, 7).is_err());
    }

    #[test]
    fn reference_ordering() {
        let a = SegmentHistogram { num_segments: 3, counts: vec![1, 5, 3], ordering: vec![0, 1, 2] };
        let b = SegmentHistogram { num_segments: 3, counts: vec![2, 2, 2], ordering: vec![0, 1, 2] }.ordered_like(&a);
        assert_eq!(b.ordering, vec![1, 2, 0]);
        let c = SegmentHistogram { counts: vec![7, 8, 9], ..b };
        assert_eq!(c.ordered_counts(), vec![8, 9, 7]);
        assert_eq!(a.clone().ordered_like(&a).ordered_counts(), vec![5, 3, 1]);
    }

    #[test]
    fn pearson_edge_cases() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        let xs = [1.0, 4.0, 2.0, 8.0];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn freq_loss_constant_frequency_is_undefined() {
        let mut s = SamplingSchedule::new(4, 4).unwrap();
        s.push(MiniBatch::from_indices([0, 1, 2, 3]), Provenance::Static).unwrap();
        let t = frequency_loss_table(&s, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(t.correlation, None);
        assert_eq!(t.correlation_label(), "undefined");
        assert_eq!(t.total_frequency(), 4);
        assert!(frequency_loss_table(&s, &[0.1]).is_err());
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
