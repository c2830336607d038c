//! Population-based search over data sampling schedules.
//!
//! A run alternates two steps. Exploration turns the most recent winning
//! schedule into a sampling distribution, smooths it, and draws a fresh
//! schedule for every worker. Multi-exploitation then trains all children for
//! `T` short intervals of `N_s` batches; after each interval every child is
//! scored on validation data, the best child's sub-schedule is appended to the
//! winning schedule and its full training state is copied into every other
//! child.

mod config;
mod run_log;

pub use config::{ExplorationType, SearchConfig};
pub use run_log::{ExploitRecord, RunLog};

use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::dataset::Dataset;
use crate::distribution::SamplingDistribution;
use crate::error::{Error, Result};
use crate::rng::{Domain, RngStream};
use crate::sampling::{
    draw_schedule, draw_uniform_epoch_schedule, draw_union_schedule, estimate_distribution, smooth_distribution,
    MixtureMode,
};
use crate::schedule::{Provenance, SamplingSchedule};
use crate::trainer::{eval_subset_indices, init_model, BuiltinLearner, EvalResult, Learner, ModelState};

/// One population member.
#[derive(Debug, Clone)]
pub struct ChildState<S> {
    pub worker: usize,
    pub model: S,
    /// Batches for the current interval.
    pub sub_schedule: SamplingSchedule,
    /// Stream the child's schedule for this alternation was drawn from.
    pub rng: RngStream,
}

/// Trains `child` on every batch of its sub-schedule, in order.
pub fn run_interval<L: Learner>(learner: &L, child: &mut ChildState<L::State>, data: &Dataset) -> Result<()> {
    for batch in child.sub_schedule.batches() {
        learner.train_step(&mut child.model, batch, data)?;
    }
    Ok(())
}

/// Index of the largest metric; the lowest index wins ties.
pub fn select_winner(metrics: &[f64]) -> usize {
    let mut best = 0;
    for (i, &m) in metrics.iter().enumerate().skip(1) {
        if m > metrics[best] {
            best = i;
        }
    }
    best
}

/// Scores every child, records the winner, and copies the winner's full state
/// into all children.
pub fn exploit<L: Learner>(
    learner: &L,
    population: &mut [ChildState<L::State>],
    data: &Dataset,
    eval_indices: Option<&[usize]>,
    alternation: usize,
    interval: usize,
    pool: Option<&ThreadPool>,
) -> Result<ExploitRecord> {
    if population.is_empty() {
        return Err(Error::param("population", "must not be empty"));
    }
    let score = |c: &ChildState<L::State>| learner.evaluate(&c.model, data, eval_indices);
    let results: Vec<EvalResult> = match pool {
        Some(pool) => pool.install(|| population.par_iter().map(score).collect::<Result<_>>())?,
        None => population.iter().map(score).collect::<Result<_>>()?,
    };
    let metrics: Vec<f64> = results.iter().map(|r| r.metric).collect();
    let winner = select_winner(&metrics);
    let winner_state = population[winner].model.clone();
    let winner_schedule = population[winner].sub_schedule.clone();
    for (i, c) in population.iter_mut().enumerate() {
        if i != winner {
            c.model = winner_state.clone();
        }
    }
    Ok(ExploitRecord { alternation, interval, winner, winner_metric: metrics[winner], metrics, winner_schedule })
}

/// Runs `T` exploitation intervals. `plans[i]` is child `i`'s full schedule
/// for this step; it is cut into `T` sub-schedules of `N_s` batches. Returns
/// the concatenated winning sub-schedules and one record per interval.
pub fn multi_exploitation<L: Learner>(
    learner: &L,
    population: &mut [ChildState<L::State>],
    plans: &[SamplingSchedule],
    config: &SearchConfig,
    data: &Dataset,
    alternation: usize,
    pool: Option<&ThreadPool>,
) -> Result<(SamplingSchedule, Vec<ExploitRecord>)> {
    let (t_count, n_s) = (config.intervals_per_exploitation, config.interval_len);
    if plans.len() != population.len() {
        return Err(Error::Dimension(format!("{} plans for {} children", plans.len(), population.len())));
    }
    let mut pieces = Vec::with_capacity(plans.len());
    for plan in plans {
        if plan.num_batches() != t_count * n_s {
            return Err(Error::Dimension(format!(
                "child plan has {} batches, expected {}",
                plan.num_batches(),
                t_count * n_s
            )));
        }
        pieces.push(plan.chunks(n_s));
    }

    let mut h_star = SamplingSchedule::new(data.num_samples(), config.batch_size)?;
    let mut records = Vec::with_capacity(t_count);
    for t in 0..t_count {
        for (child, sub) in population.iter_mut().zip(&pieces) {
            child.sub_schedule = sub[t].clone();
        }
        let train = |c: &mut ChildState<L::State>| run_interval(learner, c, data);
        match pool {
            Some(pool) => pool.install(|| population.par_iter_mut().try_for_each(train)),
            None => population.iter_mut().try_for_each(train),
        }
        .map_err(|e| e.at(alternation, t))?;

        let mut eval_rng = RngStream::for_domain(config.seed, Domain::Eval, t as u32, alternation as u32);
        let subset = eval_subset_indices(data.num_val(), config.eval_subset, &mut eval_rng);
        let record = exploit(learner, population, data, subset.as_deref(), alternation, t, pool)
            .map_err(|e| e.at(alternation, t))?;
        h_star.extend_from(&record.winner_schedule)?;
        records.push(record);
    }
    Ok((h_star, records))
}

/// Per-worker schedules for the next multi-exploitation plus the
/// distributions behind them.
#[derive(Debug, Clone)]
pub struct Exploration {
    /// One `(schedule, stream)` per worker; schedules hold `T * N_s` batches.
    pub schedules: Vec<(SamplingSchedule, RngStream)>,
    /// Count-based estimate the schedules were derived from.
    pub estimated: SamplingDistribution,
    /// Distribution the schedules were drawn from.
    pub sampled_from: SamplingDistribution,
}

/// The whole-run shuffled-epoch schedule used by uniform exploration and the
/// plain training baseline.
pub fn uniform_run_schedule(config: &SearchConfig, dataset_size: usize) -> Result<SamplingSchedule> {
    let mut rng = RngStream::for_domain(config.seed, Domain::UniformRun, 0, 0);
    draw_uniform_epoch_schedule(dataset_size, config.total_batches(), config.batch_size, &mut rng)
}

/// Generates the schedules for alternation `alternation`.
///
/// `h_star` is the winning schedule of the previous alternation, if any, and
/// `prev` the distribution in force before this step (uniform initially).
pub fn explore(
    h_star: Option<&SamplingSchedule>,
    prev: &SamplingDistribution,
    config: &SearchConfig,
    dataset_size: usize,
    alternation: usize,
) -> Result<Exploration> {
    let per_child = config.batches_per_alternation();
    let stream = |i: usize| RngStream::for_domain(config.seed, Domain::Explore, i as u32, alternation as u32);
    let tag = Provenance::Alternation(alternation as u32);

    match config.exploration {
        ExplorationType::Uniform => {
            let whole = uniform_run_schedule(config, dataset_size)?;
            let start = alternation * per_child;
            let schedule = whole.slice(start, start + per_child).with_provenance(tag);
            let rng = RngStream::for_domain(config.seed, Domain::UniformRun, 0, 0);
            Ok(Exploration { schedules: vec![(schedule, rng)], estimated: prev.clone(), sampled_from: prev.clone() })
        }
        ExplorationType::Random => random_exploration(config, dataset_size, per_child, prev, stream, tag),
        ExplorationType::Mixture if config.in_warmup(alternation) => {
            random_exploration(config, dataset_size, per_child, prev, stream, tag)
        }
        ExplorationType::Mixture => {
            let estimated = match h_star {
                Some(h) if !h.is_empty() => estimate_distribution(h, dataset_size)?,
                _ => prev.clone(),
            };
            let smoothed = smooth_distribution(&estimated, config.smoothing)?;
            let schedules = (0..config.effective_population())
                .map(|i| {
                    let mut rng = stream(i);
                    let s = match config.mixture_mode {
                        MixtureMode::PerDraw => draw_schedule(&smoothed, per_child, config.batch_size, &mut rng)?,
                        MixtureMode::Union => {
                            draw_union_schedule(&estimated, config.smoothing, per_child, config.batch_size, &mut rng)?
                        }
                    };
                    Ok((s.with_provenance(tag), rng))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Exploration { schedules, estimated, sampled_from: smoothed })
        }
    }
}

fn random_exploration(
    config: &SearchConfig,
    dataset_size: usize,
    per_child: usize,
    prev: &SamplingDistribution,
    stream: impl Fn(usize) -> RngStream,
    tag: Provenance,
) -> Result<Exploration> {
    let schedules = (0..config.effective_population())
        .map(|i| {
            let mut rng = stream(i);
            let s = draw_uniform_epoch_schedule(dataset_size, per_child, config.batch_size, &mut rng)?;
            Ok((s.with_provenance(tag), rng))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Exploration { schedules, estimated: prev.clone(), sampled_from: SamplingDistribution::uniform(dataset_size)? })
}

/// Everything a search run produces.
#[derive(Debug, Clone)]
pub struct SearchOutcome<S> {
    /// Concatenation of every alternation's winning schedule.
    pub schedule: SamplingSchedule,
    /// Count-based estimate from the last alternation's winning schedule.
    pub distribution: SamplingDistribution,
    /// Winner state after the final exploit.
    pub model: S,
    /// Score of `model` on the full validation split.
    pub final_eval: EvalResult,
    pub log: RunLog,
}

/// Initial weights every run derives from `seed`.
pub fn initial_model(config: &SearchConfig, data: &Dataset) -> Result<ModelState> {
    let arch = config.architecture(data.feature_dim(), data.num_classes());
    init_model(arch, &mut RngStream::for_domain(config.seed, Domain::ModelInit, 0, 0))
}

fn build_pool(threads: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs the full search with any learner, starting every child from `initial`.
pub fn run_autosampling_with<L: Learner>(
    learner: &L,
    initial: L::State,
    config: &SearchConfig,
    data: &Dataset,
) -> Result<SearchOutcome<L::State>> {
    config.validate()?;
    if data.num_samples() < config.batch_size {
        return Err(Error::param("batch_size", "exceeds the number of training samples"));
    }
    let pool = build_pool(config.worker_threads())?;
    let n = data.num_samples();
    let start = Instant::now();

    let mut population: Vec<ChildState<L::State>> = Vec::new();
    let mut distribution = SamplingDistribution::uniform(n)?;
    let mut last_h: Option<SamplingSchedule> = None;
    let mut full = SamplingSchedule::new(n, config.batch_size)?;
    let mut log = RunLog::default();

    for alt in 0..config.total_alternations {
        let exploration = explore(last_h.as_ref(), &distribution, config, n, alt).map_err(|e| e.at(alt, 0))?;
        let (plans, streams): (Vec<_>, Vec<_>) = exploration.schedules.into_iter().unzip();
        if population.is_empty() {
            population = streams
                .into_iter()
                .enumerate()
                .map(|(worker, rng)| ChildState {
                    worker,
                    model: initial.clone(),
                    sub_schedule: SamplingSchedule::new(n, config.batch_size).expect("validated sizes"),
                    rng,
                })
                .collect();
        } else {
            for (c, rng) in population.iter_mut().zip(streams) {
                c.rng = rng;
            }
        }

        let (h_star, records) = multi_exploitation(learner, &mut population, &plans, config, data, alt, Some(&pool))?;
        let elapsed = start.elapsed().as_millis() as u64;
        for r in records {
            log.push(r, elapsed);
        }
        full.extend_from(&h_star)?;
        distribution = estimate_distribution(&h_star, n).map_err(|e| e.at(alt, config.intervals_per_exploitation))?;
        last_h = Some(h_star);
    }

    let model = population.swap_remove(0).model;
    let final_eval = learner.evaluate(&model, data, None)?;
    Ok(SearchOutcome { schedule: full, distribution, model, final_eval, log })
}

/// Runs the full search with the built-in learner.
pub fn run_autosampling(config: &SearchConfig, data: &Dataset) -> Result<SearchOutcome<ModelState>> {
    let learner = BuiltinLearner::new(config.trainer.clone());
    let initial = initial_model(config, data)?;
    run_autosampling_with(&learner, initial, config, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::MiniBatch;
    use crate::trainer::{gen_synthetic_dataset, SyntheticSpec, TrainHyper};

    fn data() -> Dataset {
        let spec = SyntheticSpec { samples_per_cluster: 40, feature_dim: 4, ..Default::default() };
        gen_synthetic_dataset(&spec, &mut RngStream::for_domain(3, Domain::Dataset, 0, 0)).unwrap().dataset
    }

    fn child(worker: usize, model: ModelState, ids: &[u32], n: usize) -> ChildState<ModelState> {
        let mut s = SamplingSchedule::new(n, ids.len()).unwrap();
        s.push(MiniBatch::from_indices(ids.iter().copied()), Provenance::Alternation(0)).unwrap();
        ChildState { worker, model, sub_schedule: s, rng: RngStream::for_domain(0, Domain::Explore, worker as u32, 0) }
    }

    #[test]
    fn winner_selection() {
        assert_eq!(select_winner(&[0.5, 0.9, 0.7]), 1);
        assert_eq!(select_winner(&[0.8, 0.8]), 0);
        assert_eq!(select_winner(&[0.1]), 0);
        assert_eq!(select_winner(&[0.2, 0.3, 0.3]), 1);
    }

    #[test]
    fn interval_counts_steps() {
        let d = data();
        let cfg = SearchConfig { hidden_dim: None, ..Default::default() };
        let learner = BuiltinLearner::new(TrainHyper::default());
        let m = initial_model(&cfg, &d).unwrap();
        let mut c = child(0, m.clone(), &[0, 1, 2], d.num_samples());
        run_interval(&learner, &mut c, &d).unwrap();
        assert_eq!(c.model.step(), m.step() + 1);
        let mut twin = child(1, m, &[0, 1, 2], d.num_samples());
        run_interval(&learner, &mut twin, &d).unwrap();
        assert_eq!(c.model, twin.model);
    }

    #[test]
    fn exploit_broadcasts_full_state() {
        let d = data();
        let cfg = SearchConfig::default();
        let learner = BuiltinLearner::new(TrainHyper::default());
        let m = initial_model(&cfg, &d).unwrap();
        let n = d.num_samples();
        let mut pop: Vec<_> = (0..3).map(|i| child(i, m.clone(), &[i as u32, 5, 7], n)).collect();
        for c in &mut pop {
            run_interval(&learner, c, &d).unwrap();
        }
        let rec = exploit(&learner, &mut pop, &d, None, 0, 0, None).unwrap();
        assert_eq!(rec.winner_metric, rec.metrics[rec.winner]);
        assert!(rec.metrics.iter().all(|&m| m <= rec.winner_metric));
        let bytes = learner.encode_state(&pop[0].model);
        assert!(pop.iter().all(|c| learner.encode_state(&c.model) == bytes));
        assert_eq!(rec.winner_schedule, pop[rec.winner].sub_schedule);
    }

    #[test]
    fn singleton_exploit_is_noop() {
        let d = data();
        let learner = BuiltinLearner::new(TrainHyper::default());
        let m = initial_model(&SearchConfig::default(), &d).unwrap();
        let mut pop = vec![child(0, m.clone(), &[1, 2], d.num_samples())];
        let rec = exploit(&learner, &mut pop, &d, None, 0, 0, None).unwrap();
        assert_eq!(rec.winner, 0);
        assert_eq!(pop[0].model, m);
    }

    #[test]
    fn random_exploration_ignores_h_star() {
        let cfg = SearchConfig {
            exploration: ExplorationType::Random,
            population_size: 3,
            intervals_per_exploitation: 2,
            interval_len: 2,
            batch_size: 4,
            ..Default::default()
        };
        let n = 50;
        let uniform = SamplingDistribution::uniform(n).unwrap();
        let mut skewed = SamplingSchedule::new(n, 4).unwrap();
        skewed.push(MiniBatch::from_indices([0, 0, 0, 0]), Provenance::Alternation(0)).unwrap();
        let a = explore(Some(&skewed), &uniform, &cfg, n, 1).unwrap();
        let b = explore(None, &uniform, &cfg, n, 1).unwrap();
        assert_eq!(a.schedules.len(), 3);
        for ((sa, _), (sb, _)) in a.schedules.iter().zip(&b.schedules) {
            assert_eq!(sa, sb);
            assert_eq!(sa.num_batches(), 4);
        }
        assert_ne!(a.schedules[0].0, a.schedules[1].0);
    }

    #[test]
    fn mixture_with_uniform_counts_is_uniform() {
        let cfg = SearchConfig {
            exploration: ExplorationType::Mixture,
            population_size: 2,
            intervals_per_exploitation: 1,
            interval_len: 5,
            batch_size: 4,
            ..Default::default()
        };
        let n = 20;
        let mut h = SamplingSchedule::new(n, 4).unwrap();
        for b in 0..5u32 {
            h.push(MiniBatch::from_indices((0..4).map(|k| b * 4 + k)), Provenance::Alternation(0)).unwrap();
        }
        let uniform = SamplingDistribution::uniform(n).unwrap();
        let e = explore(Some(&h), &uniform, &cfg, n, 1).unwrap();
        assert!(e.sampled_from.max_abs_diff(&uniform) < 1e-12);
        assert!(e.estimated.max_abs_diff(&uniform) < 1e-12);
    }

    #[test]
    fn mixture_warmup_behaves_as_random() {
        let base = SearchConfig {
            population_size: 2,
            intervals_per_exploitation: 2,
            interval_len: 2,
            batch_size: 4,
            warmup_batches: 5,
            ..Default::default()
        };
        let mix = SearchConfig { exploration: ExplorationType::Mixture, ..base.clone() };
        let rnd = SearchConfig { exploration: ExplorationType::Random, ..base };
        let n = 30;
        let u = SamplingDistribution::uniform(n).unwrap();
        for alt in 0..2 {
            let a = explore(None, &u, &mix, n, alt).unwrap();
            let b = explore(None, &u, &rnd, n, alt).unwrap();
            assert_eq!(a.schedules[0].0, b.schedules[0].0);
        }
        let mut h = SamplingSchedule::new(n, 4).unwrap();
        h.push(MiniBatch::from_indices([3, 3, 3, 3]), Provenance::Alternation(1)).unwrap();
        let after = explore(Some(&h), &u, &mix, n, 2).unwrap();
        assert!(after.estimated.get(3) == 1.0);
        assert!(after.sampled_from.get(3) > after.sampled_from.get(4));
    }

    #[test]
    fn run_counts_and_determinism() {
        let d = data();
        let cfg = SearchConfig {
            population_size: 3,
            intervals_per_exploitation: 2,
            interval_len: 3,
            batch_size: 8,
            total_alternations: 3,
            exploration: ExplorationType::Mixture,
            trainer: TrainHyper { base_lr: 0.05, ..Default::default() },
            ..Default::default()
        };
        let a = run_autosampling(&cfg, &d).unwrap();
        assert_eq!(a.schedule.num_samples(), 3 * 2 * 3 * 8);
        assert_eq!(a.log.records.len(), 6);
        assert_eq!(a.model.step(), 18);
        let b = run_autosampling(&cfg, &d).unwrap();
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.distribution, b.distribution);
        assert_eq!(a.log.records, b.log.records);
        assert_eq!(a.model, b.model);
        for alt in 0..3u32 {
            assert_eq!(a.schedule.alternation(alt).num_batches(), 6);
        }
    }

    #[test]
    fn search_errors_carry_coordinates() {
        let d = data();
        let cfg = SearchConfig {
            population_size: 2,
            intervals_per_exploitation: 2,
            interval_len: 2,
            batch_size: 4,
            total_alternations: 1,
            trainer: TrainHyper { base_lr: 1e308, momentum: 0.0, ..Default::default() },
            ..Default::default()
        };
        match run_autosampling(&cfg, &d) {
            Err(Error::Search { alternation: 0, interval, .. }) => assert!(interval < 2),
            other => panic!("{other:?}"),
        }
    }
}
