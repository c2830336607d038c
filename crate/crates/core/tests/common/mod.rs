//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use autosampling::dataset::Dataset;
use autosampling::distribution::SamplingDistribution;
use autosampling::rng::{Domain, RngStream};
use autosampling::sampling::estimate_distribution;
use autosampling::schedule::{MiniBatch, Provenance, SampleId, SamplingSchedule};
use autosampling::search::{
    exploit, explore, initial_model, run_interval, ChildState, ExploitRecord, ExplorationType, SearchConfig,
};
use autosampling::trainer::{
    batch_loss, eval_subset_indices, gen_synthetic_dataset, BuiltinLearner, Learner, LrSchedule, ModelState,
    SyntheticSpec, TrainHyper,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 5 clusters, 2000 training rows (500 originals x4), 20% flipped labels.
pub fn reference_spec() -> SyntheticSpec {
    SyntheticSpec {
        num_clusters: 5,
        samples_per_cluster: 200,
        feature_dim: 10,
        separation: 2.0,
        redundancy_factor: 4,
        label_noise_fraction: 0.2,
        val_fraction: 0.5,
    }
}

pub fn tiny_spec() -> SyntheticSpec {
    SyntheticSpec {
        num_clusters: 3,
        samples_per_cluster: 20,
        feature_dim: 4,
        separation: 3.0,
        redundancy_factor: 2,
        label_noise_fraction: 0.1,
        val_fraction: 0.5,
    }
}

pub fn dataset(spec: &SyntheticSpec, seed: u64) -> Dataset {
    gen_synthetic_dataset(spec, &mut RngStream::for_domain(seed, Domain::Dataset, 0, 0)).unwrap().dataset
}

/// Settings used by the desk-scale accuracy comparisons: 1000 steps with the
/// learning rate cut tenfold at 50% and 75% of training.
pub fn reference_config(seed: u64, exploration: ExplorationType) -> SearchConfig {
    SearchConfig {
        population_size: 8,
        intervals_per_exploitation: 10,
        interval_len: 10,
        batch_size: 20,
        total_alternations: 10,
        exploration,
        seed,
        trainer: TrainHyper {
            base_lr: 0.1,
            momentum: 0.9,
            schedule: LrSchedule::StepDecay { factor: 0.1, boundaries: vec![500, 750] },
        },
        ..Default::default()
    }
}

pub fn small_config(seed: u64) -> SearchConfig {
    SearchConfig {
        population_size: 3,
        intervals_per_exploitation: 2,
        interval_len: 3,
        batch_size: 4,
        total_alternations: 3,
        seed,
        ..Default::default()
    }
}

/// Random schedule with i.i.d. ids from a skewed base distribution.
pub fn random_schedule<R: Rng>(
    rng: &mut R,
    dataset_size: usize,
    batch_size: usize,
    batches: usize,
) -> SamplingSchedule {
    let hot = rng.random_range(0..dataset_size);
    let mut s = SamplingSchedule::new(dataset_size, batch_size).unwrap();
    for _ in 0..batches {
        let ids = (0..batch_size).map(|_| {
            if rng.random_bool(0.3) {
                hot as u32
            } else {
                rng.random_range(0..dataset_size as u32)
            }
        });
        s.push(MiniBatch::from_indices(ids), Provenance::Static).unwrap();
    }
    s
}

/// Appearance frequencies by sorting the ids and measuring runs.
pub fn brute_force_estimate(schedule: &SamplingSchedule, dataset_size: usize) -> Vec<f64> {
    let mut ids: Vec<u32> = schedule.batches().iter().flat_map(|b| b.ids().iter().map(|s| s.0)).collect();
    ids.sort_unstable();
    let total = ids.len() as f64;
    let mut out = vec![0.0; dataset_size];
    let mut i = 0;
    while i < ids.len() {
        let mut j = i;
        while j < ids.len() && ids[j] == ids[i] {
            j += 1;
        }
        out[ids[i] as usize] = (j - i) as f64 / total;
        i = j;
    }
    out
}

/// Log-smoothing mixed with `n_uniform` uniform components, written out
/// directly from the formula.
pub fn smoothing_oracle(p: &[f64], beta: f64, n_uniform: u32) -> Vec<f64> {
    let logs: Vec<f64> = p.iter().map(|&x| (x + beta).ln()).collect();
    let z: f64 = logs.iter().sum();
    let n = p.len() as f64;
    let nu = n_uniform as f64;
    logs.iter().map(|l| (l / z) / (nu + 1.0) + nu / ((nu + 1.0) * n)).collect()
}

/// Central finite-difference gradient of the mean batch loss.
pub fn fd_gradient(model: &ModelState, ids: &[SampleId], data: &Dataset, h: f64) -> Vec<f64> {
    let arch = model.architecture();
    let base = model.weights().to_vec();
    let zeros = vec![0.0; base.len()];
    let loss_at = |w: Vec<f64>| {
        let m = ModelState::from_parts(arch, w, zeros.clone(), 0).unwrap();
        batch_loss(&m, ids, data).unwrap()
    };
    (0..base.len())
        .map(|i| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i] += h;
            minus[i] -= h;
            (loss_at(plus) - loss_at(minus)) / (2.0 * h)
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation computed in two passes.
pub fn pearson_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Re-drives the search loop one exploit at a time, asserting after each
/// exploit that every child holds the same bytes. Returns the records.
pub fn drive_and_check(config: &SearchConfig, data: &Dataset) -> (Vec<ExploitRecord>, SamplingSchedule) {
    let learner = BuiltinLearner::new(config.trainer.clone());
    let n = data.num_samples();
    let init = initial_model(config, data).unwrap();
    let mut pop: Vec<ChildState<_>> = Vec::new();
    let mut dist = SamplingDistribution::uniform(n).unwrap();
    let mut last: Option<SamplingSchedule> = None;
    let mut records = Vec::new();
    let mut full = SamplingSchedule::new(n, config.batch_size).unwrap();
    for alt in 0..config.total_alternations {
        let ex = explore(last.as_ref(), &dist, config, n, alt).unwrap();
        let (plans, streams): (Vec<_>, Vec<_>) = ex.schedules.into_iter().unzip();
        if pop.is_empty() {
            pop = streams
                .into_iter()
                .enumerate()
                .map(|(worker, rng)| ChildState {
                    worker,
                    model: init.clone(),
                    sub_schedule: SamplingSchedule::new(n, config.batch_size).unwrap(),
                    rng,
                })
                .collect();
        } else {
            for (c, r) in pop.iter_mut().zip(streams) {
                c.rng = r;
            }
        }
        let chunks: Vec<Vec<SamplingSchedule>> = plans.iter().map(|p| p.chunks(config.interval_len)).collect();
        let mut h = SamplingSchedule::new(n, config.batch_size).unwrap();
        for t in 0..config.intervals_per_exploitation {
            for (c, ch) in pop.iter_mut().zip(&chunks) {
                c.sub_schedule = ch[t].clone();
                run_interval(&learner, c, data).unwrap();
            }
            let mut er = RngStream::for_domain(config.seed, Domain::Eval, t as u32, alt as u32);
            let subset = eval_subset_indices(data.num_val(), config.eval_subset, &mut er);
            let rec = exploit(&learner, &mut pop, data, subset.as_deref(), alt, t, None).unwrap();
            let bytes = learner.encode_state(&pop[0].model);
            assert!(pop.iter().all(|c| learner.encode_state(&c.model) == bytes), "alt {alt} interval {t}");
            h.extend_from(&rec.winner_schedule).unwrap();
            records.push(rec);
        }
        full.extend_from(&h).unwrap();
        dist = estimate_distribution(&h, n).unwrap();
        last = Some(h);
    }
    (records, full)
}

/// Winner metric is the maximum and the lowest index wins ties.
pub fn check_records(records: &[ExploitRecord]) {
    for r in records {
        let max = r.metrics.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.winner_metric.to_bits(), max.to_bits());
        assert_eq!(r.winner, r.metrics.iter().position(|&m| m == max).unwrap(), "lowest index wins ties");
    }
}
