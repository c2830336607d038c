//! Distribution math over dataset indices: count-based estimation from a
//! schedule, log + uniform-mixture smoothing, and schedule drawing.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::SamplingDistribution;
use crate::error::{Error, Result};
use crate::schedule::{MiniBatch, Provenance, SampleId, SamplingSchedule};

/// Smoothing strength `beta` (>= 1) and number of uniform mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingParams {
    pub beta: f64,
    pub n_uniform: u32,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams { beta: 1.0, n_uniform: 3 }
    }
}

impl SmoothingParams {
    pub fn new(beta: f64, n_uniform: u32) -> Result<Self> {
        let p = SmoothingParams { beta, n_uniform };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::param("beta", format!("must be a finite value >= 1, got {}", self.beta)));
        }
        Ok(())
    }

    /// Weight of the log-smoothed component; the uniform part gets the rest.
    pub fn log_weight(&self) -> f64 {
        1.0 / (self.n_uniform as f64 + 1.0)
    }

    /// Lower bound every smoothed probability satisfies.
    pub fn floor(&self, dataset_size: usize) -> f64 {
        (1.0 - self.log_weight()) / dataset_size as f64
    }
}

/// How the smoothed distribution turns into a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureMode {
    /// Every id is an i.i.d. draw from the mixture.
    #[default]
    PerDraw,
    /// One segment drawn from the log-smoothed part, the rest from shuffled
    /// uniform epochs, then the union is shuffled.
    Union,
}

/// Empirical frequency of every id in `schedule`.
pub fn estimate_distribution(schedule: &SamplingSchedule, dataset_size: usize) -> Result<SamplingDistribution> {
    if dataset_size == 0 {
        return Err(Error::param("dataset_size", "must be at least 1"));
    }
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut counts = vec![0u64; dataset_size];
    let mut total = 0u64;
    for id in schedule.ids() {
        let slot = counts.get_mut(id.index()).ok_or(Error::IdOutOfRange { id: id.0, dataset_size })?;
        *slot += 1;
        total += 1;
    }
    let total = total as f64;
    SamplingDistribution::new(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// `log(p + beta)` renormalized to a distribution.
pub fn log_smooth(p: &SamplingDistribution, beta: f64) -> Result<Vec<f64>> {
    let logs: Vec<f64> = p.probs().iter().map(|&x| (x + beta).ln()).collect();
    let total: f64 = logs.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "log-smoothed mass {total} cannot be normalized (beta = {beta})"
        )));
    }
    Ok(logs.into_iter().map(|l| l / total).collect())
}

/// Log-smooths `p` and mixes it with `n_uniform` uniform components of equal
/// weight: `P'(x) = q(x)/(N_u+1) + N_u/((N_u+1)|D|)`.
pub fn smooth_distribution(p: &SamplingDistribution, params: SmoothingParams) -> Result<SamplingDistribution> {
    params.validate()?;
    let q = log_smooth(p, params.beta)?;
    if params.n_uniform == 0 && q.contains(&0.0) {
        warn!("smoothing with n_uniform = 0 leaves zero-probability samples");
    }
    let w = params.log_weight();
    let u = params.floor(p.len());
    let mut out: Vec<f64> = q.iter().map(|&qx| w * qx + u).collect();
    // absorb rounding so the mass check holds tightly
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    SamplingDistribution::new(out)
}

/// Inverse-CDF sampler over a fixed distribution.
#[derive(Debug, Clone)]
pub struct CumulativeSampler {
    cumulative: Vec<f64>,
}

impl CumulativeSampler {
    pub fn new(p: &SamplingDistribution) -> Self {
        let mut acc = 0.0;
        let cumulative = p
            .probs()
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        CumulativeSampler { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleId {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        // u < total so i is in range; guard against rounding anyway
        SampleId(i.min(self.cumulative.len() - 1) as u32)
    }
}

fn check_sizes(num_batches: usize, batch_size: usize) -> Result<()> {
    if num_batches == 0 {
        return Err(Error::param("num_batches", "must be at least 1"));
    }
    if batch_size == 0 {
        return Err(Error::param("batch_size", "must be at least 1"));
    }
    Ok(())
}

/// `num_batches` batches of i.i.d. draws (with replacement) from `p`, tagged
/// [`Provenance::Static`].
pub fn draw_schedule<R: Rng + ?Sized>(
    p: &SamplingDistribution,
    num_batches: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<SamplingSchedule> {
    check_sizes(num_batches, batch_size)?;
    let sampler = CumulativeSampler::new(p);
    let mut out = SamplingSchedule::new(p.len(), batch_size)?;
    for _ in 0..num_batches {
        let ids = (0..batch_size).map(|_| sampler.sample(rng)).collect();
        out.push(MiniBatch(ids), Provenance::Static)?;
    }
    Ok(out)
}

/// Concatenated shuffled permutations of the whole dataset, chopped into
/// batches. The unused tail of the last permutation is dropped. Tagged
/// [`Provenance::Uniform`].
pub fn draw_uniform_epoch_schedule<R: Rng + ?Sized>(
    dataset_size: usize,
    num_batches: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<SamplingSchedule> {
    check_sizes(num_batches, batch_size)?;
    if dataset_size < batch_size {
        return Err(Error::param("batch_size", format!("batch size {batch_size} exceeds dataset size {dataset_size}")));
    }
    let mut out = SamplingSchedule::new(dataset_size, batch_size)?;
    let mut epoch: Vec<u32> = (0..dataset_size as u32).collect();
    let mut pos = dataset_size;
    for _ in 0..num_batches {
        let mut ids = Vec::with_capacity(batch_size);
        while ids.len() < batch_size {
            if pos == dataset_size {
                epoch.sort_unstable();
                epoch.shuffle(rng);
                pos = 0;
            }
            let take = (batch_size - ids.len()).min(dataset_size - pos);
            ids.extend(epoch[pos..pos + take].iter().map(|&i| SampleId(i)));
            pos += take;
        }
        out.push(MiniBatch(ids), Provenance::Uniform)?;
    }
    Ok(out)
}

/// Union-mode mixture: `1/(N_u+1)` of the samples drawn i.i.d. from the
/// log-smoothed estimate, the rest taken from shuffled uniform epochs, with the
/// union shuffled before chopping into batches.
pub fn draw_union_schedule<R: Rng + ?Sized>(
    p: &SamplingDistribution,
    params: SmoothingParams,
    num_batches: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<SamplingSchedule> {
    check_sizes(num_batches, batch_size)?;
    params.validate()?;
    let n = p.len();
    let total = num_batches * batch_size;
    let from_log = (total as f64 * params.log_weight()).round() as usize;
    let q = SamplingDistribution::new(log_smooth(p, params.beta)?)?;
    let sampler = CumulativeSampler::new(&q);
    let mut ids: Vec<SampleId> = (0..from_log).map(|_| sampler.sample(rng)).collect();
    let mut epoch: Vec<u32> = (0..n as u32).collect();
    while ids.len() < total {
        epoch.sort_unstable();
        epoch.shuffle(rng);
        let take = (total - ids.len()).min(n);
        ids.extend(epoch[..take].iter().map(|&i| SampleId(i)));
    }
    ids.shuffle(rng);
    let mut out = SamplingSchedule::new(n, batch_size)?;
    for chunk in ids.chunks_exact(batch_size) {
        out.push(MiniBatch(chunk.to_vec()), Provenance::Static)?;
    }
    Ok(out)
}
