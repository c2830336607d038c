//! Gaussian-cluster classification data with controllable redundancy and
//! label noise.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::schedule::SampleId;

/// Standard deviation of the jitter added to duplicated points.
pub const DUPLICATE_JITTER: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// One class per cluster.
    pub num_clusters: usize,
    /// Distinct points per cluster, before the validation split and duplication.
    pub samples_per_cluster: usize,
    pub feature_dim: usize,
    /// Distance of every cluster centre from the origin. Points have unit
    /// variance per dimension around their centre.
    pub separation: f64,
    /// Copies of every distinct training point (1 = no duplication).
    pub redundancy_factor: usize,
    /// Fraction of training samples whose label is flipped.
    pub label_noise_fraction: f64,
    /// Fraction of distinct points held out for validation.
    pub val_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
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
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::param("num_clusters", "must be at least 1"));
        }
        if self.samples_per_cluster == 0 {
            return Err(Error::param("samples_per_cluster", "must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::param("feature_dim", "must be at least 1"));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::param("separation", "must be positive"));
        }
        if self.redundancy_factor == 0 {
            return Err(Error::param("redundancy_factor", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.label_noise_fraction) {
            return Err(Error::param("label_noise_fraction", "must lie in [0, 1)"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::param("val_fraction", "must lie in (0, 1)"));
        }
        let (val, train) = self.split_sizes();
        if val == 0 || train == 0 {
            return Err(Error::param("val_fraction", "leaves an empty split"));
        }
        Ok(())
    }

    fn split_sizes(&self) -> (usize, usize) {
        let base = self.num_clusters * self.samples_per_cluster;
        let val = (base as f64 * self.val_fraction).round() as usize;
        (val, base.saturating_sub(val))
    }

    /// Number of training samples the spec produces.
    pub fn num_train(&self) -> usize {
        self.split_sizes().1 * self.redundancy_factor
    }

    pub fn num_flips(&self) -> usize {
        (self.label_noise_fraction * self.num_train() as f64 + 1e-9).floor() as usize
    }
}

/// A generated dataset plus ground truth about how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    /// Training ids whose label was flipped, ascending.
    pub flipped: Vec<SampleId>,
    /// Cluster of every training sample (its label before flipping).
    pub true_labels: Vec<u32>,
    /// Index of the distinct point each training sample duplicates.
    pub source_point: Vec<u32>,
}

pub fn gen_synthetic_dataset<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<SyntheticDataset> {
    spec.validate()?;
    let (c, d) = (spec.num_clusters, spec.feature_dim);
    let centres: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x * spec.separation / norm).collect()
        })
        .collect();

    let mut points: Vec<(Vec<f64>, u32)> = Vec::with_capacity(c * spec.samples_per_cluster);
    for (k, centre) in centres.iter().enumerate() {
        for _ in 0..spec.samples_per_cluster {
            let x: Vec<f64> = centre
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + z
                })
                .collect();
            points.push((x, k as u32));
        }
    }
    points.shuffle(rng);
    let (n_val, _) = spec.split_sizes();
    let (val_points, train_points) = points.split_at(n_val);

    let jitter = Normal::new(0.0, DUPLICATE_JITTER).expect("valid jitter");
    let mut rows: Vec<(Vec<f64>, u32, u32)> = Vec::with_capacity(spec.num_train());
    for (src, (x, y)) in train_points.iter().enumerate() {
        for copy in 0..spec.redundancy_factor {
            let row = if copy == 0 { x.clone() } else { x.iter().map(|v| v + jitter.sample(rng)).collect() };
            rows.push((row, *y, src as u32));
        }
    }
    rows.shuffle(rng);

    let true_labels: Vec<u32> = rows.iter().map(|r| r.1).collect();
    let source_point: Vec<u32> = rows.iter().map(|r| r.2).collect();
    let mut labels = true_labels.clone();
    let mut flipped: Vec<usize> = index::sample(rng, rows.len(), spec.num_flips()).into_vec();
    flipped.sort_unstable();
    if c > 1 {
        for &i in &flipped {
            // uniform over the other classes
            let shift = rng.random_range(1..c as u32);
            labels[i] = (labels[i] + shift) % c as u32;
        }
    }

    let train = Split::new(rows.into_iter().flat_map(|r| r.0).collect(), labels, d)?;
    let val = Split::new(
        val_points.iter().flat_map(|p| p.0.iter().copied()).collect(),
        val_points.iter().map(|p| p.1).collect(),
        d,
    )?;
    Ok(SyntheticDataset {
        dataset: Dataset::new(d, c, train, val)?,
        flipped: flipped.into_iter().map(|i| SampleId(i as u32)).collect(),
        true_labels,
        source_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, RngStream};

    fn rng() -> RngStream {
        RngStream::for_domain(11, Domain::Dataset, 0, 0)
    }

    #[test]
    fn clean_dataset_labels_match_clusters() {
        let spec = SyntheticSpec { redundancy_factor: 1, label_noise_fraction: 0.0, ..Default::default() };
        let s = gen_synthetic_dataset(&spec, &mut rng()).unwrap();
        assert!(s.flipped.is_empty());
        assert_eq!(s.dataset.train().labels(), &s.true_labels[..]);
        assert_eq!(s.dataset.num_samples(), 500);
        assert_eq!(s.dataset.num_val(), 500);
    }

    #[test]
    fn flip_count_is_exact() {
        let spec = SyntheticSpec {
            samples_per_cluster: 100,
            redundancy_factor: 2,
            val_fraction: 0.5,
            label_noise_fraction: 0.2,
            ..Default::default()
        };
        let s = gen_synthetic_dataset(&spec, &mut rng()).unwrap();
        assert_eq!(s.dataset.num_samples(), 500);
        let spec = SyntheticSpec { samples_per_cluster: 200, ..spec };
        let s = gen_synthetic_dataset(&spec, &mut rng()).unwrap();
        assert_eq!(s.dataset.num_samples(), 1000);
        assert_eq!(s.flipped.len(), 200);
        let labels = s.dataset.train().labels();
        let differing = (0..labels.len()).filter(|&i| labels[i] != s.true_labels[i]).count();
        assert_eq!(differing, 200);
        for id in &s.flipped {
            assert_ne!(labels[id.index()], s.true_labels[id.index()]);
        }
    }

    #[test]
    fn duplicates_share_a_source() {
        let s = gen_synthetic_dataset(&SyntheticSpec::default(), &mut rng()).unwrap();
        let mut per_source = std::collections::HashMap::new();
        for (i, &src) in s.source_point.iter().enumerate() {
            per_source.entry(src).or_insert_with(Vec::new).push(i);
        }
        assert!(per_source.values().all(|v| v.len() == 4));
        let ids = &per_source[&0];
        let (a, b) = (s.dataset.train_row(ids[0]), s.dataset.train_row(ids[1]));
        let dist: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(dist < 0.2, "{dist}");
    }

    #[test]
    fn deterministic() {
        let a = gen_synthetic_dataset(&SyntheticSpec::default(), &mut rng()).unwrap();
        let b = gen_synthetic_dataset(&SyntheticSpec::default(), &mut rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SyntheticSpec { label_noise_fraction: 1.0, ..Default::default() },
            SyntheticSpec { val_fraction: 0.0, ..Default::default() },
            SyntheticSpec { val_fraction: 1.0, ..Default::default() },
            SyntheticSpec { separation: 0.0, ..Default::default() },
            SyntheticSpec { redundancy_factor: 0, ..Default::default() },
        ] {
            assert!(gen_synthetic_dataset(&spec, &mut rng()).is_err(), "{spec:?}");
        }
    }
}
