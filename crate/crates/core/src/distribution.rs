use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A multinomial distribution over dataset indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDistribution {
    probs: Vec<f64>,
}

impl SamplingDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("probs[{i}] = {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(SamplingDistribution { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        Ok(SamplingDistribution { probs: vec![1.0 / n as f64; n] })
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidDistribution(format!("point mass at {at} outside {n} outcomes")));
        }
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Ok(SamplingDistribution { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Largest absolute pointwise difference to `other`.
    pub fn max_abs_diff(&self, other: &SamplingDistribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SamplingDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(SamplingDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(SamplingDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(SamplingDistribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(SamplingDistribution::new(vec![]).is_err());
        assert!(SamplingDistribution::point_mass(3, 3).is_err());
        let u = SamplingDistribution::uniform(4).unwrap();
        assert_eq!(u.probs(), &[0.25; 4]);
    }
}
