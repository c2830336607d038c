//! Sample identifiers, mini-batches and sampling schedules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of a training sample, `0..dataset_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleId(pub u32);

impl SampleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for SampleId {
    fn from(v: u32) -> Self {
        SampleId(v)
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MiniBatch(pub Vec<SampleId>);

impl MiniBatch {
    pub fn from_indices<I: IntoIterator<Item = u32>>(ids: I) -> Self {
        MiniBatch(ids.into_iter().map(SampleId).collect())
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Where a batch of a schedule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    /// Produced by multi-exploitation during the given alternation.
    Alternation(u32),
    /// Drawn once for a whole run from a fixed distribution.
    Static,
    /// Plain uniform epoch sampling outside of any search.
    Uniform,
}

impl Provenance {
    const STATIC_TAG: u32 = u32::MAX;
    const UNIFORM_TAG: u32 = u32::MAX - 1;

    pub fn to_tag(self) -> u32 {
        match self {
            Provenance::Alternation(n) => {
                debug_assert!(n < Self::UNIFORM_TAG);
                n
            }
            Provenance::Static => Self::STATIC_TAG,
            Provenance::Uniform => Self::UNIFORM_TAG,
        }
    }

    pub fn from_tag(tag: u32) -> Self {
        match tag {
            Self::STATIC_TAG => Provenance::Static,
            Self::UNIFORM_TAG => Provenance::Uniform,
            n => Provenance::Alternation(n),
        }
    }
}

/// An ordered list of equally sized mini-batches over a dataset of known size,
/// with one provenance tag per batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    dataset_size: usize,
    batch_size: usize,
    batches: Vec<MiniBatch>,
    provenance: Vec<Provenance>,
}

impl SamplingSchedule {
    pub fn new(dataset_size: usize, batch_size: usize) -> Result<Self> {
        if dataset_size == 0 {
            return Err(Error::param("dataset_size", "must be at least 1"));
        }
        if batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        Ok(SamplingSchedule { dataset_size, batch_size, batches: Vec::new(), provenance: Vec::new() })
    }

    pub fn push(&mut self, batch: MiniBatch, provenance: Provenance) -> Result<()> {
        if batch.len() != self.batch_size {
            return Err(Error::BatchSize { expected: self.batch_size, got: batch.len() });
        }
        if let Some(bad) = batch.ids().iter().find(|id| id.index() >= self.dataset_size) {
            return Err(Error::IdOutOfRange { id: bad.0, dataset_size: self.dataset_size });
        }
        self.batches.push(batch);
        self.provenance.push(provenance);
        Ok(())
    }

    /// Appends all batches of `other`, keeping their provenance tags.
    pub fn extend_from(&mut self, other: &SamplingSchedule) -> Result<()> {
        if other.dataset_size != self.dataset_size {
            return Err(Error::Dimension(format!(
                "cannot concatenate schedules over {} and {} samples",
                self.dataset_size, other.dataset_size
            )));
        }
        if !other.is_empty() && other.batch_size != self.batch_size {
            return Err(Error::BatchSize { expected: self.batch_size, got: other.batch_size });
        }
        self.batches.extend_from_slice(&other.batches);
        self.provenance.extend_from_slice(&other.provenance);
        Ok(())
    }

    /// Concatenates schedules in order. All must share dataset and batch size.
    pub fn concat<'a, I>(dataset_size: usize, batch_size: usize, parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SamplingSchedule>,
    {
        let mut out = SamplingSchedule::new(dataset_size, batch_size)?;
        for p in parts {
            out.extend_from(p)?;
        }
        Ok(out)
    }

    pub fn dataset_size(&self) -> usize {
        self.dataset_size
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches(&self) -> &[MiniBatch] {
        &self.batches
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn num_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn num_samples(&self) -> usize {
        self.batches.len() * self.batch_size
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// All sample ids in order.
    pub fn ids(&self) -> impl Iterator<Item = SampleId> + '_ {
        self.batches.iter().flat_map(|b| b.ids().iter().copied())
    }

    /// Appearance count of every id in `0..dataset_size`.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.dataset_size];
        for id in self.ids() {
            counts[id.index()] += 1;
        }
        counts
    }

    /// Batches `[start, end)` as a new schedule.
    pub fn slice(&self, start: usize, end: usize) -> SamplingSchedule {
        let end = end.min(self.batches.len());
        let start = start.min(end);
        SamplingSchedule {
            dataset_size: self.dataset_size,
            batch_size: self.batch_size,
            batches: self.batches[start..end].to_vec(),
            provenance: self.provenance[start..end].to_vec(),
        }
    }

    /// Splits into consecutive pieces of `batches_per_part` batches. A trailing
    /// short piece is kept.
    pub fn chunks(&self, batches_per_part: usize) -> Vec<SamplingSchedule> {
        assert!(batches_per_part > 0);
        (0..self.batches.len()).step_by(batches_per_part).map(|s| self.slice(s, s + batches_per_part)).collect()
    }

    /// Batches whose provenance is the given alternation.
    pub fn alternation(&self, n: u32) -> SamplingSchedule {
        let mut out = SamplingSchedule {
            dataset_size: self.dataset_size,
            batch_size: self.batch_size,
            batches: Vec::new(),
            provenance: Vec::new(),
        };
        for (b, p) in self.batches.iter().zip(&self.provenance) {
            if *p == Provenance::Alternation(n) {
                out.batches.push(b.clone());
                out.provenance.push(*p);
            }
        }
        out
    }

    /// Overwrites every provenance tag.
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance.iter_mut().for_each(|p| *p = provenance);
        self
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.batches.len() != self.provenance.len() {
            return Err(Error::Dimension("provenance length differs from batch count".into()));
        }
        for b in &self.batches {
            if b.len() != self.batch_size {
                return Err(Error::BatchSize { expected: self.batch_size, got: b.len() });
            }
            if let Some(bad) = b.ids().iter().find(|id| id.index() >= self.dataset_size) {
                return Err(Error::IdOutOfRange { id: bad.0, dataset_size: self.dataset_size });
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts(
        dataset_size: usize,
        batch_size: usize,
        batches: Vec<MiniBatch>,
        provenance: Vec<Provenance>,
    ) -> Result<Self> {
        let s = SamplingSchedule { dataset_size, batch_size, batches, provenance };
        if dataset_size == 0 || batch_size == 0 {
            return Err(Error::param("schedule", "dataset and batch size must be positive"));
        }
        s.validate()?;
        Ok(s)
    }
}
