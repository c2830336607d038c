//! Byte-stable binary formats for schedules, distributions and model
//! checkpoints, plus CSV exports for analysis tooling.
//!
//! All binary files are little-endian and start with a 4-byte magic and a
//! `u32` format version.
//!
//! ```text
//! schedule:      "ASCH" ver:u32 dataset_size:u64 batch_size:u32 num_batches:u64
//!                { provenance:u32 id:u32 * batch_size } * num_batches
//! distribution:  "ASDS" ver:u32 len:u64 { prob:f64 } * len
//! model:         "ASMS" ver:u32 feature_dim:u32 hidden_dim:u32 (0 = none)
//!                num_classes:u32 step:u64 num_params:u64
//!                { weight:f64 } * num_params { momentum:f64 } * num_params
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::distribution::SamplingDistribution;
use crate::error::{Error, Result};
use crate::schedule::{MiniBatch, Provenance, SampleId, SamplingSchedule};
use crate::trainer::{Architecture, ModelState};

pub const FORMAT_VERSION: u32 = 1;

const SCHEDULE_MAGIC: &[u8; 4] = b"ASCH";
const DISTRIBUTION_MAGIC: &[u8; 4] = b"ASDS";
const MODEL_MAGIC: &[u8; 4] = b"ASMS";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos as u64, message: message.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!("unexpected end of file, wanted {n} more bytes")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            self.pos = 0;
            return Err(self.err(format!("bad magic, expected {:?}", String::from_utf8_lossy(magic))));
        }
        let at = self.pos;
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            self.pos = at;
            return Err(self.err(format!("unsupported format version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.err(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

pub fn encode_schedule(s: &SamplingSchedule) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + s.num_batches() * (4 + 4 * s.batch_size()));
    out.extend_from_slice(SCHEDULE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(s.dataset_size() as u64).to_le_bytes());
    out.extend_from_slice(&(s.batch_size() as u32).to_le_bytes());
    out.extend_from_slice(&(s.num_batches() as u64).to_le_bytes());
    for (b, p) in s.batches().iter().zip(s.provenance()) {
        out.extend_from_slice(&p.to_tag().to_le_bytes());
        for id in b.ids() {
            out.extend_from_slice(&id.0.to_le_bytes());
        }
    }
    out
}

pub fn decode_schedule(buf: &[u8]) -> Result<SamplingSchedule> {
    let mut r = Reader::new(buf);
    r.header(SCHEDULE_MAGIC)?;
    let dataset_size = r.u64()? as usize;
    let bs_at = r.pos;
    let batch_size = r.u32()? as usize;
    let num_batches = r.u64()? as usize;
    if dataset_size == 0 || batch_size == 0 {
        r.pos = bs_at;
        return Err(r.err("dataset size and batch size must be positive"));
    }
    let per_batch = 4 + 4 * batch_size;
    if r.remaining() as u128 != num_batches as u128 * per_batch as u128 {
        return Err(r.err(format!(
            "payload of {} bytes does not hold {num_batches} batches of {batch_size} ids",
            r.remaining()
        )));
    }
    let mut batches = Vec::with_capacity(num_batches);
    let mut provenance = Vec::with_capacity(num_batches);
    for _ in 0..num_batches {
        provenance.push(Provenance::from_tag(r.u32()?));
        let mut ids = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let at = r.pos;
            let id = r.u32()?;
            if id as usize >= dataset_size {
                r.pos = at;
                return Err(r.err(format!("sample id {id} >= dataset size {dataset_size}")));
            }
            ids.push(SampleId(id));
        }
        batches.push(MiniBatch(ids));
    }
    r.finish()?;
    SamplingSchedule::from_parts(dataset_size, batch_size, batches, provenance)
}

pub fn encode_distribution(d: &SamplingDistribution) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * d.len());
    out.extend_from_slice(DISTRIBUTION_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(d.len() as u64).to_le_bytes());
    for p in d.probs() {
        out.extend_from_slice(&p.to_bits().to_le_bytes());
    }
    out
}

pub fn decode_distribution(buf: &[u8]) -> Result<SamplingDistribution> {
    let mut r = Reader::new(buf);
    r.header(DISTRIBUTION_MAGIC)?;
    let len = r.u64()? as usize;
    if r.remaining() as u128 != len as u128 * 8 {
        return Err(r.err(format!("payload of {} bytes does not hold {len} probabilities", r.remaining())));
    }
    let probs = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    SamplingDistribution::new(probs).map_err(|e| Error::Parse { offset: 16, message: e.to_string() })
}

pub fn encode_model(m: &ModelState) -> Vec<u8> {
    let arch = m.architecture();
    let n = m.weights().len();
    let mut out = Vec::with_capacity(40 + 16 * n);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.feature_dim as u32).to_le_bytes());
    out.extend_from_slice(&(arch.hidden_dim.unwrap_or(0) as u32).to_le_bytes());
    out.extend_from_slice(&(arch.num_classes as u32).to_le_bytes());
    out.extend_from_slice(&m.step().to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in m.weights().iter().chain(m.momentum()) {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}

pub fn decode_model(buf: &[u8]) -> Result<ModelState> {
    let mut r = Reader::new(buf);
    r.header(MODEL_MAGIC)?;
    let arch_at = r.pos;
    let feature_dim = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let num_classes = r.u32()? as usize;
    let arch = Architecture { feature_dim, hidden_dim: (hidden > 0).then_some(hidden), num_classes };
    let step = r.u64()?;
    let n_at = r.pos;
    let n = r.u64()? as usize;
    if arch.validate().is_err() {
        r.pos = arch_at;
        return Err(r.err("invalid architecture"));
    }
    if n != arch.num_params() {
        r.pos = n_at;
        return Err(r.err(format!("{n} parameters, architecture needs {}", arch.num_params())));
    }
    if r.remaining() as u128 != n as u128 * 16 {
        return Err(r.err(format!("payload of {} bytes does not hold {n} weights and momenta", r.remaining())));
    }
    let weights = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let momentum = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    ModelState::from_parts(arch, weights, momentum, step)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn save_schedule(schedule: &SamplingSchedule, path: &Path) -> Result<()> {
    write_bytes(path, &encode_schedule(schedule))
}

pub fn load_schedule(path: &Path) -> Result<SamplingSchedule> {
    decode_schedule(&read_bytes(path)?)
}

pub fn save_distribution(d: &SamplingDistribution, path: &Path) -> Result<()> {
    write_bytes(path, &encode_distribution(d))
}

pub fn load_distribution(path: &Path) -> Result<SamplingDistribution> {
    decode_distribution(&read_bytes(path)?)
}

pub fn save_model(m: &ModelState, path: &Path) -> Result<()> {
    write_bytes(path, &encode_model(m))
}

pub fn load_model(path: &Path) -> Result<ModelState> {
    decode_model(&read_bytes(path)?)
}

/// `sample_id,count` for every id of the schedule's dataset.
pub fn write_counts_csv(schedule: &SamplingSchedule, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["sample_id", "count"]).map_err(csv_err)?;
    for (i, c) in schedule.counts().iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `sample_id,probability`, probabilities printed in shortest round-trip form.
pub fn write_distribution_csv(d: &SamplingDistribution, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["sample_id", "probability"]).map_err(csv_err)?;
    for (i, p) in d.probs().iter().enumerate() {
        w.write_record([i.to_string(), p.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
