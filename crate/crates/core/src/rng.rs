//! Seeded random streams.
//!
//! A single experiment seed fans out into independent ChaCha streams. Each
//! stream is keyed by the seed and a [`Domain`] (what the randomness is for),
//! and positioned by a `(worker, alternation)` pair through ChaCha's native
//! 64-bit stream selector. Replaying the same `(seed, StreamId)` reproduces the
//! same draws no matter which thread runs it or in what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a stream is used for. Different domains get different ChaCha keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    ModelInit,
    Dataset,
    Explore,
    UniformRun,
    Eval,
    Static,
    User(u16),
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::ModelInit => 1,
            Domain::Dataset => 2,
            Domain::Explore => 3,
            Domain::UniformRun => 4,
            Domain::Eval => 5,
            Domain::Static => 6,
            Domain::User(u) => 0x1_0000 + u as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub domain: Domain,
    pub worker: u32,
    pub alternation: u32,
}

impl StreamId {
    pub fn new(domain: Domain, worker: u32, alternation: u32) -> Self {
        StreamId { domain, worker, alternation }
    }

    fn selector(&self) -> u64 {
        ((self.worker as u64) << 32) | self.alternation as u64
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic random stream owned by exactly one consumer.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    id: StreamId,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        let mut state = seed ^ id.domain.tag().wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(id.selector());
        RngStream { seed, id, inner }
    }

    pub fn for_domain(seed: u64, domain: Domain, worker: u32, alternation: u32) -> Self {
        Self::new(seed, StreamId::new(domain, worker, alternation))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> StreamId {
        self.id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
