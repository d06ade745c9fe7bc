//! Seeded randomness with provenance.
//!
//! Every random draw in a protocol run or experiment comes from a
//! [`ProtocolRng`], a ChaCha20 generator keyed by a user seed and a
//! substream number. Substreams are disjoint ChaCha streams, so replications
//! (and the different purposes within one match) never share random numbers,
//! and the same `(seed, replication, match, purpose)` always reproduces the
//! same draws regardless of evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a generator's stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: u64,
    pub stream: u64,
}

/// What a substream is used for inside one simulated match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Toss = 0,
    Views = 1,
    Scores = 2,
    TieBreak = 3,
}

const PURPOSE_BITS: u32 = 2;
const MATCH_BITS: u32 = 14;

/// Longest series a single replication may contain.
pub const MAX_SERIES_LENGTH: u64 = 1 << MATCH_BITS;
/// Upper bound (exclusive) on replication indices.
pub const MAX_REPLICATIONS: u64 = 1 << (64 - MATCH_BITS - PURPOSE_BITS);

#[derive(Debug, Clone)]
pub struct ProtocolRng {
    inner: ChaCha20Rng,
    trace: SeedTrace,
}

impl ProtocolRng {
    /// Stream 0 of `seed`; what a one-off protocol run uses.
    pub fn new(seed: u64) -> Self {
        Self::from_trace(SeedTrace { seed, stream: 0 })
    }

    pub fn from_trace(trace: SeedTrace) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(trace.seed);
        inner.set_stream(trace.stream);
        Self { inner, trace }
    }

    /// The generator for one purpose of one match of one replication.
    pub fn substream(
        seed: u64,
        replication: u64,
        match_index: u64,
        purpose: Purpose,
    ) -> Result<Self> {
        if replication >= MAX_REPLICATIONS {
            return Err(Error::InvalidParameters(alloc::format!(
                "replication index {replication} exceeds {MAX_REPLICATIONS}"
            )));
        }
        if match_index >= MAX_SERIES_LENGTH {
            return Err(Error::InvalidParameters(alloc::format!(
                "match index {match_index} exceeds {MAX_SERIES_LENGTH}"
            )));
        }
        let stream = (replication << (MATCH_BITS + PURPOSE_BITS))
            | (match_index << PURPOSE_BITS)
            | purpose as u64;
        Ok(Self::from_trace(SeedTrace { seed, stream }))
    }

    pub fn trace(&self) -> SeedTrace {
        self.trace
    }

    /// A fair coin: the lowest bit of the next 32-bit word.
    pub fn coin_bit(&mut self) -> u8 {
        (self.inner.next_u32() & 1) as u8
    }
}

impl RngCore for ProtocolRng {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_trace_same_draws() {
        let mut a = ProtocolRng::substream(7, 3, 1, Purpose::Scores).unwrap();
        let mut b = ProtocolRng::from_trace(a.trace());
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ() {
        let mut toss = ProtocolRng::substream(7, 0, 0, Purpose::Toss).unwrap();
        let mut views = ProtocolRng::substream(7, 0, 0, Purpose::Views).unwrap();
        let mut next_rep = ProtocolRng::substream(7, 1, 0, Purpose::Toss).unwrap();
        let t = toss.next_u64();
        assert_ne!(t, views.next_u64());
        assert_ne!(t, next_rep.next_u64());
    }

    #[test]
    fn substream_bounds() {
        assert!(ProtocolRng::substream(0, MAX_REPLICATIONS, 0, Purpose::Toss).is_err());
        assert!(ProtocolRng::substream(0, 0, MAX_SERIES_LENGTH, Purpose::Toss).is_err());
        let last = ProtocolRng::substream(0, MAX_REPLICATIONS - 1, MAX_SERIES_LENGTH - 1, Purpose::TieBreak)
            .unwrap();
        assert_eq!(last.trace().stream, u64::MAX);
    }
}
