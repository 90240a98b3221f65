//! Independent random streams for one chain.
//!
//! Each role gets its own stream so that, for example, switching recycling
//! on or off never perturbs the momentum or acceptance draws that decide
//! the chain's next state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Roles within one chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    /// Momentum refresh and path-length draws.
    Momentum = 0,
    /// Endpoint acceptance, slice level, NUTS direction and next-state choice.
    Accept = 1,
    /// Recycling acceptance and selection of recycled states.
    Recycle = 2,
    /// Subset choice for subset recycling.
    Subset = 3,
    /// Initial-state draws.
    Init = 4,
}

const ROLES: u64 = 8;

#[derive(Clone, Debug)]
pub struct ChainStreams {
    pub momentum: ChaCha8Rng,
    pub accept: ChaCha8Rng,
    pub recycle: ChaCha8Rng,
    pub subset: ChaCha8Rng,
    pub init: ChaCha8Rng,
}

impl ChainStreams {
    /// Streams for chain `chain` under `master_seed`. The ChaCha stream id
    /// is `chain · 8 + role`, so distinct `(chain, role)` pairs never share
    /// a keystream for `chain < 2⁶¹`.
    pub fn new(master_seed: u64, chain: u64) -> Self {
        let stream = |role: StreamRole| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(chain.wrapping_mul(ROLES) + role as u64);
            rng
        };
        Self {
            momentum: stream(StreamRole::Momentum),
            accept: stream(StreamRole::Accept),
            recycle: stream(StreamRole::Recycle),
            subset: stream(StreamRole::Subset),
            init: stream(StreamRole::Init),
        }
    }
}
