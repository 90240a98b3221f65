//! Chain identifiers under one master seed.
//!
//! The upper 32 bits name a role, the lower 32 a chain within it, so no
//! two chains of a campaign share random streams.

pub const PILOT: u64 = 0xA << 32;
pub const REFERENCE: u64 = 0xB << 32;
pub const IID: u64 = 0xC << 32;
pub const ESJD: u64 = 0xD << 32;
pub const TUNING: u64 = 0xE << 32;
/// Post-warmup chains of the tuning comparison: replication in bits
/// 16..32, chain in bits 0..16.
pub const TUNED: u64 = 0xF << 32;

/// Chain `c` of arm `arm`.
pub fn arm_chain(arm: u64, c: usize) -> u64 {
    (arm << 32) | c as u64
}

pub fn tuned_chain(replication: usize, c: usize) -> u64 {
    TUNED | ((replication as u64) << 16) | c as u64
}
