//! Deterministic random substreams.
//!
//! Every consumer of randomness draws from its own ChaCha stream keyed by
//! `(seed, domain, index)`, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_PLACEMENT: u64 = 1;
pub const DOMAIN_ARRIVALS: u64 = 2;
pub const DOMAIN_CHANNEL: u64 = 3;
pub const DOMAIN_SWEEP: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a domain tag and an index into a child seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(domain.rotate_left(40) ^ splitmix64(index)))
}

pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, domain, index))
}
