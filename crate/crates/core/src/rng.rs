//! Seeded RNG streams.
//!
//! Batch stages derive one independent stream per item from the global seed
//! and the item id, so results do not depend on processing order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for a whole run.
pub fn run_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic RNG for one item, independent of every other item's stream.
pub fn item_rng(seed: u64, item_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(item_id.as_bytes()))
}

// FNV-1a; stable across platforms, unlike std's SipHash with random keys.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
