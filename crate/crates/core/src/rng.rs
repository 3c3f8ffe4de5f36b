//! Deterministic random streams.
//!
//! Every randomized routine draws from a ChaCha stream selected by a 64-bit
//! seed, a domain tag and an index, so independent tasks (restarts, rows,
//! folds) get reproducible streams regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains.
pub mod domain {
    pub const RESTART: u64 = 1;
    pub const SAMPLE_ROW: u64 = 2;
    pub const RESPONSE_NOISE: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const KMEANS: u64 = 5;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, domain::RESTART, 0).random();
        let b: u64 = stream(7, domain::RESTART, 0).random();
        let c: u64 = stream(7, domain::RESTART, 1).random();
        let d: u64 = stream(7, domain::SAMPLE_ROW, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
