//! Seeded random streams.
//!
//! Every stochastic routine draws from a ChaCha8 stream addressed by
//! `(seed, stream)`. ChaCha is counter based, so independent streams are
//! obtained by selecting the stream word instead of reseeding. Work that is
//! split into chunks uses one stream per chunk index, which makes results
//! independent of the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed for a named sub-task so that stages of one run do not
/// share streams.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed with the parent seed through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bernoulli(p) via a 64-bit integer threshold; exact for p in {0, 1}.
#[derive(Clone, Copy, Debug)]
pub struct Coin {
    threshold: u64,
    always: bool,
}

impl Coin {
    pub fn new(p: f64) -> Coin {
        debug_assert!((0.0..=1.0).contains(&p));
        if p >= 1.0 {
            Coin {
                threshold: u64::MAX,
                always: true,
            }
        } else {
            Coin {
                threshold: (p * 18_446_744_073_709_551_616.0) as u64,
                always: false,
            }
        }
    }

    #[inline]
    pub fn flip<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.always || rng.next_u64() < self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 1), |r, _| Some(r.next_u64())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 1), |r, _| Some(r.next_u64())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 2), |r, _| Some(r.next_u64())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
    }

    #[test]
    fn coin_extremes() {
        let mut r = stream(0, 0);
        let never = Coin::new(0.0);
        let always = Coin::new(1.0);
        for _ in 0..1000 {
            assert!(!never.flip(&mut r));
            assert!(always.flip(&mut r));
        }
    }
}
