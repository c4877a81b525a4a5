//! Deterministic RNG stream derivation.
//!
//! Every random choice in the library draws from a ChaCha8 stream derived
//! from `(master seed, replica index, purpose tag)`. The derivation rule is
//! fixed: the 32-byte ChaCha key is `SHA-256(master_le ‖ replica_le ‖ tag)`.
//! Streams for distinct `(master, replica, tag)` triples are independent for
//! all practical purposes, and a run is reproducible bit-exactly from its
//! master seed regardless of thread schedule, because parallel work is only
//! ever partitioned along the replica axis.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive the RNG stream for `(master, replica, purpose)`.
pub fn stream(master: u64, replica: u64, purpose: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(replica.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = stream(7, 3, "atoms").sample_iter(rand::distributions::Standard).take(8).collect();
        let b: Vec<u64> = stream(7, 3, "atoms").sample_iter(rand::distributions::Standard).take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ_across_axes() {
        let base: u64 = stream(7, 3, "atoms").gen();
        assert_ne!(base, stream(8, 3, "atoms").gen::<u64>());
        assert_ne!(base, stream(7, 4, "atoms").gen::<u64>());
        assert_ne!(base, stream(7, 3, "labels").gen::<u64>());
    }
}
