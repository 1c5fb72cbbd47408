//! Seed splitting.
//!
//! Every random stream in the crate is derived from one master seed and a
//! stream label: the label is hashed with FNV-1a, xored into the master seed
//! and passed through one SplitMix64 round. The result seeds a `ChaCha8Rng`.
//! Indexed streams (restarts, rounds) append `#<index>` to the label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: &str) -> u64 {
    splitmix64(master ^ fnv1a(stream))
}

pub fn derive_indexed_seed(master: u64, stream: &str, index: u64) -> u64 {
    derive_seed(master, &format!("{stream}#{index}"))
}

pub fn stream(master: u64, label: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(master, label))
}

pub fn indexed_stream(master: u64, label: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_indexed_seed(master, label, index))
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_moments(sum: f64, sum_sq: f64, samples: u64) -> Self {
        let n = samples as f64;
        let mean = sum / n;
        let var = if samples > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            value: mean,
            stderr: (var / n).sqrt(),
            samples,
        }
    }

    /// Stderr below 5% of the estimate.
    pub fn is_trustworthy(&self) -> bool {
        self.stderr < 0.05 * self.value.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream(7, "search");
        let mut b = stream(7, "search");
        let mut c = stream(7, "decode");
        let x = a.next_u64();
        assert_eq!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
        assert_ne!(derive_indexed_seed(7, "r", 0), derive_indexed_seed(7, "r", 1));
    }

    #[test]
    fn estimate_of_constant_has_zero_stderr() {
        let e = Estimate::from_moments(5.0, 5.0, 5);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
    }
}
