//! Seeded, splittable randomness with fixed output across runs and platforms.
//!
//! Streams are counter-based SplitMix64: draw `i` of stream `(seed, label)`
//! depends only on `(seed, label, i)`, so any block of a process can be
//! regenerated lazily without replaying earlier draws. Not cryptographic.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::dyadic::Dyadic;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One labelled stream of 64-bit words. Distinct labels under the same seed
/// behave like independent streams; interleaving draws from differently
/// labelled streams never changes any stream's own output sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeededStream {
    seed: u64,
    label: u64,
    base: u64,
    counter: u64,
}

impl SeededStream {
    pub fn new(seed: u64, label: u64) -> SeededStream {
        let base = mix64(seed ^ mix64(label ^ GOLDEN_GAMMA));
        SeededStream {
            seed,
            label,
            base,
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> u64 {
        self.label
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// The word at an absolute counter position, without touching any state.
    pub fn word_at(seed: u64, label: u64, counter: u64) -> u64 {
        let base = mix64(seed ^ mix64(label ^ GOLDEN_GAMMA));
        mix64(base.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix64(
            self.base
                .wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    /// Uniform integer with exactly `bits` random bits, i.e. in `[0, 2^bits)`.
    pub fn random_biguint(&mut self, bits: u64) -> BigUint {
        if bits == 0 {
            return BigUint::zero();
        }
        let words = bits.div_ceil(64);
        let mut bytes = Vec::with_capacity((words * 8) as usize);
        for _ in 0..words {
            bytes.extend_from_slice(&self.next_u64().to_le_bytes());
        }
        let mut v = BigUint::from_bytes_le(&bytes);
        let excess = words * 64 - bits;
        if excess > 0 {
            v >>= excess;
        }
        v
    }

    /// Uniform over the `2^(p-1)` odd-numerator dyadics of order `p`.
    pub fn uniform_dyadic_order(&mut self, p: u64) -> Dyadic {
        assert!(p >= 1, "order must be at least 1");
        let j = self.random_biguint(p - 1);
        Dyadic::new((j << 1u32) + 1u32, p).expect("odd numerator below 2^p")
    }

    /// Uniform `m / 2^q` with `m` in `[0, 2^q)`.
    pub fn uniform_dyadic_bits(&mut self, q: u64) -> Dyadic {
        assert!(q >= 1, "bit count must be at least 1");
        let m = self.random_biguint(q);
        Dyadic::new(m, q).expect("q-bit numerator below 2^q")
    }

    /// Uniform index in `[0, n)` by rejection from the next power of two.
    pub fn index_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        if n == 1 {
            return 0;
        }
        let mask = n.next_power_of_two() - 1;
        loop {
            let v = self.next_u64() & mask;
            if v < n {
                return v;
            }
        }
    }
}
