//! Counter-based randomness.
//!
//! Every uniform variate is addressed by `(seed, slot, draw index)`. The
//! ChaCha block function is used as the keyed counter: the seed expands to
//! the key, the slot selects the stream and the draw index is the word
//! position inside that stream. Two simulations with the same seed therefore
//! see the same environment no matter what their controllers do.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Clone, Debug)]
pub struct SlotRng {
    inner: ChaCha12Rng,
}

impl SlotRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Positions the generator at draw index 0 of `slot`.
    pub fn at_slot(&mut self, slot: u64) -> SlotDraws<'_> {
        self.inner.set_stream(slot);
        self.inner.set_word_pos(0);
        SlotDraws {
            rng: &mut self.inner,
        }
    }
}

/// Sequential draws within one slot.
pub struct SlotDraws<'a> {
    rng: &'a mut ChaCha12Rng,
}

impl SlotDraws<'_> {
    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_depend_only_on_seed_and_slot() {
        let mut a = SlotRng::new(7);
        let mut b = SlotRng::new(7);
        let xa: Vec<f64> = {
            let mut d = a.at_slot(3);
            (0..5).map(|_| d.uniform()).collect()
        };
        // visit other slots first; slot 3 must replay identically
        for s in 0..10 {
            let mut d = b.at_slot(s);
            d.uniform();
        }
        let mut d = b.at_slot(3);
        let xb: Vec<f64> = (0..5).map(|_| d.uniform()).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn different_slots_and_seeds_differ() {
        let mut a = SlotRng::new(1);
        let u0 = a.at_slot(0).uniform();
        let u1 = a.at_slot(1).uniform();
        let v0 = SlotRng::new(2).at_slot(0).uniform();
        assert_ne!(u0, u1);
        assert_ne!(u0, v0);
    }

    #[test]
    fn uniform_mean_is_about_half() {
        let mut r = SlotRng::new(11);
        let mut sum = 0.0;
        let n = 20_000;
        for s in 0..n {
            let u = r.at_slot(s).uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }
}
