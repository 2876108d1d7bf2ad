//! Counter-based pseudo-random number generation.
//!
//! The generator is a keyed SplitMix64: draw `i` from a stream with key
//! `k` is `mix64(k + (i+1) * PHI)`, where `mix64` is the standard
//! SplitMix64 finalizer and `PHI` is the 64-bit golden-ratio constant.
//! Because each draw is a pure function of `(key, counter)`, streams can
//! be derived, split across workers, and replayed without shared state,
//! and the sequence is bit-identical on every platform. Golden tests pin
//! the exact output values.

const PHI: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_TWEAK: u64 = 0xD1B5_4A32_D192_ED03;
const STREAM_TWEAK: u64 = 0xA076_1D64_78BD_642F;

/// SplitMix64 finalizer: a bijective 64-bit mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seedable, counter-based random stream.
#[derive(Debug, Clone)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    /// Creates the root stream for a seed.
    pub fn new(seed: u64) -> Self {
        Rng {
            key: mix64(seed ^ SEED_TWEAK),
            counter: 0,
        }
    }

    /// Derives an independent child stream.
    ///
    /// The child depends only on this stream's key and the `stream` id,
    /// never on how many draws were taken, so workers can derive
    /// per-index streams in any order.
    pub fn derive(&self, stream: u64) -> Rng {
        Rng {
            key: mix64(self.key ^ mix64(stream.wrapping_mul(PHI) ^ STREAM_TWEAK)),
            counter: 0,
        }
    }

    /// Next raw 64-bit draw.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(PHI)))
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`. A degenerate interval returns `lo` exactly.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Uniform draw from an axis-aligned box given by per-coordinate bounds.
    pub fn uniform_box(&mut self, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        debug_assert_eq!(lo.len(), hi.len());
        lo.iter()
            .zip(hi.iter())
            .map(|(&l, &h)| self.uniform(l, h))
            .collect()
    }

    /// Uniform index in `[0, n)` via 128-bit multiply (unbiased enough for
    /// shuffles; n is always far below 2^32 here).
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle with draws from this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Golden values freeze the generator; any change to the mixing
    // constants or draw scheme must show up here.
    #[test]
    fn golden_sequence_is_frozen() {
        let mut rng = Rng::new(42);
        let draws: Vec<u64> = (0..4).map(|_| rng.next_u64()).collect();
        assert_eq!(
            draws,
            vec![
                14306847890909893226,
                27668455834413438,
                64591033794190828,
                1583568189809419879,
            ]
        );
    }

    #[test]
    fn golden_uniform01_is_frozen() {
        let mut rng = Rng::new(7);
        let draws: Vec<f64> = (0..3).map(|_| rng.uniform01()).collect();
        assert_eq!(
            draws,
            vec![
                0.7012101592517584,
                0.12885434376664262,
                0.027566707281517333,
            ]
        );
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(123);
        let mut b = Rng::new(123);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = Rng::new(1);
        let mut b = Rng::new(2);
        let same = (0..32).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn derive_is_independent_of_draw_position() {
        let mut parent = Rng::new(99);
        let child_before = parent.derive(5);
        for _ in 0..10 {
            parent.next_u64();
        }
        let child_after = parent.derive(5);
        assert_eq!(child_before.key, child_after.key);
        let other = parent.derive(6);
        assert_ne!(child_before.key, other.key);
    }

    #[test]
    fn uniform_respects_interval() {
        let mut rng = Rng::new(3);
        for _ in 0..1000 {
            let v = rng.uniform(-2.0, 3.0);
            assert!((-2.0..3.0).contains(&v));
        }
        // Degenerate interval collapses to the endpoint exactly.
        assert_eq!(rng.uniform(1.5, 1.5), 1.5);
    }

    #[test]
    fn uniform_box_mean_is_centered() {
        // 1e4 draws per coordinate in [0,1]: the sample mean lies well
        // within [0.47, 0.53] (three sigma is under 0.01).
        let mut rng = Rng::new(2024);
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        let mut sums = [0.0; 2];
        let n = 10_000;
        for _ in 0..n {
            let x = rng.uniform_box(&lo, &hi);
            sums[0] += x[0];
            sums[1] += x[1];
        }
        for s in sums {
            let mean = s / n as f64;
            assert!((0.47..=0.53).contains(&mean), "mean {mean}");
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = Rng::new(11);
        let mut items: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(items, (0..50).collect::<Vec<_>>());
    }
}
