use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Seeded pseudo-random generator: xoshiro256++ with SplitMix64 seeding.
///
/// The algorithm is pinned so that a seed reproduces the same draw sequence
/// on every platform and in every implementation of this tool:
///
/// - state: four u64 words produced by iterating SplitMix64 from the seed;
/// - output: `rotl(s0 + s3, 23) + s0`, then the standard xoshiro256 update;
/// - `f32` unit draws take the top 24 bits of one output, times 2^-24;
/// - normal draws use Box-Muller on two fresh outputs
///   (`sqrt(-2 ln u1) * cos(2 pi u2)` computed in f64, one draw per pair).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: [u64; 4],
}

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { state }
    }

    /// Deterministically derive an independent stream for one purpose
    /// (weight init, shuffling, dropout, ...) from a run seed.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut sm = seed;
        let a = splitmix64(&mut sm);
        let mut sm2 = a ^ stream.wrapping_mul(0xD1B54A32D192ED03);
        Rng::new(splitmix64(&mut sm2))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 24 bits of precision; exactly portable.
    pub fn next_unit_f32(&mut self) -> f32 {
        ((self.next_u64() >> 40) as f32) * (1.0 / (1u64 << 24) as f32)
    }

    /// Uniform draw in `(0, 1]` with 53 bits, used where `ln(u)` must be finite.
    fn next_open_unit_f64(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, low: f32, high: f32) -> f32 {
        low + self.next_unit_f32() * (high - low)
    }

    /// One standard-normal draw via Box-Muller; the sine counterpart is
    /// discarded so the stream position stays a simple function of the
    /// draw count.
    pub fn normal(&mut self, mean: f32, std: f32) -> f32 {
        let u1 = self.next_open_unit_f64();
        let u2 = self.next_open_unit_f64();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        mean + std * z as f32
    }

    /// Unbiased integer in `[0, n)` by rejection.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn from `[0, n)` via a partial Fisher-Yates.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}

/// Tensor of i.i.d. uniform draws on `[low, high)`.
pub fn rng_uniform(rng: &mut Rng, low: f32, high: f32, shape: &[usize]) -> Result<Tensor> {
    if !(low < high) {
        return Err(Error::Parameter(format!(
            "uniform range requires low < high, got [{low}, {high})"
        )));
    }
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform(low, high)).collect();
    Tensor::from_vec(shape, data)
}

/// Tensor of i.i.d. normal draws.
pub fn rng_normal(rng: &mut Rng, mean: f32, std: f32, shape: &[usize]) -> Result<Tensor> {
    if !(std > 0.0) {
        return Err(Error::Parameter(format!(
            "normal std must be positive, got {std}"
        )));
    }
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.normal(mean, std)).collect();
    Tensor::from_vec(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn golden_first_draws() {
        // Frozen so a port to another platform can check the stream.
        let mut r = Rng::new(0);
        let first: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(
            first,
            vec![
                5807750865143411619,
                11489982014536238565,
                11635716263080399852,
                4614848864917760076
            ]
        );
    }

    #[test]
    fn derive_separates_streams() {
        let a = Rng::derive(7, 1);
        let b = Rng::derive(7, 2);
        assert_ne!(a, b);
        assert_eq!(a, Rng::derive(7, 1));
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = Rng::new(3);
        let mut xs: Vec<usize> = (0..100).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(xs, (0..100).collect::<Vec<_>>());
    }
}
