//! Counter-based phase sampling and order-independent reductions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Two independent uniform phases in `[0, 2π)` for sample `index`.
///
/// The ChaCha keystream is addressed directly by `(seed, index)`, so the draw
/// for a given index never depends on which thread produced it or in what
/// order samples were visited.
pub fn phase_pair(seed: u64, index: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 4 words (two u64) per sample
    rng.set_word_pos(u128::from(index) * 4);
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    (a * TAU, b * TAU)
}

/// Running mean / variance (Welford) with an associative merge (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_are_addressable() {
        let a = phase_pair(7, 12345);
        let b = phase_pair(7, 12345);
        assert_eq!(a, b);
        assert_ne!(phase_pair(7, 12346), a);
        assert_ne!(phase_pair(8, 12345), a);
        assert!((0.0..TAU).contains(&a.0) && (0.0..TAU).contains(&a.1));
    }

    #[test]
    fn merge_matches_sequential() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        data.iter().for_each(|&v| all.push(v));
        let mut left = Moments::default();
        let mut right = Moments::default();
        data[..313].iter().for_each(|&v| left.push(v));
        data[313..].iter().for_each(|&v| right.push(v));
        let merged = left.merge(right);
        assert_eq!(merged.count, all.count);
        assert!((merged.mean - all.mean).abs() < 1e-12);
        assert!((merged.variance() - all.variance()).abs() < 1e-10);
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
