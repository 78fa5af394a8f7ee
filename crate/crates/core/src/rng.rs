//! Seeded, platform-independent randomness for samplers.

use nalgebra::DVector;
use rand::{Rng as _, SeedableRng};

use crate::geomcore::ChartManifold;

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Uniform vector in the cube `[-r, r]^n`.
pub fn cube(rng: &mut Rng, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-r..=r))
}

/// Uniform scalar in `[lo, hi]`.
pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..=hi)
}

/// Uniform point of `m` clipped to the cube `[-r, r]^n`.
pub fn in_manifold(rng: &mut Rng, m: &ChartManifold, r: f64) -> DVector<f64> {
    DVector::from_fn(m.dim(), |i, _| {
        let lo = m.lower()[i].max(-r);
        let hi = m.upper()[i].min(r);
        if lo < hi {
            rng.gen_range(lo..hi)
        } else {
            m.lower()[i]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = cube(&mut seeded(3), 4, 1.0);
        let b = cube(&mut seeded(3), 4, 1.0);
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x.abs() <= 1.0));
    }
}
