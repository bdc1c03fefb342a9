//! Low-discrepancy point sets and seed derivation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Halton sequence with per-dimension random digit permutations.
///
/// The digit 0 is kept fixed so that the permuted radical inverse stays in
/// `[0, 1)`; all other digits are shuffled from the seed.
#[derive(Clone, Debug)]
pub struct ScrambledHalton {
    bases: Vec<u64>,
    perms: Vec<Vec<u64>>,
    index: u64,
}

impl ScrambledHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let bases = first_primes(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perms = bases
            .iter()
            .map(|&b| {
                let mut p: Vec<u64> = (1..b).collect();
                p.shuffle(&mut rng);
                let mut full = vec![0];
                full.extend(p);
                full
            })
            .collect();
        Self {
            bases,
            perms,
            index: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    /// Next point in the unit cube.
    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.bases
            .iter()
            .zip(&self.perms)
            .map(|(&b, perm)| radical_inverse(i, b, perm))
            .collect()
    }
}

fn radical_inverse(mut i: u64, base: u64, perm: &[u64]) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += perm[(i % base) as usize] as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

pub(crate) fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// SplitMix64 step; used to derive independent seeds for restarts.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }

    #[test]
    fn halton_points_fill_unit_cube() {
        let mut h = ScrambledHalton::new(3, 7);
        let pts: Vec<_> = (0..4096).map(|_| h.next_point()).collect();
        for p in &pts {
            assert!(p.iter().all(|x| (0.0..1.0).contains(x)));
        }
        // each octant receives close to 1/8 of the points
        let mut counts = [0usize; 8];
        for p in &pts {
            let k = (p[0] >= 0.5) as usize + 2 * (p[1] >= 0.5) as usize + 4 * (p[2] >= 0.5) as usize;
            counts[k] += 1;
        }
        for c in counts {
            assert!((c as i64 - 512).abs() < 20, "{counts:?}");
        }
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
