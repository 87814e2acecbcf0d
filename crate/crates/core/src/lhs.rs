//! Space-filling designs: Latin hypercube sampling and Halton sequences.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Bounds;

/// Plain Latin hypercube: one point per stratum along every axis, with
/// independent seeded permutations per axis and uniform jitter inside each
/// stratum.
pub fn latin_hypercube<R: Rng + ?Sized>(bounds: &Bounds, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let dim = bounds.dim();
    let mut points = vec![vec![0.0; dim]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for d in 0..dim {
        strata.shuffle(rng);
        let (lo, w) = (bounds.lower()[d], bounds.width(d));
        for (i, point) in points.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            let v = lo + w * (strata[i] as f64 + u) / count as f64;
            point[d] = v.min(bounds.upper()[d]);
        }
    }
    points
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// First `count` Halton points (index 1 onwards) scaled to `bounds`.
///
/// Supports up to 32 dimensions.
pub fn halton(bounds: &Bounds, count: usize) -> Vec<Vec<f64>> {
    assert!(bounds.dim() <= PRIMES.len(), "halton supports at most 32 dimensions");
    (1..=count as u64)
        .map(|i| {
            (0..bounds.dim())
                .map(|d| bounds.lower()[d] + bounds.width(d) * radical_inverse(i, PRIMES[d]))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_inside() {
        let b = Bounds::uniform(-2.0, 3.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = latin_hypercube(&b, 1, &mut rng);
        assert_eq!(pts.len(), 1);
        assert!(b.contains(&pts[0]));
    }

    #[test]
    fn four_points_one_per_quarter() {
        let b = Bounds::uniform(0.0, 10.0, 1).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut bins: Vec<usize> = latin_hypercube(&b, 4, &mut rng)
                .iter()
                .map(|p| ((p[0] / 2.5).floor() as usize).min(3))
                .collect();
            bins.sort();
            assert_eq!(bins, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let b = Bounds::uniform(0.0, 1.0, 2).unwrap();
        let a = latin_hypercube(&b, 5, &mut ChaCha8Rng::seed_from_u64(3));
        let c = latin_hypercube(&b, 5, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, c);
    }

    #[test]
    fn halton_first_points() {
        let b = Bounds::uniform(0.0, 1.0, 2).unwrap();
        let h = halton(&b, 3);
        assert_eq!(h[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(h[1], vec![0.25, 2.0 / 3.0]);
        assert_eq!(h[2], vec![0.75, 1.0 / 9.0]);
    }
}
