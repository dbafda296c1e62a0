//! Variation operators on flat genomes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::MoeaError;
use crate::model::Genome;

/// Add an independent `N(0, sigma^2)` draw to every component.
pub fn gaussian_mutation(genome: &Genome, sigma: f64, rng: &mut impl Rng) -> Result<Genome, MoeaError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(MoeaError::InvalidConfig(format!("mutation strength must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(genome.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    Ok(Genome(genome.0.iter().map(|v| v + normal.sample(rng)).collect()))
}

/// Componentwise blend with `u_i ~ U(0, 1)`:
/// `o1 = u p + (1 - u) q`, `o2 = u q + (1 - u) p`.
pub fn weight_crossover(p: &Genome, q: &Genome, rng: &mut impl Rng) -> Result<(Genome, Genome), MoeaError> {
    if p.len() != q.len() {
        return Err(MoeaError::ShapeMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut o1 = Vec::with_capacity(p.len());
    let mut o2 = Vec::with_capacity(p.len());
    for (&a, &b) in p.0.iter().zip(&q.0) {
        let u: f64 = rng.random();
        o1.push(u * a + (1.0 - u) * b);
        o2.push(u * b + (1.0 - u) * a);
    }
    Ok((Genome(o1), Genome(o2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn zero_sigma_is_identity() {
        let g = Genome(vec![0.5, -1.0, 2.0]);
        assert_eq!(gaussian_mutation(&g, 0.0, &mut stream(1, 0)).unwrap(), g);
        assert!(gaussian_mutation(&g, -1.0, &mut stream(1, 0)).is_err());
    }

    #[test]
    fn mutation_moments() {
        let sigma = 0.05;
        let n = 10_000;
        let g = Genome(vec![1.0, -2.0, 0.0]);
        let mut r = stream(11, 0);
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let m = gaussian_mutation(&g, sigma, &mut r).unwrap();
            for k in 0..3 {
                let d = m.0[k] - g.0[k];
                sum[k] += d;
                sq[k] += d * d;
            }
        }
        let se = sigma / (n as f64).sqrt();
        for k in 0..3 {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            assert!(mean.abs() < 3.0 * se, "mean {mean}");
            assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn crossover_of_equal_parents() {
        let p = Genome(vec![0.3, -0.7, 1.1]);
        let (a, b) = weight_crossover(&p, &p, &mut stream(2, 0)).unwrap();
        assert_eq!(a, p);
        assert_eq!(b, p);
    }

    #[test]
    fn crossover_rejects_length_mismatch() {
        let r = weight_crossover(&Genome(vec![0.0]), &Genome(vec![0.0, 1.0]), &mut stream(2, 0));
        assert!(matches!(r, Err(MoeaError::ShapeMismatch { expected: 1, got: 2 })));
    }

    proptest! {
        #[test]
        fn crossover_children_are_convex(
            p in prop::collection::vec(-5.0f64..5.0, 1..40),
            seed in any::<u64>(),
        ) {
            let q: Vec<f64> = p.iter().map(|v| 1.0 - 0.5 * v).collect();
            let (p, q) = (Genome(p), Genome(q));
            let (a, b) = weight_crossover(&p, &q, &mut stream(seed, 0)).unwrap();
            for i in 0..p.len() {
                let (lo, hi) = (p.0[i].min(q.0[i]), p.0[i].max(q.0[i]));
                prop_assert!(a.0[i] >= lo - 1e-12 && a.0[i] <= hi + 1e-12);
                prop_assert!((a.0[i] + b.0[i] - (p.0[i] + q.0[i])).abs() <= 1e-12);
            }
        }
    }
}
