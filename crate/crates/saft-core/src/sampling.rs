//! Exact-distribution samplers for the Monte-Carlo posterior machinery.
//!
//! Credible-interval endpoints are decision boundaries, so the gamma sampler
//! is rejection-based (Marsaglia–Tsang) rather than approximate. All samplers
//! draw from a caller-supplied ChaCha stream, which keeps every draw sequence
//! a pure function of the seed.

use rand_core::RngCore;

use crate::seeding::Rng;
use crate::types::{DirichletParams, ProbVector};

/// Uniform draw on the open interval (0, 1).
///
/// Maps the top 53 bits of a 64-bit word to the midpoint of its dyadic cell:
/// ((x >> 11) + 0.5) · 2⁻⁵³. Never returns 0 or 1, so logs and inverse-CDF
/// transforms are safe without clamping.
pub fn uniform_open(rng: &mut Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw via the Marsaglia polar method.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    loop {
        let v1 = 2.0 * uniform_open(rng) - 1.0;
        let v2 = 2.0 * uniform_open(rng) - 1.0;
        let s = v1 * v1 + v2 * v2;
        if s > 0.0 && s < 1.0 {
            return v1 * libm::sqrt(-2.0 * libm::log(s) / s);
        }
    }
}

/// Gamma(shape, 1) draw via Marsaglia–Tsang squeeze-rejection.
///
/// For shape ≥ 1: with d = shape − 1/3 and c = 1/√(9d), accept d·(1+cx)³
/// when the squeeze u < 1 − 0.0331·x⁴ passes, falling back to the exact log
/// test. For shape < 1, draw at shape+1 and boost by u^(1/shape).
pub fn sample_gamma(shape: f64, rng: &mut Rng) -> f64 {
    debug_assert!(shape > 0.0, "gamma shape must be positive");
    if shape < 1.0 {
        let boost = libm::pow(uniform_open(rng), 1.0 / shape);
        return sample_gamma(shape + 1.0, rng) * boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / libm::sqrt(9.0 * d);
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = uniform_open(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if libm::log(u) < 0.5 * x2 + d * (1.0 - v + libm::log(v)) {
            return d * v;
        }
    }
}

/// Dirichlet draw: independent Gamma(wᵢ, 1) draws, normalized.
///
/// With very small weights every gamma draw can underflow to zero; the whole
/// vector is then redrawn, so the result is always a valid simplex point.
pub fn sample_dirichlet(params: &DirichletParams, rng: &mut Rng) -> ProbVector {
    let weights = params.weights();
    let mut gammas = alloc::vec![0.0; weights.len()];
    loop {
        let mut sum = 0.0;
        for (slot, &w) in gammas.iter_mut().zip(weights) {
            *slot = sample_gamma(w, rng);
            sum += *slot;
        }
        if sum > 0.0 && sum.is_finite() {
            for slot in gammas.iter_mut() {
                *slot /= sum;
            }
            match ProbVector::new(core::mem::take(&mut gammas)) {
                Ok(p) => return p,
                // Normalization can only fail through pathological rounding;
                // redraw rather than return an invalid point.
                Err(_) => gammas = alloc::vec![0.0; weights.len()],
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn uniform_stays_strictly_inside_unit_interval() {
        let mut rng = rng_from_seed(1);
        let mut sum = 0.0;
        for _ in 0..100_000 {
            let u = uniform_open(&mut rng);
            assert!(u > 0.0 && u < 1.0);
            sum += u;
        }
        let mean = sum / 100_000.0;
        assert!((mean - 0.5).abs() < 0.005, "uniform mean {mean}");
    }

    #[test]
    fn normal_moments_are_near_standard() {
        let mut rng = rng_from_seed(2);
        let draws: Vec<f64> = (0..50_000).map(|_| standard_normal(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (draws.len() - 1) as f64;
        assert!(mean.abs() < 0.02, "normal mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "normal variance {var}");
    }

    #[test]
    fn gamma_moments_match_shape() {
        for &shape in &[0.5, 1.0, 2.5, 8.0] {
            let mut rng = rng_from_seed(3);
            let draws: Vec<f64> = (0..50_000).map(|_| sample_gamma(shape, &mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / (draws.len() - 1) as f64;
            assert!((mean - shape).abs() < 0.05 * shape.max(1.0), "shape {shape} mean {mean}");
            assert!((var - shape).abs() < 0.12 * shape.max(1.0), "shape {shape} var {var}");
        }
    }

    #[test]
    fn gamma_draws_are_positive() {
        let mut rng = rng_from_seed(4);
        for _ in 0..10_000 {
            assert!(sample_gamma(0.05, &mut rng) >= 0.0);
            assert!(sample_gamma(3.0, &mut rng) > 0.0);
        }
    }

    #[test]
    fn dirichlet_flat_component_means() {
        let params = DirichletParams::new(vec![1.0; 4]).unwrap();
        let mut rng = rng_from_seed(5);
        let mut sums = [0.0; 4];
        let k = 100_000;
        for _ in 0..k {
            let p = sample_dirichlet(&params, &mut rng);
            for (s, v) in sums.iter_mut().zip(p.as_slice()) {
                *s += v;
            }
        }
        for s in sums {
            let mean = s / k as f64;
            assert!((mean - 0.25).abs() < 0.005, "component mean {mean}");
        }
    }

    #[test]
    fn dirichlet_concentrated_component_variance() {
        // Dirichlet(10,10,10,10): Var = αᵢ(α₀−αᵢ)/(α₀²(α₀+1)) = 0.25·0.75/41.
        let params = DirichletParams::new(vec![10.0; 4]).unwrap();
        let mut rng = rng_from_seed(6);
        let k = 100_000;
        let mut first: Vec<f64> = Vec::with_capacity(k);
        for _ in 0..k {
            first.push(sample_dirichlet(&params, &mut rng).as_slice()[0]);
        }
        let mean = first.iter().sum::<f64>() / k as f64;
        let var = first.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64;
        let want = 0.25 * 0.75 / 41.0;
        assert!((var - want).abs() < 0.1 * want, "variance {var} vs {want}");
    }

    #[test]
    fn fixed_seed_replays_identical_sequences() {
        let params = DirichletParams::new(vec![4.0, 8.0, 41.0, 61.0]).unwrap();
        let run = |seed| {
            let mut rng = rng_from_seed(seed);
            (0..100).map(|_| sample_dirichlet(&params, &mut rng)).collect::<Vec<_>>()
        };
        let a = run(99);
        let b = run(99);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_slice(), y.as_slice());
        }
    }
}
