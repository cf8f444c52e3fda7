//! Statistical validation helpers: chi-square goodness of fit with bin
//! merging, total-variation distance, and binomial checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected
/// probabilities. Bins with expected count below `min_expected` are merged
/// into a shared remainder bin. Returns p-value 1 when fewer than two bins
/// survive.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64], min_expected: f64) -> ChiSquareReport {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut rest = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * nf;
        if e < min_expected {
            rest.0 += o as f64;
            rest.1 += e;
        } else {
            bins.push((o as f64, e));
        }
    }
    if rest.1 > 0.0 {
        bins.push(rest);
    }
    if bins.len() < 2 {
        return ChiSquareReport { statistic: 0.0, dof: 0, p_value: 1.0 };
    }
    let statistic: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    ChiSquareReport { statistic, dof, p_value: 1.0 - dist.cdf(statistic) }
}

/// Total-variation distance between two probability vectors over the same
/// index set.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// |observed/n - p| measured in binomial standard deviations.
pub fn binomial_sigmas(observed: u64, n: u64, p: f64) -> f64 {
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    if sigma == 0.0 {
        return if observed as f64 == n as f64 * p { 0.0 } else { f64::INFINITY };
    }
    (observed as f64 - n as f64 * p).abs() / sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn uniform_sample_passes_chi_square() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut counts = [0u64; 6];
        for _ in 0..60_000 {
            counts[rng.gen_range(0..6)] += 1;
        }
        let r = chi_square_gof(&counts, &[1.0 / 6.0; 6], 5.0);
        assert_eq!(r.dof, 5);
        assert!(r.p_value > 0.001, "p {}", r.p_value);
    }

    #[test]
    fn biased_sample_fails_chi_square() {
        let counts = [30_000u64, 10_000, 10_000, 10_000];
        let r = chi_square_gof(&counts, &[0.25; 4], 5.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn small_bins_are_merged() {
        let counts = [990u64, 4, 3, 3];
        let probs = [0.99, 0.004, 0.003, 0.003];
        let r = chi_square_gof(&counts, &probs, 5.0);
        assert_eq!(r.dof, 1); // big bin + merged remainder
        assert!(r.p_value > 0.5);
    }

    #[test]
    fn tv_and_binomial() {
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]) < 1e-15);
        assert!(binomial_sigmas(500, 1000, 0.5) < 1e-12);
        assert!(binomial_sigmas(600, 1000, 0.5) > 6.0);
    }
}
