//! Weight arithmetic and systematic resampling.

use rand::Rng;

/// `log sum exp(v)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return if m.is_nan() { f64::NAN } else { m };
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalises log weights in place into `out`; returns the log normaliser.
pub fn normalize_log_weights(log_w: &[f64], out: &mut [f64]) -> f64 {
    let lse = log_sum_exp(log_w);
    for (o, &l) in out.iter_mut().zip(log_w) {
        *o = (l - lse).exp();
    }
    lse
}

/// Effective sample size `1 / sum W^2` of normalised weights.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling driven by a single uniform `offset` in `[0, 1)`.
///
/// Particle `i` receives either `floor(N W_i)` or `ceil(N W_i)` offspring.
pub fn systematic_indices(weights: &[f64], offset: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let pos = (i as f64 + offset) / n as f64;
        while pos >= cum && j < n - 1 {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

/// Systematic resampling with the offset drawn from `rng`.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let offset: f64 = rng.random();
    systematic_indices(weights, offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    #[test]
    fn degenerate_weights_pick_one_parent() {
        let w = [0.0, 0.0, 1.0, 0.0];
        for off in [0.0, 0.3, 0.999] {
            assert_eq!(systematic_indices(&w, off), vec![2, 2, 2, 2]);
        }
    }

    #[test]
    fn uniform_weights_give_one_offspring_each() {
        let w = vec![0.125; 8];
        for off in [0.0, 0.5, 0.999_999] {
            assert_eq!(systematic_indices(&w, off), (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn offspring_counts_within_one_of_expectation() {
        let streams = Streams::new(99);
        for trial in 0..500 {
            let mut rng = streams.keyed(&[trial]);
            let n = 2 + (trial as usize % 50);
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let idx = systematic_resample(&w, &mut rng);
            assert_eq!(idx.len(), n);
            let mut counts = vec![0usize; n];
            for i in idx {
                counts[i] += 1;
            }
            for (c, wi) in counts.iter().zip(&w) {
                assert!((*c as f64 - n as f64 * wi).abs() < 1.0 + 1e-9, "count {c} vs {}", n as f64 * wi);
            }
        }
    }

    #[test]
    fn ess_bounds() {
        assert_eq!(ess(&[0.25; 4]), 4.0);
        assert_eq!(ess(&[0.0, 1.0, 0.0]), 1.0);
        assert_eq!(ess(&[0.5, 0.0, 0.5]), 2.0);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        let mut out = [0.0; 3];
        normalize_log_weights(&[-800.0, -801.0, -802.0], &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
