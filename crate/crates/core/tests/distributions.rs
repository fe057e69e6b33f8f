//! The law of `tau(U)` against known distributions.

use abcmle::diagnostics::{ks_rejects, ks_statistic};
use abcmle::models::{gk_quantile, AlphaStable, GandK, SvAlphaR};
use abcmle::special::normal_cdf;
use abcmle::{simulate, Streams};

#[test]
fn gaussian_stable_law_passes_ks() {
    let m = AlphaStable::default();
    let n = 100_000;
    let y = simulate(&m, &[2.0, 0.0, 0.0, 1.0], n, &Streams::new(12)).unwrap().y;
    // A(2, 0, 0, 1) is N(0, 2)
    let d = ks_statistic(&y, |v| normal_cdf(v / 2f64.sqrt()));
    assert!(!ks_rejects(d, n), "D = {d}");
}

#[test]
fn gaussian_stable_law_is_distinguishable_from_unit_variance() {
    let m = AlphaStable::default();
    let n = 100_000;
    let y = simulate(&m, &[2.0, 0.0, 0.0, 1.0], n, &Streams::new(12)).unwrap().y;
    assert!(ks_rejects(ks_statistic(&y, normal_cdf), n));
}

#[test]
fn g_and_k_empirical_quantiles() {
    let theta = [2.0, 0.5, 10.0, 2.0];
    let m = GandK::default();
    let mut y = simulate(&m, &theta, 100_000, &Streams::new(3)).unwrap().y;
    y.sort_by(f64::total_cmp);
    for q in [0.1, 0.5, 0.9] {
        let emp = y[(q * y.len() as f64) as usize];
        let exact = gk_quantile(q, &theta, 0.8).unwrap();
        assert!((emp / exact - 1.0).abs() < 0.02, "q={q}: {emp} vs {exact}");
    }
}

#[test]
fn svar_volatility_autocorrelation() {
    let phi = 0.9;
    let m = SvAlphaR::new(false, true, 0.05);
    let x = simulate(&m, &[1.8, phi, 0.1], 100_000, &Streams::new(4)).unwrap().x;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    assert!((cov / var - phi).abs() < 0.02, "{}", cov / var);
}

#[test]
fn svar_drift_shifts_the_stationary_mean() {
    let (phi, delta) = (0.9, 0.2);
    let m = SvAlphaR::new(true, true, 0.05);
    let x = simulate(&m, &[1.8, phi, 0.1, delta], 50_000, &Streams::new(5)).unwrap().x;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    assert!((mean - delta / (1.0 - phi)).abs() < 0.1, "{mean}");
}
