//! Particle filter checks against the exact Kalman recursion of the
//! linear-Gaussian surrogate.

use abcmle::kalman::{surrogate_log_likelihood, surrogate_score_fd};
use abcmle::models::{AlphaStable, GaussianSurrogate};
use abcmle::smc::{estimate_log_likelihood, run_filter, ParticleSystem, ScoreMethod, SmcOptions};
use abcmle::{corrupt_observations, simulate, Kernel, Model, Streams, Transform};

const THETA: [f64; 3] = [0.8, 0.5, 0.6];
const EPS: f64 = 0.1;

fn surrogate_data(n: usize, seed: u64) -> Vec<f64> {
    let m = GaussianSurrogate::default();
    let sim = simulate(&m, &THETA, n, &Streams::new(seed)).unwrap();
    corrupt_observations(&sim.y, 1, EPS, false, seed + 1).unwrap().values().to_vec()
}

fn kernel() -> Kernel {
    Kernel::new(EPS, Transform::Identity).unwrap()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn initial_particles_follow_the_stationary_law() {
    let m = GaussianSurrogate::default();
    let n = 100_000;
    let ps = ParticleSystem::init(&m, &THETA, n, ScoreMethod::Marginal, SmcOptions::default(), Streams::new(5)).unwrap();
    let xs: Vec<f64> = (0..n).map(|i| ps.x(i)[0]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    let exact = THETA[1] / (1.0 - THETA[0] * THETA[0]);
    assert!((var / exact - 1.0).abs() < 0.02, "{var} vs {exact}");
    assert!(ps.weights().iter().all(|w| (*w - 1.0 / n as f64).abs() < 1e-18));
    for i in 0..n {
        assert!(ps.score_accumulator(i).iter().all(|s| *s == 0.0));
    }
}

#[test]
fn single_step_likelihood_is_unbiased() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(1, 11);
    let exact = surrogate_log_likelihood(&y, &THETA, EPS).exp();
    let est: Vec<f64> = (0..10_000)
        .map(|r| estimate_log_likelihood(&m, &THETA, &y, &kernel(), 20, Streams::new(1000 + r)).unwrap().exp())
        .collect();
    let (mean, se) = mean_se(&est);
    assert!((mean - exact).abs() < 3.0 * se, "{mean} +- {se} vs {exact}");
}

#[test]
fn long_series_likelihood_matches_kalman() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(50, 21);
    let exact = surrogate_log_likelihood(&y, &THETA, EPS);
    let logs: Vec<f64> = (0..100)
        .map(|r| estimate_log_likelihood(&m, &THETA, &y, &kernel(), 20_000, Streams::new(r)).unwrap())
        .collect();
    assert!((logs[0] - exact).abs() < 0.5);
    let ratios: Vec<f64> = logs.iter().map(|l| (l - exact).exp()).collect();
    let (mean, se) = mean_se(&ratios);
    assert!((mean - 1.0).abs() < 3.0 * se, "{mean} +- {se}");
}

#[test]
fn more_particles_reduce_likelihood_variance() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(30, 31);
    let var_at = |n: usize| {
        let v: Vec<f64> = (0..100)
            .map(|r| estimate_log_likelihood(&m, &THETA, &y, &kernel(), n, Streams::new(r)).unwrap().exp())
            .collect();
        let (_, se) = mean_se(&v);
        se * se
    };
    assert!(var_at(400) < var_at(200));
}

#[test]
fn empty_data_has_zero_log_likelihood() {
    let m = GaussianSurrogate::default();
    assert_eq!(estimate_log_likelihood(&m, &THETA, &[], &kernel(), 10, Streams::new(0)).unwrap(), 0.0);
}

#[test]
fn both_score_methods_match_kalman() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(20, 41);
    let exact = surrogate_score_fd(&y, &THETA, EPS, 1e-6);
    for method in [ScoreMethod::PathSpace, ScoreMethod::Marginal] {
        let runs: Vec<Vec<f64>> = (0..200)
            .map(|r| {
                run_filter(&m, &THETA, &y, &kernel(), 300, method, SmcOptions::default(), Streams::new(r))
                    .unwrap()
                    .score
            })
            .collect();
        for k in 0..3 {
            let col: Vec<f64> = runs.iter().map(|s| s[k]).collect();
            let (mean, se) = mean_se(&col);
            assert!((mean - exact[k]).abs() < 3.0 * se, "{method:?} coord {k}: {mean} +- {se} vs {}", exact[k]);
        }
    }
}

#[test]
fn first_step_scores_coincide() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(1, 51);
    let on = run_filter(&m, &THETA, &y, &kernel(), 200, ScoreMethod::PathSpace, SmcOptions::default(), Streams::new(3)).unwrap();
    let on2 = run_filter(&m, &THETA, &y, &kernel(), 200, ScoreMethod::Marginal, SmcOptions::default(), Streams::new(3)).unwrap();
    assert_eq!(on.score, on2.score);
    assert_eq!(on.log_likelihood, on2.log_likelihood);
}

#[test]
fn static_mixture_collapses_to_weighted_mean() {
    let m = AlphaStable::default();
    let theta = [1.5, 0.2, 0.0, 0.5];
    let raw = simulate(&m, &theta, 40, &Streams::new(7)).unwrap().y;
    let y = corrupt_observations(&raw, 1, 0.1, true, 8).unwrap();
    let k = Kernel::for_model(&m, 0.1).unwrap();
    let run = |collapse| {
        let opts = SmcOptions {
            collapse_static: collapse,
            ..SmcOptions::default()
        };
        run_filter(&m, &theta, y.values(), &k, 300, ScoreMethod::Marginal, opts, Streams::new(9)).unwrap()
    };
    let (fast, full) = (run(true), run(false));
    assert_eq!(fast.log_likelihood, full.log_likelihood);
    for (a, b) in fast.score.iter().zip(&full.score) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn weights_normalise_and_equal_outputs_give_uniform_weights() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(5, 61);
    let mut ps = ParticleSystem::init(&m, &THETA, 500, ScoreMethod::PathSpace, SmcOptions::default(), Streams::new(1)).unwrap();
    let mut total = 0.0;
    for t in 0..5 {
        let r = ps.step(&m, &THETA, &y[t..t + 1], &kernel()).unwrap();
        total += r.log_likelihood_increment;
        assert!((ps.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let inv: f64 = 1.0 / ps.weights().iter().map(|w| w * w).sum::<f64>();
        assert!((ps.ess() - inv).abs() < 1e-9);
    }
    assert_eq!(total, ps.log_likelihood());

    // sigma_x^2 tiny, sigma_y tiny: tau is almost x and x collapses on 0
    let theta = [0.0, 1e-300, 1e-300];
    let mut ps = ParticleSystem::init(&m, &theta, 50, ScoreMethod::None, SmcOptions::default(), Streams::new(2)).unwrap();
    ps.step(&m, &theta, &[0.3], &kernel()).unwrap();
    assert!(ps.weights().iter().all(|w| (w - 0.02).abs() < 1e-12));
    assert!((ps.ess() - 50.0).abs() < 1e-9);
}

#[test]
fn estimates_are_invariant_to_particle_order() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(10, 71);
    let mut ps = ParticleSystem::init(&m, &THETA, 257, ScoreMethod::PathSpace, SmcOptions::default(), Streams::new(4)).unwrap();
    for t in 0..10 {
        ps.step(&m, &THETA, &y[t..t + 1], &kernel()).unwrap();
    }
    let n = ps.len();
    let perm: Vec<usize> = (0..n).map(|i| (i * 101 + 7) % n).collect();
    let lw: Vec<f64> = perm.iter().map(|&i| ps.log_weights()[i]).collect();
    let mut w = vec![0.0; n];
    let lse = abcmle::smc::normalize_log_weights(&lw, &mut w);
    let lse0 = abcmle::smc::log_sum_exp(ps.log_weights());
    assert!((lse - lse0).abs() <= 1e-10 * lse0.abs());
    let mut score = [0.0; 3];
    for (j, &i) in perm.iter().enumerate() {
        for k in 0..3 {
            score[k] += w[j] * ps.score_accumulator(i)[k];
        }
    }
    for (a, b) in score.iter().zip(ps.score_estimate()) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
    }
}

#[test]
fn filter_is_deterministic() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(30, 81);
    let a = run_filter(&m, &THETA, &y, &kernel(), 100, ScoreMethod::Marginal, SmcOptions::default(), Streams::new(6)).unwrap();
    let b = run_filter(&m, &THETA, &y, &kernel(), 100, ScoreMethod::Marginal, SmcOptions::default(), Streams::new(6)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn conditional_cdf_is_a_distribution_function() {
    let m = GaussianSurrogate::default();
    let y = surrogate_data(3, 91);
    let mut ps = ParticleSystem::init(&m, &THETA, 100, ScoreMethod::None, SmcOptions::default(), Streams::new(1)).unwrap();
    for t in 0..3 {
        ps.step(&m, &THETA, &y[t..t + 1], &kernel()).unwrap();
    }
    let mut prev = 0.0;
    for i in 0..=400 {
        let f = ps.conditional_cdf(-10.0 + 0.05 * i as f64, &kernel()).unwrap();
        assert!(f >= prev && (0.0..=1.0).contains(&f));
        prev = f;
    }
    assert_eq!(ps.conditional_cdf(1e6, &kernel()).unwrap(), 1.0);

    // every particle at the same output: the CDF at that output is one half
    let theta = [0.0, 1e-300, 1e-300];
    let mut ps = ParticleSystem::init(&m, &theta, 10, ScoreMethod::None, SmcOptions::default(), Streams::new(1)).unwrap();
    ps.step(&m, &theta, &[0.0], &kernel()).unwrap();
    let c = ps.tau(0)[0];
    assert!((ps.conditional_cdf(c, &kernel()).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn fewer_than_two_particles_rejected() {
    let m = GaussianSurrogate::default();
    assert!(ParticleSystem::init(&m, &THETA, 1, ScoreMethod::None, SmcOptions::default(), Streams::new(0)).is_err());
}

#[test]
fn adaptive_resampling_with_marginal_scores_rejected() {
    let m = GaussianSurrogate::default();
    let opts = SmcOptions {
        resampling: abcmle::smc::Resampling::Adaptive { threshold: 0.5 },
        ..SmcOptions::default()
    };
    assert!(ParticleSystem::init(&m, &THETA, 10, ScoreMethod::Marginal, opts, Streams::new(0)).is_err());
    assert!(ParticleSystem::init(&m, &THETA, 10, ScoreMethod::PathSpace, opts, Streams::new(0)).is_ok());
}

#[test]
fn vanishing_epsilon_is_a_degeneracy_error() {
    let m = GaussianSurrogate::default();
    let k = Kernel::new(1e-200, Transform::Identity).unwrap();
    let err = estimate_log_likelihood(&m, &THETA, &[1e3], &k, 10, Streams::new(0)).unwrap_err();
    assert!(matches!(err, abcmle::Error::Degeneracy { step: 1, .. }), "{err:?}");
    let _ = m.name();
}
