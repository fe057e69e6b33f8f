//! Gradient estimators and ascent drivers against exact references.

use abcmle::iid::{iid_score, observation_stream};
use abcmle::kalman::{surrogate_log_likelihood, surrogate_score_fd};
use abcmle::mle::{
    ascent_update, batch_gradient_ascent, batch_with_score, finite_difference_score, online_gradient_ascent,
    BatchConfig, OnlineConfig, Schedule,
};
use abcmle::models::{AlphaStable, GandK, GaussianSurrogate};
use abcmle::smc::{run_filter, ScoreMethod, SmcOptions};
use abcmle::{corrupt_observations, simulate, Kernel, Model, Streams, Transform};

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn surrogate_data(theta: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let m = GaussianSurrogate::default();
    let sim = simulate(&m, theta, n, &Streams::new(seed)).unwrap();
    corrupt_observations(&sim.y, 1, 0.1, false, seed + 1).unwrap().values().to_vec()
}

#[test]
fn score_identity_holds_at_the_truth() {
    let theta = [2.0, 0.5, 10.0, 2.0];
    let m = GandK::default();
    let raw = simulate(&m, &theta, 10_000, &Streams::new(1)).unwrap().y;
    let y = corrupt_observations(&raw, 1, 0.1, true, 2).unwrap();
    let k = Kernel::for_model(&m, 0.1).unwrap();
    let streams = Streams::new(3);
    let scores: Vec<Vec<f64>> = y
        .values()
        .iter()
        .enumerate()
        .map(|(t, v)| iid_score(&m, &theta, &[*v], &k, 1000, &mut observation_stream(&streams, 0, t)).unwrap().gradient)
        .collect();
    for c in 0..4 {
        let col: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let (mean, se) = mean_se(&col);
        assert!(mean.abs() < 3.0 * se, "coordinate {c}: {mean} +- {se}");
    }
}

#[test]
fn importance_sampling_and_filter_agree_on_one_observation() {
    let theta = [1.5, 0.5, 0.0, 0.5];
    let m = AlphaStable::default();
    let k = Kernel::for_model(&m, 0.1).unwrap();
    let y = [0.4];
    let reps = 10_000;
    let mut is = vec![Vec::new(); 4];
    let mut pf = vec![Vec::new(); 4];
    for r in 0..reps {
        let a = iid_score(&m, &theta, &y, &k, 100, &mut Streams::new(r).keyed(&[9])).unwrap().gradient;
        let b = run_filter(&m, &theta, &y, &k, 100, ScoreMethod::PathSpace, SmcOptions::default(), Streams::new(r + reps))
            .unwrap()
            .score;
        for c in 0..4 {
            is[c].push(a[c]);
            pf[c].push(b[c]);
        }
    }
    for c in 0..4 {
        let (ma, sa) = mean_se(&is[c]);
        let (mb, sb) = mean_se(&pf[c]);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "coordinate {c}: {ma} vs {mb}");
    }
}

#[test]
fn proposal_carries_no_parameter_dependence() {
    for m in [Box::new(AlphaStable::default()) as Box<dyn Model>, Box::new(GandK::default())] {
        let theta = abcmle::gradcheck::random_theta(m.as_ref(), &mut Streams::new(1).keyed(&[0]));
        let mut u = vec![0.0; m.dim_u()];
        let mut g = vec![1.0; m.dim_theta()];
        m.sample_aux(&theta, &[], &mut Streams::new(2).keyed(&[0]), &mut u);
        m.grad_log_aux(&theta, &[], &u, &mut g);
        assert!(g.iter().all(|v| *v == 0.0));
    }
}

/// Plain Nelder-Mead on the exact surrogate likelihood, used as an
/// independent reference for the ascent driver.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], scale: f64, iters: usize) -> Vec<f64> {
    let d = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] += scale;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..iters {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64).collect();
        let towards = |t: f64| -> Vec<f64> { (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect() };
        let r = towards(-1.0);
        let fr = f(&r);
        if fr < vals[0] {
            let e = towards(-2.0);
            let fe = f(&e);
            if fe < fr {
                simplex[d] = e;
                vals[d] = fe;
            } else {
                simplex[d] = r;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = r;
            vals[d] = fr;
        } else {
            let c = towards(0.5);
            let fc = f(&c);
            if fc < vals[d] {
                simplex[d] = c;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    simplex[i] = (0..d).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    simplex[best].clone()
}

#[test]
fn exact_score_ascent_reaches_the_kalman_mle() {
    let truth = [0.8, 0.5, 0.6];
    let y = surrogate_data(&truth, 300, 40);
    let eps = 0.1;
    let neg = |t: &[f64]| {
        if t[0].abs() >= 1.0 || t[1] <= 0.0 || t[2] <= 0.0 {
            f64::INFINITY
        } else {
            -surrogate_log_likelihood(&y, t, eps)
        }
    };
    let mut reference = nelder_mead(neg, &truth, 0.1, 4000);
    reference = nelder_mead(neg, &reference, 0.01, 4000);

    let m = GaussianSurrogate::default();
    let cfg = BatchConfig {
        iterations: 5000,
        schedule: Schedule {
            a: 0.01,
            b: 0.51,
            t0: 0.0,
            multipliers: Vec::new(),
        },
        ..BatchConfig::default()
    };
    let rec = batch_with_score(&m, &[0.5, 1.0, 1.0], &cfg, |t, _| {
        Ok((surrogate_score_fd(&y, t, eps, 1e-7), surrogate_log_likelihood(&y, t, eps), 0.0))
    })
    .unwrap();
    let est = rec.last();
    for k in 0..3 {
        assert!((est[k] - reference[k]).abs() < 1e-3, "{est:?} vs {reference:?}");
    }
}

#[test]
fn online_and_batch_share_the_likelihood_trace_when_frozen() {
    let frozen = Schedule {
        a: 0.0,
        ..Schedule::default()
    };
    let streams = Streams::new(77);

    let theta = [0.8, 0.5, 0.6];
    let y = surrogate_data(&theta, 40, 50);
    let m = GaussianSurrogate::default();
    let k = Kernel::new(0.1, Transform::Identity).unwrap();
    let online = online_gradient_ascent(
        &m,
        &y,
        &theta,
        &k,
        &OnlineConfig {
            particles: 64,
            schedule: frozen.clone(),
            ..OnlineConfig::default()
        },
        &streams,
    )
    .unwrap();
    let batch = batch_gradient_ascent(
        &m,
        &y,
        &theta,
        &k,
        &BatchConfig {
            particles: 64,
            iterations: 1,
            schedule: frozen.clone(),
            score_method: ScoreMethod::Marginal,
            ..BatchConfig::default()
        },
        &streams,
    )
    .unwrap();
    assert_eq!(online.log_likelihood.iter().sum::<f64>(), batch.log_likelihood[0]);
    let filter = run_filter(&m, &theta, &y, &k, 64, ScoreMethod::Marginal, SmcOptions::default(), streams.child(1)).unwrap();
    assert_eq!(online.log_likelihood, filter.increments);
    assert!(online.theta.iter().all(|t| t == &theta));

    let theta = [1.5, 0.2, 0.0, 0.5];
    let m = AlphaStable::default();
    let raw = simulate(&m, &theta, 40, &Streams::new(5)).unwrap().y;
    let y = corrupt_observations(&raw, 1, 0.1, true, 6).unwrap();
    let k = Kernel::for_model(&m, 0.1).unwrap();
    let online = online_gradient_ascent(
        &m,
        y.values(),
        &theta,
        &k,
        &OnlineConfig {
            particles: 64,
            schedule: frozen.clone(),
            ..OnlineConfig::default()
        },
        &streams,
    )
    .unwrap();
    let batch = batch_gradient_ascent(
        &m,
        y.values(),
        &theta,
        &k,
        &BatchConfig {
            particles: 64,
            iterations: 1,
            schedule: frozen,
            ..BatchConfig::default()
        },
        &streams,
    )
    .unwrap();
    assert_eq!(online.log_likelihood.iter().sum::<f64>(), batch.log_likelihood[0]);
}

#[test]
fn iid_online_step_is_a_single_observation_update() {
    let theta = [1.5, 0.2, 0.0, 0.5];
    let m = AlphaStable::default();
    let k = Kernel::for_model(&m, 0.1).unwrap();
    let y = [0.3, -0.1];
    let streams = Streams::new(8);
    let schedule = Schedule::default();
    let rec = online_gradient_ascent(
        &m,
        &y,
        &theta,
        &k,
        &OnlineConfig {
            particles: 200,
            schedule: schedule.clone(),
            ..OnlineConfig::default()
        },
        &streams,
    )
    .unwrap();
    let g = iid_score(&m, &theta, &y[..1], &k, 200, &mut observation_stream(&streams, 1, 0)).unwrap().gradient;
    let (expected, _) = ascent_update(&m, &theta, &g, &schedule, 1).unwrap();
    assert_eq!(rec.gradient[0], g);
    assert_eq!(rec.theta[0], expected);
}

#[test]
fn finite_difference_oracle_agrees_with_path_space_score() {
    let theta = [0.8, 0.5, 0.6];
    let y = surrogate_data(&theta, 20, 60);
    let m = GaussianSurrogate::default();
    let k = Kernel::new(0.1, Transform::Identity).unwrap();
    let reps = 200;
    let mut fd = vec![Vec::new(); 3];
    let mut fd_half = vec![Vec::new(); 3];
    let mut on = vec![Vec::new(); 3];
    for r in 0..reps {
        let a = finite_difference_score(&m, &theta, &y, &k, 300, 1e-4, Streams::new(r)).unwrap();
        let h = finite_difference_score(&m, &theta, &y, &k, 300, 5e-5, Streams::new(r)).unwrap();
        let b = run_filter(&m, &theta, &y, &k, 300, ScoreMethod::PathSpace, SmcOptions::default(), Streams::new(r + reps))
            .unwrap()
            .score;
        for c in 0..3 {
            fd[c].push(a[c]);
            fd_half[c].push(h[c]);
            on[c].push(b[c]);
        }
    }
    for c in 0..3 {
        let (ma, sa) = mean_se(&fd[c]);
        let (mh, sh) = mean_se(&fd_half[c]);
        let (mb, sb) = mean_se(&on[c]);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "coordinate {c}: {ma} vs {mb}");
        assert!((ma - mh).abs() < 3.0 * sa.max(sh), "coordinate {c}: {ma} vs {mh}");
    }
}

#[test]
fn runs_are_reproducible() {
    let theta = [0.8, 0.5, 0.6];
    let y = surrogate_data(&theta, 30, 70);
    let m = GaussianSurrogate::default();
    let k = Kernel::new(0.1, Transform::Identity).unwrap();
    let cfg = OnlineConfig {
        particles: 50,
        ..OnlineConfig::default()
    };
    let a = online_gradient_ascent(&m, &y, &[0.5, 1.0, 1.0], &k, &cfg, &Streams::new(1)).unwrap();
    let b = online_gradient_ascent(&m, &y, &[0.5, 1.0, 1.0], &k, &cfg, &Streams::new(1)).unwrap();
    assert_eq!(a.theta, b.theta);
    assert_eq!(a.gradient, b.gradient);
    assert_eq!(a.log_likelihood, b.log_likelihood);
}
