//! Batch and online stochastic gradient ascent on the noisy-ABC likelihood.
//!
//! Updates are taken in unconstrained coordinates:
//! `v_k <- v_k + clip(gamma_j m_k g_k, 10 gamma_j m_k)` with
//! `gamma_j = a (j + t0)^-b`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::iid::{batch_iid_score, iid_score, observation_stream, with_step};
use crate::model::{is_static, Model};
use crate::observation::Kernel;
use crate::rng::Streams;
use crate::smc::{estimate_log_likelihood, run_filter, ParticleSystem, ScoreMethod, SmcOptions};

/// Per-coordinate updates are clipped to this many step sizes.
pub const CLIP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    /// Per-coordinate scale multipliers; empty means all ones.
    pub multipliers: Vec<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            a: 0.1,
            b: 0.6,
            t0: 0.0,
            multipliers: Vec::new(),
        }
    }
}

impl Schedule {
    /// `a = 0` is accepted so that a driver can run with theta frozen.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("step-size scale a = {} must be nonnegative", self.a)));
        }
        if !(self.b > 0.5 && self.b <= 1.0) {
            return Err(Error::Config(format!("step-size exponent b = {} outside (0.5, 1]", self.b)));
        }
        if !(self.t0 >= 0.0 && self.t0.is_finite()) {
            return Err(Error::Config(format!("step-size offset t0 = {} must be nonnegative", self.t0)));
        }
        if !self.multipliers.is_empty() && self.multipliers.len() != dim {
            return Err(Error::Config(format!(
                "{} step-size multipliers for {dim} parameters",
                self.multipliers.len()
            )));
        }
        if self.multipliers.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::Config("step-size multipliers must be positive".into()));
        }
        Ok(())
    }

    /// Step size for iteration `j >= 1`.
    pub fn gamma(&self, j: usize) -> f64 {
        self.a * (j as f64 + self.t0).powf(-self.b)
    }

    pub fn multiplier(&self, k: usize) -> f64 {
        self.multipliers.get(k).copied().unwrap_or(1.0)
    }
}

/// Unconstrained increment for one update, with the per-coordinate clip mask.
pub fn unconstrained_step(grad: &[f64], schedule: &Schedule, j: usize) -> (Vec<f64>, Vec<bool>) {
    let gamma = schedule.gamma(j);
    let mut clipped = vec![false; grad.len()];
    let step = grad
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let scale = gamma * schedule.multiplier(k);
            let limit = CLIP_FACTOR * scale;
            let d = scale * g;
            if d.abs() > limit {
                clipped[k] = true;
                limit.copysign(d)
            } else {
                d
            }
        })
        .collect();
    (step, clipped)
}

/// Applies one ascent step to `theta` given a constrained-coordinate gradient.
pub fn ascent_update(
    model: &dyn Model,
    theta: &[f64],
    grad: &[f64],
    schedule: &Schedule,
    j: usize,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let domain = model.domain();
    let g = domain.gradient_to_unconstrained(theta, grad);
    let (step, clipped) = unconstrained_step(&g, schedule, j);
    let mut v = domain.to_unconstrained(theta)?;
    for (a, d) in v.iter_mut().zip(&step) {
        *a += d;
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("non-finite update at iteration {j} from theta {theta:?}")));
    }
    let mut next = domain.from_unconstrained(&v);
    model.adjust_update(theta, &mut next);
    domain.check(&next)?;
    Ok((next, clipped))
}

/// Time-indexed trace of a gradient-ascent run.
///
/// Row `j` holds the iterate after update `j`, the gradient that produced
/// it, the ESS and the log-likelihood term evaluated at the previous iterate.
/// For batch runs the log-likelihood term is the full-data estimate and the
/// ESS is averaged over the filter pass; for online runs both refer to the
/// current observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub names: Vec<String>,
    pub initial: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub gradient: Vec<Vec<f64>>,
    pub ess: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    pub clipped: Vec<Vec<bool>>,
    /// Wall-clock seconds per row; not part of equality-sensitive outputs.
    pub seconds: Vec<f64>,
}

impl RunRecord {
    pub fn new(model: &dyn Model, initial: &[f64]) -> Self {
        RunRecord {
            names: model.domain().names().to_vec(),
            initial: initial.to_vec(),
            theta: Vec::new(),
            gradient: Vec::new(),
            ess: Vec::new(),
            log_likelihood: Vec::new(),
            clipped: Vec::new(),
            seconds: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Latest iterate (the initial value if no update was made).
    pub fn last(&self) -> &[f64] {
        self.theta.last().unwrap_or(&self.initial)
    }

    /// Mean of the last `k` iterates.
    pub fn average_last(&self, k: usize) -> Vec<f64> {
        if self.theta.is_empty() || k == 0 {
            return self.last().to_vec();
        }
        let tail = &self.theta[self.theta.len().saturating_sub(k)..];
        let mut mean = vec![0.0; self.initial.len()];
        for row in tail {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= tail.len() as f64);
        mean
    }

    pub fn clip_events(&self) -> usize {
        self.clipped.iter().flatten().filter(|c| **c).count()
    }

    fn push(&mut self, theta: Vec<f64>, gradient: Vec<f64>, ess: f64, log_likelihood: f64, clipped: Vec<bool>, seconds: f64) {
        self.theta.push(theta);
        self.gradient.push(gradient);
        self.ess.push(ess);
        self.log_likelihood.push(log_likelihood);
        self.clipped.push(clipped);
        self.seconds.push(seconds);
    }
}

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: RunRecord,
    pub error: Error,
}

pub type RunResult = std::result::Result<RunRecord, Box<RunFailure>>;

fn fail(partial: RunRecord, error: Error) -> Box<RunFailure> {
    Box::new(RunFailure { partial, error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub particles: usize,
    pub iterations: usize,
    pub schedule: Schedule,
    /// Score estimator for models with hidden dynamics.
    pub score_method: ScoreMethod,
    pub smc: SmcOptions,
    /// i.i.d. models only: reuse one proposal sample for every observation
    /// within an iteration.
    pub shared_proposal: bool,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            particles: 1000,
            iterations: 1000,
            schedule: Schedule::default(),
            score_method: ScoreMethod::PathSpace,
            smc: SmcOptions::default(),
            shared_proposal: false,
        }
    }
}

/// Score and likelihood of the full data set at `theta`; iteration `j`
/// draws from `streams.child(j)` (HMM) or the `(j, t)`-keyed observation
/// streams (i.i.d.).
pub fn full_data_score(
    model: &dyn Model,
    theta: &[f64],
    data: &[f64],
    kernel: &Kernel,
    config: &BatchConfig,
    streams: &Streams,
    j: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    if is_static(model) {
        let s = batch_iid_score(model, theta, data, kernel, config.particles, streams, j, config.shared_proposal)?;
        Ok((s.gradient, s.log_likelihood, s.mean_ess))
    } else {
        if config.score_method == ScoreMethod::None {
            return Err(Error::Config("batch ascent needs a score method".into()));
        }
        let out = run_filter(
            model,
            theta,
            data,
            kernel,
            config.particles,
            config.score_method,
            config.smc,
            streams.child(j as u64),
        )?;
        let mean_ess = out.ess.iter().sum::<f64>() / out.ess.len().max(1) as f64;
        Ok((out.score, out.log_likelihood, mean_ess))
    }
}

/// `theta_j = theta_{j-1} + gamma_j grad log p_{theta_{j-1}}(y_1:n)`.
pub fn batch_gradient_ascent(
    model: &dyn Model,
    data: &[f64],
    theta0: &[f64],
    kernel: &Kernel,
    config: &BatchConfig,
    streams: &Streams,
) -> RunResult {
    batch_with_score(model, theta0, config, |theta, j| {
        full_data_score(model, theta, data, kernel, config, streams, j)
    })
}

/// Batch ascent driven by an arbitrary score oracle `(theta, j) -> (grad, loglik, ess)`.
pub fn batch_with_score<F>(model: &dyn Model, theta0: &[f64], config: &BatchConfig, mut score: F) -> RunResult
where
    F: FnMut(&[f64], usize) -> Result<(Vec<f64>, f64, f64)>,
{
    let mut record = RunRecord::new(model, theta0);
    if let Err(e) = check_start(model, theta0, &config.schedule, config.iterations) {
        return Err(fail(record, e));
    }
    let mut theta = theta0.to_vec();
    for j in 1..=config.iterations {
        let start = Instant::now();
        let step = score(&theta, j).and_then(|(grad, ll, ess)| {
            check_finite(&grad, j)?;
            let (next, clipped) = ascent_update(model, &theta, &grad, &config.schedule, j)?;
            Ok((next, grad, ll, ess, clipped))
        });
        match step {
            Ok((next, grad, ll, ess, clipped)) => {
                record.push(next.clone(), grad, ess, ll, clipped, start.elapsed().as_secs_f64());
                theta = next;
            }
            Err(e) => return Err(fail(record, e)),
        }
    }
    Ok(record)
}

fn check_start(model: &dyn Model, theta0: &[f64], schedule: &Schedule, iterations: usize) -> Result<()> {
    model.check_theta(theta0)?;
    model.domain().to_unconstrained(theta0)?;
    schedule.validate(model.dim_theta())?;
    if iterations == 0 {
        return Err(Error::Config("need at least one iteration".into()));
    }
    Ok(())
}

fn check_finite(grad: &[f64], j: usize) -> Result<()> {
    if grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite gradient estimate at step {j}: {grad:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    pub particles: usize,
    pub schedule: Schedule,
    /// Score estimator for models with hidden dynamics.
    pub score_method: ScoreMethod,
    pub smc: SmcOptions,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            particles: 1000,
            schedule: Schedule::default(),
            score_method: ScoreMethod::Marginal,
            smc: SmcOptions::default(),
        }
    }
}

/// `theta_n = theta_{n-1} + gamma_n grad log p_{theta_{n-1}}(y_n | y_1:n-1)`.
///
/// HMMs keep one particle system for the whole stream and use the change in
/// the total score estimate across a step as the incremental score. i.i.d.
/// models use a fresh importance-sampling estimate per observation.
/// Draws match iteration 1 of [`batch_gradient_ascent`] with the same streams.
pub fn online_gradient_ascent(
    model: &dyn Model,
    data: &[f64],
    theta0: &[f64],
    kernel: &Kernel,
    config: &OnlineConfig,
    streams: &Streams,
) -> RunResult {
    let dy = model.dim_y();
    let steps = data.len() / dy;
    let mut record = RunRecord::new(model, theta0);
    if let Err(e) = check_start(model, theta0, &config.schedule, steps) {
        return Err(fail(record, e));
    }
    let mut theta = theta0.to_vec();
    let mut system = None;
    if !is_static(model) {
        if config.score_method == ScoreMethod::None {
            return Err(fail(record, Error::Config("online ascent needs a score method".into())));
        }
        match ParticleSystem::init(model, &theta, config.particles, config.score_method, config.smc, streams.child(1)) {
            Ok(ps) => system = Some(ps),
            Err(e) => return Err(fail(record, e)),
        }
    }
    let mut before = vec![0.0; model.dim_theta()];
    for t in 0..steps {
        let start = Instant::now();
        let y = &data[t * dy..(t + 1) * dy];
        let n = t + 1;
        let step = match system.as_mut() {
            None => iid_score(model, &theta, y, kernel, config.particles, &mut observation_stream(streams, 1, t))
                .map_err(|e| with_step(e, n))
                .map(|s| (s.gradient, s.log_likelihood, s.ess)),
            Some(ps) => ps.step(model, &theta, y, kernel).map(|r| {
                let after = ps.score_estimate();
                let inc: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
                before = after;
                (inc, r.log_likelihood_increment, r.ess)
            }),
        }
        .and_then(|(grad, ll, ess)| {
            check_finite(&grad, n)?;
            let (next, clipped) = ascent_update(model, &theta, &grad, &config.schedule, n)?;
            Ok((next, grad, ll, ess, clipped))
        });
        match step {
            Ok((next, grad, ll, ess, clipped)) => {
                record.push(next.clone(), grad, ess, ll, clipped, start.elapsed().as_secs_f64());
                theta = next;
            }
            Err(e) => return Err(fail(record, e)),
        }
    }
    Ok(record)
}

/// Central differences of the particle log-likelihood with common random
/// numbers for the two evaluations of each coordinate.
pub fn finite_difference_score(
    model: &dyn Model,
    theta: &[f64],
    data: &[f64],
    kernel: &Kernel,
    particles: usize,
    delta: f64,
    streams: Streams,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {delta}")));
    }
    (0..theta.len())
        .map(|k| {
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[k] += delta;
            minus[k] -= delta;
            let lp = estimate_log_likelihood(model, &plus, data, kernel, particles, streams)?;
            let lm = estimate_log_likelihood(model, &minus, data, kernel, particles, streams)?;
            Ok((lp - lm) / (2.0 * delta))
        })
        .collect()
}
