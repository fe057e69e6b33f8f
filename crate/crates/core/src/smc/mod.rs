//! Bootstrap particle filter on the extended model `{Z_t, Y_eps_t}`.
//!
//! Each step propagates particles through `q(z' | z) = f(x' | x) nu(u' | x')`,
//! weights them by the ABC kernel, accumulates the unbiased likelihood
//! estimate and updates one of two score estimators:
//!
//! * [`ScoreMethod::PathSpace`]: cumulative scores carried along resampled
//!   ancestral lines, O(N) per step.
//! * [`ScoreMethod::Marginal`]: the marginal score functional recursion,
//!   mixing over every previous particle, O(N^2) per step.
//!
//! Weights are resampled systematically at the start of the following step,
//! so after [`ParticleSystem::step`] the system exposes the time-t weights.

pub mod resample;

use crate::error::{Error, Result};
use crate::model::{is_static, Model};
use crate::observation::Kernel;
use crate::rng::Streams;
pub use resample::{ess, log_sum_exp, normalize_log_weights, systematic_indices, systematic_resample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMethod {
    /// Likelihood only.
    None,
    /// O(N) path-space accumulators.
    PathSpace,
    /// O(N^2) marginal recursion.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resampling {
    EveryStep,
    /// Resample only when ESS falls below `threshold * N`.
    Adaptive { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcOptions {
    pub resampling: Resampling,
    /// For models without hidden dynamics the O(N^2) mixture reduces to a
    /// weighted mean; compute it that way unless this is false.
    pub collapse_static: bool,
}

impl Default for SmcOptions {
    fn default() -> Self {
        SmcOptions {
            resampling: Resampling::EveryStep,
            collapse_static: true,
        }
    }
}

/// What one filter step produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub log_likelihood_increment: f64,
    pub ess: f64,
}

/// N weighted latent pairs with their score accumulators.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    n: usize,
    dim_x: usize,
    dim_u: usize,
    dim_y: usize,
    dim_theta: usize,
    method: ScoreMethod,
    options: SmcOptions,
    streams: Streams,
    x: Vec<f64>,
    u: Vec<f64>,
    tau: Vec<f64>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    predictive: Vec<f64>,
    scores: Vec<f64>,
    ancestors: Vec<usize>,
    log_likelihood: f64,
    step: usize,
    ess: f64,
    // scratch
    x_prev: Vec<f64>,
    scores_prev: Vec<f64>,
    jac: Vec<f64>,
    grad: Vec<f64>,
    mix_log: Vec<f64>,
    mix_grad: Vec<f64>,
    log_prev_weights: Vec<f64>,
    uniform_predictive: bool,
}

impl ParticleSystem {
    /// Draws `n` i.i.d. latent pairs from `pi(z) = eta(x) nu(u | x)`.
    pub fn init(
        model: &dyn Model,
        theta: &[f64],
        n: usize,
        method: ScoreMethod,
        options: SmcOptions,
        streams: Streams,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 particles, got {n}")));
        }
        if let Resampling::Adaptive { threshold } = options.resampling {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::Config(format!("ESS threshold {threshold} outside [0, 1]")));
            }
            if method == ScoreMethod::Marginal {
                return Err(Error::Config(
                    "the marginal score recursion requires resampling at every step".into(),
                ));
            }
        }
        model.check_theta(theta)?;
        let (dx, du, dy, dt) = (model.dim_x(), model.dim_u(), model.dim_y(), model.dim_theta());
        let mut ps = ParticleSystem {
            n,
            dim_x: dx,
            dim_u: du,
            dim_y: dy,
            dim_theta: dt,
            method,
            options,
            streams,
            x: vec![0.0; n * dx],
            u: vec![0.0; n * du],
            tau: vec![0.0; n * dy],
            log_weights: vec![-(n as f64).ln(); n],
            weights: vec![1.0 / n as f64; n],
            predictive: vec![1.0 / n as f64; n],
            scores: vec![0.0; n * dt],
            ancestors: (0..n).collect(),
            log_likelihood: 0.0,
            step: 0,
            ess: n as f64,
            x_prev: vec![0.0; n * dx],
            scores_prev: vec![0.0; n * dt],
            jac: vec![0.0; dt * dy],
            grad: vec![0.0; dt],
            mix_log: vec![0.0; n],
            mix_grad: vec![0.0; n * dt],
            log_prev_weights: vec![0.0; n],
            uniform_predictive: true,
        };
        for i in 0..n {
            let mut rng = streams.particle(1, i);
            let x = &mut ps.x[i * dx..(i + 1) * dx];
            model.sample_initial(theta, &mut rng, x);
            model.sample_aux(theta, x, &mut rng, &mut ps.u[i * du..(i + 1) * du]);
        }
        Ok(ps)
    }

    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn step_index(&self) -> usize {
        self.step
    }
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }
    pub fn ess(&self) -> f64 {
        self.ess
    }
    pub fn method(&self) -> ScoreMethod {
        self.method
    }
    /// Normalised weights at the current step.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Unnormalised log weights at the current step.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }
    /// Normalised weights the particles carried into the current step
    /// before the observation was seen.
    pub fn predictive_weights(&self) -> &[f64] {
        &self.predictive
    }
    pub fn ancestors(&self) -> &[usize] {
        &self.ancestors
    }
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim_x..(i + 1) * self.dim_x]
    }
    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i * self.dim_u..(i + 1) * self.dim_u]
    }
    /// Model output `tau(z_i)` at the current step.
    pub fn tau(&self, i: usize) -> &[f64] {
        &self.tau[i * self.dim_y..(i + 1) * self.dim_y]
    }
    /// Per-particle score accumulator (path score or marginal functional).
    pub fn score_accumulator(&self, i: usize) -> &[f64] {
        &self.scores[i * self.dim_theta..(i + 1) * self.dim_theta]
    }

    /// Current estimate of `grad log p(y_1:t)` in constrained coordinates.
    pub fn score_estimate(&self) -> Vec<f64> {
        let dt = self.dim_theta;
        let mut out = vec![0.0; dt];
        for (i, w) in self.weights.iter().enumerate() {
            for (o, s) in out.iter_mut().zip(&self.scores[i * dt..(i + 1) * dt]) {
                *o += w * s;
            }
        }
        out
    }

    /// Filter-predictive CDF `P(Y_eps_t <= y | y_1:t-1)` at the current step,
    /// a mixture of Gaussian CDFs over the propagated particles.
    pub fn conditional_cdf(&self, y: f64, kernel: &Kernel) -> Result<f64> {
        if self.dim_y != 1 {
            return Err(Error::Config("conditional CDF needs scalar observations".into()));
        }
        if self.step == 0 {
            return Err(Error::Config("conditional CDF requested before the first step".into()));
        }
        let f: f64 = self
            .predictive
            .iter()
            .zip(&self.tau)
            .map(|(w, &t)| w * kernel.cdf(y, t))
            .sum();
        Ok(f.clamp(0.0, 1.0))
    }

    /// Advances the filter by one observation.
    pub fn step(&mut self, model: &dyn Model, theta: &[f64], y: &[f64], kernel: &Kernel) -> Result<StepReport> {
        if y.len() != self.dim_y {
            return Err(Error::Config(format!("observation has {} coordinates, model expects {}", y.len(), self.dim_y)));
        }
        let t = self.step + 1;
        let with_score = self.method != ScoreMethod::None;
        if t == 1 {
            self.predictive.fill(1.0 / self.n as f64);
            if with_score {
                self.initial_scores(model, theta);
            }
        } else {
            self.propagate(model, theta, t)?;
        }
        self.weight(model, theta, y, kernel, with_score)?;

        let inc = log_sum_exp(&self.log_weights);
        if !inc.is_finite() {
            return Err(Error::Degeneracy {
                step: t,
                theta: theta.to_vec(),
                epsilon: kernel.epsilon(),
            });
        }
        for (w, &l) in self.weights.iter_mut().zip(&self.log_weights) {
            *w = (l - inc).exp();
        }
        self.log_likelihood += inc;
        self.ess = ess(&self.weights);
        self.step = t;
        Ok(StepReport {
            log_likelihood_increment: inc,
            ess: self.ess,
        })
    }

    fn initial_scores(&mut self, model: &dyn Model, theta: &[f64]) {
        let (dx, du, dt) = (self.dim_x, self.dim_u, self.dim_theta);
        for i in 0..self.n {
            let x = &self.x[i * dx..(i + 1) * dx];
            let u = &self.u[i * du..(i + 1) * du];
            let s = &mut self.scores[i * dt..(i + 1) * dt];
            model.grad_log_initial(theta, x, s);
            model.grad_log_aux(theta, x, u, &mut self.grad);
            for (a, b) in s.iter_mut().zip(&self.grad) {
                *a += b;
            }
        }
    }

    fn propagate(&mut self, model: &dyn Model, theta: &[f64], t: usize) -> Result<()> {
        let (n, dx, du, dt) = (self.n, self.dim_x, self.dim_u, self.dim_theta);
        let resample = match self.options.resampling {
            Resampling::EveryStep => true,
            Resampling::Adaptive { threshold } => self.ess < threshold * n as f64,
        };
        if resample {
            let mut rng = self.streams.resampling(t);
            self.ancestors = systematic_resample(&self.weights, &mut rng);
            self.predictive.fill(1.0 / n as f64);
            self.uniform_predictive = true;
        } else {
            for (i, a) in self.ancestors.iter_mut().enumerate() {
                *a = i;
            }
            self.predictive.copy_from_slice(&self.weights);
            self.uniform_predictive = false;
        }
        std::mem::swap(&mut self.x, &mut self.x_prev);
        std::mem::swap(&mut self.scores, &mut self.scores_prev);

        for i in 0..n {
            let a = self.ancestors[i];
            let mut rng = self.streams.particle(t, i);
            let xp = &self.x_prev[a * dx..(a + 1) * dx];
            let x = &mut self.x[i * dx..(i + 1) * dx];
            model.sample_transition(theta, xp, &mut rng, x);
            model.sample_aux(theta, x, &mut rng, &mut self.u[i * du..(i + 1) * du]);
        }

        match self.method {
            ScoreMethod::None => {}
            ScoreMethod::PathSpace => {
                for i in 0..n {
                    let a = self.ancestors[i];
                    let xp = &self.x_prev[a * dx..(a + 1) * dx];
                    let x = &self.x[i * dx..(i + 1) * dx];
                    let u = &self.u[i * du..(i + 1) * du];
                    let s = &mut self.scores[i * dt..(i + 1) * dt];
                    s.copy_from_slice(&self.scores_prev[a * dt..(a + 1) * dt]);
                    model.grad_log_transition(theta, xp, x, &mut self.grad);
                    for (a, b) in s.iter_mut().zip(&self.grad) {
                        *a += b;
                    }
                    model.grad_log_aux(theta, x, u, &mut self.grad);
                    for (a, b) in s.iter_mut().zip(&self.grad) {
                        *a += b;
                    }
                }
            }
            ScoreMethod::Marginal => {
                for (l, w) in self.log_prev_weights.iter_mut().zip(&self.weights) {
                    *l = w.ln();
                }
                if is_static(model) && self.options.collapse_static {
                    self.collapsed_marginal(model, theta);
                } else {
                    self.full_marginal(model, theta, t)?;
                }
            }
        }
        Ok(())
    }

    /// Static models: `q(z' | z)` ignores `z`, so the mixture is the weighted
    /// mean of the previous functionals.
    fn collapsed_marginal(&mut self, model: &dyn Model, theta: &[f64]) {
        let (n, dx, du, dt) = (self.n, self.dim_x, self.dim_u, self.dim_theta);
        let mut mean = vec![0.0; dt];
        for (j, w) in self.weights.iter().enumerate() {
            for (m, s) in mean.iter_mut().zip(&self.scores_prev[j * dt..(j + 1) * dt]) {
                *m += w * s;
            }
        }
        for i in 0..n {
            let x = &self.x[i * dx..(i + 1) * dx];
            let u = &self.u[i * du..(i + 1) * du];
            let s = &mut self.scores[i * dt..(i + 1) * dt];
            s.copy_from_slice(&mean);
            model.grad_log_aux(theta, x, u, &mut self.grad);
            for (a, b) in s.iter_mut().zip(&self.grad) {
                *a += b;
            }
        }
    }

    fn full_marginal(&mut self, model: &dyn Model, theta: &[f64], t: usize) -> Result<()> {
        let (n, dx, du, dt) = (self.n, self.dim_x, self.dim_u, self.dim_theta);
        for i in 0..n {
            let x = &self.x[i * dx..(i + 1) * dx];
            model.log_transition_batch(theta, &self.x_prev, x, &mut self.mix_log, &mut self.mix_grad);
            let mut max = f64::NEG_INFINITY;
            for (lj, &w) in self.mix_log.iter_mut().zip(&self.log_prev_weights) {
                *lj += w;
                if *lj > max {
                    max = *lj;
                }
            }
            if !max.is_finite() {
                return Err(Error::Degeneracy {
                    step: t,
                    theta: theta.to_vec(),
                    epsilon: f64::NAN,
                });
            }
            let s = &mut self.scores[i * dt..(i + 1) * dt];
            s.fill(0.0);
            let mut den = 0.0;
            for j in 0..n {
                let lj = self.mix_log[j];
                if lj == f64::NEG_INFINITY {
                    continue;
                }
                let r = (lj - max).exp();
                den += r;
                let prev = &self.scores_prev[j * dt..(j + 1) * dt];
                let g = &self.mix_grad[j * dt..(j + 1) * dt];
                for k in 0..dt {
                    s[k] += r * (prev[k] + g[k]);
                }
            }
            for v in s.iter_mut() {
                *v /= den;
            }
            let u = &self.u[i * du..(i + 1) * du];
            model.grad_log_aux(theta, x, u, &mut self.grad);
            for (a, b) in s.iter_mut().zip(&self.grad) {
                *a += b;
            }
        }
        Ok(())
    }

    fn weight(&mut self, model: &dyn Model, theta: &[f64], y: &[f64], kernel: &Kernel, with_score: bool) -> Result<()> {
        let (dx, du, dy, dt) = (self.dim_x, self.dim_u, self.dim_y, self.dim_theta);
        let uniform = -(self.n as f64).ln();
        for i in 0..self.n {
            let x = &self.x[i * dx..(i + 1) * dx];
            let u = &self.u[i * du..(i + 1) * du];
            let tau = &mut self.tau[i * dy..(i + 1) * dy];
            if with_score {
                model.tau_with_grad(theta, x, u, tau, &mut self.jac);
            } else {
                model.tau(theta, x, u, tau);
            }
            if tau.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation {
                    what: "tau",
                    theta: theta.to_vec(),
                    x: x.to_vec(),
                    u: u.to_vec(),
                });
            }
            let log_pred = if self.uniform_predictive {
                uniform
            } else {
                self.predictive[i].ln()
            };
            self.log_weights[i] = log_pred + kernel.log_density(y, tau);
            if with_score {
                let s = &mut self.scores[i * dt..(i + 1) * dt];
                kernel.accumulate_grad(y, tau, &self.jac, s);
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Evaluation {
                        what: "score accumulator",
                        theta: theta.to_vec(),
                        x: x.to_vec(),
                        u: u.to_vec(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Output of a complete filter pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub log_likelihood: f64,
    pub increments: Vec<f64>,
    pub ess: Vec<f64>,
    /// Score estimate at the end of the pass (empty for [`ScoreMethod::None`]).
    pub score: Vec<f64>,
}

/// Runs the filter over `data` (`n * dim_y` values) at fixed theta.
pub fn run_filter(
    model: &dyn Model,
    theta: &[f64],
    data: &[f64],
    kernel: &Kernel,
    n_particles: usize,
    method: ScoreMethod,
    options: SmcOptions,
    streams: Streams,
) -> Result<FilterOutput> {
    let dy = model.dim_y();
    let steps = data.len() / dy;
    let mut ps = ParticleSystem::init(model, theta, n_particles, method, options, streams)?;
    let mut increments = Vec::with_capacity(steps);
    let mut ess_trace = Vec::with_capacity(steps);
    for t in 0..steps {
        let r = ps.step(model, theta, &data[t * dy..(t + 1) * dy], kernel)?;
        increments.push(r.log_likelihood_increment);
        ess_trace.push(r.ess);
    }
    let score = if method == ScoreMethod::None {
        Vec::new()
    } else {
        ps.score_estimate()
    };
    Ok(FilterOutput {
        log_likelihood: ps.log_likelihood(),
        increments,
        ess: ess_trace,
        score,
    })
}

/// Log of the unbiased particle estimate of `p_theta(y_1:n)`.
pub fn estimate_log_likelihood(
    model: &dyn Model,
    theta: &[f64],
    data: &[f64],
    kernel: &Kernel,
    n_particles: usize,
    streams: Streams,
) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    run_filter(model, theta, data, kernel, n_particles, ScoreMethod::None, SmcOptions::default(), streams)
        .map(|o| o.log_likelihood)
}
