//! Score estimation for models without hidden dynamics.
//!
//! For i.i.d. observations `grad log p(y) = E[grad log nu(U) + grad log h(y | U) | y]`,
//! estimated by self-normalised importance sampling with `nu_theta` as the
//! proposal.

use crate::error::{Error, Result};
use crate::model::{is_static, Model};
use crate::observation::Kernel;
use crate::rng::{StreamRng, Streams};
use crate::smc::{ess, normalize_log_weights};

/// Result of one importance-sampling pass for a single observation.
#[derive(Debug, Clone, PartialEq)]
pub struct IidScore {
    /// Score estimate in constrained coordinates.
    pub gradient: Vec<f64>,
    /// `log (1/N) sum_i h(y | u_i)`, the unbiased likelihood estimate on log scale.
    pub log_likelihood: f64,
    pub ess: f64,
}

/// Stream for observation `t` in gradient-ascent iteration `iteration`.
pub fn observation_stream(streams: &Streams, iteration: usize, t: usize) -> StreamRng {
    streams.keyed(&[0x11D, iteration as u64, t as u64])
}

fn require_static(model: &dyn Model) -> Result<()> {
    if is_static(model) {
        Ok(())
    } else {
        Err(Error::Config(format!("model {} has hidden dynamics; use the particle filter", model.name())))
    }
}

/// Draws `n` auxiliaries from `nu_theta` and evaluates `tau`, its Jacobian and
/// `grad log nu` for each.
#[derive(Debug, Clone)]
pub struct ProposalSample {
    n: usize,
    dim_y: usize,
    dim_theta: usize,
    tau: Vec<f64>,
    jac: Vec<f64>,
    grad_aux: Vec<f64>,
}

impl ProposalSample {
    pub fn draw(model: &dyn Model, theta: &[f64], n: usize, rng: &mut StreamRng) -> Result<Self> {
        require_static(model)?;
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 importance samples, got {n}")));
        }
        let (du, dy, dt) = (model.dim_u(), model.dim_y(), model.dim_theta());
        let mut s = ProposalSample {
            n,
            dim_y: dy,
            dim_theta: dt,
            tau: vec![0.0; n * dy],
            jac: vec![0.0; n * dy * dt],
            grad_aux: vec![0.0; n * dt],
        };
        let mut u = vec![0.0; du];
        for i in 0..n {
            model.sample_aux(theta, &[], rng, &mut u);
            let tau = &mut s.tau[i * dy..(i + 1) * dy];
            model.tau_with_grad(theta, &[], &u, tau, &mut s.jac[i * dy * dt..(i + 1) * dy * dt]);
            if tau.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation {
                    what: "tau",
                    theta: theta.to_vec(),
                    x: Vec::new(),
                    u: u.clone(),
                });
            }
            model.grad_log_aux(theta, &[], &u, &mut s.grad_aux[i * dt..(i + 1) * dt]);
        }
        Ok(s)
    }

    /// Self-normalised importance-sampling score for observation `y`.
    pub fn score(&self, y: &[f64], kernel: &Kernel, theta: &[f64]) -> Result<IidScore> {
        let (n, dy, dt) = (self.n, self.dim_y, self.dim_theta);
        let log_w: Vec<f64> = (0..n)
            .map(|i| kernel.log_density(y, &self.tau[i * dy..(i + 1) * dy]))
            .collect();
        let mut w = vec![0.0; n];
        let lse = normalize_log_weights(&log_w, &mut w);
        if !lse.is_finite() {
            return Err(Error::Degeneracy {
                step: 0,
                theta: theta.to_vec(),
                epsilon: kernel.epsilon(),
            });
        }
        let mut gradient = vec![0.0; dt];
        let mut term = vec![0.0; dt];
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            term.copy_from_slice(&self.grad_aux[i * dt..(i + 1) * dt]);
            kernel.accumulate_grad(y, &self.tau[i * dy..(i + 1) * dy], &self.jac[i * dy * dt..(i + 1) * dy * dt], &mut term);
            for (g, t) in gradient.iter_mut().zip(&term) {
                *g += w[i] * t;
            }
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("non-finite i.i.d. score at theta {theta:?}")));
        }
        Ok(IidScore {
            gradient,
            log_likelihood: lse - (n as f64).ln(),
            ess: ess(&w),
        })
    }
}

/// Score estimate for one observation from `n` fresh draws of `nu_theta`.
pub fn iid_score(
    model: &dyn Model,
    theta: &[f64],
    y: &[f64],
    kernel: &Kernel,
    n: usize,
    rng: &mut StreamRng,
) -> Result<IidScore> {
    ProposalSample::draw(model, theta, n, rng)?.score(y, kernel, theta)
}

/// Summed score and likelihood over a data set.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchScore {
    pub gradient: Vec<f64>,
    pub log_likelihood: f64,
    pub increments: Vec<f64>,
    pub mean_ess: f64,
}

/// `sum_t grad log p(y_t)` with independent proposal draws for each
/// observation (streams keyed by `(iteration, t)`), or one shared set of
/// draws reused for every observation when `shared` is set.
pub fn batch_iid_score(
    model: &dyn Model,
    theta: &[f64],
    data: &[f64],
    kernel: &Kernel,
    n: usize,
    streams: &Streams,
    iteration: usize,
    shared: bool,
) -> Result<BatchScore> {
    require_static(model)?;
    let dy = model.dim_y();
    let steps = data.len() / dy;
    let mut out = BatchScore {
        gradient: vec![0.0; model.dim_theta()],
        log_likelihood: 0.0,
        increments: Vec::with_capacity(steps),
        mean_ess: 0.0,
    };
    let common = if shared {
        let mut rng = streams.keyed(&[0x5AED, iteration as u64]);
        Some(ProposalSample::draw(model, theta, n, &mut rng)?)
    } else {
        None
    };
    for t in 0..steps {
        let y = &data[t * dy..(t + 1) * dy];
        let s = match &common {
            Some(sample) => sample.score(y, kernel, theta),
            None => iid_score(model, theta, y, kernel, n, &mut observation_stream(streams, iteration, t)),
        }
        .map_err(|e| with_step(e, t + 1))?;
        for (g, v) in out.gradient.iter_mut().zip(&s.gradient) {
            *g += v;
        }
        out.log_likelihood += s.log_likelihood;
        out.increments.push(s.log_likelihood);
        out.mean_ess += s.ess;
    }
    if steps > 0 {
        out.mean_ess /= steps as f64;
    }
    Ok(out)
}

pub(crate) fn with_step(e: Error, t: usize) -> Error {
    match e {
        Error::Degeneracy { theta, epsilon, .. } => Error::Degeneracy { step: t, theta, epsilon },
        other => other,
    }
}

/// One score estimate per observation, for inspecting the sampling
/// distribution of the per-observation gradients.
pub fn gradient_histogram(
    model: &dyn Model,
    theta: &[f64],
    data: &[f64],
    kernel: &Kernel,
    n: usize,
    streams: &Streams,
) -> Result<Vec<Vec<f64>>> {
    require_static(model)?;
    let dy = model.dim_y();
    if data.is_empty() {
        return Err(Error::Config("gradient histogram needs at least one observation".into()));
    }
    (0..data.len() / dy)
        .map(|t| {
            let y = &data[t * dy..(t + 1) * dy];
            iid_score(model, theta, y, kernel, n, &mut observation_stream(streams, 0, t))
                .map(|s| s.gradient)
                .map_err(|e| with_step(e, t + 1))
        })
        .collect()
}
