//! Observation transform, noise corruption and the Gaussian ABC kernel.
//!
//! Raw observations are optionally compressed by `psi = atan` and then
//! corrupted once with `epsilon * N(0, 1)` noise. The kernel density of a
//! corrupted observation given a latent pair is
//! `h(y | z) = prod_j N(y_j; psi(tau_j(z)), epsilon^2)`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ExtendedState, Model};
use crate::rng::Streams;
use crate::special::{normal_cdf, LN_SQRT_2PI};

/// Monotone map applied to observations before noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Arctan,
}

impl Transform {
    pub fn from_psi_flag(uses_psi: bool) -> Self {
        if uses_psi {
            Transform::Arctan
        } else {
            Transform::Identity
        }
    }

    #[inline]
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Arctan => y.atan(),
        }
    }

    #[inline]
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Arctan => 1.0 / (1.0 + y * y),
        }
    }
}

/// Componentwise arctangent.
pub fn psi_transform(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v.atan()).collect()
}

/// Gaussian ABC kernel with scale `epsilon` on the transformed scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    epsilon: f64,
    transform: Transform,
    log_norm: f64,
}

impl Kernel {
    pub fn new(epsilon: f64, transform: Transform) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        Ok(Kernel {
            epsilon,
            transform,
            log_norm: -epsilon.ln() - LN_SQRT_2PI,
        })
    }

    /// Kernel using the model's own transform choice.
    pub fn for_model(model: &dyn Model, epsilon: f64) -> Result<Self> {
        Kernel::new(epsilon, Transform::from_psi_flag(model.uses_psi()))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    /// Log normalising constant of one coordinate, `-log(epsilon sqrt(2 pi))`.
    #[inline]
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// `log h(y | z)` given the model output `tau` at `z`.
    #[inline]
    pub fn log_density(&self, y: &[f64], tau: &[f64]) -> f64 {
        let inv = 1.0 / self.epsilon;
        y.iter()
            .zip(tau)
            .map(|(&yj, &tj)| {
                let r = (yj - self.transform.apply(tj)) * inv;
                -0.5 * r * r
            })
            .sum::<f64>()
            + self.log_norm * y.len() as f64
    }

    /// Adds `grad_theta log h(y | z)` to `grad`, given `tau` and its
    /// Jacobian (`dim_theta x dim_y`, row-major).
    #[inline]
    pub fn accumulate_grad(&self, y: &[f64], tau: &[f64], jac: &[f64], grad: &mut [f64]) {
        let dy = y.len();
        let inv2 = 1.0 / (self.epsilon * self.epsilon);
        for (j, (&yj, &tj)) in y.iter().zip(tau).enumerate() {
            let factor = self.transform.derivative(tj) * (yj - self.transform.apply(tj)) * inv2;
            for (k, g) in grad.iter_mut().enumerate() {
                *g += jac[k * dy + j] * factor;
            }
        }
    }

    /// `P(Y <= y | z)` for a scalar observation.
    pub fn cdf(&self, y: f64, tau: f64) -> f64 {
        normal_cdf((y - self.transform.apply(tau)) / self.epsilon)
    }
}

/// A corrupted observation sequence `y_eps_t = psi(y_t) + epsilon v_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySeries {
    values: Vec<f64>,
    dim_y: usize,
    epsilon: f64,
    psi_applied: bool,
    noise_seed: u64,
}

impl NoisySeries {
    /// Wraps already-prepared observations without adding noise.
    pub fn from_clean(values: Vec<f64>, dim_y: usize, epsilon: f64, psi_applied: bool) -> Self {
        NoisySeries {
            values,
            dim_y,
            epsilon,
            psi_applied,
            noise_seed: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn dim_y(&self) -> usize {
        self.dim_y
    }
    pub fn len(&self) -> usize {
        self.values.len() / self.dim_y
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn psi_applied(&self) -> bool {
        self.psi_applied
    }
    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }
    pub fn get(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim_y..(t + 1) * self.dim_y]
    }
}

/// Corrupts a raw series with one realisation of Gaussian noise.
///
/// `raw` holds `n * dim_y` values, observation-major.
pub fn corrupt_observations(
    raw: &[f64],
    dim_y: usize,
    epsilon: f64,
    use_psi: bool,
    seed: u64,
) -> Result<NoisySeries> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if raw.is_empty() || dim_y == 0 || raw.len() % dim_y != 0 {
        return Err(Error::Config("raw series must be a nonempty multiple of dim_y".into()));
    }
    let transform = Transform::from_psi_flag(use_psi);
    let mut rng = Streams::new(seed).keyed(&[0x4E01_5E]);
    let values = raw
        .iter()
        .map(|&y| {
            let v: f64 = StandardNormal.sample(&mut rng);
            transform.apply(y) + epsilon * v
        })
        .collect();
    Ok(NoisySeries {
        values,
        dim_y,
        epsilon,
        psi_applied: use_psi,
        noise_seed: seed,
    })
}

fn eval_tau(model: &dyn Model, theta: &[f64], z: &ExtendedState, jac: Option<&mut [f64]>) -> Result<Vec<f64>> {
    let mut tau = vec![0.0; model.dim_y()];
    match jac {
        Some(j) => model.tau_with_grad(theta, &z.x, &z.u, &mut tau, j),
        None => model.tau(theta, &z.x, &z.u, &mut tau),
    }
    if tau.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            what: "tau",
            theta: theta.to_vec(),
            x: z.x.clone(),
            u: z.u.clone(),
        });
    }
    Ok(tau)
}

/// `log h_eps(y | z)`.
pub fn log_h_eps(y: &[f64], z: &ExtendedState, theta: &[f64], kernel: &Kernel, model: &dyn Model) -> Result<f64> {
    let tau = eval_tau(model, theta, z, None)?;
    Ok(kernel.log_density(y, &tau))
}

/// `grad_theta log h_eps(y | z)` in constrained coordinates.
pub fn grad_log_h_eps(
    y: &[f64],
    z: &ExtendedState,
    theta: &[f64],
    kernel: &Kernel,
    model: &dyn Model,
) -> Result<Vec<f64>> {
    let mut jac = vec![0.0; model.dim_theta() * model.dim_y()];
    let tau = eval_tau(model, theta, z, Some(&mut jac))?;
    let mut grad = vec![0.0; model.dim_theta()];
    kernel.accumulate_grad(y, &tau, &jac, &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Evaluation {
            what: "grad_tau",
            theta: theta.to_vec(),
            x: z.x.clone(),
            u: z.u.clone(),
        });
    }
    Ok(grad)
}
