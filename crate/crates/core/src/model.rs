//! The extended hidden Markov model abstraction.
//!
//! A model describes the hidden chain `X_t` (initial and transition
//! densities), the auxiliary variables `U_t ~ nu(.|x)` and the map
//! `tau(x, u)` whose law is the intractable observation density. Together
//! with the noise kernel they define the latent pair `Z_t = (X_t, U_t)` whose
//! densities are all tractable and differentiable in theta.
//!
//! Gradients are written into caller-provided buffers of length `dim_theta`
//! (and `dim_theta * dim_y` for `grad_tau`, row `k` holding the partials with
//! respect to theta coordinate `k`).

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::params::Domain;
use crate::rng::{Streams, StreamRng};

/// A latent pair `z = (x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl ExtendedState {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Self {
        ExtendedState { x, u }
    }
}

pub trait Model: Send + Sync + Debug {
    /// Registry name.
    fn name(&self) -> &str;
    fn domain(&self) -> &Domain;
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;
    fn dim_y(&self) -> usize {
        1
    }
    fn dim_theta(&self) -> usize {
        self.domain().len()
    }
    /// Whether observations are compressed by arctan before noise is added.
    fn uses_psi(&self) -> bool;

    fn sample_initial(&self, theta: &[f64], rng: &mut StreamRng, x: &mut [f64]);
    fn log_initial(&self, theta: &[f64], x: &[f64]) -> f64;
    fn grad_log_initial(&self, theta: &[f64], x: &[f64], grad: &mut [f64]);

    fn sample_transition(&self, theta: &[f64], x_prev: &[f64], rng: &mut StreamRng, x: &mut [f64]);
    fn log_transition(&self, theta: &[f64], x_prev: &[f64], x: &[f64]) -> f64;
    fn grad_log_transition(&self, theta: &[f64], x_prev: &[f64], x: &[f64], grad: &mut [f64]);

    /// Log transition density and its gradient in one pass; the quadratic
    /// score recursion calls this for every particle pair.
    fn log_transition_with_grad(
        &self,
        theta: &[f64],
        x_prev: &[f64],
        x: &[f64],
        grad: &mut [f64],
    ) -> f64 {
        self.grad_log_transition(theta, x_prev, x, grad);
        self.log_transition(theta, x_prev, x)
    }

    /// Log transition densities from every previous state `x_prev[j]`
    /// (row-major, `n * dim_x`) to one state `x`, with their gradients
    /// (`n * dim_theta`).
    fn log_transition_batch(&self, theta: &[f64], x_prev: &[f64], x: &[f64], log: &mut [f64], grad: &mut [f64]) {
        let (dx, dt) = (self.dim_x(), self.dim_theta());
        for (j, l) in log.iter_mut().enumerate() {
            *l = self.log_transition_with_grad(theta, &x_prev[j * dx..(j + 1) * dx], x, &mut grad[j * dt..(j + 1) * dt]);
        }
    }

    fn sample_aux(&self, theta: &[f64], x: &[f64], rng: &mut StreamRng, u: &mut [f64]);
    fn log_aux(&self, theta: &[f64], x: &[f64], u: &[f64]) -> f64;
    fn grad_log_aux(&self, theta: &[f64], x: &[f64], u: &[f64], grad: &mut [f64]);

    fn tau(&self, theta: &[f64], x: &[f64], u: &[f64], y: &mut [f64]);
    fn grad_tau(&self, theta: &[f64], x: &[f64], u: &[f64], jac: &mut [f64]);

    fn tau_with_grad(&self, theta: &[f64], x: &[f64], u: &[f64], y: &mut [f64], jac: &mut [f64]) {
        self.tau(theta, x, u, y);
        self.grad_tau(theta, x, u, jac);
    }

    /// Model-specific constraints on a proposed gradient-ascent iterate,
    /// applied after mapping back to constrained coordinates.
    fn adjust_update(&self, _previous: &[f64], _next: &mut [f64]) {}

    /// Validates theta against the domain.
    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        self.domain().check(theta)
    }
}

/// Whether the model has no hidden dynamics (i.i.d. observations).
pub fn is_static(model: &dyn Model) -> bool {
    model.dim_x() == 0
}

/// A simulated trajectory of hidden states, auxiliaries and raw observations.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

/// Draws `n` steps of the original HMM `Y_t = tau(X_t, U_t)`.
pub fn simulate(model: &dyn Model, theta: &[f64], n: usize, streams: &Streams) -> Result<Simulation> {
    model.check_theta(theta)?;
    let (dx, du, dy) = (model.dim_x(), model.dim_u(), model.dim_y());
    let mut sim = Simulation {
        x: vec![0.0; n * dx],
        u: vec![0.0; n * du],
        y: vec![0.0; n * dy],
    };
    for t in 0..n {
        let mut rng = streams.keyed(&[0x51, t as u64]);
        let (before, rest) = sim.x.split_at_mut(t * dx);
        let x = &mut rest[..dx];
        if t == 0 {
            model.sample_initial(theta, &mut rng, x);
        } else {
            model.sample_transition(theta, &before[(t - 1) * dx..], &mut rng, x);
        }
        let u = &mut sim.u[t * du..(t + 1) * du];
        model.sample_aux(theta, x, &mut rng, u);
        let y = &mut sim.y[t * dy..(t + 1) * dy];
        model.tau(theta, x, u, y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "tau",
                theta: theta.to_vec(),
                x: x.to_vec(),
                u: u.to_vec(),
            });
        }
    }
    Ok(sim)
}
