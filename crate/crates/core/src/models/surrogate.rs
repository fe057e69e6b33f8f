//! Linear-Gaussian surrogate whose extended model is exactly solvable.
//!
//! `X_t` is a zero-drift Gaussian AR(1), `U_t ~ N(0, 1)` and
//! `tau(x, u) = x + sigma_y u`, so `Y_eps_t = X_t + sigma_y U_t + eps V_t`
//! and the likelihood follows from a scalar Kalman filter.
//! `theta = (phi, sigma_x^2, sigma_y)`.

use rand_distr::{Distribution, StandardNormal};

use crate::model::Model;
use crate::models::ar1::Ar1;
use crate::params::{Constraint, Domain};
use crate::rng::StreamRng;
use crate::special::normal_log_pdf;

#[derive(Debug, Clone)]
pub struct GaussianSurrogate {
    domain: Domain,
}

impl GaussianSurrogate {
    pub fn new() -> Self {
        GaussianSurrogate {
            domain: Domain::new([
                ("phi", Constraint::open_interval(-1.0, 1.0)),
                ("sigma_x2", Constraint::LowerBound { lo: 0.0, closed: false }),
                ("sigma_y", Constraint::LowerBound { lo: 0.0, closed: false }),
            ]),
        }
    }

    fn chain(theta: &[f64]) -> Ar1 {
        Ar1 {
            phi: theta[0],
            var: theta[1],
            drift: 0.0,
        }
    }
}

impl Default for GaussianSurrogate {
    fn default() -> Self {
        Self::new()
    }
}

impl Model for GaussianSurrogate {
    fn name(&self) -> &str {
        "gaussian_surrogate"
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn uses_psi(&self) -> bool {
        false
    }

    fn sample_initial(&self, theta: &[f64], rng: &mut StreamRng, x: &mut [f64]) {
        x[0] = Self::chain(theta).sample_initial(rng);
    }
    fn log_initial(&self, theta: &[f64], x: &[f64]) -> f64 {
        Self::chain(theta).log_initial(x[0])
    }
    fn grad_log_initial(&self, theta: &[f64], x: &[f64], grad: &mut [f64]) {
        let g = Self::chain(theta).grad_initial(x[0]);
        grad[0] = g.phi;
        grad[1] = g.var;
        grad[2] = 0.0;
    }

    fn sample_transition(&self, theta: &[f64], x_prev: &[f64], rng: &mut StreamRng, x: &mut [f64]) {
        x[0] = Self::chain(theta).sample_transition(x_prev[0], rng);
    }
    fn log_transition(&self, theta: &[f64], x_prev: &[f64], x: &[f64]) -> f64 {
        Self::chain(theta).log_transition(x_prev[0], x[0])
    }
    fn grad_log_transition(&self, theta: &[f64], x_prev: &[f64], x: &[f64], grad: &mut [f64]) {
        let g = Self::chain(theta).grad_transition(x_prev[0], x[0]);
        grad[0] = g.phi;
        grad[1] = g.var;
        grad[2] = 0.0;
    }
    fn log_transition_with_grad(&self, theta: &[f64], x_prev: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let c = Self::chain(theta);
        let g = c.grad_transition(x_prev[0], x[0]);
        grad[0] = g.phi;
        grad[1] = g.var;
        grad[2] = 0.0;
        c.log_transition(x_prev[0], x[0])
    }

    fn log_transition_batch(&self, theta: &[f64], x_prev: &[f64], x: &[f64], log: &mut [f64], grad: &mut [f64]) {
        Self::chain(theta).log_transition_batch(x_prev, x[0], log, |j, g| {
            grad[3 * j] = g.phi;
            grad[3 * j + 1] = g.var;
            grad[3 * j + 2] = 0.0;
        });
    }

    fn sample_aux(&self, _: &[f64], _: &[f64], rng: &mut StreamRng, u: &mut [f64]) {
        u[0] = StandardNormal.sample(rng);
    }
    fn log_aux(&self, _: &[f64], _: &[f64], u: &[f64]) -> f64 {
        normal_log_pdf(u[0])
    }
    fn grad_log_aux(&self, _: &[f64], _: &[f64], _: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
    }

    fn tau(&self, theta: &[f64], x: &[f64], u: &[f64], y: &mut [f64]) {
        y[0] = x[0] + theta[2] * u[0];
    }
    fn grad_tau(&self, _: &[f64], _: &[f64], u: &[f64], jac: &mut [f64]) {
        jac[0] = 0.0;
        jac[1] = 0.0;
        jac[2] = u[0];
    }
}
