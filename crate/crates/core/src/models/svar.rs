//! Stochastic volatility with symmetric alpha-stable returns.
//!
//! `X_t = phi X_{t-1} + delta + S_t`, `S_t ~ N(0, sigma_x^2)` and
//! `Y_t = exp(X_t / 2) W_t` with `W_t ~ A(alpha, 0, 0, 1)` drawn by CMS.
//! `theta = (alpha, phi, sigma_x^2)`, plus `delta` in the drift variant.

use crate::model::Model;
use crate::models::alpha_stable::{cms, cms_with_grad, exclude_unit_alpha, log_cms_aux, sample_cms_aux};
use crate::models::ar1::Ar1;
use crate::params::{Constraint, Domain};
use crate::rng::StreamRng;

#[derive(Debug, Clone)]
pub struct SvAlphaR {
    domain: Domain,
    with_drift: bool,
    uses_psi: bool,
    exclusion_radius: f64,
}

impl SvAlphaR {
    pub fn new(with_drift: bool, uses_psi: bool, exclusion_radius: f64) -> Self {
        let mut coords = vec![
            ("alpha", Constraint::Interval { lo: 0.0, hi: 2.0, closed_lo: false, closed_hi: true }),
            ("phi", Constraint::open_interval(-1.0, 1.0)),
            ("sigma_x2", Constraint::LowerBound { lo: 0.0, closed: false }),
        ];
        if with_drift {
            coords.push(("delta", Constraint::Unbounded));
        }
        SvAlphaR {
            domain: Domain::new(coords),
            with_drift,
            uses_psi,
            exclusion_radius,
        }
    }

    pub fn with_drift(&self) -> bool {
        self.with_drift
    }

    fn chain(&self, theta: &[f64]) -> Ar1 {
        Ar1 {
            phi: theta[1],
            var: theta[2],
            drift: if self.with_drift { theta[3] } else { 0.0 },
        }
    }

    fn write_grad(&self, g: crate::models::ar1::Ar1Grad, grad: &mut [f64]) {
        grad[0] = 0.0;
        grad[1] = g.phi;
        grad[2] = g.var;
        if self.with_drift {
            grad[3] = g.drift;
        }
    }
}

impl Model for SvAlphaR {
    fn name(&self) -> &str {
        "sv_alpha_r"
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_u(&self) -> usize {
        2
    }
    fn uses_psi(&self) -> bool {
        self.uses_psi
    }

    fn sample_initial(&self, theta: &[f64], rng: &mut StreamRng, x: &mut [f64]) {
        x[0] = self.chain(theta).sample_initial(rng);
    }
    fn log_initial(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.chain(theta).log_initial(x[0])
    }
    fn grad_log_initial(&self, theta: &[f64], x: &[f64], grad: &mut [f64]) {
        self.write_grad(self.chain(theta).grad_initial(x[0]), grad);
    }

    fn sample_transition(&self, theta: &[f64], x_prev: &[f64], rng: &mut StreamRng, x: &mut [f64]) {
        x[0] = self.chain(theta).sample_transition(x_prev[0], rng);
    }
    fn log_transition(&self, theta: &[f64], x_prev: &[f64], x: &[f64]) -> f64 {
        self.chain(theta).log_transition(x_prev[0], x[0])
    }
    fn grad_log_transition(&self, theta: &[f64], x_prev: &[f64], x: &[f64], grad: &mut [f64]) {
        self.write_grad(self.chain(theta).grad_transition(x_prev[0], x[0]), grad);
    }
    fn log_transition_with_grad(&self, theta: &[f64], x_prev: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let c = self.chain(theta);
        self.write_grad(c.grad_transition(x_prev[0], x[0]), grad);
        c.log_transition(x_prev[0], x[0])
    }

    fn log_transition_batch(&self, theta: &[f64], x_prev: &[f64], x: &[f64], log: &mut [f64], grad: &mut [f64]) {
        let dt = self.domain.len();
        self.chain(theta)
            .log_transition_batch(x_prev, x[0], log, |j, g| self.write_grad(g, &mut grad[j * dt..(j + 1) * dt]));
    }

    fn sample_aux(&self, _: &[f64], _: &[f64], rng: &mut StreamRng, u: &mut [f64]) {
        sample_cms_aux(rng, u);
    }
    fn log_aux(&self, _: &[f64], _: &[f64], u: &[f64]) -> f64 {
        log_cms_aux(u)
    }
    fn grad_log_aux(&self, _: &[f64], _: &[f64], _: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
    }

    fn tau(&self, theta: &[f64], x: &[f64], u: &[f64], y: &mut [f64]) {
        y[0] = (0.5 * x[0]).exp() * cms(theta[0], 0.0, u[0], u[1]);
    }
    fn grad_tau(&self, theta: &[f64], x: &[f64], u: &[f64], jac: &mut [f64]) {
        let mut y = [0.0];
        self.tau_with_grad(theta, x, u, &mut y, jac);
    }
    fn tau_with_grad(&self, theta: &[f64], x: &[f64], u: &[f64], y: &mut [f64], jac: &mut [f64]) {
        let vol = (0.5 * x[0]).exp();
        jac.fill(0.0);
        if theta[0] == 1.0 {
            y[0] = vol * cms(1.0, 0.0, u[0], u[1]);
            jac[0] = f64::NAN;
            return;
        }
        let (w, dw, _) = cms_with_grad(theta[0], 0.0, u[0], u[1]);
        y[0] = vol * w;
        jac[0] = vol * dw;
    }

    fn adjust_update(&self, previous: &[f64], next: &mut [f64]) {
        exclude_unit_alpha(previous[0], &mut next[0], self.exclusion_radius);
    }
}
