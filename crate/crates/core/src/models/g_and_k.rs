//! The g-and-k distribution, defined through its quantile function.

use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::{Constraint, Domain};
use crate::rng::StreamRng;
use crate::special::normal_quantile;

pub const DEFAULT_C: f64 = 0.8;

fn quantile_parts(z: f64, g: f64, k: f64) -> (f64, f64, f64) {
    // tanh(g z / 2) == (1 - e^{-gz}) / (1 + e^{-gz})
    let skew = (0.5 * g * z).tanh();
    let ln_kurt = (1.0 + z * z).ln();
    let kurt = (k * ln_kurt).exp();
    (skew, kurt, ln_kurt)
}

/// `Q(u) = A + B [1 + c tanh(g z / 2)] (1 + z^2)^k z` with `z = Phi^{-1}(u)`.
pub fn gk_quantile(u: f64, theta: &[f64], c: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("g-and-k quantile level {u} outside (0, 1)")));
    }
    GandK::domain_spec().check(theta)?;
    Ok(quantile_from_normal(normal_quantile(u), theta, c))
}

fn quantile_from_normal(z: f64, theta: &[f64], c: f64) -> f64 {
    let (g, k, a, b) = (theta[0], theta[1], theta[2], theta[3]);
    let (skew, kurt, _) = quantile_parts(z, g, k);
    a + b * (1.0 + c * skew) * kurt * z
}

fn quantile_with_grad(z: f64, theta: &[f64], c: f64, grad: &mut [f64]) -> f64 {
    let (g, k, a, b) = (theta[0], theta[1], theta[2], theta[3]);
    let (skew, kurt, ln_kurt) = quantile_parts(z, g, k);
    let core = (1.0 + c * skew) * kurt * z;
    grad[0] = b * c * 0.5 * z * (1.0 - skew * skew) * kurt * z;
    grad[1] = b * core * ln_kurt;
    grad[2] = 1.0;
    grad[3] = core;
    a + b * core
}

/// Analytic `(dQ/dg, dQ/dk, dQ/dA, dQ/dB)`.
pub fn gk_grad_quantile(u: f64, theta: &[f64], c: f64) -> Result<[f64; 4]> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("g-and-k quantile level {u} outside (0, 1)")));
    }
    GandK::domain_spec().check(theta)?;
    let mut g = [0.0; 4];
    quantile_with_grad(normal_quantile(u), theta, c, &mut g);
    Ok(g)
}

/// i.i.d. g-and-k observations, `theta = (g, k, A, B)`, `U ~ Unif(0, 1)`.
#[derive(Debug, Clone)]
pub struct GandK {
    domain: Domain,
    c: f64,
    uses_psi: bool,
}

impl GandK {
    pub fn new(c: f64, uses_psi: bool) -> Self {
        GandK {
            domain: Self::domain_spec(),
            c,
            uses_psi,
        }
    }

    pub fn domain_spec() -> Domain {
        Domain::new([
            ("g", Constraint::Unbounded),
            ("k", Constraint::LowerBound { lo: -0.5, closed: false }),
            ("A", Constraint::Unbounded),
            ("B", Constraint::LowerBound { lo: 0.0, closed: true }),
        ])
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Default for GandK {
    fn default() -> Self {
        GandK::new(DEFAULT_C, true)
    }
}

/// Location pre-centering: mean of the first `min(n, 100)` raw observations.
pub fn heuristic_location(raw: &[f64]) -> f64 {
    let m = raw.len().min(100);
    if m == 0 {
        return 0.0;
    }
    raw[..m].iter().sum::<f64>() / m as f64
}

impl Model for GandK {
    fn name(&self) -> &str {
        "g_and_k"
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn dim_x(&self) -> usize {
        0
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn uses_psi(&self) -> bool {
        self.uses_psi
    }

    fn sample_initial(&self, _: &[f64], _: &mut StreamRng, _: &mut [f64]) {}
    fn log_initial(&self, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
    fn grad_log_initial(&self, _: &[f64], _: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
    }
    fn sample_transition(&self, _: &[f64], _: &[f64], _: &mut StreamRng, _: &mut [f64]) {}
    fn log_transition(&self, _: &[f64], _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
    fn grad_log_transition(&self, _: &[f64], _: &[f64], _: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
    }

    fn sample_aux(&self, _: &[f64], _: &[f64], rng: &mut StreamRng, u: &mut [f64]) {
        u[0] = rng.sample(Open01);
    }
    fn log_aux(&self, _: &[f64], _: &[f64], u: &[f64]) -> f64 {
        if u[0] > 0.0 && u[0] < 1.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
    fn grad_log_aux(&self, _: &[f64], _: &[f64], _: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
    }

    fn tau(&self, theta: &[f64], _: &[f64], u: &[f64], y: &mut [f64]) {
        y[0] = quantile_from_normal(normal_quantile(u[0]), theta, self.c);
    }
    fn grad_tau(&self, theta: &[f64], _: &[f64], u: &[f64], jac: &mut [f64]) {
        quantile_with_grad(normal_quantile(u[0]), theta, self.c, jac);
    }
    fn tau_with_grad(&self, theta: &[f64], _: &[f64], u: &[f64], y: &mut [f64], jac: &mut [f64]) {
        y[0] = quantile_with_grad(normal_quantile(u[0]), theta, self.c, jac);
    }
}
