//! Alpha-stable observations via the Chambers-Mallows-Stuck transformation.
//!
//! `Y = sigma * tau_{alpha,beta}(U) + mu` with `U1 ~ Unif(-pi/2, pi/2)` and
//! `U2 ~ Exp(1)` independent, so the auxiliary density carries no theta.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};

use rand::distr::Open01;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::{Constraint, Domain};
use crate::rng::StreamRng;

/// Default half-width of the band around `alpha = 1` that gradient ascent
/// may not enter.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 0.05;

/// `B_{alpha,beta} = atan(beta tan(pi alpha / 2)) / alpha`.
pub fn skew_shift(alpha: f64, beta: f64) -> f64 {
    (beta * (FRAC_PI_2 * alpha).tan()).atan() / alpha
}

/// `S_{alpha,beta} = (1 + beta^2 tan^2(pi alpha / 2))^(1 / (2 alpha))`.
pub fn skew_scale(alpha: f64, beta: f64) -> f64 {
    let z = beta * (FRAC_PI_2 * alpha).tan();
    (1.0 + z * z).powf(0.5 / alpha)
}

/// Standardised CMS variate `tau_{alpha,beta}(u1, u2)`; both branches.
pub fn cms(alpha: f64, beta: f64, u1: f64, u2: f64) -> f64 {
    if alpha == 1.0 {
        let a = FRAC_PI_2 + beta * u1;
        FRAC_2_PI * (a * u1.tan() - beta * (u2 * u1.cos() / a).ln())
    } else {
        let v1 = alpha * (u1 + skew_shift(alpha, beta));
        let e = (1.0 - alpha) / alpha;
        skew_scale(alpha, beta) * v1.sin() / u1.cos().powf(1.0 / alpha)
            * ((u1 - v1).cos() / u2).powf(e)
    }
}

/// CMS variate together with its partials in `alpha` and `beta`
/// (`alpha != 1`). Returns `(tau, d tau / d alpha, d tau / d beta)`.
pub fn cms_with_grad(alpha: f64, beta: f64, u1: f64, u2: f64) -> (f64, f64, f64) {
    let t = (FRAC_PI_2 * alpha).tan();
    let zeta = beta * t;
    let one_z2 = 1.0 + zeta * zeta;
    let at = zeta.atan();
    let ln_one_z2 = one_z2.ln();
    let inv_a = 1.0 / alpha;

    let s = (0.5 * inv_a * ln_one_z2).exp();
    let v1 = alpha * u1 + at;
    let v2 = u1 - v1;
    let (sin_v1, cos_v1) = v1.sin_cos();
    let (sin_v2, cos_v2) = v2.sin_cos();
    let cos_u1 = u1.cos();
    let ln_cos_u1 = cos_u1.ln();
    let c = (-inv_a * ln_cos_u1).exp();
    let e = (1.0 - alpha) * inv_a;
    let ln_ratio = (cos_v2 / u2).ln();
    let r = (e * ln_ratio).exp();

    let base = s * c * r;
    let tau = base * sin_v1;

    let t_a = FRAC_PI_2 * (1.0 + t * t);
    let zeta_a = beta * t_a;
    let at_a = zeta_a / one_z2;
    let at_b = t / one_z2;
    let tan_v2 = sin_v2 / cos_v2;

    let dlog_s_a = -0.5 * ln_one_z2 * inv_a * inv_a + zeta * zeta_a * inv_a / one_z2;
    let dlog_s_b = zeta * t * inv_a / one_z2;
    let dlog_c_a = ln_cos_u1 * inv_a * inv_a;
    let dv1_a = u1 + at_a;
    let dv1_b = at_b;
    // dv2 = -dv1 for both coordinates
    let dlog_r_a = -ln_ratio * inv_a * inv_a + e * tan_v2 * dv1_a;
    let dlog_r_b = e * tan_v2 * dv1_b;

    let d_alpha = tau * (dlog_s_a + dlog_c_a + dlog_r_a) + base * cos_v1 * dv1_a;
    let d_beta = tau * (dlog_s_b + dlog_r_b) + base * cos_v1 * dv1_b;
    (tau, d_alpha, d_beta)
}

/// Partial of the `alpha = 1` branch in `beta`.
fn cms_unit_alpha_dbeta(beta: f64, u1: f64, u2: f64) -> f64 {
    let a = FRAC_PI_2 + beta * u1;
    FRAC_2_PI * (u1 * u1.tan() - (u2 * u1.cos() / a).ln() + beta * u1 / a)
}

fn check_aux(u: &[f64]) -> Result<()> {
    if u.len() != 2 || !(u[0] > -FRAC_PI_2 && u[0] < FRAC_PI_2) || !(u[1] > 0.0 && u[1].is_finite()) {
        return Err(Error::Domain(format!("auxiliary {u:?} outside (-pi/2, pi/2) x (0, inf)")));
    }
    Ok(())
}

fn check_theta(theta: &[f64]) -> Result<()> {
    AlphaStable::domain_spec().check(theta)
}

/// `tau_theta(u) = sigma tau_{alpha,beta}(u) + mu` for `theta = (alpha, beta, mu, sigma)`.
pub fn alpha_stable_tau(u: &[f64], theta: &[f64]) -> Result<f64> {
    check_aux(u)?;
    check_theta(theta)?;
    Ok(theta[3] * cms(theta[0], theta[1], u[0], u[1]) + theta[2])
}

/// Analytic `(d/d alpha, d/d beta, d/d mu, d/d sigma)` of [`alpha_stable_tau`].
///
/// Fails at exactly `alpha = 1`, where the map is not differentiable in alpha.
pub fn alpha_stable_grad_tau(u: &[f64], theta: &[f64]) -> Result<[f64; 4]> {
    check_aux(u)?;
    check_theta(theta)?;
    if theta[0] == 1.0 {
        return Err(Error::Domain("tau is not differentiable in alpha at alpha = 1".into()));
    }
    let (tau0, da, db) = cms_with_grad(theta[0], theta[1], u[0], u[1]);
    Ok([theta[3] * da, theta[3] * db, 1.0, tau0])
}

/// i.i.d. alpha-stable observations, `theta = (alpha, beta, mu, sigma)`.
#[derive(Debug, Clone)]
pub struct AlphaStable {
    domain: Domain,
    uses_psi: bool,
    exclusion_radius: f64,
}

impl AlphaStable {
    pub fn new(uses_psi: bool, exclusion_radius: f64) -> Self {
        AlphaStable {
            domain: Self::domain_spec(),
            uses_psi,
            exclusion_radius,
        }
    }

    pub fn domain_spec() -> Domain {
        Domain::new([
            ("alpha", Constraint::Interval { lo: 0.0, hi: 2.0, closed_lo: false, closed_hi: true }),
            ("beta", Constraint::Interval { lo: -1.0, hi: 1.0, closed_lo: true, closed_hi: true }),
            ("mu", Constraint::Unbounded),
            ("sigma", Constraint::LowerBound { lo: 0.0, closed: true }),
        ])
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }
}

impl Default for AlphaStable {
    fn default() -> Self {
        AlphaStable::new(true, DEFAULT_EXCLUSION_RADIUS)
    }
}

/// Draws `(U1, U2)` for the CMS map.
pub(crate) fn sample_cms_aux(rng: &mut StreamRng, u: &mut [f64]) {
    let v: f64 = rng.sample(Open01);
    u[0] = PI * (v - 0.5);
    u[1] = rng.sample(Exp1);
}

pub(crate) fn log_cms_aux(u: &[f64]) -> f64 {
    if u[0] > -FRAC_PI_2 && u[0] < FRAC_PI_2 && u[1] > 0.0 {
        -PI.ln() - u[1]
    } else {
        f64::NEG_INFINITY
    }
}

/// Keeps `alpha` out of `(1 - radius, 1 + radius)`, on the side it came from.
pub(crate) fn exclude_unit_alpha(previous: f64, next: &mut f64, radius: f64) {
    if radius > 0.0 && (*next - 1.0).abs() < radius {
        *next = if previous >= 1.0 { 1.0 + radius } else { 1.0 - radius };
    }
}

impl Model for AlphaStable {
    fn name(&self) -> &str {
        "alpha_stable"
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn dim_x(&self) -> usize {
        0
    }
    fn dim_u(&self) -> usize {
        2
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
        sample_cms_aux(rng, u);
    }
    fn log_aux(&self, _: &[f64], _: &[f64], u: &[f64]) -> f64 {
        log_cms_aux(u)
    }
    fn grad_log_aux(&self, _: &[f64], _: &[f64], _: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
    }

    fn tau(&self, theta: &[f64], _: &[f64], u: &[f64], y: &mut [f64]) {
        y[0] = theta[3] * cms(theta[0], theta[1], u[0], u[1]) + theta[2];
    }

    fn grad_tau(&self, theta: &[f64], x: &[f64], u: &[f64], jac: &mut [f64]) {
        let mut y = [0.0];
        self.tau_with_grad(theta, x, u, &mut y, jac);
    }

    fn tau_with_grad(&self, theta: &[f64], _: &[f64], u: &[f64], y: &mut [f64], jac: &mut [f64]) {
        let (alpha, beta, mu, sigma) = (theta[0], theta[1], theta[2], theta[3]);
        if alpha == 1.0 {
            let tau0 = cms(alpha, beta, u[0], u[1]);
            y[0] = sigma * tau0 + mu;
            jac[0] = f64::NAN;
            jac[1] = sigma * cms_unit_alpha_dbeta(beta, u[0], u[1]);
            jac[2] = 1.0;
            jac[3] = tau0;
            return;
        }
        let (tau0, da, db) = cms_with_grad(alpha, beta, u[0], u[1]);
        y[0] = sigma * tau0 + mu;
        jac[0] = sigma * da;
        jac[1] = sigma * db;
        jac[2] = 1.0;
        jac[3] = tau0;
    }

    fn adjust_update(&self, previous: &[f64], next: &mut [f64]) {
        exclude_unit_alpha(previous[0], &mut next[0], self.exclusion_radius);
    }
}
