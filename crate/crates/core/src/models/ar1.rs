//! Gaussian AR(1) hidden chain `X_t = phi X_{t-1} + delta + S_t`,
//! `S_t ~ N(0, var)`, started from its stationary law.

use rand_distr::{Distribution, StandardNormal};

use crate::rng::StreamRng;
use crate::special::LN_SQRT_2PI;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Ar1 {
    pub phi: f64,
    pub var: f64,
    pub drift: f64,
}

/// Partials of a log density in `(phi, var, drift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ar1Grad {
    pub phi: f64,
    pub var: f64,
    pub drift: f64,
}

impl Ar1 {
    pub fn stationary_mean(&self) -> f64 {
        self.drift / (1.0 - self.phi)
    }

    pub fn stationary_var(&self) -> f64 {
        self.var / (1.0 - self.phi * self.phi)
    }

    pub fn sample_initial(&self, rng: &mut StreamRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.stationary_mean() + self.stationary_var().sqrt() * z
    }

    pub fn sample_transition(&self, x_prev: f64, rng: &mut StreamRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.phi * x_prev + self.drift + self.var.sqrt() * z
    }

    pub fn log_transition(&self, x_prev: f64, x: f64) -> f64 {
        let r = x - self.phi * x_prev - self.drift;
        -LN_SQRT_2PI - 0.5 * self.var.ln() - 0.5 * r * r / self.var
    }

    pub fn grad_transition(&self, x_prev: f64, x: f64) -> Ar1Grad {
        let r = x - self.phi * x_prev - self.drift;
        let inv = 1.0 / self.var;
        Ar1Grad {
            phi: r * x_prev * inv,
            var: 0.5 * inv * (r * r * inv - 1.0),
            drift: r * inv,
        }
    }

    /// Transition log densities from every `x_prev[j]` to `x`; `write(j, grad)`
    /// receives the partials.
    pub fn log_transition_batch(&self, x_prev: &[f64], x: f64, log: &mut [f64], mut write: impl FnMut(usize, Ar1Grad)) {
        let inv = 1.0 / self.var;
        let norm = -LN_SQRT_2PI - 0.5 * self.var.ln();
        for (j, (l, &xp)) in log.iter_mut().zip(x_prev).enumerate() {
            let r = x - self.phi * xp - self.drift;
            let q = r * inv;
            *l = norm - 0.5 * r * q;
            write(
                j,
                Ar1Grad {
                    phi: q * xp,
                    var: 0.5 * inv * (r * q - 1.0),
                    drift: q,
                },
            );
        }
    }

    pub fn log_initial(&self, x: f64) -> f64 {
        let v0 = self.stationary_var();
        let r = x - self.stationary_mean();
        -LN_SQRT_2PI - 0.5 * v0.ln() - 0.5 * r * r / v0
    }

    pub fn grad_initial(&self, x: f64) -> Ar1Grad {
        let one_m = 1.0 - self.phi;
        let one_m2 = 1.0 - self.phi * self.phi;
        let v0 = self.var / one_m2;
        let r = x - self.drift / one_m;
        let dl_dm = r / v0;
        let dl_dv = 0.5 / v0 * (r * r / v0 - 1.0);
        let dm_dphi = self.drift / (one_m * one_m);
        let dv_dphi = 2.0 * self.phi * self.var / (one_m2 * one_m2);
        Ar1Grad {
            phi: dl_dm * dm_dphi + dl_dv * dv_dphi,
            var: dl_dv / one_m2,
            drift: dl_dm / one_m,
        }
    }
}
