//! Central finite-difference checks of a model's analytic gradients.
//!
//! Points are drawn from the model itself: theta from standard normal
//! unconstrained coordinates (kept out of any exclusion zone via
//! [`Model::adjust_update`]), `x` from the initial law followed by one
//! transition, `u` from the auxiliary law, and `y` from the kernel around
//! `psi(tau)`.

use rand_distr::{Distribution, StandardNormal};

use crate::model::Model;
use crate::observation::Kernel;
use crate::rng::{StreamRng, Streams};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Below this absolute discrepancy a coordinate passes regardless of its
/// relative error (partials that vanish analytically). Discrepancies within
/// the rounding error of the difference quotient also pass.
pub const ABSOLUTE_FLOOR: f64 = 1e-8;

/// One analytic/numeric mismatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub quantity: &'static str,
    pub coordinate: usize,
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientReport {
    pub points: usize,
    pub comparisons: usize,
    /// Comparisons where the difference quotient cannot resolve the
    /// tolerance (huge function values); these pass on the rounding bound.
    pub roundoff_limited: usize,
    /// Largest relative error among the remaining comparisons above the
    /// absolute floor.
    pub max_relative_error: f64,
    pub mismatches: Vec<Mismatch>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// A random parameter inside the model's optimisation region.
pub fn random_theta(model: &dyn Model, rng: &mut StreamRng) -> Vec<f64> {
    let d = model.domain();
    let v: Vec<f64> = (0..d.len()).map(|_| StandardNormal.sample(rng)).collect();
    let mut theta = d.from_unconstrained(&v);
    let copy = theta.clone();
    model.adjust_update(&copy, &mut theta);
    theta
}

struct Checker {
    step: f64,
    tol: f64,
    report: GradientReport,
}

impl Checker {
    fn compare(&mut self, quantity: &'static str, theta: &[f64], x: &[f64], u: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64) {
        let mut th = theta.to_vec();
        for (k, &a) in analytic.iter().enumerate() {
            th[k] = theta[k] + self.step;
            let up = f(&th);
            th[k] = theta[k] - self.step;
            let dn = f(&th);
            th[k] = theta[k];
            let numeric = (up - dn) / (2.0 * self.step);
            self.report.comparisons += 1;
            let diff = (a - numeric).abs();
            let rel = diff / a.abs().max(numeric.abs());
            // cancellation error of the difference quotient itself
            let roundoff = 8.0 * f64::EPSILON * (up.abs() + dn.abs()) / (2.0 * self.step);
            let ok = diff <= ABSOLUTE_FLOOR.max(roundoff) || rel <= self.tol;
            if diff <= ABSOLUTE_FLOOR {
            } else if roundoff > self.tol * a.abs().max(numeric.abs()) {
                self.report.roundoff_limited += 1;
            } else if rel.is_finite() {
                self.report.max_relative_error = self.report.max_relative_error.max(rel);
            }
            if !ok {
                self.report.mismatches.push(Mismatch {
                    quantity,
                    coordinate: k,
                    theta: theta.to_vec(),
                    x: x.to_vec(),
                    u: u.to_vec(),
                    analytic: a,
                    numeric,
                });
            }
        }
    }
}

/// Checks `grad log eta`, `grad log f`, `grad log nu`, `grad tau` and
/// `grad log h_eps` at `points` random points.
pub fn check_model_gradients(
    model: &dyn Model,
    kernel: &Kernel,
    points: usize,
    step: f64,
    tolerance: f64,
    streams: &Streams,
) -> GradientReport {
    let (dx, du, dy, dt) = (model.dim_x(), model.dim_u(), model.dim_y(), model.dim_theta());
    let mut c = Checker {
        step,
        tol: tolerance,
        report: GradientReport {
            points,
            ..GradientReport::default()
        },
    };
    let mut grad = vec![0.0; dt];
    let mut jac = vec![0.0; dt * dy];
    let mut tau = vec![0.0; dy];
    for p in 0..points {
        let mut rng = streams.keyed(&[0x6C, p as u64]);
        let theta = random_theta(model, &mut rng);
        let mut x0 = vec![0.0; dx];
        let mut x = vec![0.0; dx];
        let mut u = vec![0.0; du];
        model.sample_initial(&theta, &mut rng, &mut x0);
        model.sample_transition(&theta, &x0, &mut rng, &mut x);
        model.sample_aux(&theta, &x, &mut rng, &mut u);

        if dx > 0 {
            model.grad_log_initial(&theta, &x0, &mut grad);
            c.compare("log_initial", &theta, &x0, &u, &grad, |t| model.log_initial(t, &x0));
            model.grad_log_transition(&theta, &x0, &x, &mut grad);
            c.compare("log_transition", &theta, &x, &u, &grad, |t| model.log_transition(t, &x0, &x));
            let mut g2 = vec![0.0; dt];
            let l = model.log_transition_with_grad(&theta, &x0, &x, &mut g2);
            let mut lb = [0.0];
            let mut gb = vec![0.0; dt];
            model.log_transition_batch(&theta, &x0, &x, &mut lb, &mut gb);
            let lt = model.log_transition(&theta, &x0, &x);
            for (k, (a, b)) in g2.iter().zip(&gb).enumerate() {
                c.compare_exact("log_transition_with_grad", k, &theta, &x, &u, grad[k], *a);
                c.compare_exact("log_transition_batch", k, &theta, &x, &u, grad[k], *b);
            }
            c.compare_exact("log_transition_with_grad", dt, &theta, &x, &u, lt, l);
            c.compare_exact("log_transition_batch", dt, &theta, &x, &u, lt, lb[0]);
        }
        model.grad_log_aux(&theta, &x, &u, &mut grad);
        c.compare("log_aux", &theta, &x, &u, &grad, |t| model.log_aux(t, &x, &u));

        model.tau_with_grad(&theta, &x, &u, &mut tau, &mut jac);
        for j in 0..dy {
            let col: Vec<f64> = (0..dt).map(|k| jac[k * dy + j]).collect();
            c.compare("tau", &theta, &x, &u, &col, |t| {
                let mut out = vec![0.0; dy];
                model.tau(t, &x, &u, &mut out);
                out[j]
            });
        }

        let y: Vec<f64> = tau
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                kernel.transform().apply(v) + kernel.epsilon() * e
            })
            .collect();
        grad.fill(0.0);
        kernel.accumulate_grad(&y, &tau, &jac, &mut grad);
        c.compare("log_h_eps", &theta, &x, &u, &grad, |t| {
            let mut out = vec![0.0; dy];
            model.tau(t, &x, &u, &mut out);
            kernel.log_density(&y, &out)
        });
    }
    c.report
}

impl Checker {
    /// Two analytic evaluations of the same quantity must agree to rounding.
    fn compare_exact(&mut self, quantity: &'static str, coordinate: usize, theta: &[f64], x: &[f64], u: &[f64], a: f64, b: f64) {
        self.report.comparisons += 1;
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            self.report.mismatches.push(Mismatch {
                quantity,
                coordinate,
                theta: theta.to_vec(),
                x: x.to_vec(),
                u: u.to_vec(),
                analytic: a,
                numeric: b,
            });
        }
    }
}
