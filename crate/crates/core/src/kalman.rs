//! Exact likelihood of the linear-Gaussian surrogate.
//!
//! Used as the reference the particle estimators are checked against.

use crate::special::LN_SQRT_2PI;

/// Log-likelihood of `y_1:n` under `X_1 ~ N(0, q / (1 - phi^2))`,
/// `X_t = phi X_{t-1} + N(0, q)`, `Y_t = X_t + N(0, r)`.
pub fn ar1_log_likelihood(y: &[f64], phi: f64, q: f64, r: f64) -> f64 {
    let mut mean = 0.0;
    let mut var = q / (1.0 - phi * phi);
    let mut ll = 0.0;
    for &obs in y {
        let s = var + r;
        let innov = obs - mean;
        ll += -LN_SQRT_2PI - 0.5 * s.ln() - 0.5 * innov * innov / s;
        let gain = var / s;
        let filt_mean = mean + gain * innov;
        let filt_var = (1.0 - gain) * var;
        mean = phi * filt_mean;
        var = phi * phi * filt_var + q;
    }
    ll
}

/// Exact `log p(y_eps_1:n)` of the surrogate with `theta = (phi, sigma_x^2, sigma_y)`
/// and noise scale `epsilon`.
pub fn surrogate_log_likelihood(y: &[f64], theta: &[f64], epsilon: f64) -> f64 {
    ar1_log_likelihood(y, theta[0], theta[1], theta[2] * theta[2] + epsilon * epsilon)
}

/// Central finite differences of [`surrogate_log_likelihood`] in theta.
pub fn surrogate_score_fd(y: &[f64], theta: &[f64], epsilon: f64, step: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|k| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[k] += step;
            dn[k] -= step;
            (surrogate_log_likelihood(y, &up, epsilon) - surrogate_log_likelihood(y, &dn, epsilon)) / (2.0 * step)
        })
        .collect()
}
