//! Probability-integral-transform model checks and Kolmogorov-Smirnov statistics.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::observation::Kernel;
use crate::rng::Streams;
use crate::smc::{ParticleSystem, ScoreMethod, SmcOptions};

/// Asymptotic 1% critical value of `sqrt(n) D_n`.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

/// `sup_x |F_n(x) - F(x)|` for a sample against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_uniform(sample: &[f64]) -> f64 {
    ks_statistic(sample, |x| x.clamp(0.0, 1.0))
}

/// Whether the KS statistic rejects at the 1% level.
pub fn ks_rejects(statistic: f64, n: usize) -> bool {
    statistic > KS_CRITICAL_1PCT / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitCheck {
    /// Conditional CDF values in time order.
    pub pit: Vec<f64>,
    /// Sorted `(i / (n + 1), F_(i))` probability-plot coordinates.
    pub pairs: Vec<(f64, f64)>,
    pub ks: f64,
    pub critical: f64,
}

impl PitCheck {
    pub fn rejects(&self) -> bool {
        self.ks > self.critical
    }
}

/// Runs one filter pass and collects `P(Y_t <= y_t | y_1:t-1)` at every step.
pub fn pit_model_check(
    model: &dyn Model,
    theta: &[f64],
    data: &[f64],
    kernel: &Kernel,
    particles: usize,
    streams: Streams,
) -> Result<PitCheck> {
    if model.dim_y() != 1 {
        return Err(Error::Config("PIT check needs scalar observations".into()));
    }
    if data.is_empty() {
        return Err(Error::Config("PIT check needs at least one observation".into()));
    }
    let mut ps = ParticleSystem::init(model, theta, particles, ScoreMethod::None, SmcOptions::default(), streams)?;
    let mut pit = Vec::with_capacity(data.len());
    for y in data {
        ps.step(model, theta, std::slice::from_ref(y), kernel)?;
        pit.push(ps.conditional_cdf(*y, kernel)?);
    }
    let mut sorted = pit.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let pairs = sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| ((i + 1) as f64 / (n + 1) as f64, f))
        .collect();
    Ok(PitCheck {
        ks: ks_uniform(&pit),
        critical: KS_CRITICAL_1PCT / (n as f64).sqrt(),
        pit,
        pairs,
    })
}
