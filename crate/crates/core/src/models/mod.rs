//! Built-in models and the name registry used by experiment configs.

pub mod alpha_stable;
mod ar1;
pub mod g_and_k;
pub mod surrogate;
pub mod svar;

pub use alpha_stable::{alpha_stable_grad_tau, alpha_stable_tau, AlphaStable};
pub use g_and_k::{gk_grad_quantile, gk_quantile, GandK};
pub use surrogate::GaussianSurrogate;
pub use svar::SvAlphaR;

use crate::error::{Error, Result};
use crate::model::Model;

pub const MODEL_NAMES: [&str; 4] = ["alpha_stable", "g_and_k", "sv_alpha_r", "gaussian_surrogate"];

/// Knobs shared by the registry constructors. `None` keeps the model default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOptions {
    pub uses_psi: Option<bool>,
    pub exclusion_radius: Option<f64>,
    pub c: Option<f64>,
    pub with_drift: bool,
}

/// Builds a registered model by name.
pub fn build_model(name: &str, opts: &ModelOptions) -> Result<Box<dyn Model>> {
    let radius = opts.exclusion_radius.unwrap_or(alpha_stable::DEFAULT_EXCLUSION_RADIUS);
    match name {
        "alpha_stable" => Ok(Box::new(AlphaStable::new(opts.uses_psi.unwrap_or(true), radius))),
        "g_and_k" => Ok(Box::new(GandK::new(
            opts.c.unwrap_or(g_and_k::DEFAULT_C),
            opts.uses_psi.unwrap_or(true),
        ))),
        "sv_alpha_r" => Ok(Box::new(SvAlphaR::new(opts.with_drift, opts.uses_psi.unwrap_or(true), radius))),
        "gaussian_surrogate" => {
            if opts.uses_psi == Some(true) {
                return Err(Error::Config("gaussian_surrogate is only defined without psi".into()));
            }
            Ok(Box::new(GaussianSurrogate::new()))
        }
        other => Err(Error::Config(format!(
            "unknown model '{other}', expected one of {MODEL_NAMES:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_every_model() {
        for name in MODEL_NAMES {
            let m = build_model(name, &ModelOptions::default()).unwrap();
            assert_eq!(m.name(), name);
        }
        assert!(build_model("levy", &ModelOptions::default()).is_err());
    }

    #[test]
    fn drift_variant_has_four_parameters() {
        let m = build_model("sv_alpha_r", &ModelOptions { with_drift: true, ..Default::default() }).unwrap();
        assert_eq!(m.dim_theta(), 4);
        assert_eq!(m.domain().names()[3], "delta");
    }
}
