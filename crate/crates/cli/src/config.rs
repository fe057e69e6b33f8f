//! Experiment configuration, read from JSON. See `docs/config.md` for the
//! field-by-field reference.

use std::path::{Path, PathBuf};

use abcmle::mle::Schedule;
use abcmle::smc::{Resampling, ScoreMethod, SmcOptions};
use abcmle::{build_model, Model, ModelOptions, MODEL_NAMES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Batch,
    Online,
    LikelihoodEval,
    PitCheck,
    GradientHistogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethodName {
    PathSpace,
    Marginal,
}

impl From<ScoreMethodName> for ScoreMethod {
    fn from(m: ScoreMethodName) -> Self {
        match m {
            ScoreMethodName::PathSpace => ScoreMethod::PathSpace,
            ScoreMethodName::Marginal => ScoreMethod::Marginal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingConfig {
    EveryStep,
    Adaptive { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    None,
    LogReturns,
    LogReturnsAr1Residuals,
}

/// Where the raw observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Simulated from the model at `theta`; each replicate gets its own data set
    /// unless `shared` is true.
    Synthetic {
        theta: Vec<f64>,
        n: usize,
        #[serde(default)]
        shared: bool,
    },
    /// One value per row, optional header.
    Csv {
        path: PathBuf,
        #[serde(default = "default_preprocess")]
        preprocess: Preprocess,
    },
}

fn default_preprocess() -> Preprocess {
    Preprocess::None
}

/// Observation scale used when evaluating likelihoods and conditional CDFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTransform {
    /// Same transform and noise corruption as estimation.
    Model,
    /// Untransformed, uncorrupted data against an identity-transform kernel.
    Raw,
}

/// Location statistic used by `precenter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterStatistic {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub multipliers: Vec<f64>,
}

fn default_a() -> f64 {
    0.1
}
fn default_b() -> f64 {
    0.6
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            a: default_a(),
            b: default_b(),
            t0: 0.0,
            multipliers: Vec::new(),
        }
    }
}

impl From<&ScheduleConfig> for Schedule {
    fn from(s: &ScheduleConfig) -> Self {
        Schedule {
            a: s.a,
            b: s.b,
            t0: s.t0,
            multipliers: s.multipliers.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub uses_psi: Option<bool>,
    #[serde(default)]
    pub exclusion_radius: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub with_drift: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: String,
    #[serde(default)]
    pub model_options: ModelConfig,
    pub mode: Mode,
    pub data: DataSource,
    /// Starting point for batch/online; the evaluation point for
    /// pit_check and gradient_histogram.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    /// Points at which likelihood_eval reports estimates.
    #[serde(default)]
    pub eval_thetas: Vec<Vec<f64>>,
    pub epsilon: f64,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_average_last")]
    pub average_last: usize,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// Defaults to path_space for batch and marginal for online runs.
    #[serde(default)]
    pub score_method: Option<ScoreMethodName>,
    #[serde(default = "default_resampling")]
    pub resampling: ResamplingConfig,
    /// i.i.d. models, batch mode: one proposal sample per iteration shared
    /// by every observation.
    #[serde(default)]
    pub shared_proposal: bool,
    /// g-and-k: subtract a location estimate from the first 100 observations
    /// before estimation and add it back to the location estimate.
    #[serde(default)]
    pub precenter: bool,
    #[serde(default)]
    pub precenter_statistic: CenterStatistic,
    /// Add kernel noise to the (transformed) data. False gives plain ABC.
    #[serde(default = "default_true")]
    pub corrupt: bool,
    #[serde(default = "default_eval_transform")]
    pub eval_transform: EvalTransform,
    /// likelihood_eval: independent estimates per theta.
    #[serde(default = "default_likelihood_seeds")]
    pub likelihood_seeds: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_one")]
    pub replicates: usize,
    #[serde(default = "default_one_u64")]
    pub seed: u64,
    /// Worker threads for replicates; outputs do not depend on it, so it is
    /// left out of the config hash.
    #[serde(default = "default_one", skip_serializing)]
    pub threads: usize,
    /// Where results go; not part of the config hash, so moving a run does
    /// not change its outputs.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    /// Adds a wall-clock column to trace files (breaks byte-for-byte reproducibility).
    #[serde(default)]
    pub record_timing: bool,
    /// Full-scale configs ship disabled; `run --force` overrides.
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Random points for `check-gradients`.
    #[serde(default = "default_gradient_points")]
    pub gradient_points: usize,
}

fn default_particles() -> usize {
    1000
}
fn default_iterations() -> usize {
    1000
}
fn default_average_last() -> usize {
    1000
}
fn default_resampling() -> ResamplingConfig {
    ResamplingConfig::EveryStep
}
fn default_true() -> bool {
    true
}
fn default_eval_transform() -> EvalTransform {
    EvalTransform::Model
}
fn default_likelihood_seeds() -> usize {
    10
}
fn default_bins() -> usize {
    50
}
fn default_one() -> usize {
    1
}
fn default_one_u64() -> u64 {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_gradient_points() -> usize {
    1000
}

/// Output root override; relative `output_dir` values resolve against it.
pub const OUTPUT_ROOT_ENV: &str = "ABCMLE_OUTPUT_ROOT";

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        // CSV paths are relative to the config file
        if let DataSource::Csv { path: p, .. } = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_options(&self) -> ModelOptions {
        ModelOptions {
            uses_psi: self.model_options.uses_psi,
            exclusion_radius: self.model_options.exclusion_radius,
            c: self.model_options.c,
            with_drift: self.model_options.with_drift,
        }
    }

    pub fn build_model(&self) -> CliResult<Box<dyn Model>> {
        build_model(&self.model, &self.model_options()).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn schedule(&self) -> Schedule {
        (&self.schedule).into()
    }

    pub fn score_method(&self) -> ScoreMethod {
        match (self.score_method, self.mode) {
            (Some(m), _) => m.into(),
            (None, Mode::Online) => ScoreMethod::Marginal,
            (None, _) => ScoreMethod::PathSpace,
        }
    }

    pub fn smc_options(&self) -> SmcOptions {
        SmcOptions {
            resampling: match self.resampling {
                ResamplingConfig::EveryStep => Resampling::EveryStep,
                ResamplingConfig::Adaptive { threshold } => Resampling::Adaptive { threshold },
            },
            collapse_static: true,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !MODEL_NAMES.contains(&self.model.as_str()) {
            return bad(format!("unknown model {:?}; expected one of {MODEL_NAMES:?}", self.model));
        }
        let model = self.build_model()?;
        let dim = model.dim_theta();
        let check_theta = |what: &str, t: &[f64]| -> CliResult<()> {
            if t.len() != dim {
                return Err(CliError::Config(format!("{what} has {} entries, model {} needs {dim}", t.len(), self.model)));
            }
            model
                .check_theta(t)
                .map_err(|e| CliError::Config(format!("{what}: {e}")))
        };
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.particles < 2 {
            return bad("particles must be at least 2".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        match &self.data {
            DataSource::Synthetic { theta, n, .. } => {
                check_theta("data.synthetic.theta", theta)?;
                if *n == 0 {
                    return bad("data.synthetic.n must be positive".into());
                }
            }
            DataSource::Csv { .. } => {}
        }
        match self.mode {
            Mode::Batch | Mode::Online | Mode::PitCheck | Mode::GradientHistogram => match &self.theta0 {
                Some(t) => check_theta("theta0", t)?,
                None => return bad(format!("mode {:?} requires theta0", self.mode)),
            },
            Mode::LikelihoodEval => {
                if self.eval_thetas.is_empty() {
                    return bad("likelihood_eval requires eval_thetas".into());
                }
                for (i, t) in self.eval_thetas.iter().enumerate() {
                    check_theta(&format!("eval_thetas[{i}]"), t)?;
                }
                if self.likelihood_seeds == 0 {
                    return bad("likelihood_seeds must be positive".into());
                }
            }
        }
        if matches!(self.mode, Mode::Batch | Mode::Online) {
            self.schedule()
                .validate(dim)
                .map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(t) = &self.theta0 {
                model
                    .domain()
                    .to_unconstrained(t)
                    .map_err(|e| CliError::Config(format!("theta0 must be interior: {e}")))?;
            }
        }
        if self.mode == Mode::Batch && self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.mode == Mode::GradientHistogram {
            if !abcmle::is_static(model.as_ref()) {
                return bad("gradient_histogram needs an i.i.d. model".into());
            }
            if self.histogram_bins == 0 {
                return bad("histogram_bins must be positive".into());
            }
        }
        if self.precenter && self.model != "g_and_k" {
            return bad("precenter applies to g_and_k only".into());
        }
        if let ResamplingConfig::Adaptive { threshold } = self.resampling {
            if !(0.0..=1.0).contains(&threshold) {
                return bad(format!("resampling threshold {threshold} outside [0, 1]"));
            }
            if self.score_method() == ScoreMethod::Marginal && matches!(self.mode, Mode::Batch | Mode::Online) {
                return bad("marginal score method requires every-step resampling".into());
            }
        }
        Ok(())
    }
}
