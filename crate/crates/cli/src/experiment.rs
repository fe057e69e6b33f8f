//! Runs a configured experiment: prepares the data for each replicate,
//! dispatches on the mode and writes one directory of results per replicate
//! plus a `summary.json`.

use std::path::{Path, PathBuf};

use abcmle::diagnostics::pit_model_check;
use abcmle::iid::{batch_iid_score, gradient_histogram};
use abcmle::mle::{batch_gradient_ascent, online_gradient_ascent, BatchConfig, OnlineConfig, RunRecord};
use abcmle::rng::derive_seed;
use abcmle::smc::estimate_log_likelihood;
use abcmle::{corrupt_observations, is_static, simulate, Kernel, Model, Streams, Transform};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CenterStatistic, DataSource, EvalTransform, ExperimentConfig, Mode, Preprocess};
use crate::data::{ar1_residuals, ingest_csv, preprocess_log_returns};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, histogram, json_string, write_csv, write_file, write_run_record, Provenance};

const TAG_DATA: u64 = 0xDA7A;
const TAG_NOISE: u64 = 0x401E;
const TAG_ALGO: u64 = 0xA160;
const PRECENTER_WINDOW: usize = 100;

/// Observations as handed to the estimators.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Raw observations after preprocessing and any centring shift.
    pub raw: Vec<f64>,
    /// Transformed, possibly corrupted observations.
    pub noisy: Vec<f64>,
    /// Location shift removed before estimation (zero unless precentring).
    pub shift: f64,
    pub provenance: String,
}

#[derive(Debug)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub result: Result<Value, CliError>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl ExperimentReport {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }

    /// 0 when every replicate finished, otherwise the worst replicate's code.
    pub fn exit_code(&self) -> i32 {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(CliError::exit_code))
            .max()
            .unwrap_or(0)
    }
}

/// Raw observations for replicate `r`, before transform and noise.
pub fn raw_observations(cfg: &ExperimentConfig, model: &dyn Model, r: usize) -> CliResult<(Vec<f64>, String)> {
    match &cfg.data {
        DataSource::Synthetic { theta, n, shared } => {
            let seed = derive_seed(cfg.seed, &[TAG_DATA, if *shared { 0 } else { r as u64 }]);
            let sim = simulate(model, theta, *n, &Streams::new(seed))?;
            Ok((sim.y, format!("synthetic theta={theta:?} n={n} seed={seed}")))
        }
        DataSource::Csv { path, preprocess } => {
            let series = ingest_csv(path)?;
            let values = match preprocess {
                Preprocess::None => series.values,
                Preprocess::LogReturns => preprocess_log_returns(&series.values)?,
                Preprocess::LogReturnsAr1Residuals => ar1_residuals(&preprocess_log_returns(&series.values)?)?.residuals,
            };
            Ok((values, format!("{} preprocess={preprocess:?}", series.provenance)))
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

pub fn prepare_data(cfg: &ExperimentConfig, model: &dyn Model, r: usize) -> CliResult<PreparedData> {
    let (mut raw, provenance) = raw_observations(cfg, model, r)?;
    if raw.is_empty() {
        return Err(CliError::Data("no observations".into()));
    }
    let mut shift = 0.0;
    if cfg.precenter {
        let head = &raw[..raw.len().min(PRECENTER_WINDOW)];
        shift = match cfg.precenter_statistic {
            CenterStatistic::Mean => head.iter().sum::<f64>() / head.len() as f64,
            CenterStatistic::Median => median(head),
        };
        raw.iter_mut().for_each(|v| *v -= shift);
    }
    let noisy = if cfg.corrupt {
        let seed = derive_seed(cfg.seed, &[TAG_NOISE, r as u64]);
        corrupt_observations(&raw, model.dim_y(), cfg.epsilon, model.uses_psi(), seed)?
            .values()
            .to_vec()
    } else {
        let t = Transform::from_psi_flag(model.uses_psi());
        raw.iter().map(|&y| t.apply(y)).collect()
    };
    Ok(PreparedData {
        raw,
        noisy,
        shift,
        provenance,
    })
}

fn algorithm_streams(cfg: &ExperimentConfig, r: usize) -> Streams {
    Streams::new(derive_seed(cfg.seed, &[TAG_ALGO, r as u64]))
}

/// Data and kernel for likelihood and CDF evaluation.
fn eval_inputs<'a>(cfg: &ExperimentConfig, model: &dyn Model, data: &'a PreparedData) -> CliResult<(&'a [f64], Kernel)> {
    Ok(match cfg.eval_transform {
        EvalTransform::Model => (&data.noisy, Kernel::for_model(model, cfg.epsilon)?),
        EvalTransform::Raw => (&data.raw, Kernel::new(cfg.epsilon, Transform::Identity)?),
    })
}

/// Coordinate that absorbs the precentring shift.
fn location_index(model: &dyn Model) -> usize {
    model.domain().names().iter().position(|n| n == "A").unwrap_or(0)
}

fn shifted(model: &dyn Model, theta: &[f64], shift: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    if shift != 0.0 {
        t[location_index(model)] -= shift;
    }
    t
}

fn unshift_record(model: &dyn Model, rec: &mut RunRecord, shift: f64) {
    if shift == 0.0 {
        return;
    }
    let k = location_index(model);
    rec.initial[k] += shift;
    for row in &mut rec.theta {
        row[k] += shift;
    }
}

fn run_ascent(
    cfg: &ExperimentConfig,
    model: &dyn Model,
    data: &PreparedData,
    dir: &Path,
    prov: &Provenance,
    r: usize,
) -> CliResult<Value> {
    let kernel = Kernel::for_model(model, cfg.epsilon)?;
    let theta0 = shifted(model, cfg.theta0.as_deref().expect("validated"), data.shift);
    let streams = algorithm_streams(cfg, r);
    let result = match cfg.mode {
        Mode::Batch => {
            let bc = BatchConfig {
                particles: cfg.particles,
                iterations: cfg.iterations,
                schedule: cfg.schedule(),
                score_method: cfg.score_method(),
                smc: cfg.smc_options(),
                shared_proposal: cfg.shared_proposal,
            };
            batch_gradient_ascent(model, &data.noisy, &theta0, &kernel, &bc, &streams)
        }
        _ => {
            let oc = OnlineConfig {
                particles: cfg.particles,
                schedule: cfg.schedule(),
                score_method: cfg.score_method(),
                smc: cfg.smc_options(),
            };
            online_gradient_ascent(model, &data.noisy, &theta0, &kernel, &oc, &streams)
        }
    };
    let (mut rec, err) = match result {
        Ok(rec) => (rec, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    unshift_record(model, &mut rec, data.shift);
    write_run_record(&dir.join("trace.csv"), prov, &rec, cfg.record_timing)?;
    if let Some(e) = err {
        return Err(e.into());
    }
    let estimate = rec.average_last(cfg.average_last);
    let value = json!({
        "names": rec.names,
        "estimate": estimate,
        "last": rec.last(),
        "steps": rec.len(),
        "clip_events": rec.clip_events(),
        "shift": data.shift,
    });
    write_file(&dir.join("estimate.json"), &json_string(&value))?;
    Ok(value)
}

fn run_likelihood_eval(
    cfg: &ExperimentConfig,
    model: &dyn Model,
    data: &PreparedData,
    dir: &Path,
    prov: &Provenance,
    r: usize,
) -> CliResult<Value> {
    let (obs, kernel) = eval_inputs(cfg, model, data)?;
    let streams = algorithm_streams(cfg, r);
    let mut rows = Vec::new();
    let mut per_theta = Vec::new();
    for (i, theta) in cfg.eval_thetas.iter().enumerate() {
        let theta = shifted(model, theta, data.shift);
        let mut values = Vec::with_capacity(cfg.likelihood_seeds);
        for s in 0..cfg.likelihood_seeds {
            let ll = if is_static(model) {
                batch_iid_score(model, &theta, obs, &kernel, cfg.particles, &streams.child(i as u64), s, cfg.shared_proposal)?
                    .log_likelihood
            } else {
                estimate_log_likelihood(model, &theta, obs, &kernel, cfg.particles, streams.child(i as u64).child(s as u64))?
            };
            rows.push(vec![i.to_string(), s.to_string(), fmt_f64(ll)]);
            values.push(ll);
        }
        let (mean, var) = mean_var(&values);
        per_theta.push(json!({ "theta": cfg.eval_thetas[i], "mean": mean, "variance": var }));
    }
    let columns = ["theta_index", "seed", "loglik"].map(String::from);
    write_csv(&dir.join("loglik.csv"), prov, &columns, &rows)?;
    Ok(json!({ "thetas": per_theta }))
}

fn run_pit(
    cfg: &ExperimentConfig,
    model: &dyn Model,
    data: &PreparedData,
    dir: &Path,
    prov: &Provenance,
    r: usize,
) -> CliResult<Value> {
    let (obs, kernel) = eval_inputs(cfg, model, data)?;
    let theta = shifted(model, cfg.theta0.as_deref().expect("validated"), data.shift);
    let check = pit_model_check(model, &theta, obs, &kernel, cfg.particles, algorithm_streams(cfg, r))?;
    let rows: Vec<Vec<String>> = check
        .pit
        .iter()
        .zip(&check.pairs)
        .enumerate()
        .map(|(t, (f, (q, fs)))| vec![(t + 1).to_string(), fmt_f64(*f), fmt_f64(*q), fmt_f64(*fs)])
        .collect();
    let columns = ["t", "pit", "plot_uniform", "plot_sorted_pit"].map(String::from);
    write_csv(&dir.join("pit.csv"), prov, &columns, &rows)?;
    Ok(json!({ "ks": check.ks, "critical_1pct": check.critical, "rejects": check.rejects(), "n": check.pit.len() }))
}

/// Running variance of each coordinate after `m` samples, on a doubling grid
/// that always includes the full sample.
pub fn running_variance(samples: &[Vec<f64>]) -> Vec<(usize, Vec<f64>)> {
    let n = samples.len();
    let mut checkpoints = Vec::new();
    let mut m = 2;
    while m < n {
        checkpoints.push(m);
        m *= 2;
    }
    if n >= 2 {
        checkpoints.push(n);
    }
    checkpoints
        .into_iter()
        .map(|m| {
            let d = samples[0].len();
            let vars = (0..d)
                .map(|k| mean_var(&samples[..m].iter().map(|s| s[k]).collect::<Vec<_>>()).1)
                .collect();
            (m, vars)
        })
        .collect()
}

fn run_histogram(
    cfg: &ExperimentConfig,
    model: &dyn Model,
    data: &PreparedData,
    dir: &Path,
    prov: &Provenance,
    r: usize,
) -> CliResult<Value> {
    let kernel = Kernel::for_model(model, cfg.epsilon)?;
    let theta = shifted(model, cfg.theta0.as_deref().expect("validated"), data.shift);
    let scores = gradient_histogram(model, &theta, &data.noisy, &kernel, cfg.particles, &algorithm_streams(cfg, r))?;
    let names = model.domain().names();
    let mut columns = vec!["t".to_string()];
    columns.extend(names.iter().map(|n| format!("grad_{n}")));
    let rows: Vec<Vec<String>> = scores
        .iter()
        .enumerate()
        .map(|(t, g)| std::iter::once((t + 1).to_string()).chain(g.iter().map(|v| fmt_f64(*v))).collect())
        .collect();
    write_csv(&dir.join("scores.csv"), prov, &columns, &rows)?;

    let mut hist_rows = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let col: Vec<f64> = scores.iter().map(|s| s[k]).collect();
        for (lo, hi, c) in histogram(&col, cfg.histogram_bins) {
            hist_rows.push(vec![name.to_string(), fmt_f64(lo), fmt_f64(hi), c.to_string()]);
        }
    }
    let hcols = ["parameter", "lower", "upper", "count"].map(String::from);
    write_csv(&dir.join("histogram.csv"), prov, &hcols, &hist_rows)?;

    let running = running_variance(&scores);
    let mut vcols = vec!["samples".to_string()];
    vcols.extend(names.iter().map(|n| format!("var_{n}")));
    let vrows: Vec<Vec<String>> = running
        .iter()
        .map(|(m, v)| std::iter::once(m.to_string()).chain(v.iter().map(|x| fmt_f64(*x))).collect())
        .collect();
    write_csv(&dir.join("variance.csv"), prov, &vcols, &vrows)?;

    let n = scores.len();
    let half = running_variance(&scores[..n / 2]).last().map(|(_, v)| v.clone());
    let full = running.last().map(|(_, v)| v.clone());
    Ok(json!({ "samples": n, "variance": full, "variance_first_half": half }))
}

/// Sample mean and unbiased variance; the variance is NaN below two values.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() < 2 {
        f64::NAN
    } else {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    };
    (mean, var)
}

pub fn replicate_dir(root: &Path, r: usize) -> PathBuf {
    root.join(format!("replicate_{r:03}"))
}

fn run_replicate(cfg: &ExperimentConfig, root: &Path, prov: &Provenance, r: usize) -> CliResult<Value> {
    let model = cfg.build_model()?;
    let model = model.as_ref();
    let dir = replicate_dir(root, r);
    let data = prepare_data(cfg, model, r)?;
    let data_rows: Vec<Vec<String>> = data
        .raw
        .iter()
        .zip(&data.noisy)
        .enumerate()
        .map(|(t, (a, b))| vec![(t + 1).to_string(), fmt_f64(*a), fmt_f64(*b)])
        .collect();
    let dcols = ["t", "raw", "observed"].map(String::from);
    write_csv(&dir.join("data.csv"), prov, &dcols, &data_rows)?;
    let result = match cfg.mode {
        Mode::Batch | Mode::Online => run_ascent(cfg, model, &data, &dir, prov, r),
        Mode::LikelihoodEval => run_likelihood_eval(cfg, model, &data, &dir, prov, r),
        Mode::PitCheck => run_pit(cfg, model, &data, &dir, prov, r),
        Mode::GradientHistogram => run_histogram(cfg, model, &data, &dir, prov, r),
    }?;
    Ok(json!({ "data": data.provenance, "result": result }))
}

/// Mean and variance of the per-replicate estimates (batch/online only).
fn aggregate(outcomes: &[ReplicateOutcome]) -> Value {
    let estimates: Vec<Vec<f64>> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok())
        .filter_map(|v| v["result"]["estimate"].as_array())
        .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        .collect();
    if estimates.is_empty() {
        return Value::Null;
    }
    let d = estimates[0].len();
    let (mean, var): (Vec<f64>, Vec<f64>) = (0..d)
        .map(|k| mean_var(&estimates.iter().map(|e| e[k]).collect::<Vec<_>>()))
        .unzip();
    json!({ "replicates": estimates.len(), "mean": mean, "variance": var })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    if let DataSource::Csv { path, .. } = &cfg.data {
        if !path.is_file() {
            return Err(CliError::Data(format!("{}: no such data file", path.display())));
        }
    }
    let root = cfg.output_dir().join(&cfg.name);
    std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    let prov = Provenance::new(cfg.hash());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<ReplicateOutcome> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| ReplicateOutcome {
                index: r,
                result: run_replicate(cfg, &root, &prov, r),
            })
            .collect()
    });
    let replicates: Vec<Value> = outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(v) => json!({ "index": o.index, "status": "ok", "output": v }),
            Err(e) => json!({ "index": o.index, "status": "error", "exit_code": e.exit_code(), "error": e.to_string() }),
        })
        .collect();
    let summary = json!({
        "name": cfg.name,
        "config_sha256": prov.config_hash,
        "version": prov.version,
        "config": serde_json::to_value(cfg).expect("config serialises"),
        "replicates": replicates,
        "aggregate": aggregate(&outcomes),
    });
    write_file(&root.join("summary.json"), &json_string(&summary))?;
    Ok(ExperimentReport { dir: root, outcomes })
}
