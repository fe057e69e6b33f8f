//! Result files. Every file starts with `#` provenance lines carrying the
//! config hash and the tool version; floats are written in shortest
//! round-trip form so re-reading reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use abcmle::mle::RunRecord;

use crate::error::{CliError, CliResult};

/// `git describe`-style version string fixed at build time.
pub fn version() -> &'static str {
    env!("ABCMLE_VERSION")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: String) -> Self {
        Provenance {
            config_hash,
            version: version().to_string(),
        }
    }

    fn header(&self) -> String {
        format!("# config_sha256={}\n# version={}\n", self.config_hash, self.version)
    }
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// A CSV table with a provenance header.
pub fn write_csv(path: &Path, prov: &Provenance, columns: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = prov.header();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Reads a table written by [`write_csv`], skipping provenance lines.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let columns = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((columns, rows))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str, path: &Path) -> CliResult<f64> {
    s.parse()
        .map_err(|_| CliError::Data(format!("{}: cannot parse {s:?}", path.display())))
}

/// Serialises a run trace: one row per update.
pub fn write_run_record(path: &Path, prov: &Provenance, rec: &RunRecord, timing: bool) -> CliResult<()> {
    let mut columns = vec!["step".to_string()];
    columns.extend(rec.names.iter().map(|n| format!("theta_{n}")));
    columns.extend(rec.names.iter().map(|n| format!("grad_{n}")));
    columns.extend(["ess", "loglik", "clipped"].map(String::from));
    if timing {
        columns.push("seconds".into());
    }
    let mut rows = Vec::with_capacity(rec.len() + 1);
    let mut initial = vec!["0".to_string()];
    initial.extend(rec.initial.iter().map(|v| fmt_f64(*v)));
    initial.extend(rec.names.iter().map(|_| "NaN".to_string()));
    initial.extend(["NaN", "NaN", "0"].map(String::from));
    if timing {
        initial.push("0".into());
    }
    rows.push(initial);
    for j in 0..rec.len() {
        let mut row = vec![(j + 1).to_string()];
        row.extend(rec.theta[j].iter().map(|v| fmt_f64(*v)));
        row.extend(rec.gradient[j].iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(rec.ess[j]));
        row.push(fmt_f64(rec.log_likelihood[j]));
        let mask = rec.clipped[j].iter().enumerate().fold(0u64, |m, (k, c)| m | ((*c as u64) << k));
        row.push(mask.to_string());
        if timing {
            row.push(fmt_f64(rec.seconds[j]));
        }
        rows.push(row);
    }
    write_csv(path, prov, &columns, &rows)
}

/// Inverse of [`write_run_record`]; wall-clock times are zero when absent.
pub fn read_run_record(path: &Path) -> CliResult<RunRecord> {
    let (columns, rows) = read_csv(path)?;
    let names: Vec<String> = columns
        .iter()
        .filter_map(|c| c.strip_prefix("theta_").map(str::to_string))
        .collect();
    let d = names.len();
    let timing = columns.last().map(|c| c == "seconds").unwrap_or(false);
    if columns.len() != 2 * d + 4 + timing as usize || rows.is_empty() {
        return Err(CliError::Data(format!("{}: not a run trace", path.display())));
    }
    let mut rec = RunRecord {
        names,
        initial: Vec::new(),
        theta: Vec::new(),
        gradient: Vec::new(),
        ess: Vec::new(),
        log_likelihood: Vec::new(),
        clipped: Vec::new(),
        seconds: Vec::new(),
    };
    for (i, row) in rows.iter().enumerate() {
        let f = |k: usize| parse_f64(&row[k], path);
        let theta = (1..=d).map(f).collect::<CliResult<Vec<_>>>()?;
        if i == 0 {
            rec.initial = theta;
            continue;
        }
        rec.theta.push(theta);
        rec.gradient.push((d + 1..=2 * d).map(f).collect::<CliResult<Vec<_>>>()?);
        rec.ess.push(f(2 * d + 1)?);
        rec.log_likelihood.push(f(2 * d + 2)?);
        let mask: u64 = row[2 * d + 3]
            .parse()
            .map_err(|_| CliError::Data(format!("{}: bad clip mask", path.display())))?;
        rec.clipped.push((0..d).map(|k| mask >> k & 1 == 1).collect());
        rec.seconds.push(if timing { f(2 * d + 4)? } else { 0.0 });
    }
    Ok(rec)
}

/// Equal-width histogram over the finite range of `values`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn json_string(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serialises");
    let _ = writeln!(s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        RunRecord {
            names: vec!["a".into(), "b".into()],
            initial: vec![0.1, 1.0 / 3.0],
            theta: vec![vec![0.2, 2.0f64.sqrt()], vec![-1e-300, 7.5e10]],
            gradient: vec![vec![1.0, -0.0], vec![f64::MIN_POSITIVE, 3.0]],
            ess: vec![12.5, 99.0],
            log_likelihood: vec![-1234.5678901234567, -1.0],
            clipped: vec![vec![true, false], vec![false, true]],
            seconds: vec![0.0, 0.0],
        }
    }

    #[test]
    fn run_record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let prov = Provenance::new("abc".into());
        let rec = record();
        write_run_record(&p, &prov, &rec, false).unwrap();
        assert_eq!(read_run_record(&p).unwrap(), rec);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# config_sha256=abc\n# version="));
    }

    #[test]
    fn timing_column_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let mut rec = record();
        rec.seconds = vec![0.25, 1.5];
        write_run_record(&p, &Provenance::new("x".into()), &rec, true).unwrap();
        assert_eq!(read_run_record(&p).unwrap(), rec);
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let h = histogram(&v, 20);
        assert_eq!(h.len(), 20);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 1000);
    }
}
