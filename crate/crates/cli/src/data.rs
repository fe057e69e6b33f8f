//! Raw series ingestion and the log-return / AR(1)-residual preprocessing.

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub values: Vec<f64>,
    pub provenance: String,
}

/// Reads one value per row. A non-numeric first row is taken as a header;
/// with several columns the last one is used (a leading date column is
/// common for price files).
pub fn ingest_csv(path: &Path) -> CliResult<RawSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CliError::Data(format!("{}: row {row}: {e}", path.display())))?;
        let field = match rec.iter().last() {
            Some(f) if !f.is_empty() => f,
            _ => return Err(CliError::Data(format!("{}: row {row} is empty", path.display()))),
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(CliError::Data(format!("{}: row {row}: non-finite value {v}", path.display()))),
            Err(_) if row == 1 => continue,
            Err(_) => {
                return Err(CliError::Data(format!(
                    "{}: row {row}: cannot parse {field:?} as a number",
                    path.display()
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::Data(format!("{}: no observations", path.display())));
    }
    Ok(RawSeries {
        values,
        provenance: path.display().to_string(),
    })
}

/// `r_t = 100 log(o_{t+1} / o_t)`.
pub fn preprocess_log_returns(prices: &[f64]) -> CliResult<Vec<f64>> {
    if prices.len() < 2 {
        return Err(CliError::Data("log returns need at least two prices".into()));
    }
    if let Some((i, p)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return Err(CliError::Model(abcmle::Error::Domain(format!(
            "price {p} at position {} is not positive",
            i + 1
        ))));
    }
    Ok(prices.windows(2).map(|w| 100.0 * (w[1] / w[0]).ln()).collect())
}

/// Ordinary least squares fit of `r_t = c + rho r_{t-1} + e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Fit {
    pub intercept: f64,
    pub rho: f64,
    pub residuals: Vec<f64>,
}

pub fn ar1_residuals(r: &[f64]) -> CliResult<Ar1Fit> {
    if r.len() < 3 {
        return Err(CliError::Data("AR(1) fit needs at least three values".into()));
    }
    let x = &r[..r.len() - 1];
    let y = &r[1..];
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > f64::EPSILON * n * (1.0 + mx * mx)) {
        return Err(CliError::Model(abcmle::Error::Numerical(
            "AR(1) regressor is constant".into(),
        )));
    }
    let rho = sxy / sxx;
    let intercept = my - rho * mx;
    let residuals = x.iter().zip(y).map(|(a, b)| b - intercept - rho * a).collect();
    Ok(Ar1Fit {
        intercept,
        rho,
        residuals,
    })
}
