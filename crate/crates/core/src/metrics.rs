//! Regression evaluation metrics.
//!
//! Conventions: MAPE is a fraction; CCC uses population (ddof = 0) moments;
//! the KS statistic compares residuals with a normal whose mean and ddof = 1
//! standard deviation are estimated from the residuals themselves (or with
//! the standard normal when requested); reduced χ² divides by the ddof = 1
//! residual variance and ν = n − k.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{ks_pvalue, norm_cdf};
use crate::error::{Error, Result};

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("no observations".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sse(y: &[f64], yhat: &[f64]) -> f64 {
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok((sse(y, yhat) / y.len() as f64).sqrt())
}

/// Median with the mean of the middle two for even lengths.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub medae: f64,
    pub max_error: f64,
}

pub fn error_metrics(y: &[f64], yhat: &[f64]) -> Result<ErrorMetrics> {
    check_pair(y, yhat)?;
    let abs: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect();
    Ok(ErrorMetrics {
        rmse: rmse(y, yhat)?,
        mae: mean(&abs),
        medae: median(&abs),
        max_error: abs.iter().cloned().fold(0.0, f64::max),
    })
}

pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.contains(&0.0) {
        return Err(Error::Degenerate(
            "MAPE undefined with a zero target".into(),
        ));
    }
    Ok(y.iter()
        .zip(yhat)
        .map(|(a, b)| ((a - b) / a).abs())
        .sum::<f64>()
        / y.len() as f64)
}

pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let m = mean(y);
    let sst: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if sst == 0.0 {
        return Err(Error::Degenerate(
            "R² undefined for constant targets".into(),
        ));
    }
    Ok(1.0 - sse(y, yhat) / sst)
}

pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> Result<f64> {
    if n <= p + 1 {
        return Err(Error::Degenerate(format!(
            "adjusted R² needs n > p + 1 (n={n}, p={p})"
        )));
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p - 1) as f64)
}

/// `(AIC, BIC)`; both are −∞ when SSE is zero.
pub fn information_criteria(y: &[f64], yhat: &[f64], k: f64) -> Result<(f64, f64)> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    let s = sse(y, yhat);
    if s == 0.0 {
        return Ok((f64::NEG_INFINITY, f64::NEG_INFINITY));
    }
    let base = n * (s / n).ln();
    Ok((base + 2.0 * k, base + k * n.ln()))
}

/// Lin's concordance correlation coefficient with population moments.
pub fn ccc(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.len() < 2 {
        return Err(Error::InvalidArgument("CCC needs n >= 2".into()));
    }
    let (my, mp) = (mean(y), mean(yhat));
    let n = y.len() as f64;
    let vy = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n;
    let vp = yhat.iter().map(|v| (v - mp) * (v - mp)).sum::<f64>() / n;
    let cov = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| (a - my) * (b - mp))
        .sum::<f64>()
        / n;
    let denom = vy + vp + (my - mp) * (my - mp);
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "CCC undefined for equal constant vectors".into(),
        ));
    }
    Ok(2.0 * cov / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsReference {
    /// Normal with mean and ddof = 1 standard deviation of the residuals.
    #[default]
    Fitted,
    StandardNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_test(residuals: &[f64], reference: KsReference) -> Result<KsResult> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "KS test needs n >= 3, got {n}"
        )));
    }
    let (m, s) = match reference {
        KsReference::StandardNormal => (0.0, 1.0),
        KsReference::Fitted => {
            let m = mean(residuals);
            let var = residuals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
            if var == 0.0 {
                return Err(Error::Degenerate("zero-variance residuals".into()));
            }
            (m, var.sqrt())
        }
    };
    let mut r = residuals.to_vec();
    r.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, v) in r.iter().enumerate() {
        let f = norm_cdf((v - m) / s);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_pvalue(d, n),
    })
}

pub fn reduced_chi2(y: &[f64], yhat: &[f64], k: f64) -> Result<f64> {
    check_pair(y, yhat)?;
    let n = y.len();
    let nu = n as f64 - k;
    if !(nu > 0.0) {
        return Err(Error::Degenerate(format!(
            "reduced chi-squared needs n > k (n={n}, k={k})"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "reduced chi-squared needs n >= 2".into(),
        ));
    }
    let r: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    let m = mean(&r);
    let var = r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(Error::Degenerate("zero residual variance".into()));
    }
    Ok(r.iter().map(|v| v * v).sum::<f64>() / var / nu)
}

/// Full metric row. Fields are `None` when undefined for the input; the
/// reason is kept in `undefined`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub p: usize,
    pub k: f64,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub medae: Option<f64>,
    pub max_error: Option<f64>,
    pub mape: Option<f64>,
    pub r2: Option<f64>,
    pub adj_r2: Option<f64>,
    /// −∞ (serialised as null) when SSE is zero; see `undefined`.
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub ccc: Option<f64>,
    pub ks_stat: Option<f64>,
    pub ks_pvalue: Option<f64>,
    pub reduced_chi2: Option<f64>,
    pub ks_reference: KsReference,
    pub sigma2_convention: String,
    pub undefined: BTreeMap<String, String>,
}

pub const METRIC_NAMES: [&str; 13] = [
    "RMSE",
    "MAE",
    "MedAE",
    "MaxError",
    "MAPE",
    "R2",
    "AdjR2",
    "AIC",
    "BIC",
    "CCC",
    "KS_stat",
    "KS_pvalue",
    "ReducedChi2",
];

impl MetricsReport {
    pub fn values(&self) -> [Option<f64>; 13] {
        [
            self.rmse,
            self.mae,
            self.medae,
            self.max_error,
            self.mape,
            self.r2,
            self.adj_r2,
            self.aic,
            self.bic,
            self.ccc,
            self.ks_stat,
            self.ks_pvalue,
            self.reduced_chi2,
        ]
    }
}

pub fn full_report(
    y: &[f64],
    yhat: &[f64],
    p: usize,
    k: f64,
    reference: KsReference,
) -> Result<MetricsReport> {
    check_pair(y, yhat)?;
    let mut rep = MetricsReport {
        n: y.len(),
        p,
        k,
        ks_reference: reference,
        sigma2_convention: "residual variance, ddof=1".into(),
        ..Default::default()
    };
    let mut undefined = BTreeMap::new();
    let mut note = |name: &str, e: &Error| {
        undefined.insert(name.to_string(), e.to_string());
    };
    let e = error_metrics(y, yhat)?;
    rep.rmse = Some(e.rmse);
    rep.mae = Some(e.mae);
    rep.medae = Some(e.medae);
    rep.max_error = Some(e.max_error);
    match mape(y, yhat) {
        Ok(v) => rep.mape = Some(v),
        Err(err) => note("MAPE", &err),
    }
    match r2(y, yhat) {
        Ok(v) => {
            rep.r2 = Some(v);
            match adjusted_r2(v, y.len(), p) {
                Ok(a) => rep.adj_r2 = Some(a),
                Err(err) => note("AdjR2", &err),
            }
        }
        Err(err) => {
            note("R2", &err);
            note("AdjR2", &err);
        }
    }
    let (aic, bic) = information_criteria(y, yhat, k)?;
    if aic.is_infinite() {
        let e = Error::Degenerate("SSE is zero; value is -inf".into());
        note("AIC", &e);
        note("BIC", &e);
    }
    rep.aic = Some(aic);
    rep.bic = Some(bic);
    match ccc(y, yhat) {
        Ok(v) => rep.ccc = Some(v),
        Err(err) => note("CCC", &err),
    }
    let resid: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    match ks_test(&resid, reference) {
        Ok(r) => {
            rep.ks_stat = Some(r.statistic);
            rep.ks_pvalue = Some(r.p_value);
        }
        Err(err) => {
            note("KS_stat", &err);
            note("KS_pvalue", &err);
        }
    }
    match reduced_chi2(y, yhat, k) {
        Ok(v) => rep.reduced_chi2 = Some(v),
        Err(err) => note("ReducedChi2", &err),
    }
    rep.undefined = undefined;
    Ok(rep)
}

/// Metrics × models table; undefined cells are empty.
pub fn write_metrics_csv<W: std::io::Write>(
    rows: &[(String, MetricsReport)],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["metric".to_string()];
    header.extend(rows.iter().map(|(name, _)| name.clone()));
    w.write_record(&header)?;
    for (i, metric) in METRIC_NAMES.iter().enumerate() {
        let mut rec = vec![metric.to_string()];
        for (_, r) in rows {
            rec.push(r.values()[i].map(|v| format!("{v:?}")).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
