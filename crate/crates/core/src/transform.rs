//! Response transformations: raw, `ln(1 + y)`, and the rank-based Gaussian
//! copula (normal scores) map, plus QQ normality diagnostics.
//!
//! The copula map is fitted on training responses only. Each distinct
//! training value becomes a knot `(y, Φ⁻¹(R/(n+1)))` with average ranks for
//! ties. Values between knots are linearly interpolated and values outside
//! the training range are clamped to the end knots, in both directions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audit;
use crate::dist::norm_ppf;
use crate::error::{Error, Result};
use crate::rank::average_ranks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Raw,
    Log,
    Copula,
}

impl TransformKind {
    pub const ALL: [TransformKind; 3] = [
        TransformKind::Raw,
        TransformKind::Log,
        TransformKind::Copula,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Raw => "raw",
            TransformKind::Log => "log",
            TransformKind::Copula => "copula",
        }
    }

    pub fn fit(self, y: &[f64]) -> Result<FittedTransform> {
        match self {
            TransformKind::Raw => Ok(FittedTransform::Raw),
            TransformKind::Log => {
                if let Some(v) = y.iter().find(|v| !(**v >= 0.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "log transform needs y >= 0, got {v}"
                    )));
                }
                Ok(FittedTransform::Log)
            }
            TransformKind::Copula => copula_fit(y),
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(TransformKind::Raw),
            "log" => Ok(TransformKind::Log),
            "copula" => Ok(TransformKind::Copula),
            other => Err(Error::InvalidArgument(format!(
                "unknown transform `{other}` (expected raw | log | copula)"
            ))),
        }
    }
}

pub fn log_forward(y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "log transform needs y >= 0, got {y}"
        )));
    }
    Ok(y.ln_1p())
}

pub fn log_inverse(z: f64) -> f64 {
    z.exp_m1()
}

/// Monotone knot map from training responses to normal scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaMap {
    /// Distinct training responses, strictly increasing.
    pub y: Vec<f64>,
    /// Normal scores at the knots, strictly increasing.
    pub z: Vec<f64>,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedTransform {
    Raw,
    Log,
    Copula(CopulaMap),
}

pub fn copula_fit(y: &[f64]) -> Result<FittedTransform> {
    audit::count_fit();
    let n = y.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "copula fit needs n >= 3, got {n}"
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite response {v}")));
    }
    let ranks = average_ranks(y);
    let mut pairs: Vec<(f64, f64)> = y.iter().copied().zip(ranks).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    if pairs.len() < 2 {
        return Err(Error::Degenerate("all training responses are equal".into()));
    }
    let denom = (n + 1) as f64;
    let (ys, zs) = pairs
        .into_iter()
        .map(|(v, r)| (v, norm_ppf(r / denom)))
        .unzip();
    Ok(FittedTransform::Copula(CopulaMap {
        y: ys,
        z: zs,
        n_train: n,
    }))
}

/// Piecewise-linear interpolation on increasing `xs`, clamped at the ends.
/// Exact at the knots.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    match xs.binary_search_by(|k| k.total_cmp(&x)) {
        Ok(i) => ys[i],
        Err(i) => {
            // xs[i-1] < x < xs[i]
            let (x0, x1) = (xs[i - 1], xs[i]);
            let t = (x - x0) / (x1 - x0);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        }
    }
}

impl CopulaMap {
    pub fn apply(&self, y: f64) -> f64 {
        interp(&self.y, &self.z, y)
    }

    pub fn inverse(&self, z: f64) -> f64 {
        interp(&self.z, &self.y, z)
    }
}

impl FittedTransform {
    pub fn kind(&self) -> TransformKind {
        match self {
            FittedTransform::Raw => TransformKind::Raw,
            FittedTransform::Log => TransformKind::Log,
            FittedTransform::Copula(_) => TransformKind::Copula,
        }
    }

    pub fn forward_one(&self, y: f64) -> Result<f64> {
        match self {
            FittedTransform::Raw => Ok(y),
            FittedTransform::Log => log_forward(y),
            FittedTransform::Copula(m) => Ok(m.apply(y)),
        }
    }

    pub fn inverse_one(&self, z: f64) -> f64 {
        match self {
            FittedTransform::Raw => z,
            FittedTransform::Log => log_inverse(z),
            FittedTransform::Copula(m) => m.inverse(z),
        }
    }

    pub fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        y.iter().map(|&v| self.forward_one(v)).collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.inverse_one(v)).collect()
    }
}

/// QQ diagnostic against the standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostic {
    pub kind: Option<TransformKind>,
    /// R² of the ordered values regressed on normal plotting positions
    /// Φ⁻¹(i/(n+1)).
    pub r2: f64,
    pub slope: f64,
    pub intercept: f64,
    pub bin_edges: Vec<f64>,
    pub bin_counts: Vec<usize>,
}

pub fn qq_r2(values: &[f64]) -> Result<NormalityDiagnostic> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "QQ diagnostic needs n >= 3, got {n}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Degenerate("constant input has no QQ fit".into()));
    }
    let q: Vec<f64> = (1..=n)
        .map(|i| norm_ppf(i as f64 / (n + 1) as f64))
        .collect();
    let nf = n as f64;
    let mq = q.iter().sum::<f64>() / nf;
    let mv = sorted.iter().sum::<f64>() / nf;
    let (mut sqv, mut sqq, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in q.iter().zip(&sorted) {
        sqv += (a - mq) * (b - mv);
        sqq += (a - mq) * (a - mq);
        svv += (b - mv) * (b - mv);
    }
    let slope = sqv / sqq;
    let intercept = mv - slope * mq;
    let r2 = (sqv * sqv / (sqq * svv)).clamp(0.0, 1.0);

    // Sturges bins.
    let bins = ((nf.log2()).ceil() as usize + 1).max(1);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut bin_counts = vec![0usize; bins];
    for &v in &sorted {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        bin_counts[b] += 1;
    }
    Ok(NormalityDiagnostic {
        kind: None,
        r2,
        slope,
        intercept,
        bin_edges,
        bin_counts,
    })
}

/// Diagnostic of `y` after fitting and applying `kind` to it.
pub fn normality_of(kind: TransformKind, y: &[f64]) -> Result<NormalityDiagnostic> {
    let t = kind.fit(y)?;
    let z = t.forward(y)?;
    let mut d = qq_r2(&z)?;
    d.kind = Some(kind);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn copula(y: &[f64]) -> CopulaMap {
        match copula_fit(y).unwrap() {
            FittedTransform::Copula(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn log_values() {
        assert_eq!(log_forward(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            log_forward(std::f64::consts::E - 1.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            log_forward(99.0).unwrap(),
            4.605170185988092,
            epsilon = 1e-12
        );
        assert!(log_forward(-0.1).is_err());
        for y in [0.0, 1e-9, 0.5, 3.0, 1e4] {
            assert_abs_diff_eq!(
                log_inverse(log_forward(y).unwrap()),
                y,
                epsilon = 1e-12 * (1.0 + y)
            );
        }
    }

    #[test]
    fn copula_three_points() {
        let m = copula(&[5.0, 1.0, 9.0]);
        assert_eq!(m.y, vec![1.0, 5.0, 9.0]);
        assert_abs_diff_eq!(m.z[0], -0.6744897501960817, epsilon = 1e-12);
        assert_eq!(m.z[1], 0.0);
        assert_abs_diff_eq!(m.z[2], 0.6744897501960817, epsilon = 1e-12);
    }

    #[test]
    fn copula_ties_share_score() {
        let m = copula(&[1.0, 1.0, 3.0]);
        assert_eq!(m.y, vec![1.0, 3.0]);
        assert_abs_diff_eq!(m.z[0], norm_ppf(0.375), epsilon = 1e-15);
        assert_abs_diff_eq!(m.z[1], norm_ppf(0.75), epsilon = 1e-15);
    }

    #[test]
    fn copula_permutation_invariant() {
        assert_eq!(copula(&[4.0, 2.0, 8.0, 1.0]), copula(&[1.0, 8.0, 2.0, 4.0]));
    }

    #[test]
    fn copula_apply_rules() {
        let m = copula(&[1.0, 2.0, 4.0, 8.0, 16.0]);
        assert_eq!(m.apply(4.0), 0.0);
        let mid = m.apply(3.0);
        assert_abs_diff_eq!(mid, 0.5 * (m.z[1] + m.z[2]), epsilon = 1e-15);
        assert_eq!(m.apply(100.0), m.z[4]);
        assert_eq!(m.apply(-3.0), m.z[0]);
        assert_eq!(m.inverse(0.0), 4.0);
        assert_eq!(m.inverse(9.0), 16.0);
        assert_eq!(m.inverse(-9.0), 1.0);
    }

    #[test]
    fn copula_degenerate() {
        assert!(matches!(
            copula_fit(&[2.0, 2.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(copula_fit(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn qq_on_exact_quantiles() {
        let n = 50;
        let q: Vec<f64> = (1..=n)
            .map(|i| norm_ppf(i as f64 / (n + 1) as f64))
            .collect();
        let d = qq_r2(&q).unwrap();
        assert_abs_diff_eq!(d.r2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.slope, 1.0, epsilon = 1e-12);
        assert_eq!(d.bin_counts.iter().sum::<usize>(), n);
        assert!(qq_r2(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn skewed_sample_ordering() {
        let mut r = crate::rng::stream(17, 0);
        let y: Vec<f64> = (0..96)
            .map(|_| (1.5 * r.sample::<f64, _>(StandardNormal)).exp() * 10.0)
            .collect();
        let raw = normality_of(TransformKind::Raw, &y).unwrap().r2;
        let log = normality_of(TransformKind::Log, &y).unwrap().r2;
        let cop = normality_of(TransformKind::Copula, &y).unwrap().r2;
        assert!(raw < 0.8, "raw {raw}");
        assert!(cop >= log && log >= raw, "{cop} {log} {raw}");
    }

    #[test]
    fn parse_kind() {
        assert_eq!(
            "copula".parse::<TransformKind>().unwrap(),
            TransformKind::Copula
        );
        assert_eq!("RAW".parse::<TransformKind>().unwrap(), TransformKind::Raw);
        assert!("boxcox".parse::<TransformKind>().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let t = copula_fit(&[3.0, 1.0, 2.0, 7.0]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"kind\":\"copula\""));
        assert_eq!(serde_json::from_str::<FittedTransform>(&s).unwrap(), t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_and_monotone(y in prop::collection::vec(0.0f64..1e3, 3..80)) {
                for kind in TransformKind::ALL {
                    let Ok(t) = kind.fit(&y) else { continue };
                    let z = t.forward(&y).unwrap();
                    for (a, b) in y.iter().zip(&z) {
                        prop_assert!((t.inverse_one(*b) - a).abs() <= 1e-9 * (1.0 + a.abs()));
                    }
                    let mut s = y.clone();
                    s.sort_by(f64::total_cmp);
                    let zs = t.forward(&s).unwrap();
                    prop_assert!(zs.windows(2).all(|w| w[0] <= w[1]));
                }
            }

            #[test]
            fn tie_free_scores_centred(set in prop::collection::btree_set(0u32..100_000, 3..120)) {
                let y: Vec<f64> = set.iter().rev().map(|&v| v as f64 * 0.01).collect();
                let t = copula_fit(&y).unwrap();
                let z = t.forward(&y).unwrap();
                let mean = z.iter().sum::<f64>() / z.len() as f64;
                prop_assert!(mean.abs() < 1e-10);
                prop_assert_eq!(crate::rank::spearman(&y, &z).unwrap(), 1.0);
            }
        }
    }
}
