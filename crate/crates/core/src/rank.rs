//! Tie-aware Spearman rank correlation with t-approximation and permutation
//! inference.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Metal, SampleTable};
use crate::dist;
use crate::error::{Error, Result};
use crate::rng;

/// Slack used when comparing permuted |ρ| against the observed |ρ|, so that
/// arrangements with mathematically equal correlation are counted.
pub const PERM_TIE_EPS: f64 = 1e-12;

/// Average ranks (1-based); tied values share the mean of their rank block.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) hold ranks i+1..=j+1.
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn has_ties(x: &[f64]) -> bool {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).any(|w| w[0] == w[1])
}

fn distinct_count(x: &[f64]) -> usize {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "spearman needs n >= 3, got {}",
            x.len()
        )));
    }
    if distinct_count(x) < 2 || distinct_count(y) < 2 {
        return Err(Error::Degenerate(
            "constant vector: rank correlation undefined".into(),
        ));
    }
    Ok(())
}

/// Pearson correlation of two rank vectors.
fn rank_pearson(rx: &[f64], ry: &[f64]) -> f64 {
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(ry) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// The classic 1 − 6Σd²/(n(n²−1)) form; only valid without ties.
pub fn spearman_tie_free(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if has_ties(x) || has_ties(y) {
        return Err(Error::InvalidArgument(
            "the squared-difference form requires tie-free inputs".into(),
        ));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = x.len() as f64;
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Spearman's ρ. Tie-free inputs use the squared rank difference form;
/// otherwise Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if !has_ties(x) && !has_ties(y) {
        return spearman_tie_free(x, y);
    }
    Ok(rank_pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    /// |ρ| = 1: t is infinite and p is reported as 0.
    pub degenerate: bool,
}

/// Two-sided p-value of t = ρ√((n−2)/(1−ρ²)) on n − 2 degrees of freedom.
pub fn spearman_t_pvalue(rho: f64, n: usize) -> Result<TTest> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "t-test needs n >= 4, got {n}"
        )));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho out of range: {rho}")));
    }
    if rho.abs() >= 1.0 {
        return Ok(TTest {
            t: rho.signum() * f64::INFINITY,
            p: 0.0,
            degenerate: true,
        });
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    Ok(TTest {
        t,
        p: dist::t_two_sided(t, df),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermMode {
    /// Exact enumeration when n ≤ 7, Monte-Carlo otherwise.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermTest {
    pub p: f64,
    pub rho_obs: f64,
    /// Number of permutations evaluated (n! when exact).
    pub b: usize,
    /// Permutations with |ρ| ≥ |ρ_obs|.
    pub extreme: usize,
    pub exact: bool,
}

pub const EXACT_MAX_N: usize = 7;

struct RankPair {
    rx_c: Vec<f64>,
    ry_c: Vec<f64>,
    denom: f64,
}

impl RankPair {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let centre = |r: Vec<f64>| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            r.into_iter().map(|v| v - m).collect::<Vec<_>>()
        };
        let rx_c = centre(average_ranks(x));
        let ry_c = centre(average_ranks(y));
        let sxx: f64 = rx_c.iter().map(|v| v * v).sum();
        let syy: f64 = ry_c.iter().map(|v| v * v).sum();
        RankPair {
            rx_c,
            ry_c,
            denom: (sxx * syy).sqrt(),
        }
    }

    fn rho_perm(&self, perm: &[usize]) -> f64 {
        let s: f64 = self
            .rx_c
            .iter()
            .zip(perm)
            .map(|(a, &j)| a * self.ry_c[j])
            .sum();
        s / self.denom
    }
}

/// Permutation p-value (1 + #{|ρ_b| ≥ |ρ_obs|}) / (1 + B), permuting `y`
/// with `x` fixed.
pub fn spearman_perm_pvalue(
    x: &[f64],
    y: &[f64],
    b: usize,
    seed: u64,
    mode: PermMode,
) -> Result<PermTest> {
    check_pair(x, y)?;
    let n = x.len();
    let exact = match mode {
        PermMode::Exact => {
            if n > 10 {
                return Err(Error::InvalidArgument(format!(
                    "exact enumeration limited to n <= 10, got {n}"
                )));
            }
            true
        }
        PermMode::Auto => n <= EXACT_MAX_N,
        PermMode::MonteCarlo => false,
    };
    if !exact && b == 0 {
        return Err(Error::InvalidArgument(
            "permutation count B must be >= 1".into(),
        ));
    }
    let pair = RankPair::new(x, y);
    let identity: Vec<usize> = (0..n).collect();
    let rho_obs = pair.rho_perm(&identity);
    let thresh = rho_obs.abs() - PERM_TIE_EPS;

    let (extreme, total) = if exact {
        let mut perm = identity.clone();
        let mut count = 0usize;
        let mut total = 0usize;
        heap_permutations(&mut perm, &mut |p| {
            total += 1;
            if pair.rho_perm(p).abs() >= thresh {
                count += 1;
            }
        });
        (count, total)
    } else {
        let count = (0..b)
            .into_par_iter()
            .filter(|&k| {
                let mut perm = identity.clone();
                perm.shuffle(&mut rng::stream(seed, k as u64));
                pair.rho_perm(&perm).abs() >= thresh
            })
            .count();
        (count, b)
    };
    // Full enumeration already contains the observed ordering; sampled
    // permutations get the add-one correction.
    let p = if exact {
        extreme as f64 / total as f64
    } else {
        (1 + extreme) as f64 / (1 + total) as f64
    };
    Ok(PermTest {
        p,
        rho_obs: spearman(x, y)?,
        b: total,
        extreme,
        exact,
    })
}

/// Visits all permutations of `a` (Heap's algorithm, iterative).
pub(crate) fn heap_permutations<F: FnMut(&[usize])>(a: &mut [usize], visit: &mut F) {
    let n = a.len();
    let mut c = vec![0usize; n];
    visit(a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

pub const ALPHA: f64 = 0.05;

/// Pairwise Spearman report over the six metals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metals: Vec<Metal>,
    pub rho: Vec<Vec<f64>>,
    /// t-approximation p-values; `None` where |ρ| = 1 (degenerate).
    pub p_t: Vec<Vec<Option<f64>>>,
    pub p_perm: Vec<Vec<f64>>,
    /// Significance at α = 0.05 on the permutation p-value.
    pub significant: Vec<Vec<bool>>,
    pub b: usize,
    pub seed: u64,
    pub n: usize,
}

pub fn correlation_matrix(table: &SampleTable, b: usize, seed: u64) -> Result<CorrelationReport> {
    let n = table.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "correlation matrix needs n >= 4, got {n}"
        )));
    }
    let cols: Vec<Vec<f64>> = Metal::ALL
        .iter()
        .map(|&m| table.column(m).to_vec())
        .collect();
    let p = cols.len();
    let mut rho = vec![vec![1.0; p]; p];
    let mut p_t = vec![vec![None; p]; p];
    let mut p_perm = vec![vec![0.0; p]; p];
    let mut significant = vec![vec![false; p]; p];
    for i in 0..p {
        for j in i..p {
            let stream = rng::derive(&[seed, i as u64, j as u64]);
            let perm = spearman_perm_pvalue(&cols[i], &cols[j], b, stream, PermMode::Auto)?;
            let r = if i == j {
                1.0
            } else {
                spearman(&cols[i], &cols[j])?
            };
            let t = spearman_t_pvalue(r, n)?;
            let pt = (!t.degenerate).then_some(t.p);
            for (a, c) in [(i, j), (j, i)] {
                rho[a][c] = r;
                p_t[a][c] = pt;
                p_perm[a][c] = perm.p;
                significant[a][c] = perm.p < ALPHA;
            }
        }
    }
    Ok(CorrelationReport {
        metals: Metal::ALL.to_vec(),
        rho,
        p_t,
        p_perm,
        significant,
        b,
        seed,
        n,
    })
}
