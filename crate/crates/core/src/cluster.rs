//! DBSCAN on z-scored concentrations and per-cluster dominant metals.
//!
//! A point is core when at least `min_samples` points, itself included, lie
//! within `eps` (Euclidean). Points are scanned in row order and each new
//! core point seeds a cluster that is expanded breadth first, so a border
//! point belongs to the earliest-numbered cluster with a core point in reach.

use std::collections::VecDeque;
use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Metal, SampleTable, Standardiser, METAL_COUNT};
use crate::error::{Error, Result};

pub const NOISE: i32 = -1;

/// Relative tolerance for calling two centroid concentrations tied.
pub const TIE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_samples: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            eps: 0.5,
            min_samples: 10,
        }
    }
}

fn neighbourhoods(x: ArrayView2<'_, f64>, eps: f64) -> Vec<Vec<usize>> {
    let n = x.nrows();
    let eps2 = eps * eps;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let a = x.row(i);
            (0..n)
                .filter(|&j| {
                    let d2: f64 = a.iter().zip(x.row(j)).map(|(u, v)| (u - v) * (u - v)).sum();
                    d2 <= eps2
                })
                .collect()
        })
        .collect()
}

pub fn dbscan(x: ArrayView2<'_, f64>, params: DbscanParams) -> Result<Vec<i32>> {
    if !(params.eps > 0.0) || !params.eps.is_finite() || params.min_samples == 0 {
        return Err(Error::InvalidArgument(format!(
            "DBSCAN needs eps > 0 and min_samples >= 1, got {params:?}"
        )));
    }
    let nb = neighbourhoods(x, params.eps);
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= params.min_samples).collect();
    let n = x.nrows();
    let mut labels = vec![NOISE; n];
    let mut assigned = vec![false; n];
    let mut next = 0;
    for i in 0..n {
        if assigned[i] || !core[i] {
            continue;
        }
        let id = next;
        next += 1;
        assigned[i] = true;
        labels[i] = id;
        let mut queue = VecDeque::from([i]);
        while let Some(p) = queue.pop_front() {
            for &q in &nb[p] {
                if assigned[q] {
                    continue;
                }
                assigned[q] = true;
                labels[q] = id;
                if core[q] {
                    queue.push_back(q);
                }
            }
        }
    }
    Ok(labels)
}

/// Relabels clusters by order of first appearance; noise stays `-1`.
pub fn canonical_labels(labels: &[i32]) -> Vec<i32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                NOISE
            } else {
                let k = map.len() as i32;
                *map.entry(l).or_insert(k)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub label: i32,
    pub size: usize,
    pub centroid_scaled: Vec<f64>,
    /// Centroid in mg/L.
    pub centroid: Vec<f64>,
    pub dominant: Metal,
    /// Another metal is within [`TIE_REL`] of the dominant one.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub params: DbscanParams,
    pub labels: Vec<i32>,
    /// Noise group first when present, then clusters in label order.
    pub profiles: Vec<ClusterProfile>,
    pub standardiser: Standardiser,
}

impl ClusterResult {
    pub fn n_clusters(&self) -> usize {
        self.profiles.iter().filter(|p| p.label != NOISE).count()
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn profile(&self, label: i32) -> Option<&ClusterProfile> {
        self.profiles.iter().find(|p| p.label == label)
    }

    pub fn write_labels_csv<W: Write>(&self, ids: &[String], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["id", "label"])?;
        for (id, l) in ids.iter().zip(&self.labels) {
            out.write_record([id.clone(), l.to_string()])?;
        }
        out.flush().map_err(|e| Error::io("<labels csv>", e))
    }

    pub fn write_centroids_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string(), "size".into()];
        header.extend(Metal::ALL.iter().map(|m| m.to_string()));
        header.extend(["dominant".into(), "tie".into()]);
        out.write_record(&header)?;
        for p in &self.profiles {
            let mut rec = vec![p.label.to_string(), p.size.to_string()];
            rec.extend(p.centroid.iter().map(|v| v.to_string()));
            rec.extend([p.dominant.to_string(), p.tie.to_string()]);
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<centroids csv>", e))
    }
}

/// First metal with the largest value; ties within [`TIE_REL`] are flagged.
pub fn dominant_metal(centroid: &[f64]) -> (Metal, bool) {
    let max = centroid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let close = |v: f64| v >= max - TIE_REL * max.abs();
    let first = centroid
        .iter()
        .position(|&v| close(v))
        .expect("non-empty centroid");
    let ties = centroid.iter().filter(|&&v| close(v)).count();
    (Metal::ALL[first], ties > 1)
}

/// Z-scores the table (with `standardiser` if given, else one fitted on the
/// table), clusters, and profiles every group including noise.
pub fn dominance(
    table: &SampleTable,
    params: DbscanParams,
    standardiser: Option<&Standardiser>,
) -> Result<ClusterResult> {
    if table.len() < params.min_samples {
        return Err(Error::InvalidArgument(format!(
            "need at least min_samples = {} rows, got {}",
            params.min_samples,
            table.len()
        )));
    }
    let st = match standardiser {
        Some(s) => s.clone(),
        None => Standardiser::fit(table.metals.view(), &crate::data::metal_names())?,
    };
    let z = st.apply(table.metals.view())?;
    let labels = dbscan(z.view(), params)?;
    let max_label = labels.iter().copied().max().unwrap_or(NOISE);
    let mut groups: Vec<i32> = Vec::new();
    if labels.contains(&NOISE) {
        groups.push(NOISE);
    }
    groups.extend(0..=max_label);
    let mut profiles = Vec::with_capacity(groups.len());
    for g in groups {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == g).collect();
        let mut c = vec![0.0; METAL_COUNT];
        for &i in &rows {
            for (j, v) in z.row(i).iter().enumerate() {
                c[j] += v;
            }
        }
        c.iter_mut().for_each(|v| *v /= rows.len() as f64);
        let back = st.inverse(
            Array2::from_shape_vec((1, METAL_COUNT), c.clone())
                .expect("shape")
                .view(),
        )?;
        let centroid = back.row(0).to_vec();
        let (dominant, tie) = dominant_metal(&centroid);
        profiles.push(ClusterProfile {
            label: g,
            size: rows.len(),
            centroid_scaled: c,
            centroid,
            dominant,
            tie,
        });
    }
    Ok(ClusterResult {
        params,
        labels,
        profiles,
        standardiser: st,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    /// Definition-level DBSCAN: components of the core graph, numbered by
    /// their lowest core index; a border point takes the smallest component
    /// id among its core neighbours.
    fn reference(x: &Array2<f64>, eps: f64, min_samples: usize) -> Vec<i32> {
        let n = x.nrows();
        let dist = |i: usize, j: usize| -> f64 {
            x.row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let near = |i: usize, j: usize| dist(i, j) <= eps;
        let core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_samples)
            .collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        for i in 0..n {
            for j in 0..i {
                if core[i] && core[j] && near(i, j) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut id_of_root = std::collections::HashMap::new();
        let mut comp = vec![NOISE; n];
        for i in 0..n {
            if core[i] {
                let r = find(&mut parent, i);
                let k = id_of_root.len() as i32;
                comp[i] = *id_of_root.entry(r).or_insert(k);
            }
        }
        (0..n)
            .map(|i| {
                if core[i] {
                    comp[i]
                } else {
                    (0..n)
                        .filter(|&j| core[j] && near(i, j))
                        .map(|j| comp[j])
                        .min()
                        .unwrap_or(NOISE)
                }
            })
            .collect()
    }

    fn blobs(seed: u64, centres: &[[f64; 2]], per: usize, sd: f64) -> Array2<f64> {
        let mut r = rng::stream(seed, 0);
        let n = centres.len() * per;
        Array2::from_shape_fn((n, 2), |(i, j)| {
            centres[i / per][j] + sd * r.sample::<f64, _>(StandardNormal)
        })
    }

    #[test]
    fn two_blobs() {
        let x = blobs(1, &[[0.0, 0.0], [5.0, 0.0]], 20, 0.05);
        let labels = dbscan(x.view(), DbscanParams::default()).unwrap();
        assert!(labels[..20].iter().all(|&l| l == 0));
        assert!(labels[20..].iter().all(|&l| l == 1));
    }

    #[test]
    fn sparse_points_are_noise() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| if j == 0 { i as f64 } else { 0.0 });
        let p = DbscanParams {
            eps: 0.5,
            min_samples: 2,
        };
        assert!(dbscan(x.view(), p).unwrap().iter().all(|&l| l == NOISE));
    }

    #[test]
    fn matches_reference_on_random_instances() {
        let mut r = rng::stream(5, 0);
        for _ in 0..100 {
            let n = r.random_range(1..120);
            let x =
                Array2::from_shape_fn((n, 2), |_| (r.random::<f64>() * 4.0 * 8.0).round() / 8.0);
            let eps = [0.25, 0.5, 0.75][r.random_range(0..3)];
            let m = r.random_range(1..8);
            let p = DbscanParams {
                eps,
                min_samples: m,
            };
            assert_eq!(dbscan(x.view(), p).unwrap(), reference(&x, eps, m));
        }
    }

    #[test]
    fn rejects_bad_params() {
        let x = Array2::<f64>::zeros((3, 2));
        assert!(dbscan(
            x.view(),
            DbscanParams {
                eps: 0.0,
                min_samples: 1
            }
        )
        .is_err());
        assert!(dbscan(
            x.view(),
            DbscanParams {
                eps: 1.0,
                min_samples: 0
            }
        )
        .is_err());
    }

    fn table_from(metals: Array2<f64>) -> SampleTable {
        let n = metals.nrows();
        SampleTable::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..n).map(|i| (i as f64, 0.0)).collect(),
            metals,
        )
        .unwrap()
    }

    #[test]
    fn fe_heavy_cluster() {
        let mut r = rng::stream(2, 0);
        let m = Array2::from_shape_fn((40, 6), |(_, j)| {
            let base = if j == 0 { 2.0 } else { 0.05 };
            base * (1.0 + 0.02 * r.sample::<f64, _>(StandardNormal))
        });
        let res = dominance(
            &table_from(m),
            DbscanParams {
                eps: 2.0,
                min_samples: 5,
            },
            None,
        )
        .unwrap();
        assert_eq!(res.n_clusters(), 1);
        assert!(res
            .profiles
            .iter()
            .all(|p| p.dominant == Metal::Fe && !p.tie));
    }

    #[test]
    fn tie_goes_to_first_metal() {
        assert_eq!(
            dominant_metal(&[0.1, 0.3, 0.3, 0.0, 0.0, 0.0]),
            (Metal::Mn, true)
        );
        assert_eq!(dominant_metal(&[0.001; 6]), (Metal::Fe, true));
        assert_eq!(
            dominant_metal(&[0.1, 0.2, 0.0, 0.0, 0.0, 0.5]),
            (Metal::As, false)
        );
    }

    #[test]
    fn homogeneous_blob_centroid_near_means() {
        let mut r = rng::stream(3, 0);
        let n = 200;
        let sd = 0.1;
        let m = Array2::from_shape_fn((n, 6), |(_, j)| {
            1.0 + j as f64 + sd * r.sample::<f64, _>(StandardNormal)
        });
        let res = dominance(
            &table_from(m),
            DbscanParams {
                eps: 5.0,
                min_samples: 5,
            },
            None,
        )
        .unwrap();
        assert_eq!(res.n_clusters(), 1);
        assert_eq!(res.n_noise(), 0);
        for (j, c) in res.profiles[0].centroid.iter().enumerate() {
            assert!((c - (1.0 + j as f64)).abs() < 3.0 * sd / (n as f64).sqrt());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn permutation_relabels_consistently(seed in 0u64..1000, n in 2usize..60) {
            let mut r = rng::stream(seed, 0);
            let x = Array2::from_shape_fn((n, 2), |_| r.random::<f64>() * 3.0);
            let p = DbscanParams { eps: 0.4, min_samples: 3 };
            let a = dbscan(x.view(), p).unwrap();
            let core: Vec<bool> = neighbourhoods(x.view(), p.eps).iter().map(|v| v.len() >= 3).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.reverse();
            let xp = x.select(ndarray::Axis(0), &perm);
            let b = dbscan(xp.view(), p).unwrap();
            // Core points keep their partition; border points may switch.
            for i in 0..n {
                for j in 0..n {
                    if core[i] && core[j] {
                        prop_assert_eq!(a[i] == a[j], b[n - 1 - i] == b[n - 1 - j]);
                    }
                }
                prop_assert_eq!(a[i] == NOISE, b[n - 1 - i] == NOISE);
            }
        }

        #[test]
        fn smaller_eps_never_reduces_noise(seed in 0u64..1000) {
            let mut r = rng::stream(seed, 1);
            let x = Array2::from_shape_fn((80, 3), |_| r.random::<f64>() * 2.0);
            let mut last = 0;
            for eps in [1.0, 0.8, 0.6, 0.4, 0.2] {
                let noise = dbscan(x.view(), DbscanParams { eps, min_samples: 4 }).unwrap()
                    .iter().filter(|&&l| l == NOISE).count();
                prop_assert!(noise >= last);
                last = noise;
            }
        }

        #[test]
        fn centroid_matches_member_means(seed in 0u64..1000) {
            let mut r = rng::stream(seed, 2);
            let m = Array2::from_shape_fn((50, 6), |_| 0.001 + r.random::<f64>().powi(3));
            let res = dominance(&table_from(m.clone()), DbscanParams { eps: 0.9, min_samples: 4 }, None).unwrap();
            for p in &res.profiles {
                let rows: Vec<usize> = (0..50).filter(|&i| res.labels[i] == p.label).collect();
                for j in 0..6 {
                    let mean = rows.iter().map(|&i| m[[i, j]]).sum::<f64>() / rows.len() as f64;
                    prop_assert!((p.centroid[j] - mean).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn canonical_relabel() {
        assert_eq!(
            canonical_labels(&[3, -1, 3, 1, 0, 1]),
            vec![0, -1, 0, 1, 2, 1]
        );
    }
}
