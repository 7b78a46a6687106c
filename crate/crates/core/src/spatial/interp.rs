//! Random-forest interpolation of metal concentrations from coordinates and
//! HPI prediction on the interpolated feature grids.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{GridField, GridGeometry};
use crate::cv::{complement, partition, Pipeline};
use crate::data::{Metal, SampleTable, METAL_COUNT};
use crate::error::{Error, Result};
use crate::learners::{forest::DEFAULT_TREES, FittedModel, ModelSpec};
use crate::metrics;

/// Cells predicted per parallel task.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfSpec {
    pub n_trees: usize,
    /// Coordinates tried per split; `None` uses both.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for RfSpec {
    fn default() -> Self {
        RfSpec {
            n_trees: DEFAULT_TREES,
            max_features: None,
            seed: 42,
        }
    }
}

/// Forest on (lon, lat) predicting a z-scored target, plus the scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordModel {
    pub forest: FittedModel,
    pub mean: f64,
    pub std: f64,
}

impl CoordModel {
    pub fn fit(coords: &[(f64, f64)], values: &[f64], rf: &RfSpec) -> Result<Self> {
        let n = values.len();
        if n < 2 || coords.len() != n {
            return Err(Error::InvalidArgument(format!(
                "interpolation needs >= 2 samples with coordinates, got {n}"
            )));
        }
        if coords.iter().all(|c| *c == coords[0]) {
            return Err(Error::Degenerate(
                "all sample coordinates are identical".into(),
            ));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // A constant target z-scores to zero with unit scale.
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let z: Vec<f64> = values.iter().map(|v| (v - mean) / std).collect();
        let x = Array2::from_shape_fn(
            (n, 2),
            |(i, j)| if j == 0 { coords[i].0 } else { coords[i].1 },
        );
        let spec = ModelSpec::RandomForest {
            n_trees: rf.n_trees,
            max_features: Some(rf.max_features.unwrap_or(2)),
            seed: rf.seed,
        };
        Ok(CoordModel {
            forest: spec.fit(x.view(), &z)?,
            mean,
            std,
        })
    }

    pub fn predict_one(&self, x: f64, y: f64) -> f64 {
        self.mean + self.std * self.forest.predict_one(&[x, y])
    }
}

fn metal_values(samples: &SampleTable, metal: Metal) -> Vec<f64> {
    samples.column(metal).to_vec()
}

/// Interpolated concentration (mg/L) at every masked-in cell.
pub fn interpolate_metal(
    samples: &SampleTable,
    metal: Metal,
    rf: &RfSpec,
    geometry: GridGeometry,
    mask: Vec<bool>,
) -> Result<GridField> {
    let model = CoordModel::fit(&samples.coords, &metal_values(samples, metal), rf)?;
    let cells: Vec<(f64, f64)> = geometry
        .centres()
        .into_iter()
        .zip(&mask)
        .filter(|(_, m)| **m)
        .map(|(c, _)| c)
        .collect();
    let inside: Vec<f64> = cells
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            chunk
                .iter()
                .map(|&(x, y)| model.predict_one(x, y))
                .collect::<Vec<_>>()
        })
        .collect();
    GridField::from_masked_values(geometry, mask, &inside)
}

/// Pooled k-fold RMSE (mg/L) of the coordinate forest on held-out samples.
pub fn interpolation_cv(
    samples: &SampleTable,
    metal: Metal,
    rf: &RfSpec,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let all: Vec<usize> = (0..samples.len()).collect();
    let folds = partition(&all, k, seed, 0)?;
    let values = metal_values(samples, metal);
    let mut pred = vec![0.0; values.len()];
    for test in &folds {
        let train = complement(&all, test);
        let coords: Vec<(f64, f64)> = train.iter().map(|&i| samples.coords[i]).collect();
        let y: Vec<f64> = train.iter().map(|&i| values[i]).collect();
        let m = CoordModel::fit(&coords, &y, rf)?;
        for &i in test {
            pred[i] = m.predict_one(samples.coords[i].0, samples.coords[i].1);
        }
    }
    metrics::rmse(&values, &pred)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub k: usize,
    pub seed: u64,
    pub rf: RfSpec,
    /// Cross-validated RMSE per metal, mg/L.
    pub rmse: BTreeMap<Metal, f64>,
}

pub fn interpolation_report(
    samples: &SampleTable,
    rf: &RfSpec,
    k: usize,
    seed: u64,
) -> Result<InterpolationReport> {
    let rmse = Metal::ALL
        .iter()
        .map(|&m| Ok((m, interpolation_cv(samples, m, rf, k, seed)?)))
        .collect::<Result<_>>()?;
    Ok(InterpolationReport {
        k,
        seed,
        rf: *rf,
        rmse,
    })
}

/// Applies a fitted pipeline cell by cell to six metal grids in
/// [`Metal::ALL`] order. Nothing is refitted.
pub fn predict_hpi_grid(grids: &[GridField], pipeline: &Pipeline) -> Result<GridField> {
    if grids.len() != METAL_COUNT {
        return Err(Error::DimensionMismatch {
            expected: METAL_COUNT,
            got: grids.len(),
        });
    }
    if let Some(i) = grids.iter().position(|g| !g.same_frame(&grids[0])) {
        return Err(Error::Geometry(format!(
            "grid {} differs in geometry or mask from grid 0",
            i
        )));
    }
    let first = &grids[0];
    let cells: Vec<usize> = (0..first.values.len()).filter(|&i| first.mask[i]).collect();
    let inside: Vec<f64> = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let x = Array2::from_shape_fn((chunk.len(), METAL_COUNT), |(r, j)| {
                grids[j].values[chunk[r]]
            });
            pipeline.predict(x.view())
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    GridField::from_masked_values(first.geometry, first.mask.clone(), &inside)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRmse {
    pub rmse: f64,
    pub used: usize,
    /// Points outside the grid or its mask.
    pub excluded: usize,
}

/// RMSE between the containing cell's value and the known value per point.
pub fn grid_rmse(grid: &GridField, points: &[(f64, f64)], truth: &[f64]) -> Result<GridRmse> {
    if points.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: truth.len(),
        });
    }
    let (mut y, mut yhat) = (Vec::new(), Vec::new());
    for (&(px, py), &t) in points.iter().zip(truth) {
        if let Some(v) = grid.sample(px, py) {
            y.push(t);
            yhat.push(v);
        }
    }
    if y.is_empty() {
        return Err(Error::Geometry(
            "no evaluation point falls inside the masked grid".into(),
        ));
    }
    Ok(GridRmse {
        rmse: metrics::rmse(&y, &yhat)?,
        used: y.len(),
        excluded: points.len() - y.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit;
    use crate::data::Standardiser;
    use crate::rng;
    use crate::transform::TransformKind;
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;

    fn table(n: usize, seed: u64, f: impl Fn(f64, f64) -> [f64; 6]) -> SampleTable {
        let mut r = rng::stream(seed, 0);
        let coords: Vec<(f64, f64)> = (0..n)
            .map(|_| (r.random::<f64>(), r.random::<f64>()))
            .collect();
        let metals = Array2::from_shape_fn((n, 6), |(i, j)| f(coords[i].0, coords[i].1)[j]);
        SampleTable::new((0..n).map(|i| format!("s{i}")).collect(), coords, metals).unwrap()
    }

    fn unit_grid(n: usize) -> (GridGeometry, Vec<bool>) {
        let g = GridGeometry::new(0.0, 0.0, 1.0 / n as f64, n, n).unwrap();
        let mask = g.centres().iter().map(|&(x, y)| x + y < 1.5).collect();
        (g, mask)
    }

    fn small_rf() -> RfSpec {
        RfSpec {
            n_trees: 30,
            ..RfSpec::default()
        }
    }

    #[test]
    fn constant_field_stays_constant() {
        let t = table(20, 1, |_, _| [0.2; 6]);
        let (g, mask) = unit_grid(10);
        let f = interpolate_metal(&t, Metal::Fe, &small_rf(), g, mask.clone()).unwrap();
        assert!(f.hygienic());
        assert!(f.masked_values().iter().all(|&v| v == 0.2));
        assert_eq!(f.mask, mask);
        assert_eq!(f.geometry, g);
    }

    #[test]
    fn rejects_identical_coordinates() {
        let metals = Array2::from_elem((3, 6), 0.1);
        let t = SampleTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(1.0, 1.0); 3],
            metals,
        )
        .unwrap();
        let (g, mask) = unit_grid(4);
        assert!(matches!(
            interpolate_metal(&t, Metal::Fe, &small_rf(), g, mask),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn nearby_cell_tracks_sample() {
        let t = table(60, 2, |x, y| [1.0 + 3.0 * x + y, 0.1, 0.1, 0.1, 0.1, 0.1]);
        let (g, mask) = unit_grid(50);
        let f = interpolate_metal(&t, Metal::Fe, &small_rf(), g, vec![true; mask.len()]).unwrap();
        let vals = t.column(Metal::Fe);
        let range = vals.iter().cloned().fold(f64::MIN, f64::max)
            - vals.iter().cloned().fold(f64::MAX, f64::min);
        for (i, &(x, y)) in t.coords.iter().enumerate() {
            assert!((f.sample(x, y).unwrap() - vals[i]).abs() < range / 4.0);
        }
    }

    #[test]
    fn smooth_surface_cv_error_is_small() {
        let t = table(200, 3, |x, y| {
            [(3.0 * x).sin() + y * y + 2.0, 0.1, 0.1, 0.1, 0.1, 0.1]
        });
        let e = interpolation_cv(&t, Metal::Fe, &small_rf(), 5, 1).unwrap();
        let vals = t.column(Metal::Fe);
        let range = vals.iter().cloned().fold(f64::MIN, f64::max)
            - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(e < 0.1 * range, "{e} vs range {range}");
    }

    #[test]
    fn noise_cv_error_matches_spread() {
        let mut r = rng::stream(9, 1);
        let noise: Vec<f64> = (0..150).map(|_| 1.0 + r.random::<f64>()).collect();
        let t = table(150, 4, |_, _| [0.1; 6]);
        let mut metals = t.metals.clone();
        metals
            .column_mut(0)
            .assign(&ndarray::Array1::from(noise.clone()));
        let t = SampleTable::new(t.ids.clone(), t.coords.clone(), metals).unwrap();
        let e = interpolation_cv(&t, Metal::Fe, &small_rf(), 5, 2).unwrap();
        let m = noise.iter().sum::<f64>() / 150.0;
        let sd = (noise.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 149.0).sqrt();
        assert!((e / sd - 1.0).abs() < 0.3, "{e} vs {sd}");
        let loo = interpolation_cv(
            &t.subset(&(0..20).collect::<Vec<_>>()),
            Metal::Fe,
            &small_rf(),
            20,
            2,
        )
        .unwrap();
        assert!(loo.is_finite());
    }

    fn constant_pipeline(value: f64, kind: TransformKind) -> Pipeline {
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i * 6 + j) as f64);
        let names: Vec<String> = Metal::ALL.iter().map(|m| m.to_string()).collect();
        Pipeline {
            standardiser: Standardiser::fit(x.view(), &names).unwrap(),
            transform: kind.fit(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            model: FittedModel::Constant {
                value,
                n_features: 6,
            },
        }
    }

    #[test]
    fn constant_model_grid_and_no_refits() {
        let (g, mask) = unit_grid(12);
        let grids: Vec<GridField> = (0..6)
            .map(|j| GridField::from_fn(g, mask.clone(), |x, y| x + y + j as f64).unwrap())
            .collect();
        let pipe = constant_pipeline(0.5, TransformKind::Log);
        let before = audit::fit_count();
        let hpi = predict_hpi_grid(&grids, &pipe).unwrap();
        assert_eq!(audit::fit_count(), before);
        let expect = pipe.transform.inverse_one(0.5);
        assert!(hpi.hygienic());
        assert!(hpi.masked_values().iter().all(|&v| v == expect));
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let (g, mask) = unit_grid(6);
        let mut grids: Vec<GridField> = (0..6)
            .map(|_| GridField::from_fn(g, mask.clone(), |_, _| 1.0).unwrap())
            .collect();
        let (g2, mask2) = unit_grid(7);
        grids[3] = GridField::from_fn(g2, mask2, |_, _| 1.0).unwrap();
        assert!(matches!(
            predict_hpi_grid(&grids, &constant_pipeline(0.0, TransformKind::Raw)),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn grid_rmse_cases() {
        let (g, mask) = unit_grid(10);
        let f = GridField::from_fn(g, mask, |_, _| 2.0).unwrap();
        let pts = [(0.05, 0.05), (0.15, 0.25), (0.95, 0.95), (5.0, 5.0)];
        let truth = [1.0, 3.0, 0.0, 0.0];
        let r = grid_rmse(&f, &pts, &truth).unwrap();
        assert_eq!((r.used, r.excluded), (2, 2));
        assert_abs_diff_eq!(r.rmse, 1.0, epsilon = 1e-15);
        let perfect = grid_rmse(&f, &pts[..2], &[2.0, 2.0]).unwrap();
        assert_eq!(perfect.rmse, 0.0);
        assert!(grid_rmse(&f, &[(9.0, 9.0)], &[1.0]).is_err());
    }
}
