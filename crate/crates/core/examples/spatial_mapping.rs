//! Random-forest interpolation of metal concentrations over a basin polygon
//! and an HPI map computed from the interpolated grids.
//!
//! Writes ESRI ASCII grids into the directory given as the first argument
//! (default `map_out`).

use std::fs::{self, File};
use std::path::PathBuf;

use hpi_core::cv::{self, Dataset, GridSpec, ModelKind, NestedCvOptions};
use hpi_core::data::{self, Metal, StandardsTable};
use hpi_core::spatial::{self, GridGeometry, RfSpec};
use hpi_core::transform::TransformKind;
use hpi_core::{hpi, synth};

fn main() -> hpi_core::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "map_out".into()));
    fs::create_dir_all(&out).map_err(|e| hpi_core::Error::io(&out, e))?;

    let basin = synth::Basin::new(42);
    let samples = basin.sample(96, 0, "GW")?;
    let holdout = basin.sample(200, 1, "HO")?;
    let geometry = GridGeometry::covering(basin.polygon.bbox(), 80, 80)?;
    let mask = geometry.mask(&basin.polygon);
    let rf = RfSpec {
        n_trees: 100,
        ..RfSpec::default()
    };

    let report = spatial::interpolation_report(&samples, &rf, 5, 42)?;
    let mut grids = Vec::new();
    for m in Metal::ALL {
        let g = spatial::interpolate_metal(&samples, m, &rf, geometry, mask.clone())?;
        let path = out.join(format!("metal_{m}.asc"));
        g.write_ascii(File::create(&path).map_err(|e| hpi_core::Error::io(&path, e))?)?;
        println!("{m:<3} interpolation CV RMSE {:.4}", report.rmse[&m]);
        grids.push(g);
    }

    let standards = StandardsTable::who_default();
    let y = hpi::hpi_column(&samples, &standards)?;
    let truth = hpi::hpi_column(&holdout, &standards)?;
    let ds = Dataset::new(samples.metals.clone(), y, data::metal_names())?;
    let models = [ModelKind::Mean, ModelKind::ElasticNet, ModelKind::Knn];
    let opts = NestedCvOptions::new(TransformKind::Copula, &models, GridSpec::quick());
    let fitted = cv::fit_final(&ds, &opts, 5, 42, None)?;
    for kind in models {
        let map = spatial::predict_hpi_grid(&grids, &fitted.pipeline(kind).expect("fitted"))?;
        let score = spatial::grid_rmse(&map, &holdout.coords, &truth)?;
        let path = out.join(format!("hpi_{}.asc", kind.name()));
        map.write_ascii(File::create(&path).map_err(|e| hpi_core::Error::io(&path, e))?)?;
        println!(
            "{:<12} map RMSE on {} held-out points: {:.2}",
            kind.name(),
            score.used,
            score.rmse
        );
    }
    println!("grids written to {}", out.display());
    Ok(())
}
