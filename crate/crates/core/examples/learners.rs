//! Fits each base learner on one split and reports the test RMSE.

use hpi_core::cv::GridSpec;
use hpi_core::learners::ModelSpec;
use hpi_core::{metrics, synth};
use ndarray::s;

fn main() -> hpi_core::Result<()> {
    let ds = synth::heterogeneous_benchmark(300, 1);
    let (xtr, xte) = (ds.x.slice(s![..200, ..]), ds.x.slice(s![200.., ..]));
    let (ytr, yte) = (&ds.y[..200], &ds.y[200..]);

    let grids = GridSpec::quick();
    let specs: Vec<&ModelSpec> = [
        &grids.elastic_net,
        &grids.kernel_ridge,
        &grids.svm,
        &grids.cart,
        &grids.knn,
    ]
    .into_iter()
    .filter_map(|g| g.first())
    .collect();
    for spec in specs {
        let model = spec.fit(xtr, ytr)?;
        let pred = model.predict(xte)?;
        println!(
            "{:<13} RMSE {:.4}  effective params {:.1}",
            spec.label(),
            metrics::rmse(yte, &pred)?,
            model.effective_params()
        );
    }
    Ok(())
}
