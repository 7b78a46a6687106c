//! Nested 5×5 cross validation of the base learners, their average and a
//! Lasso stack, under each response transform.
//!
//! Pass `--reference` for the full hyperparameter grids (slower).

use hpi_core::cv::{self, GridSpec, ModelKind, NestedCvOptions};
use hpi_core::synth;
use hpi_core::transform::TransformKind;

fn main() -> hpi_core::Result<()> {
    let grids = if std::env::args().any(|a| a == "--reference") {
        GridSpec::default()
    } else {
        GridSpec::quick()
    };
    let ds = synth::heterogeneous_benchmark(96, 2024);
    let plan = cv::make_folds(ds.len(), 5, 5, 42)?;

    let mut models = vec![ModelKind::Mean];
    models.extend(ModelKind::REPORTED);
    for kind in TransformKind::ALL {
        let opts = NestedCvOptions::new(kind, &models, grids.clone());
        let report = cv::nested_cv(&ds, &plan, &opts, None)?;
        println!("{kind}:");
        let mut rows: Vec<_> = report.models.iter().collect();
        rows.sort_by(|a, b| a.e_transformed.total_cmp(&b.e_transformed));
        for m in rows {
            println!(
                "  {:<13} Ê (selection scale) {:.4}   Ê (original scale) {:.4}",
                m.model.name(),
                m.e_transformed,
                m.e_raw
            );
        }
    }

    // What the stack chose in the first outer fold.
    let opts = NestedCvOptions::new(TransformKind::Copula, &[ModelKind::Stacked], grids);
    let report = cv::nested_cv(&ds, &plan, &opts, None)?;
    let sel = &report.models[0].folds[0].selection;
    println!("\nfold 0 stack: meta λ = {:?}", sel.meta_alpha);
    for spec in &sel.specs {
        println!("  {spec:?}");
    }
    Ok(())
}
