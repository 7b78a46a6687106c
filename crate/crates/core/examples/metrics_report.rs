//! Full metrics report for a noisy linear prediction, written as CSV.

use hpi_core::metrics::{self, KsReference};
use hpi_core::rng;
use rand::Rng as _;
use rand_distr::StandardNormal;

fn main() -> hpi_core::Result<()> {
    let mut r = rng::stream(3, 0);
    let y: Vec<f64> = (0..80).map(|i| 10.0 + 0.5 * i as f64).collect();
    let yhat: Vec<f64> = y
        .iter()
        .map(|v| v + r.sample::<f64, _>(StandardNormal))
        .collect();

    let report = metrics::full_report(&y, &yhat, 2, 3.0, KsReference::Fitted)?;
    metrics::write_metrics_csv(&[("noisy".to_string(), report.clone())], std::io::stdout())?;
    if !report.undefined.is_empty() {
        println!("undefined: {:?}", report.undefined);
    }

    // A perfect prediction leaves several metrics undefined.
    let perfect = metrics::full_report(&y, &y, 2, 3.0, KsReference::Fitted)?;
    println!("\nperfect fit, undefined metrics:");
    for (name, why) in &perfect.undefined {
        println!("  {name}: {why}");
    }
    Ok(())
}
