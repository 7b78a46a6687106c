//! Compares raw, log and Gaussian-copula scales of a skewed response by the
//! normal QQ-plot R².

use hpi_core::data::StandardsTable;
use hpi_core::transform::{normality_of, TransformKind};
use hpi_core::{hpi, synth};

fn main() -> hpi_core::Result<()> {
    let table = synth::synthetic_basin(42)?;
    let y = hpi::hpi_column(&table, &StandardsTable::who_default())?;
    for kind in TransformKind::ALL {
        let d = normality_of(kind, &y)?;
        println!("{:<7} QQ R² = {:.4}", kind.name(), d.r2);
    }

    let t = TransformKind::Copula.fit(&y)?;
    let z = t.forward(&y)?;
    let back = t.inverse(&z);
    let worst = y
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("round-trip error {worst:.2e}");
    // Values outside the training range are extrapolated linearly.
    for v in [
        0.5 * y.iter().cloned().fold(f64::INFINITY, f64::min),
        2.0 * y.iter().cloned().fold(0.0, f64::max),
    ] {
        println!("z({v:.2}) = {:.3}", t.forward_one(v)?);
    }
    Ok(())
}
