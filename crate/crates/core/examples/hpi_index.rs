//! HPI for a few hand-made samples under WHO guideline values.

use hpi_core::data::{Metal, StandardsTable};
use hpi_core::hpi;

fn main() -> hpi_core::Result<()> {
    let standards = StandardsTable::who_default();
    let samples = [
        ("clean", [0.05, 0.02, 0.002, 0.001, 0.001, 0.001]),
        (
            "at limit",
            Metal::ALL.map(|m| standards.get(m).unwrap().limit),
        ),
        ("lead spike", [0.10, 0.05, 0.010, 0.050, 0.001, 0.002]),
    ];
    println!("{:<12} {:>10}  class", "sample", "HPI");
    for (name, metals) in &samples {
        let r = hpi::hpi(metals, &standards)?;
        println!("{name:<12} {:>10.2}  {}", r.hpi, r.class.label());
    }

    let r = hpi::hpi(&samples[2].1, &standards)?;
    println!("\nsub-indices and weights for `lead spike`:");
    for (j, m) in Metal::ALL.iter().enumerate() {
        println!(
            "  {m:<3} Q = {:>9.2}  W = {:>8.3}",
            r.sub_indices[j], r.weights[j]
        );
    }
    Ok(())
}
