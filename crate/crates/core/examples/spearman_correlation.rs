//! Spearman correlations between metals with t and permutation p-values.

use hpi_core::{rank, synth};

fn main() -> hpi_core::Result<()> {
    let table = synth::synthetic_basin(42)?;
    let report = rank::correlation_matrix(&table, 2000, 7)?;
    print!("{:>4}", "");
    for m in &report.metals {
        print!("{:>8}", m.symbol());
    }
    println!();
    for (i, m) in report.metals.iter().enumerate() {
        print!("{:>4}", m.symbol());
        for j in 0..report.metals.len() {
            let star = if report.significant[i][j] && i != j {
                "*"
            } else {
                " "
            };
            print!("{:>7.3}{star}", report.rho[i][j]);
        }
        println!();
    }
    println!("* permutation p < {} (B = {})", rank::ALPHA, report.b);

    // Small samples can use the exact permutation distribution.
    let x = [1.0, 2.0, 2.0, 4.0, 5.0, 6.0];
    let y = [1.5, 1.0, 3.0, 3.5, 6.0, 5.0];
    let exact = rank::spearman_perm_pvalue(&x, &y, 0, 0, rank::PermMode::Exact)?;
    println!(
        "\nrho = {:.4}, exact p = {:.4}",
        rank::spearman(&x, &y)?,
        exact.p
    );
    Ok(())
}
