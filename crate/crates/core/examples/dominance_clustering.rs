//! DBSCAN on standardised concentrations and the dominant metal of each
//! cluster.

use hpi_core::cluster::{self, DbscanParams};
use hpi_core::synth;

fn main() -> hpi_core::Result<()> {
    let basin = synth::synthetic_basin(42)?;
    for eps in [0.5, 1.0, 1.5] {
        let res = cluster::dominance(
            &basin,
            DbscanParams {
                eps,
                min_samples: 5,
            },
            None,
        )?;
        println!(
            "basin, eps {eps}: {} clusters, {} noise points",
            res.n_clusters(),
            res.n_noise()
        );
        for p in &res.profiles {
            let tie = if p.tie { " (tie)" } else { "" };
            println!(
                "  label {:>2}  size {:>3}  dominant {}{tie}",
                p.label, p.size, p.dominant
            );
        }
    }

    let fixture = synth::fe_dominant_fixture(1)?;
    let res = cluster::dominance(&fixture, DbscanParams::default(), None)?;
    println!("\nFe-heavy fixture centroids (mg/L):");
    res.write_centroids_csv(std::io::stdout())?;
    Ok(())
}
