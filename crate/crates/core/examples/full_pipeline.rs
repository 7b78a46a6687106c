//! Runs every CLI command in order on a synthetic bundle, as `hpi` would.
//!
//! Equivalent shell session:
//!
//! ```text
//! hpi synth --out data
//! hpi --config data/config.toml describe
//! hpi --config data/config.toml train
//! ...
//! ```

use hpi_core::cli::{self, GridChoice, RunConfig};

fn main() {
    let dir = std::env::temp_dir().join(format!("hpi_pipeline_{}", std::process::id()));
    let config = cli::write_synthetic_bundle(&dir, 42, 96, 200).expect("bundle");

    // Quick grids and a coarse map keep this to a few seconds.
    let mut c = RunConfig::from_toml_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    c.grid = GridChoice::Quick;
    c.map.nx = 60;
    c.map.ny = 60;
    std::fs::write(&config, c.to_toml_string()).unwrap();

    let config = config.to_str().unwrap();
    for cmd in [
        "describe",
        "correlate",
        "hpi",
        "cluster",
        "train",
        "evaluate",
        "map",
    ] {
        print!("{cmd:<10} -> ");
        let code = cli::run(["hpi", "--config", config, cmd]);
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("outputs in {}", dir.join("out").display());
}
