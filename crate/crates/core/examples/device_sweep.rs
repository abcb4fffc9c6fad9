//! Scale the number of monitored devices and record total traffic per branch.
//!
//! cargo run --release --example device_sweep -- [data_dir] [weights_dir]

use std::path::PathBuf;

use semrobo::neural::{load_weights, MnistPaths};
use semrobo::plot::sweep_svg;
use semrobo::sim::{sweep, sweep_csv, Models};
use semrobo::world::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let weights = PathBuf::from(args.next().unwrap_or_else(|| "data/weights".into()));

    let models = Models::new(
        load_weights(&weights.join("vae.semw"))?.into_vae()?,
        load_weights(&weights.join("classifier.semw"))?.into_mlp()?,
    );
    let test = MnistPaths::in_dir(&data).load_test()?;
    let points = sweep(&ScenarioConfig::default(), &test, &models, &[5, 10, 15, 20, 30, 40])?;
    print!("{}", sweep_csv(&points));
    std::fs::write("sweep.svg", sweep_svg(&points))?;
    println!("wrote sweep.svg");
    Ok(())
}
