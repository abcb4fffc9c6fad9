//! Run the default mission under both branches and plot cumulative traffic.
//!
//! cargo run --release --example compare_branches -- [data_dir] [weights_dir] [out.svg]

use std::path::PathBuf;

use semrobo::neural::{load_weights, MnistPaths};
use semrobo::plot::comparison_svg;
use semrobo::sim::{compare, Models};
use semrobo::world::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let weights = PathBuf::from(args.next().unwrap_or_else(|| "data/weights".into()));
    let svg = PathBuf::from(args.next().unwrap_or_else(|| "cumulative.svg".into()));

    let models = Models::new(
        load_weights(&weights.join("vae.semw"))?.into_vae()?,
        load_weights(&weights.join("classifier.semw"))?.into_mlp()?,
    );
    let test = MnistPaths::in_dir(&data).load_test()?;
    let result = compare(&ScenarioConfig::default(), &test, &models)?;
    for log in [&result.semcom, &result.raw] {
        let s = log.summary();
        println!(
            "{:?}: {} bits, {} / {} devices classified",
            log.branch,
            log.total_bits(),
            s.devices_classified,
            s.n_devices
        );
    }
    println!("raw / semantic traffic ratio: {:?}", result.ratio());
    std::fs::write(&svg, comparison_svg(&result))?;
    println!("wrote {}", svg.display());
    Ok(())
}
