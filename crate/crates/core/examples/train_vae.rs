//! Train the image autoencoder (20-dim latent) on MNIST and save it.
//! Takes a few minutes in release mode.
//!
//! cargo run --release --example train_vae -- [data_dir] [out.semw] [epochs]

use std::path::PathBuf;

use semrobo::neural::{save_weights, train, MnistPaths, Objective, SavedModel, TrainConfig, VaeModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "vae.semw".into()));
    let mut config = TrainConfig::vae_recipe(1);
    if let Some(e) = args.next() {
        config.epochs = e.parse()?;
    }

    let train_set = MnistPaths::in_dir(&data).load_train()?;
    let mut vae = VaeModel::standard(config.seed);
    let report = train(&mut vae, &train_set, Objective::VaeElbo { beta: 1.0 }, &config)?;
    for e in &report.history {
        println!("epoch {:>2}  loss {:8.3}  recon {:8.3}  kl {:6.3}", e.epoch, e.total, e.recon, e.kl);
    }
    save_weights(&SavedModel::Vae(vae), &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
