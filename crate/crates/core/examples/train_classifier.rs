//! Train the digit classifier on MNIST and save it.
//!
//! cargo run --release --example train_classifier -- [data_dir] [out.semw]

use std::path::PathBuf;

use semrobo::neural::{
    evaluate_accuracy, save_weights, train, MlpModel, MnistPaths, Objective, SavedModel, TrainConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "classifier.semw".into()));

    let paths = MnistPaths::in_dir(&data);
    let (train_set, test_set) = (paths.load_train()?, paths.load_test()?);
    let config = TrainConfig::classifier_recipe(1);
    let mut model = MlpModel::classifier(config.seed);
    let report = train(&mut model, &train_set, Objective::SoftmaxCrossEntropy, &config)?;
    for e in &report.history {
        println!("epoch {:>2}  loss {:.4}", e.epoch, e.total);
    }
    println!("test accuracy {:.4}", evaluate_accuracy(&model, &test_set));
    save_weights(&SavedModel::Mlp(model), &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
