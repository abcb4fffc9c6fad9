//! Push one test digit through both payload branches and compare what the
//! server sees.
//!
//! cargo run --release --example semantic_payload -- [data_dir] [weights_dir] [index]

use std::path::PathBuf;

use semrobo::neural::{load_weights, MnistPaths, IMAGE_SIDE};
use semrobo::semcom::{decode_payload, make_payload, PayloadKind, QuantSpec};
use semrobo::server::classify;

fn ascii(image: &[f64]) -> Vec<String> {
    const RAMP: &[u8] = b" .:-=+*#%@";
    image
        .chunks(IMAGE_SIDE)
        .map(|row| row.iter().map(|&p| RAMP[((p * 9.0).round() as usize).min(9)] as char).collect())
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let weights = PathBuf::from(args.next().unwrap_or_else(|| "data/weights".into()));
    let index: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let test = MnistPaths::in_dir(&data).load_test()?;
    let vae = load_weights(&weights.join("vae.semw"))?.into_vae()?;
    let classifier = load_weights(&weights.join("classifier.semw"))?.into_mlp()?;
    let spec = QuantSpec::default();
    let image = test.image(index).to_vec();
    println!("true digit {}", test.label(index));

    let mut columns = Vec::new();
    for kind in [PayloadKind::Raw, PayloadKind::SemCom] {
        let payload = make_payload(kind, 0, 0, &image, &vae, &spec)?;
        let wire = payload.to_wire();
        let received = semrobo::semcom::Payload::from_wire(&wire)?;
        let rebuilt = decode_payload(&received, &vae, &spec)?;
        let c = classify(&classifier, &rebuilt)?;
        println!("{kind:?}: {} payload bits, predicted {} ({:?})", payload.bit_count(), c.digit, c.status);
        columns.push(ascii(&rebuilt));
    }
    for (a, b) in columns[0].iter().zip(&columns[1]) {
        println!("{a}  |  {b}");
    }
    Ok(())
}
