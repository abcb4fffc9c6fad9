//! Walk a robot away from the server and tabulate the radio link.
//!
//! cargo run --example link_budget

use semrobo::channel::{link_report, transmit, RadioParams};
use semrobo::geometry::Vec2;
use semrobo::semcom::{RAW_BITS, SEMCOM_BITS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = RadioParams::default();
    println!("noise floor {:.1} dBm over {} MHz", params.noise_dbm(), params.bandwidth_hz / 1e6);
    println!(
        "{:>9} {:>9} {:>8} {:>4} {:>10} {:>7} {:>5}",
        "dist (m)", "PL (dB)", "SINR", "CQI", "rate Mb/s", "SemCom", "Raw"
    );
    for d in [1.0, 10.0, 50.0, 100.0, 500.0, 2_000.0, 10_000.0] {
        let pos = Vec2::new(params.server_pos.x + d, params.server_pos.y);
        let link = link_report(&params, pos)?;
        let ok = |bits| if transmit(&link, bits, 1.0).delivered { "yes" } else { "no" };
        println!(
            "{:>9.0} {:>9.2} {:>8.2} {:>4} {:>10.2} {:>7} {:>5}",
            d,
            link.path_loss_db,
            link.sinr_db,
            link.cqi,
            link.rate_bps / 1e6,
            ok(SEMCOM_BITS),
            ok(RAW_BITS)
        );
    }
    Ok(())
}
