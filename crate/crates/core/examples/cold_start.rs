//! Recommend never-rated items from their content alone.

use stm_rec::eval::{cold_start_protocol, ColdStartConfig};
use stm_rec::synth::{generate_planted, SynthConfig};
use stm_rec::Hyperparams;

fn main() -> stm_rec::Result<()> {
    let mut planted = generate_planted(&SynthConfig::small())?;
    planted.data.features.standardize();

    let config = ColdStartConfig {
        hyper: Hyperparams {
            k: 8,
            ..Default::default()
        },
        ..Default::default()
    };
    let report = cold_start_protocol(&planted.data, &config)?;
    println!("{} withheld items", report.unseen_items.len());
    for p in &report.points {
        println!(
            "train fraction {:.1} ({:3} items): cold-start mAPS {:.2}",
            p.train_fraction, p.n_train_items, p.report.maps
        );
    }
    Ok(())
}
