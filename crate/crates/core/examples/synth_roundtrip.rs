//! Generate a planted dataset, write it to disk and read it back.

use stm_rec::data::{ingest_dataset, FeatureScaling};
use stm_rec::synth::{generate_planted, write_planted, SynthConfig};

fn main() -> stm_rec::Result<()> {
    let config = SynthConfig::small();
    let planted = generate_planted(&config)?;
    let dir = std::env::temp_dir().join("stm-synth-roundtrip");
    std::fs::create_dir_all(&dir).map_err(|e| stm_rec::Error::MissingInput(e.to_string()))?;

    let paths = write_planted(&dir, &planted, true)?;
    let back = ingest_dataset(&paths, FeatureScaling::Raw)?;
    println!("wrote {}", dir.display());
    println!(
        "{} users, {} items, {} likes, {} social pairs",
        back.n_users(),
        back.n_items(),
        back.ratings.n_observed(),
        back.social.as_ref().map_or(0, |s| s.n_pairs())
    );
    println!("ratings identical: {}", back.ratings == planted.data.ratings);
    // the binary container stores single precision
    let drift = (back.features.matrix() - planted.data.features.matrix()).amax();
    println!("largest feature change {drift:.1e}");
    println!("oracle mAPS {:.2}", planted.oracle_maps);
    Ok(())
}
