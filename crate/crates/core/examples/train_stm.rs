//! Train a sparse topic model on planted data and report held-out mAPS.

use stm_rec::data::block_split;
use stm_rec::eval::{maps, profile_sparsity, SPARSITY_EPS};
use stm_rec::stm::train_stm;
use stm_rec::synth::{generate_planted, SynthConfig};
use stm_rec::Hyperparams;

fn main() -> stm_rec::Result<()> {
    let mut planted = generate_planted(&SynthConfig::small())?;
    planted.data.features.standardize();
    let data = &planted.data;

    let masks = block_split(data, 0, 0.5, 0.5)?;
    let hyper = Hyperparams {
        k: 8,
        ..Default::default()
    };
    let model = train_stm(data, &masks, &hyper)?;

    println!("objective by sweep:");
    for (i, v) in model.objective_trace.iter().enumerate() {
        println!("  {i:2}  {v:.4}");
    }
    let report = maps(&model, data, &masks)?;
    println!(
        "held-out mAPS {:.2} over {} users (oracle {:.2})",
        report.maps, report.n_evaluated_users, planted.oracle_maps
    );
    println!(
        "profile density: users {:.3}, items {:.3}",
        profile_sparsity(&model.user_profiles, SPARSITY_EPS),
        profile_sparsity(&model.item_profiles, SPARSITY_EPS)
    );
    let top = model.recommend_top(masks.test_users()[0], masks.test_items(), 5);
    println!("top test items for user {}: {top:?}", masks.test_users()[0]);
    Ok(())
}
