//! Which items load on each learned topic, and how well topics match the
//! planted ones.

use stm_rec::data::SplitMasks;
use stm_rec::eval::topic_top_items;
use stm_rec::stm::train_stm;
use stm_rec::synth::{generate_planted, SynthConfig};
use stm_rec::Hyperparams;

fn main() -> stm_rec::Result<()> {
    let config = SynthConfig {
        feature_noise: 0.01,
        ..SynthConfig::small()
    };
    let planted = generate_planted(&config)?;
    let data = &planted.data;
    let model = train_stm(
        data,
        &SplitMasks::all_train(&data.ratings),
        &Hyperparams {
            k: 8,
            ..Default::default()
        },
    )?;

    let learned = model.dictionary.atoms();
    for k in 0..learned.ncols() {
        let atom = learned.column(k);
        // closest planted topic by absolute cosine
        let (best, cos) = (0..planted.dictionary.ncols())
            .map(|t| {
                (
                    t,
                    atom.dot(&planted.dictionary.column(t)).abs() / atom.norm().max(f64::MIN_POSITIVE),
                )
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one planted topic");
        let top = topic_top_items(&model.item_profiles, k, 5)?;
        println!("topic {k}: matches planted {best} (|cos| {cos:.3}), top items {top:?}");
    }
    Ok(())
}
