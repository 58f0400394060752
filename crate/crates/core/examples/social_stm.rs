//! Social topic model: user profiles also explain a user-user similarity graph.

use stm_rec::data::block_split;
use stm_rec::eval::maps;
use stm_rec::social::train_sostm;
use stm_rec::stm::train_stm;
use stm_rec::synth::{generate_planted, SynthConfig};
use stm_rec::Hyperparams;

fn main() -> stm_rec::Result<()> {
    let mut planted = generate_planted(&SynthConfig::small())?;
    planted.data.features.standardize();
    let data = &planted.data;
    let graph = data.social_graph().expect("planted data has links");
    println!("{} linked user pairs", graph.n_pairs());

    let masks = block_split(data, 0, 0.5, 0.5)?;
    let stm = train_stm(
        data,
        &masks,
        &Hyperparams {
            k: 8,
            ..Default::default()
        },
    )?;
    println!("STM    mAPS {:.2}", maps(&stm, data, &masks)?.maps);

    for lambda_z in [0.003, 0.03, 0.3] {
        let hyper = Hyperparams {
            k: 8,
            lambda_z,
            ..Default::default()
        };
        let sostm = train_sostm(data, &masks, &hyper)?;
        let (a, b, s) = graph.pairs().next().expect("at least one link");
        println!(
            "SoSTM  mAPS {:.2} (lambda_z {lambda_z}); link ({a},{b}) observed {s:.2}, predicted {:.2}",
            maps(&sostm, data, &masks)?.maps,
            sostm.predict_similarity(a, b)
        );
    }
    Ok(())
}
