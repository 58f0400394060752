//! PMF, SoRec, CTR-I, STM and SoSTM on one split.

use stm_rec::baselines::FactorConfig;
use stm_rec::data::block_split;
use stm_rec::eval::maps;
use stm_rec::persist::{ModelKind, TrainedModel};
use stm_rec::synth::{generate_planted, SynthConfig};
use stm_rec::Hyperparams;

fn main() -> stm_rec::Result<()> {
    let mut planted = generate_planted(&SynthConfig::small())?;
    planted.data.features.standardize();
    let data = &planted.data;
    let masks = block_split(data, 0, 0.5, 0.5)?;
    let hyper = Hyperparams {
        k: 8,
        lambda_z: 0.003,
        ..Default::default()
    };
    let factor = FactorConfig::default();

    println!("split {}", masks.fingerprint());
    println!("{:<6} {:>7} {:>6}", "model", "mAPS", "iters");
    for kind in ModelKind::ALL {
        let model = TrainedModel::fit(kind, data, &masks, &hyper, &factor)?;
        let report = maps(&model, data, &masks)?;
        println!("{:<6} {:>7.2} {:>6}", kind.name(), report.maps, model.trace().len() - 1);
    }
    println!("{:<6} {:>7.2}", "oracle", planted.oracle_maps);
    Ok(())
}
