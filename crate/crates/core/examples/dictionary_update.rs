//! Fit a unit-norm dictionary to fixed codes and inspect the constraint duals.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stm_rec::dictionary::update_dictionary;

fn main() -> stm_rec::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (d, k, m) = (12, 6, 40);
    let x = DMatrix::from_fn(d, m, |_, _| rng.random_range(-3.0..3.0));
    let v = DMatrix::from_fn(k, m, |_, _| {
        if rng.random_bool(0.3) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });

    let dict = update_dictionary(&x, &v, None)?;
    println!("reconstruction error {:.4}", dict.reconstruction_error(&x, &v));
    println!("complementary slackness {:.2e}", dict.complementary_slackness());
    for (k, (atom, dual)) in dict.atoms().column_iter().zip(dict.duals().iter()).enumerate() {
        let state = if *dual > 0.0 {
            "on the sphere"
        } else {
            "inside the ball"
        };
        println!("atom {k}: norm {:.6}, dual {dual:.4} ({state})", atom.norm());
    }
    Ok(())
}
