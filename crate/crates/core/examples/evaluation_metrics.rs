//! Percentile scores on hand-made rankings.

use stm_rec::eval::{aps, average_ranks, percentile_curve};

fn main() -> stm_rec::Result<()> {
    let scores = [0.9, 0.1, 0.5, 0.5];
    println!("scores {scores:?}");
    println!("ranks  {:?}", average_ranks(&scores));
    println!("APS liking item 0: {}", aps(&scores, &[0])?);
    println!("APS liking items 2 and 3: {}", aps(&scores, &[2, 3])?);
    println!("APS liking everything: {}", aps(&scores, &[0, 1, 2, 3])?);

    let curve = percentile_curve(&[5.0, 12.5, 30.0, 80.0]);
    for g in [5, 10, 25, 50, 100] {
        println!(
            "share of likes within top {g:3}%: {:.2}",
            curve[g - 1].cumulative_fraction
        );
    }
    Ok(())
}
