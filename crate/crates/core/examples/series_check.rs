// Power-series coefficients of n, p and R in δ against numeric derivatives.

use lps::error::Result;
use lps::physics::ModelParams;
use lps::series::{expand_nr, index_sets};
use lps::validate::series_check;

pub fn run() -> Result<()> {
    let rc = ModelParams::unit().recombination;
    let s = expand_nr(&[0.3, 0.1, -0.2, 0.05], &[0.0, 0.4, 0.1, 0.0], &[0.2, -0.1, 0.0, 0.3], &rc)?;
    println!("n = {:?}", s.n);
    println!("p = {:?}", s.p);
    println!("R = {:?}", s.big_r);
    for k in 1..=4 {
        println!("partitions of {k}: {}", index_sets(k)?.len());
    }

    let check = series_check(&rc, 7, 5)?;
    for row in check.rows.iter().filter(|r| r.order == 3) {
        println!("{row}");
    }
    println!("worst relative error {:.2e}", check.worst);
    assert!(check.pass());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
