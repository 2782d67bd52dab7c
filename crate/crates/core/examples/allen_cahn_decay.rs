//! Decay of the first column of the frozen-state SDRE solution `P(y0)` for
//! the Allen–Cahn model at several viscosities.

use sepval::riccati::SolverOptions;
use sepval::sdre::{frozen_decay_study, DECAY_SIGMAS};

fn main() -> sepval::Result<()> {
    let study = frozen_decay_study(100, &DECAY_SIGMAS, &SolverOptions::default())?;
    println!(" sigma      A_fit        B_fit      |P[1,1]|    |P[10,1]|");
    for d in &study {
        println!(
            "{:6.0e}  {:10.4e}  {:10.4}  {:10.4e}  {:10.4e}",
            d.sigma, d.fit.a_fit, d.fit.b_fit, d.series[0].1, d.series[9].1
        );
    }
    Ok(())
}
