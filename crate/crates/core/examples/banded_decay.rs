//! Off-diagonal decay of the DARE solution for random banded dynamics and
//! its exponential fit per bandwidth. Pass a seed as the first argument.

use sepval::lqr_models::random_lqr_decay;
use sepval::riccati::SolverOptions;

fn main() -> sepval::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let bands = [1, 2, 4, 8];
    let results = random_lqr_decay(100, seed, &bands, &SolverOptions::default())?;
    println!("seed {seed}");
    println!(" r      A_fit       B_fit   B(r)/B(r/2)   DARE residual");
    let mut prev: Option<f64> = None;
    for r in &results {
        let ratio = prev.map_or(String::from("-"), |p| format!("{:.3}", r.fit.b_fit / p));
        println!(
            "{:2}  {:10.4e}  {:9.4}  {:>11}   {:.1e}",
            r.band, r.fit.a_fit, r.fit.b_fit, ratio, r.report.residual
        );
        prev = Some(r.fit.b_fit);
    }
    Ok(())
}
