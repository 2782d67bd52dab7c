//! Finite-difference sensitivities of the heat LQR value function grouped
//! by graph distance, next to the analytic values `2 max |P[i,j]|`.

use sepval::lqr_models::heat_model;
use sepval::riccati::SolverOptions;
use sepval::sampling::lattice;
use sepval::valuefn::sensitivity_profile;

fn main() -> sepval::Result<()> {
    let problem = heat_model(10, 1.0, 1.0)?;
    let v = problem.value_function(&SolverOptions::default())?;
    let p = v.matrix();
    let samples = lattice(10, 20, 1.0);
    let profile = sensitivity_profile(&v, &problem.graph, &problem.blocks, &samples, None)?;
    println!("dist   max |delta_ij|   2 max |P[i,j]| max|x_j|");
    for (d, m) in profile.per_distance() {
        let analytic = (0..10)
            .flat_map(|i: usize| (0..10usize).map(move |j| (i, j)))
            .filter(|&(i, j)| i.abs_diff(j) == d)
            .map(|(i, j)| 2.0 * p[(i, j)].abs() * samples.iter().fold(0.0_f64, |acc, x| acc.max(x[j].abs())))
            .fold(0.0, f64::max);
        println!("{d:4}   {m:.6e}     {analytic:.6e}");
    }
    Ok(())
}
