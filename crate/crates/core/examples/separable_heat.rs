//! Separable approximation of the heat-equation LQR value function: the
//! empirical A1 residual and the worst approximation error per radius.

use sepval::lqr_models::heat_model;
use sepval::riccati::SolverOptions;
use sepval::sampling::default_samples;
use sepval::valuefn::assemble;

fn main() -> sepval::Result<()> {
    let problem = heat_model(8, 1.0, 1.0)?;
    let v = problem.value_function(&SolverOptions::default())?;
    let samples = default_samples(&problem.blocks, 1.0);

    println!(" l  d    gamma_hat      max |V - Psi|   (s-1) gamma_hat");
    for l in 0..=problem.graph.diameter() {
        let approx = assemble(&v, &problem.graph, &problem.blocks, l)?;
        let res = approx.a1_residual(&samples)?;
        let report = approx.theorem_bound_report(res.max, &samples)?;
        println!(
            "{l:2} {:2}  {:.6e}  {:.6e}  {:.6e}  {}",
            approx.separability_degree(),
            res.max,
            report.max_error,
            report.bound,
            if report.satisfied { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
