//! Discrete and continuous Riccati solves with gains and closed-loop
//! stability estimates.

use sepval::linalg::Matrix;
use sepval::riccati::{
    dare_residual, feedback_gain_continuous, feedback_gain_discrete, solve_care, solve_dare, spectral_radius,
    CareProblem, DareProblem, SolverOptions,
};

fn main() -> sepval::Result<()> {
    let opts = SolverOptions::default();

    let scalar = DareProblem::new(
        Matrix::from_rows(&[vec![0.5]])?,
        Matrix::identity(1),
        Matrix::identity(1),
        Matrix::identity(1),
    )?;
    let (p, report) = solve_dare(&scalar, &opts)?;
    let k = feedback_gain_discrete(&p, &scalar)?;
    println!(
        "scalar DARE: P = {:.12}, K = {:.6}, {} doubling steps",
        p[(0, 0)],
        k[(0, 0)],
        report.iterations
    );

    let a = Matrix::from_rows(&[vec![1.1, 0.3, 0.0], vec![0.0, 0.9, 0.4], vec![0.2, 0.0, 1.05]])?;
    let b = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]])?;
    let dare = DareProblem::new(a, b, Matrix::identity(3), Matrix::identity(2))?;
    let (p, report) = solve_dare(&dare, &opts)?;
    let k = feedback_gain_discrete(&p, &dare)?;
    let acl = dare.a.sub(&dare.b.matmul(&k)?)?;
    println!(
        "3x3 DARE: residual {:.2e} (check {:.2e}), closed-loop spectral radius {:.6} ({:?})",
        report.residual,
        dare_residual(&dare, &p)?.norm_inf(),
        spectral_radius(&acl, 1e-10).value,
        report.closed_loop.method,
    );

    let care = CareProblem::new(
        Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0]])?,
        Matrix::from_rows(&[vec![0.0], vec![1.0]])?,
        Matrix::identity(2),
        Matrix::identity(1),
    )?;
    let (p, report) = solve_care(&care, &opts)?;
    let k = feedback_gain_continuous(&p, &care)?;
    println!(
        "2x2 CARE: {} sign steps, {} Newton steps, residual {:.2e}, K = [{:.6}, {:.6}], abscissa {:.6}",
        report.iterations,
        report.newton_steps,
        report.residual,
        k[(0, 0)],
        k[(0, 1)],
        report.closed_loop.value
    );
    print!("P =\n{}", p.to_text());
    Ok(())
}
