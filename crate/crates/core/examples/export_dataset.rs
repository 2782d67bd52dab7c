//! Training rows for one separable term of the heat LQR value function,
//! written as CSV plus a JSON sidecar into the directory given as argument.

use std::path::PathBuf;

use sepval::lqr_models::heat_model;
use sepval::riccati::SolverOptions;
use sepval::valuefn::{export_term_dataset, Sampler};

fn main() -> sepval::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let problem = heat_model(5, 1.0, 1.0)?;
    let v = problem.value_function(&SolverOptions::default())?;
    let nb = problem.graph.neighborhood(&problem.blocks, 1, 1)?;
    let data = export_term_dataset(&v, &problem.blocks, &nb, Sampler::UniformRandom { seed: 42 }, 500, 1.0)?;
    let (csv, meta) = data.write(&dir, "psi_j2_l1")?;
    println!("{} rows over {} inputs", data.rows.len(), nb.sub_dim);
    println!("wrote {} and {}", csv.display(), meta.display());
    Ok(())
}
