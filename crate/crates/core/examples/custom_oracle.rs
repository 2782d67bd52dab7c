//! A non-quadratic value function supplied as a closure: coupling that
//! decays with distance on a cycle, probed through the A1 residual.

use sepval::blockgraph::{BlockStructure, InterconnectionGraph};
use sepval::sampling::default_samples;
use sepval::valuefn::{assemble, FnOracle};

fn main() -> sepval::Result<()> {
    let s = 8;
    let graph = InterconnectionGraph::cycle(s)?;
    let blocks = BlockStructure::uniform(s, 2)?;
    let v = FnOracle::new(blocks.dim(), |x: &[f64]| {
        let mut total = 0.0;
        for i in 0..x.len() {
            total += x[i].powi(4) + x[i] * x[i];
            for j in i + 1..x.len() {
                let (bi, bj) = (i / 2, j / 2);
                let d = bi.abs_diff(bj).min(8 - bi.abs_diff(bj)) as f64;
                total += 0.5 * (-2.0 * d).exp() * (x[i] * x[j]).sin();
            }
        }
        total
    });
    let samples = default_samples(&blocks, 1.0);
    for l in 0..=graph.diameter() {
        let approx = assemble(&v, &graph, &blocks, l)?;
        let res = approx.a1_residual(&samples)?;
        let report = approx.theorem_bound_report(res.max, &samples)?;
        println!(
            "l = {l}: gamma_hat {:.3e}, max error {:.3e}, oracle calls {} for {} requests",
            res.max,
            report.max_error,
            approx.oracle().oracle_calls(),
            approx.oracle().requests()
        );
    }
    Ok(())
}
