//! Linear-quadratic test problems, quadratic value functions, graph-banded
//! truncation, and exponential decay fits of Riccati solutions.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::blockgraph::{BlockStructure, InterconnectionGraph};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::riccati::{solve_care, solve_dare, CareProblem, DareProblem, SolveReport, SolverOptions};
use crate::rng::SplitMix64;
use crate::valuefn::{assemble, OracleMeta, TimeMode, ValueOracle};

/// Keeps entries with `|i − j| ≤ r`, zeroes the rest.
pub fn truncate_banded(m: &Matrix, r: usize) -> Matrix {
    Matrix::from_fn(
        m.rows(),
        m.cols(),
        |i, j| if i.abs_diff(j) <= r { m[(i, j)] } else { 0.0 },
    )
}

fn check_conformal(p: &Matrix, blocks: &BlockStructure) -> Result<()> {
    if p.rows() != blocks.dim() || p.cols() != blocks.dim() {
        return Err(Error::DimensionMismatch {
            context: "matrix vs block structure",
            expected: blocks.dim(),
            actual: if p.rows() != blocks.dim() { p.rows() } else { p.cols() },
        });
    }
    Ok(())
}

/// `P^l`: block `(i, j)` kept when `dist(i, j) ≤ l`, zeroed otherwise.
pub fn truncate_graph(
    p: &Matrix,
    graph: &InterconnectionGraph,
    blocks: &BlockStructure,
    radius: usize,
) -> Result<Matrix> {
    check_conformal(p, blocks)?;
    if graph.node_count() != blocks.block_count() {
        return Err(Error::DimensionMismatch {
            context: "graph nodes vs blocks",
            expected: blocks.block_count(),
            actual: graph.node_count(),
        });
    }
    let mut out = Matrix::zeros(p.rows(), p.cols());
    for bi in 0..blocks.block_count() {
        for bj in 0..blocks.block_count() {
            if graph.dist_raw(bi, bj) <= radius {
                for r in blocks.range(bi) {
                    for c in blocks.range(bj) {
                        out[(r, c)] = p[(r, c)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `V(x) = xᵀ P x` with its block structure.
#[derive(Clone, Debug)]
pub struct QuadraticValue {
    p: Matrix,
    blocks: BlockStructure,
    meta: OracleMeta,
}

impl QuadraticValue {
    pub fn new(p: Matrix, blocks: BlockStructure) -> Result<Self> {
        check_conformal(&p, &blocks)?;
        let mut p = p;
        p.symmetrize();
        Ok(Self {
            p,
            blocks,
            meta: OracleMeta::default(),
        })
    }

    pub fn with_time_mode(mut self, mode: TimeMode) -> Self {
        self.meta.time_mode = mode;
        self
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }
}

impl ValueOracle for QuadraticValue {
    fn dim(&self) -> usize {
        self.blocks.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.p.quadratic_form(x)
    }

    fn meta(&self) -> OracleMeta {
        self.meta
    }
}

/// Worst `|Σ_j Ψ_l^j(H x) − xᵀ P^l x|` over `samples`, with the scale
/// `1 + ‖P‖∞·max‖x‖²` the deviation should be compared against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncatedFormCheck {
    pub max_deviation: f64,
    pub scale: f64,
}

impl TruncatedFormCheck {
    pub fn relative(&self) -> f64 {
        self.max_deviation / self.scale
    }
}

pub fn truncated_form_check(
    p: &Matrix,
    graph: &InterconnectionGraph,
    blocks: &BlockStructure,
    radius: usize,
    samples: &[Vec<f64>],
) -> Result<TruncatedFormCheck> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let v = QuadraticValue::new(p.clone(), blocks.clone())?;
    let truncated = truncate_graph(v.matrix(), graph, blocks, radius)?;
    let approx = assemble(&v, graph, blocks, radius)?;
    let mut max_deviation: f64 = 0.0;
    let mut max_norm_sq: f64 = 0.0;
    for x in samples {
        let sum: f64 = approx.term_values(x)?.iter().sum();
        let quad = truncated.quadratic_form(x)?;
        max_deviation = max_deviation.max((sum - quad).abs());
        max_norm_sq = max_norm_sq.max(x.iter().map(|v| v * v).sum());
    }
    Ok(TruncatedFormCheck {
        max_deviation,
        scale: 1.0 + v.matrix().norm_inf() * max_norm_sq,
    })
}

/// Time-discretization of an LQR problem.
#[derive(Clone, Debug)]
pub enum LqrDynamics {
    Discrete(DareProblem),
    Continuous(CareProblem),
}

/// An LQR problem together with its block structure and induced graph.
#[derive(Clone, Debug)]
pub struct LqrProblem {
    pub dynamics: LqrDynamics,
    pub blocks: BlockStructure,
    /// Control dimension per block.
    pub input_dims: Vec<usize>,
    pub graph: InterconnectionGraph,
}

impl LqrProblem {
    pub fn new(dynamics: LqrDynamics, blocks: BlockStructure, input_dims: Vec<usize>) -> Result<Self> {
        let graph = induce_graph(&dynamics, &blocks, &input_dims, 0.0)?;
        Ok(Self {
            dynamics,
            blocks,
            input_dims,
            graph,
        })
    }

    fn matrices(&self) -> (&Matrix, &Matrix, &Matrix, &Matrix) {
        match &self.dynamics {
            LqrDynamics::Discrete(p) => (&p.a, &p.b, &p.q, &p.r),
            LqrDynamics::Continuous(p) => (&p.a, &p.b, &p.q, &p.r),
        }
    }

    pub fn time_mode(&self) -> TimeMode {
        match self.dynamics {
            LqrDynamics::Discrete(_) => TimeMode::Discrete,
            LqrDynamics::Continuous(_) => TimeMode::Continuous,
        }
    }

    /// Solves the matching Riccati equation.
    pub fn solve(&self, opts: &SolverOptions) -> Result<(Matrix, SolveReport)> {
        match &self.dynamics {
            LqrDynamics::Discrete(p) => solve_dare(p, opts),
            LqrDynamics::Continuous(p) => solve_care(p, opts),
        }
    }

    /// Optimal value function `xᵀ P x`.
    pub fn value_function(&self, opts: &SolverOptions) -> Result<QuadraticValue> {
        let (p, _) = self.solve(opts)?;
        Ok(QuadraticValue::new(p, self.blocks.clone())?.with_time_mode(self.time_mode()))
    }

    /// Whether every block of `A`, `B`, `Q`, `R` between nodes at distance
    /// greater than one is zero.
    pub fn respects_graph(&self) -> bool {
        let (a, b, q, r) = self.matrices();
        let inputs = BlockStructure::new(self.input_dims.clone()).expect("validated");
        let s = self.blocks.block_count();
        for i in 0..s {
            for j in 0..s {
                let far = self.graph.dist(i, j).is_none_or(|d| d > 1) && self.graph.dist(j, i).is_none_or(|d| d > 1);
                if i == j || !far {
                    continue;
                }
                let nz = block_max(a, &self.blocks, &self.blocks, i, j) > 0.0
                    || block_max(b, &self.blocks, &inputs, i, j) > 0.0
                    || block_max(q, &self.blocks, &self.blocks, i, j) > 0.0
                    || block_max(r, &inputs, &inputs, i, j) > 0.0;
                if nz {
                    return false;
                }
            }
        }
        true
    }
}

fn block_max(m: &Matrix, rows: &BlockStructure, cols: &BlockStructure, i: usize, j: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for r in rows.range(i) {
        for c in cols.range(j) {
            worst = worst.max(m[(r, c)].abs());
        }
    }
    worst
}

/// Interconnection graph from block sparsity: edge `(i, j)` when block `i`
/// enters block `j`'s dynamics (`A[j,i]` or `B[j,i]` nonzero) or the two are
/// coupled in the cost (`Q[i,j]`, `R[i,j]`). Entries with magnitude at most
/// `threshold` count as zero.
pub fn induce_graph(
    dynamics: &LqrDynamics,
    blocks: &BlockStructure,
    input_dims: &[usize],
    threshold: f64,
) -> Result<InterconnectionGraph> {
    let (a, b, q, r) = match dynamics {
        LqrDynamics::Discrete(p) => (&p.a, &p.b, &p.q, &p.r),
        LqrDynamics::Continuous(p) => (&p.a, &p.b, &p.q, &p.r),
    };
    check_conformal(a, blocks)?;
    if input_dims.len() != blocks.block_count() {
        return Err(Error::DimensionMismatch {
            context: "input blocks vs state blocks",
            expected: blocks.block_count(),
            actual: input_dims.len(),
        });
    }
    let inputs = BlockStructure::new(input_dims.to_vec())?;
    if inputs.dim() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "input dims vs B columns",
            expected: b.cols(),
            actual: inputs.dim(),
        });
    }
    let s = blocks.block_count();
    let mut edges = BTreeSet::new();
    for i in 0..s {
        for j in 0..s {
            if i == j {
                continue;
            }
            let coupled = block_max(a, blocks, blocks, j, i) > threshold
                || block_max(b, blocks, &inputs, j, i) > threshold
                || block_max(q, blocks, blocks, i, j) > threshold
                || block_max(q, blocks, blocks, j, i) > threshold
                || block_max(r, &inputs, &inputs, i, j) > threshold
                || block_max(r, &inputs, &inputs, j, i) > threshold;
            if coupled {
                edges.insert((i, j));
            }
        }
    }
    InterconnectionGraph::new(s, &edges.into_iter().collect::<Vec<_>>())
}

/// Semi-discrete heat equation `ẋ = (c/dx²)·tridiag(1, −2, 1)·x + u` with
/// `Q = R = I` (continuous time, scalar blocks).
pub fn heat_model(s: usize, diffusion: f64, dx: f64) -> Result<LqrProblem> {
    if s < 2 {
        return Err(Error::InvalidParameter(format!("heat model needs s >= 2, got {s}")));
    }
    if !(diffusion > 0.0) || !(dx > 0.0) {
        return Err(Error::InvalidParameter("diffusion and dx must be positive".into()));
    }
    let k = diffusion / (dx * dx);
    let a = Matrix::from_fn(s, s, |i, j| match i.abs_diff(j) {
        0 => -2.0 * k,
        1 => k,
        _ => 0.0,
    });
    let care = CareProblem::new(a, Matrix::identity(s), Matrix::identity(s), Matrix::identity(s))?;
    LqrProblem::new(LqrDynamics::Continuous(care), BlockStructure::scalar(s)?, vec![1; s])
}

/// The `s x s` matrix of i.i.d. uniform `(0, 1)` draws, row-major from the
/// counter-based stream `seed`.
pub fn uniform_matrix(s: usize, seed: u64) -> Matrix {
    let mut rng = SplitMix64::new(seed);
    Matrix::from_fn(s, s, |_, _| rng.next_f64())
}

/// Discrete-time LQR with `A = truncate_banded(U, r)`, `U` uniform, and
/// `B = Q = R = I`.
pub fn random_lqr(s: usize, seed: u64, band: usize) -> Result<LqrProblem> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be at least 1".into()));
    }
    if band >= s {
        return Err(Error::InvalidParameter(format!("band {band} outside 0..={}", s - 1)));
    }
    let a = truncate_banded(&uniform_matrix(s, seed), band);
    let dare = DareProblem::new(a, Matrix::identity(s), Matrix::identity(s), Matrix::identity(s))?;
    LqrProblem::new(LqrDynamics::Discrete(dare), BlockStructure::scalar(s)?, vec![1; s])
}

/// `(i, |P[i, col]|)` for every row, with 1-based row indices.
pub fn column_decay(p: &Matrix, col: usize) -> Result<Vec<(usize, f64)>> {
    if col >= p.cols() {
        return Err(Error::IndexOutOfRange {
            context: "column_decay column",
            index: col,
            bound: p.cols(),
        });
    }
    Ok((0..p.rows()).map(|i| (i + 1, p[(i, col)].abs())).collect())
}

/// Values below this are treated as underflow and dropped from fits.
pub const FIT_FLOOR: f64 = 1e-300;

/// `f(j) = A·e^{B j}` fitted by least squares on `ln y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub a_fit: f64,
    pub b_fit: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
    pub used: usize,
    pub dropped: usize,
}

impl DecayFit {
    pub fn decays(&self) -> bool {
        self.b_fit < 0.0
    }

    pub fn eval(&self, j: f64) -> f64 {
        self.a_fit * (self.b_fit * j).exp()
    }
}

pub fn exp_fit(series: &[(usize, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(_, y)| y > FIT_FLOOR && y.is_finite())
        .map(|&(j, y)| (j as f64, y.ln()))
        .collect();
    let used = pts.len();
    if used < 2 {
        return Err(Error::TooFewPoints { usable: used });
    }
    let nf = used as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints { usable: 1 });
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(DecayFit {
        a_fit: intercept.exp(),
        b_fit: slope,
        residual,
        used,
        dropped: series.len() - used,
    })
}

/// One row of the bandwidth sweep.
#[derive(Clone, Debug)]
pub struct BandDecay {
    pub band: usize,
    pub series: Vec<(usize, f64)>,
    pub fit: DecayFit,
    pub report: SolveReport,
}

/// Solves the random banded DARE for each bandwidth and fits the decay of
/// the first column of `P`.
pub fn random_lqr_decay(s: usize, seed: u64, bands: &[usize], opts: &SolverOptions) -> Result<Vec<BandDecay>> {
    bands
        .iter()
        .map(|&band| {
            let prob = random_lqr(s, seed, band)?;
            let (p, report) = prob.solve(opts)?;
            let series = column_decay(&p, 0)?;
            let fit = exp_fit(&series)?;
            Ok(BandDecay {
                band,
                series,
                fit,
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_truncation() {
        let ones = Matrix::from_fn(4, 4, |_, _| 1.0);
        let tri = truncate_banded(&ones, 1);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(tri[(i, j)], if i.abs_diff(j) <= 1 { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(truncate_banded(&ones, 3), ones);
        assert_eq!(truncate_banded(&ones, 0), Matrix::identity(4));
    }

    #[test]
    fn star_truncation_drops_leaf_pairs() {
        let g = InterconnectionGraph::star(4).unwrap();
        let b = BlockStructure::scalar(4).unwrap();
        let p = Matrix::from_fn(4, 4, |i, j| 1.0 + (i * 4 + j) as f64);
        let pl = truncate_graph(&p, &g, &b, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let keep = i == j || i == 0 || j == 0;
                assert_eq!(pl[(i, j)], if keep { p[(i, j)] } else { 0.0 }, "({i},{j})");
            }
        }
        assert_eq!(truncate_graph(&p, &g, &b, 2).unwrap(), p);
    }

    #[test]
    fn exp_fit_exact_data() {
        let series: Vec<_> = (1..=20).map(|j| (j, 2.0 * (-0.5 * j as f64).exp())).collect();
        let fit = exp_fit(&series).unwrap();
        assert!((fit.a_fit - 2.0).abs() < 1e-12);
        assert!((fit.b_fit + 0.5).abs() < 1e-12);
        let flat: Vec<_> = (1..=5).map(|j| (j, 3.0)).collect();
        let fit = exp_fit(&flat).unwrap();
        assert!((fit.a_fit - 3.0).abs() < 1e-12 && fit.b_fit.abs() < 1e-15);
    }

    #[test]
    fn exp_fit_drops_nonpositive() {
        let series = vec![(1, 1.0), (2, 0.0), (3, -1.0), (4, 1e-320)];
        assert!(matches!(exp_fit(&series), Err(Error::TooFewPoints { usable: 1 })));
        let series = vec![(1, 1.0), (2, 0.0), (3, 0.25)];
        let fit = exp_fit(&series).unwrap();
        assert_eq!((fit.used, fit.dropped), (2, 1));
    }

    #[test]
    fn column_decay_of_identity() {
        let s = column_decay(&Matrix::identity(3), 0).unwrap();
        assert_eq!(s, vec![(1, 1.0), (2, 0.0), (3, 0.0)]);
        assert!(column_decay(&Matrix::identity(3), 3).is_err());
    }

    #[test]
    fn heat_model_matrices() {
        let prob = heat_model(2, 1.0, 1.0).unwrap();
        match &prob.dynamics {
            LqrDynamics::Continuous(c) => {
                assert_eq!(c.a, Matrix::from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap());
            }
            LqrDynamics::Discrete(_) => panic!("heat model is continuous"),
        }
        let prob = heat_model(5, 1.0, 1.0).unwrap();
        assert_eq!(prob.graph, InterconnectionGraph::path(5).unwrap());
        assert!(prob.respects_graph());
        assert!(heat_model(1, 1.0, 1.0).is_err());
        assert!(heat_model(3, 0.0, 1.0).is_err());
    }

    #[test]
    fn random_lqr_is_seeded_and_banded() {
        let a1 = random_lqr(6, 11, 2).unwrap();
        let a2 = random_lqr(6, 11, 2).unwrap();
        let (LqrDynamics::Discrete(p1), LqrDynamics::Discrete(p2)) = (&a1.dynamics, &a2.dynamics) else {
            panic!("random LQR is discrete");
        };
        assert_eq!(p1.a, p2.a);
        assert_eq!(p1.a[(0, 3)], 0.0);
        assert!(p1.a[(0, 2)] > 0.0);
        assert!(a1.respects_graph());
    }

    #[test]
    fn diagonal_random_lqr_decouples() {
        let prob = random_lqr(5, 3, 0).unwrap();
        let (p, _) = prob.solve(&SolverOptions::default()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(p[(i, j)], 0.0);
                }
            }
        }
    }
}
