//! Algebraic Riccati solvers built only from products and inverses.
//!
//! - DARE `AᵀPA − P − AᵀPB(BᵀPB + R)⁻¹BᵀPA + Q = 0` by structure-preserving
//!   doubling.
//! - CARE `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` by the matrix sign function of the
//!   Hamiltonian with determinant scaling, followed by Newton–Kleinman
//!   refinement.
//!
//! Both return the stabilizing solution together with a [`SolveReport`]
//! carrying the defining-equation residual and a closed-loop stability
//! estimate.

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue_symmetric, Matrix};

/// Iteration controls shared by both solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    /// Cap on doubling or sign iterations.
    pub max_iter: usize,
    /// Cap on Newton–Kleinman refinement steps.
    pub newton_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            newton_max_iter: 50,
        }
    }
}

fn check_square(m: &Matrix, n: usize, what: &'static str) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: n,
            actual: if m.rows() != n { m.rows() } else { m.cols() },
        });
    }
    Ok(())
}

/// Shared validation of `(A, B, Q, R)`.
fn validate(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<()> {
    let n = a.rows();
    check_square(a, n, "A must be n x n")?;
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "B must have n rows",
            expected: n,
            actual: b.rows(),
        });
    }
    check_square(q, n, "Q must be n x n")?;
    check_square(r, b.cols(), "R must be m x m")?;
    for (m, name) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R")] {
        if !m.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
        }
    }
    let qn = q.norm_inf();
    if q.asymmetry() > 1e-12 * qn.max(f64::MIN_POSITIVE) && q.asymmetry() > 0.0 {
        return Err(Error::InvalidParameter("Q is not symmetric".into()));
    }
    if qn > 0.0 && min_eigenvalue_symmetric(&q.scale(1.0 / qn)) < -1e-10 {
        return Err(Error::InvalidParameter("Q is not positive semidefinite".into()));
    }
    if r.asymmetry() > 1e-12 * r.norm_inf() {
        return Err(Error::InvalidParameter("R is not symmetric".into()));
    }
    r.cholesky()
        .map_err(|_| Error::InvalidParameter("R is not positive definite".into()))?;
    Ok(())
}

/// Discrete-time LQR data `x⁺ = Ax + Bu`, stage cost `xᵀQx + uᵀRu`.
#[derive(Clone, Debug)]
pub struct DareProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl DareProblem {
    pub fn new(a: Matrix, b: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        validate(&a, &b, &q, &r)?;
        Ok(Self { a, b, q, r })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
}

/// Continuous-time LQR data `ẋ = Ax + Bu`, running cost `xᵀQx + uᵀRu`.
#[derive(Clone, Debug)]
pub struct CareProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl CareProblem {
    pub fn new(a: Matrix, b: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        validate(&a, &b, &q, &r)?;
        Ok(Self { a, b, q, r })
    }

    /// The scalar-weight form `Q = γI`, `R = γI` used by the SDRE.
    pub fn with_scalar_weight(a: Matrix, b: Matrix, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("weight must be positive, got {gamma}")));
        }
        let n = a.rows();
        let m = b.cols();
        Self::new(
            a,
            b,
            Matrix::scaled_identity(n, gamma),
            Matrix::scaled_identity(m, gamma),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }
}

/// Which closed-loop stability measure a report carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityMeasure {
    /// Spectral radius of `A − BK` (discrete time; stable when `< 1`).
    SpectralRadius,
    /// Spectral abscissa of `A − BK` (continuous time; stable when `< 0`).
    SpectralAbscissa,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    pub newton_steps: usize,
    /// `‖Res(P)‖∞ / (1 + ‖P‖∞)`.
    pub residual: f64,
    pub converged: bool,
    pub measure: StabilityMeasure,
    pub closed_loop: SpectralEstimate,
    /// Set when the sign iteration broke down and the solver went through
    /// the regularized Newton path.
    pub regularized: bool,
}

impl SolveReport {
    pub fn is_stabilizing(&self) -> bool {
        match self.measure {
            StabilityMeasure::SpectralRadius => self.closed_loop.value < 1.0,
            StabilityMeasure::SpectralAbscissa => self.closed_loop.value < 0.0,
        }
    }
}

/// Residual matrix of the DARE at `p`.
pub fn dare_residual(problem: &DareProblem, p: &Matrix) -> Result<Matrix> {
    let DareProblem { a, b, q, r } = problem;
    let pa = p.matmul(a)?;
    let atpa = a.transpose().mul_unchecked(&pa);
    let btpa = b.transpose().mul_unchecked(&pa);
    let btpb = b.transpose().mul_unchecked(&p.mul_unchecked(b));
    let s = btpb.add(r)?;
    let corr = btpa.transpose().mul_unchecked(&s.solve(&btpa)?);
    atpa.sub(p)?.sub(&corr)?.add(q)
}

/// Residual matrix of the CARE at `p`.
pub fn care_residual(problem: &CareProblem, p: &Matrix) -> Result<Matrix> {
    let g = gain_matrix(&problem.b, &problem.r)?;
    care_residual_with_g(&problem.a, &g, &problem.q, p)
}

fn care_residual_with_g(a: &Matrix, g: &Matrix, q: &Matrix, p: &Matrix) -> Result<Matrix> {
    let pa = p.matmul(a)?;
    let pgp = p.mul_unchecked(g).mul_unchecked(p);
    pa.transpose().add(&pa)?.sub(&pgp)?.add(q)
}

fn relative(res: &Matrix, p: &Matrix) -> f64 {
    res.norm_inf() / (1.0 + p.norm_inf())
}

/// `G = B R⁻¹ Bᵀ`, symmetrized.
fn gain_matrix(b: &Matrix, r: &Matrix) -> Result<Matrix> {
    let rinv_bt = r.cholesky()?.solve_matrix(&b.transpose())?;
    let mut g = b.matmul(&rinv_bt)?;
    g.symmetrize();
    Ok(g)
}

/// Stabilizing DARE solution by structure-preserving doubling.
pub fn solve_dare(problem: &DareProblem, opts: &SolverOptions) -> Result<(Matrix, SolveReport)> {
    let n = problem.state_dim();
    let mut ak = problem.a.clone();
    let mut gk = gain_matrix(&problem.b, &problem.r)?;
    let mut hk = problem.q.clone();
    let ident = Matrix::identity(n);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        let w = ident.add(&gk.mul_unchecked(&hk))?;
        let lu = w.lu()?;
        // W⁻¹A and W⁻¹G are all the doubling step needs.
        let winv_a = lu.solve_matrix(&ak)?;
        let winv_g = lu.solve_matrix(&gk)?;
        let akt = ak.transpose();
        let a_next = ak.mul_unchecked(&winv_a);
        let mut g_next = gk.add(&ak.mul_unchecked(&winv_g).mul_unchecked(&akt))?;
        let mut h_next = hk.add(&akt.mul_unchecked(&hk).mul_unchecked(&winv_a))?;
        g_next.symmetrize();
        h_next.symmetrize();
        if !h_next.is_finite() || !a_next.is_finite() {
            return Err(Error::NotConverged {
                solver: "DARE doubling",
                iterations,
                residual: f64::INFINITY,
            });
        }
        last_change = h_next.sub(&hk)?.norm_inf() / (1.0 + h_next.norm_inf());
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if last_change <= opts.tol * 1e-3 || ak.max_abs() == 0.0 {
            break;
        }
    }
    let mut p = hk;
    p.symmetrize();
    let residual = relative(&dare_residual(problem, &p)?, &p);
    let converged = residual <= opts.tol && last_change.is_finite();
    if !converged {
        return Err(Error::NotConverged {
            solver: "DARE doubling",
            iterations,
            residual,
        });
    }
    let k = feedback_gain_discrete(&p, problem)?;
    let acl = problem.a.sub(&problem.b.mul_unchecked(&k))?;
    let closed_loop = spectral_radius(&acl, 1e-8);
    Ok((
        p,
        SolveReport {
            iterations,
            newton_steps: 0,
            residual,
            converged,
            measure: StabilityMeasure::SpectralRadius,
            closed_loop,
            regularized: false,
        },
    ))
}

/// Matrix sign function with determinant scaling. Returns the number of
/// iterations used.
fn matrix_sign(h: &Matrix, opts: &SolverOptions) -> Result<(Matrix, usize)> {
    let dim = h.rows() as f64;
    let mut z = h.clone();
    let mut scaling = true;
    for it in 1..=opts.max_iter {
        let lu = z.lu().map_err(|_| Error::SignBreakdown { iteration: it })?;
        let zinv = lu.inverse().map_err(|_| Error::SignBreakdown { iteration: it })?;
        let c = if scaling { (lu.log_abs_det() / dim).exp() } else { 1.0 };
        if !c.is_finite() || c == 0.0 {
            return Err(Error::SignBreakdown { iteration: it });
        }
        let next = z.scale(0.5 / c).add(&zinv.scale(0.5 * c))?;
        if !next.is_finite() {
            return Err(Error::SignBreakdown { iteration: it });
        }
        let change = next.sub(&z)?.norm_one() / next.norm_one();
        z = next;
        if change < 1e-2 {
            scaling = false;
        }
        if change <= 1e-13 * dim.sqrt() {
            return Ok((z, it));
        }
    }
    Err(Error::NotConverged {
        solver: "Hamiltonian sign iteration",
        iterations: opts.max_iter,
        residual: f64::NAN,
    })
}

/// Solves `FᵀX + XF + C = 0` for Hurwitz `F` by the sign iteration on `F`.
pub fn solve_lyapunov(f: &Matrix, c: &Matrix, opts: &SolverOptions) -> Result<Matrix> {
    let n = f.rows();
    check_square(f, n, "Lyapunov F must be square")?;
    check_square(c, n, "Lyapunov C must match F")?;
    let mut fk = f.clone();
    let mut ck = c.clone();
    let dim = n as f64;
    let mut scaling = true;
    for _ in 0..opts.max_iter {
        let lu = fk.lu()?;
        let finv = lu.inverse()?;
        let s = if scaling { (lu.log_abs_det() / dim).exp() } else { 1.0 };
        let f_next = fk.scale(0.5 / s).add(&finv.scale(0.5 * s))?;
        let mut c_next = ck
            .scale(0.5 / s)
            .add(&finv.transpose().mul_unchecked(&ck).mul_unchecked(&finv).scale(0.5 * s))?;
        c_next.symmetrize();
        let change = f_next.sub(&fk)?.norm_one() / f_next.norm_one();
        fk = f_next;
        ck = c_next;
        if change < 1e-2 {
            scaling = false;
        }
        if change <= 1e-13 * dim.sqrt() {
            // F must have reached −I, otherwise it was not Hurwitz.
            let off = fk.add(&Matrix::identity(n))?.max_abs();
            if off > 1e-6 {
                return Err(Error::InvalidParameter("Lyapunov operator F is not Hurwitz".into()));
            }
            return Ok(ck.scale(0.5));
        }
    }
    Err(Error::NotConverged {
        solver: "Lyapunov sign iteration",
        iterations: opts.max_iter,
        residual: f64::NAN,
    })
}

/// Stable-subspace extraction: solve `[W12; W22 + I] P = −[W11 + I; W21]`
/// in the least-squares sense.
fn riccati_from_sign(w: &Matrix, n: usize) -> Result<Matrix> {
    let mut lhs = Matrix::zeros(2 * n, n);
    let mut rhs = Matrix::zeros(2 * n, n);
    for i in 0..n {
        for j in 0..n {
            lhs[(i, j)] = w[(i, n + j)];
            lhs[(n + i, j)] = w[(n + i, n + j)] + if i == j { 1.0 } else { 0.0 };
            rhs[(i, j)] = -(w[(i, j)] + if i == j { 1.0 } else { 0.0 });
            rhs[(n + i, j)] = -w[(n + i, j)];
        }
    }
    let lt = lhs.transpose();
    let normal = lt.mul_unchecked(&lhs);
    let mut p = normal.solve(&lt.mul_unchecked(&rhs))?;
    p.symmetrize();
    Ok(p)
}

fn hamiltonian(a: &Matrix, g: &Matrix, q: &Matrix) -> Matrix {
    let n = a.rows();
    let mut h = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = a[(i, j)];
            h[(i, n + j)] = -g[(i, j)];
            h[(n + i, j)] = -q[(i, j)];
            h[(n + i, n + j)] = -a[(j, i)];
        }
    }
    h
}

/// Newton–Kleinman refinement starting from a stabilizing `p`. Returns the
/// number of steps taken.
fn newton_kleinman(
    a: &Matrix,
    g: &Matrix,
    q: &Matrix,
    p: &mut Matrix,
    opts: &SolverOptions,
    max_steps: usize,
) -> Result<usize> {
    let mut steps = 0;
    while steps < max_steps {
        let res = care_residual_with_g(a, g, q, p)?;
        let rel = relative(&res, p);
        if rel <= opts.tol * 1e-2 {
            break;
        }
        let acl = a.sub(&g.mul_unchecked(p))?;
        let delta = solve_lyapunov(&acl, &res, opts)?;
        *p = p.add(&delta)?;
        p.symmetrize();
        steps += 1;
        if delta.norm_inf() <= opts.tol * (1.0 + p.norm_inf()) && rel <= opts.tol {
            break;
        }
    }
    Ok(steps)
}

/// Stabilizing CARE solution.
///
/// A singular sign iterate (Hamiltonian eigenvalues on the imaginary axis)
/// switches to a regularized route: solve with `Q + εI`, then refine on the
/// original equation by Newton–Kleinman. The report flags this.
pub fn solve_care(problem: &CareProblem, opts: &SolverOptions) -> Result<(Matrix, SolveReport)> {
    let n = problem.state_dim();
    let CareProblem { a, q, .. } = problem;
    let g = gain_matrix(&problem.b, &problem.r)?;

    let (mut p, iterations, regularized) = match matrix_sign(&hamiltonian(a, &g, q), opts) {
        Ok((w, it)) => (riccati_from_sign(&w, n)?, it, false),
        Err(Error::SignBreakdown { .. }) => {
            let eps = 1e-8 * q.norm_inf().max(1.0);
            let q_reg = q.add(&Matrix::scaled_identity(n, eps))?;
            let (w, it) = matrix_sign(&hamiltonian(a, &g, &q_reg), opts)?;
            (riccati_from_sign(&w, n)?, it, true)
        }
        Err(e) => return Err(e),
    };

    let mut newton_steps = 0;
    let rel = relative(&care_residual_with_g(a, &g, q, &p)?, &p);
    if rel > opts.tol * 1e-2 || regularized {
        newton_steps = newton_kleinman(a, &g, q, &mut p, opts, opts.newton_max_iter)?;
    }
    let residual = relative(&care_residual_with_g(a, &g, q, &p)?, &p);
    let converged = residual <= opts.tol;
    if !converged {
        return Err(Error::NotConverged {
            solver: "CARE sign/Newton",
            iterations: iterations + newton_steps,
            residual,
        });
    }
    let acl = a.sub(&g.mul_unchecked(&p))?;
    let closed_loop = spectral_abscissa(&acl, 1e-8);
    Ok((
        p,
        SolveReport {
            iterations,
            newton_steps,
            residual,
            converged,
            measure: StabilityMeasure::SpectralAbscissa,
            closed_loop,
            regularized,
        },
    ))
}

/// `K = (BᵀPB + R)⁻¹ BᵀPA`.
pub fn feedback_gain_discrete(p: &Matrix, problem: &DareProblem) -> Result<Matrix> {
    let n = problem.state_dim();
    check_square(p, n, "P must be n x n")?;
    let bt = problem.b.transpose();
    let btp = bt.mul_unchecked(p);
    let s = btp.mul_unchecked(&problem.b).add(&problem.r)?;
    let chol = s.cholesky()?;
    chol.solve_matrix(&btp.mul_unchecked(&problem.a))
}

/// `K = R⁻¹ BᵀP`.
pub fn feedback_gain_continuous(p: &Matrix, problem: &CareProblem) -> Result<Matrix> {
    let n = problem.state_dim();
    check_square(p, n, "P must be n x n")?;
    problem
        .r
        .cholesky()?
        .solve_matrix(&problem.b.transpose().mul_unchecked(p))
}

/// How a spectral estimate was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMethod {
    /// Power iteration converged to a dominant eigenvalue modulus.
    PowerIteration,
    /// Power iteration stalled; `‖M^k‖^{1/k}` with `k = 2^j` by repeated
    /// squaring was used instead, capped by the Gershgorin bound.
    Gelfand,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub method: SpectralMethod,
}

impl SpectralEstimate {
    /// True when the power iteration converged; the fallback is flagged.
    pub fn converged(&self) -> bool {
        self.method != SpectralMethod::Gelfand
    }
}

fn gershgorin_radius(m: &Matrix) -> f64 {
    m.norm_inf().min(m.norm_one())
}

/// Spectral radius estimate.
///
/// Power iteration from deterministic starts, restarted from two shifted
/// start vectors when it stalls. If none converge (complex or tied dominant
/// eigenvalues) the Gelfand limit `‖M^k‖^{1/k}` is returned, flagged.
pub fn spectral_radius(m: &Matrix, tol: f64) -> SpectralEstimate {
    let n = m.rows();
    if n == 0 || m.max_abs() == 0.0 {
        return SpectralEstimate {
            value: 0.0,
            method: SpectralMethod::Exact,
        };
    }
    let starts: [Box<dyn Fn(usize) -> f64>; 3] = [
        Box::new(|i| 1.0 + i as f64 / n as f64),
        Box::new(|i| if i % 2 == 0 { 1.0 } else { -0.5 }),
        Box::new(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5),
    ];
    for start in &starts {
        let mut v: Vec<f64> = (0..n).map(start).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let mut prev = f64::NAN;
        let mut stable = 0;
        for _ in 0..2000 {
            let w = m.matvec(&v).expect("square");
            let lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if lambda == 0.0 {
                return SpectralEstimate {
                    value: 0.0,
                    method: SpectralMethod::PowerIteration,
                };
            }
            let w: Vec<f64> = w.into_iter().map(|x| x / lambda).collect();
            // Direction must settle too (up to sign); a rotating iterate
            // means no single dominant eigenvalue.
            let (mut same, mut flip) = (0.0, 0.0);
            for (a, b) in w.iter().zip(&v) {
                same += (a - b) * (a - b);
                flip += (a + b) * (a + b);
            }
            let drift = same.min(flip).sqrt();
            v = w;
            if (lambda - prev).abs() <= tol * lambda && drift <= tol.sqrt() {
                stable += 1;
                if stable >= 3 {
                    return SpectralEstimate {
                        value: lambda,
                        method: SpectralMethod::PowerIteration,
                    };
                }
            } else {
                stable = 0;
            }
            prev = lambda;
        }
    }
    SpectralEstimate {
        value: gelfand_radius(m).min(gershgorin_radius(m)),
        method: SpectralMethod::Gelfand,
    }
}

fn gelfand_radius(m: &Matrix) -> f64 {
    let norm0 = m.norm_inf();
    let mut log_scale = norm0.ln();
    let mut nk = m.scale(1.0 / norm0);
    let mut power = 1.0_f64;
    for _ in 0..40 {
        let sq = nk.mul_unchecked(&nk);
        let s = sq.norm_inf();
        if s == 0.0 {
            return 0.0;
        }
        log_scale = 2.0 * log_scale + s.ln();
        power *= 2.0;
        nk = sq.scale(1.0 / s);
    }
    (log_scale / power).exp()
}

/// Matrix exponential by scaling and squaring with a Taylor core.
fn expm(m: &Matrix) -> Matrix {
    let n = m.rows();
    let norm = m.norm_inf();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let a = m.scale(1.0 / 2f64.powi(squarings as i32));
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..=20 {
        term = term.mul_unchecked(&a).scale(1.0 / k as f64);
        sum = sum.add(&term).expect("square");
        if term.max_abs() <= f64::EPSILON * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.mul_unchecked(&sum);
    }
    sum
}

/// Spectral abscissa `max Re λ(M)`, estimated as `ln ρ(e^{τM}) / τ` with
/// `τ = 1 / max(1, ‖M‖∞)`.
pub fn spectral_abscissa(m: &Matrix, tol: f64) -> SpectralEstimate {
    let n = m.rows();
    if n == 0 {
        return SpectralEstimate {
            value: f64::NEG_INFINITY,
            method: SpectralMethod::Exact,
        };
    }
    let tau = 1.0 / m.norm_inf().max(1.0);
    let rho = spectral_radius(&expm(&m.scale(tau)), tol * tau);
    SpectralEstimate {
        value: rho.value.ln() / tau,
        method: rho.method,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_diag(&[v])
    }

    fn dare_scalar(a: f64, b: f64, q: f64, r: f64) -> DareProblem {
        DareProblem::new(scalar(a), scalar(b), scalar(q), scalar(r)).unwrap()
    }

    fn care_scalar(a: f64, b: f64, q: f64, r: f64) -> CareProblem {
        CareProblem::new(scalar(a), scalar(b), scalar(q), scalar(r)).unwrap()
    }

    #[test]
    fn dare_zero_dynamics_gives_q() {
        let (p, rep) = solve_dare(&dare_scalar(0.0, 1.0, 1.0, 1.0), &SolverOptions::default()).unwrap();
        assert_eq!(p[(0, 0)], 1.0);
        assert!(rep.converged);
    }

    #[test]
    fn dare_scalar_closed_form() {
        // Positive root of p² − 0.25p − 1 = 0.
        let want = (0.25 + 4.0625_f64.sqrt()) / 2.0;
        let prob = dare_scalar(0.5, 1.0, 1.0, 1.0);
        let (p, _) = solve_dare(&prob, &SolverOptions::default()).unwrap();
        assert!((p[(0, 0)] - want).abs() < 1e-12, "{}", p[(0, 0)]);
        let k = feedback_gain_discrete(&p, &prob).unwrap();
        assert!((k[(0, 0)] - want * 0.5 / (want + 1.0)).abs() < 1e-12);
        assert!((k[(0, 0)] - 0.265564).abs() < 1e-6);
    }

    #[test]
    fn care_scalar_closed_forms() {
        let opts = SolverOptions::default();
        let prob = care_scalar(-1.0, 1.0, 1.0, 1.0);
        let (p, rep) = solve_care(&prob, &opts).unwrap();
        assert!((p[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!(rep.closed_loop.value < 0.0);
        let k = feedback_gain_continuous(&p, &prob).unwrap();
        assert!((k[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);

        // Imaginary-axis Hamiltonian eigenvalues: regularized path.
        let (p0, rep0) = solve_care(&care_scalar(0.0, 1.0, 0.0, 1.0), &opts).unwrap();
        assert!(rep0.regularized);
        assert!(p0[(0, 0)].abs() < 1e-5, "{}", p0[(0, 0)]);
    }

    #[test]
    fn care_decoupled_diagonal() {
        let n = 3;
        let prob = CareProblem::new(
            Matrix::scaled_identity(n, -1.0),
            Matrix::identity(n),
            Matrix::identity(n),
            Matrix::identity(n),
        )
        .unwrap();
        let (p, _) = solve_care(&prob, &SolverOptions::default()).unwrap();
        let want = Matrix::scaled_identity(n, 2f64.sqrt() - 1.0);
        assert!(p.sub(&want).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn gains_vanish_at_zero_p() {
        let d = dare_scalar(0.5, 1.0, 1.0, 1.0);
        assert_eq!(feedback_gain_discrete(&Matrix::zeros(1, 1), &d).unwrap()[(0, 0)], 0.0);
        let c = care_scalar(-1.0, 1.0, 1.0, 1.0);
        assert_eq!(feedback_gain_continuous(&Matrix::zeros(1, 1), &c).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn gamma_form_gain_is_p_over_gamma() {
        let gamma = 0.25;
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, -2.0]]).unwrap();
        let prob = CareProblem::with_scalar_weight(a, Matrix::identity(2), gamma).unwrap();
        let (p, _) = solve_care(&prob, &SolverOptions::default()).unwrap();
        let k = feedback_gain_continuous(&p, &prob).unwrap();
        assert!(k.sub(&p.scale(1.0 / gamma)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn lyapunov_scalar_and_residual() {
        let f = Matrix::from_rows(&[vec![-2.0, 1.0], vec![0.0, -3.0]]).unwrap();
        let c = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 2.0]]).unwrap();
        let x = solve_lyapunov(&f, &c, &SolverOptions::default()).unwrap();
        let res = f
            .transpose()
            .matmul(&x)
            .unwrap()
            .add(&x.matmul(&f).unwrap())
            .unwrap()
            .add(&c)
            .unwrap();
        assert!(res.max_abs() < 1e-13);
        let unstable = Matrix::from_diag(&[1.0, -1.0]);
        assert!(solve_lyapunov(&unstable, &c, &SolverOptions::default()).is_err());
    }

    #[test]
    fn spectral_radius_examples() {
        let d = Matrix::from_diag(&[0.5, -0.2]);
        let est = spectral_radius(&d, 1e-10);
        assert!((est.value - 0.5).abs() < 1e-8);
        assert!(est.converged());

        let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
        let rot = Matrix::from_rows(&[vec![0.9 * c, -0.9 * s], vec![0.9 * s, 0.9 * c]]).unwrap();
        let est = spectral_radius(&rot, 1e-10);
        assert!(!est.converged());
        assert!((est.value - 0.9).abs() < 0.009);

        assert_eq!(spectral_radius(&Matrix::zeros(3, 3), 1e-10).value, 0.0);
    }

    #[test]
    fn spectral_abscissa_of_diagonal() {
        let d = Matrix::from_diag(&[-0.5, -2.0, -1.0]);
        let est = spectral_abscissa(&d, 1e-12);
        assert!((est.value + 0.5).abs() < 1e-6, "{}", est.value);
    }

    #[test]
    fn rejects_indefinite_weights() {
        let err = CareProblem::new(scalar(1.0), scalar(1.0), scalar(-1.0), scalar(1.0));
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
        let err = DareProblem::new(scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0));
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn unstabilizable_dare_reports_failure() {
        // Unstable mode with zero input matrix.
        let prob = dare_scalar(2.0, 0.0, 1.0, 1.0);
        let opts = SolverOptions {
            max_iter: 60,
            ..SolverOptions::default()
        };
        assert!(matches!(solve_dare(&prob, &opts), Err(Error::NotConverged { .. })));
    }
}
