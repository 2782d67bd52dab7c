//! Allen–Cahn control by state-dependent Riccati feedback: semi-discrete
//! model, closed-loop simulation, frozen-state decay study and the cost
//! error of banded feedback.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{csv_line, fmt17};
use crate::linalg::{Lu, Matrix};
use crate::lqr_models::{column_decay, exp_fit, truncate_banded, DecayFit};
use crate::riccati::{solve_care, CareProblem, SolveReport, SolverOptions};

/// `y_t = σ y_xx + y(1 − y) + u` on `[0, 1]` with homogeneous Neumann
/// conditions, discretized on a cell-centered grid.
#[derive(Clone, Debug)]
pub struct AllenCahnModel {
    s: usize,
    sigma: f64,
    dx: f64,
    laplacian: Matrix,
    gamma: f64,
    grid: Vec<f64>,
}

impl AllenCahnModel {
    /// `x_i = (i − ½)/s`, `L = tridiag(1, −2, 1)/dx²` with ghost-cell
    /// reflection at both ends, `γ = 1/s`.
    pub fn discretize(s: usize, sigma: f64) -> Result<Self> {
        if s < 2 {
            return Err(Error::InvalidParameter(format!("grid needs s >= 2, got {s}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "viscosity must be positive, got {sigma}"
            )));
        }
        let dx = 1.0 / s as f64;
        let k = 1.0 / (dx * dx);
        let laplacian = Matrix::from_fn(s, s, |i, j| {
            if i == j {
                if i == 0 || i == s - 1 {
                    -k
                } else {
                    -2.0 * k
                }
            } else if i.abs_diff(j) == 1 {
                k
            } else {
                0.0
            }
        });
        let grid = (0..s).map(|i| (i as f64 + 0.5) * dx).collect();
        Ok(Self {
            s,
            sigma,
            dx,
            laplacian,
            gamma: dx,
            grid,
        })
    }

    pub fn size(&self) -> usize {
        self.s
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `[sin(π x_i)]`.
    pub fn sine_profile(&self) -> Vec<f64> {
        self.grid.iter().map(|x| (PI * x).sin()).collect()
    }

    fn check_state(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.s {
            return Err(Error::DimensionMismatch {
                context: "Allen-Cahn state",
                expected: self.s,
                actual: y.len(),
            });
        }
        Ok(())
    }

    /// `A(y) = σL + diag(1 − y)`.
    pub fn semilinear_a(&self, y: &[f64]) -> Result<Matrix> {
        self.check_state(y)?;
        let mut a = self.laplacian.scale(self.sigma);
        for (i, yi) in y.iter().enumerate() {
            a[(i, i)] += 1.0 - yi;
        }
        Ok(a)
    }

    /// Uncontrolled right-hand side `σLy + y∘(1 − y)`.
    pub fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_state(y)?;
        let ly = self.laplacian.matvec(y)?;
        Ok(ly
            .iter()
            .zip(y)
            .map(|(l, yi)| self.sigma * l + yi * (1.0 - yi))
            .collect())
    }

    /// The CARE `(A(y), I, γI, γI)`.
    pub fn sdre_problem(&self, y: &[f64]) -> Result<CareProblem> {
        CareProblem::with_scalar_weight(self.semilinear_a(y)?, Matrix::identity(self.s), self.gamma)
    }

    /// `P(y)` solving `A(y)ᵀP + PA(y) − γ⁻¹P² + γI = 0`.
    pub fn sdre_solve_at(&self, y: &[f64], opts: &SolverOptions) -> Result<(Matrix, SolveReport)> {
        let problem = self.sdre_problem(y)?;
        solve_care(&problem, opts).map_err(|e| Error::SdreFailure {
            state_norm: norm_inf(y),
            source: Box::new(e),
        })
    }

    /// `u = −γ⁻¹ P y`.
    pub fn sdre_feedback(&self, p: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
        let py = p.matvec(y)?;
        Ok(py.into_iter().map(|v| -v / self.gamma).collect())
    }
}

fn norm_inf(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// When `P(y)` is recomputed along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RefreshPolicy {
    EveryStep,
    /// Recompute when `‖y − y_ref‖∞ > tau·‖y_ref‖∞` or after `max_steps`
    /// steps, whichever comes first.
    Threshold {
        tau: f64,
        max_steps: usize,
    },
}

impl Default for RefreshPolicy {
    fn default() -> Self {
        RefreshPolicy::Threshold {
            tau: 0.05,
            max_steps: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SdreConfig {
    pub dt: f64,
    pub horizon: f64,
    pub refresh: RefreshPolicy,
    #[serde(skip)]
    pub solver: SolverOptions,
    /// Feedback through `truncate_banded(P, r)`; `None` uses the full `P`.
    pub band: Option<usize>,
}

impl Default for SdreConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            horizon: 10.0,
            refresh: RefreshPolicy::default(),
            solver: SolverOptions::default(),
            band: None,
        }
    }
}

impl SdreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if let RefreshPolicy::Threshold { tau, max_steps } = self.refresh {
            if !(tau >= 0.0) || max_steps == 0 {
                return Err(Error::InvalidParameter(
                    "refresh threshold needs tau >= 0 and max_steps >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn with_band(mut self, band: Option<usize>) -> Self {
        self.band = band;
        self
    }
}

/// Blow-up guard on `‖y‖∞`.
pub const BLOW_UP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimulationStatus {
    Completed,
    BlowUp { step: usize },
    SolverFailed { step: usize, message: String },
}

/// `states[k]`, `controls[k]` at `times[k] = k·dt`; `running_cost[k]` is
/// the cost accumulated over `[0, times[k]]` by left endpoints.
#[derive(Clone, Debug)]
pub struct TrajectoryReport {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub running_cost: Vec<f64>,
    /// `Σ_k dt·γ·(y_kᵀy_k + u_kᵀu_k)`.
    pub total_cost: f64,
    /// `Σ_k dt·(y_kᵀy_k + u_kᵀu_k)`.
    pub unweighted_cost: f64,
    pub final_norm: f64,
    pub solves: usize,
    pub status: SimulationStatus,
}

impl TrajectoryReport {
    pub fn completed(&self) -> bool {
        self.status == SimulationStatus::Completed
    }

    /// Header `t,y_1..y_s,u_norm,running_cost`.
    pub fn to_csv(&self) -> String {
        let s = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=s).map(|i| format!("y_{i}")));
        header.push("u_norm".into());
        header.push("running_cost".into());
        let mut out = csv_line(header);
        for k in 0..self.states.len() {
            let mut row = vec![fmt17(self.times[k])];
            row.extend(self.states[k].iter().map(|&v| fmt17(v)));
            let u = self.controls.get(k).map_or(0.0, |u| dot(u, u).sqrt());
            row.push(fmt17(u));
            row.push(fmt17(self.running_cost[k]));
            out.push_str(&csv_line(row));
        }
        out
    }
}

/// Semi-implicit Euler: `(I − dt·σL) y⁺ = y + dt·(y∘(1 − y) + u)` with
/// `u = −γ⁻¹ P_r(y_ref) y`, where `P(y_ref)` is refreshed per the policy.
pub fn simulate_closed_loop(model: &AllenCahnModel, config: &SdreConfig, y0: &[f64]) -> Result<TrajectoryReport> {
    config.validate()?;
    model.check_state(y0)?;
    let s = model.size();
    let dt = config.dt;
    let steps = config.steps();
    let implicit = Matrix::identity(s).sub(&model.laplacian.scale(dt * model.sigma))?;
    let lu: Lu = implicit.lu()?;

    let mut report = TrajectoryReport {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
        running_cost: Vec::with_capacity(steps + 1),
        total_cost: 0.0,
        unweighted_cost: 0.0,
        final_norm: norm_inf(y0),
        solves: 0,
        status: SimulationStatus::Completed,
    };
    let mut y = y0.to_vec();
    let mut gain: Option<(Matrix, Vec<f64>, usize)> = None;
    let mut cost = 0.0;
    let mut unweighted = 0.0;

    for k in 0..=steps {
        let refresh = match (&gain, config.refresh) {
            (None, _) | (_, RefreshPolicy::EveryStep) => true,
            (Some((_, y_ref, since)), RefreshPolicy::Threshold { tau, max_steps }) => {
                let drift = y.iter().zip(y_ref).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                *since >= max_steps || drift > tau * norm_inf(y_ref)
            }
        };
        if refresh {
            match model.sdre_solve_at(&y, &config.solver) {
                Ok((p, _)) => {
                    let p = match config.band {
                        Some(r) => truncate_banded(&p, r),
                        None => p,
                    };
                    gain = Some((p, y.clone(), 0));
                    report.solves += 1;
                }
                Err(e) => {
                    report.status = SimulationStatus::SolverFailed {
                        step: k,
                        message: e.to_string(),
                    };
                    break;
                }
            }
        }
        let (p, _, since) = gain.as_mut().expect("gain set on first step");
        *since += 1;
        let u = model.sdre_feedback(p, &y)?;

        report.times.push(k as f64 * dt);
        report.states.push(y.clone());
        report.controls.push(u.clone());
        report.running_cost.push(cost);
        if k == steps {
            break;
        }
        let energy = dot(&y, &y) + dot(&u, &u);
        cost += dt * model.gamma * energy;
        unweighted += dt * energy;

        let rhs: Vec<f64> = y
            .iter()
            .zip(&u)
            .map(|(&yi, &ui)| yi + dt * (yi * (1.0 - yi) + ui))
            .collect();
        y = lu.solve_vec(&rhs)?;
        if !(norm_inf(&y) <= BLOW_UP) {
            report.status = SimulationStatus::BlowUp { step: k + 1 };
            report.final_norm = norm_inf(&y);
            report.total_cost = cost;
            report.unweighted_cost = unweighted;
            return Ok(report);
        }
    }
    report.total_cost = cost;
    report.unweighted_cost = unweighted;
    report.final_norm = report.states.last().map_or(0.0, |y| norm_inf(y));
    Ok(report)
}

/// Decay of the first column of `P(y0)` for one viscosity.
#[derive(Clone, Debug)]
pub struct ViscosityDecay {
    pub sigma: f64,
    pub series: Vec<(usize, f64)>,
    pub fit: DecayFit,
    pub report: SolveReport,
}

/// Viscosities of the frozen-state decay study.
pub const DECAY_SIGMAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// `column_decay(P(y0), 1)` and its exponential fit for each viscosity,
/// with `y0 = sin(πx)`.
pub fn frozen_decay_study(s: usize, sigmas: &[f64], opts: &SolverOptions) -> Result<Vec<ViscosityDecay>> {
    sigmas
        .par_iter()
        .map(|&sigma| {
            let model = AllenCahnModel::discretize(s, sigma)?;
            let y0 = model.sine_profile();
            let (p, report) = model.sdre_solve_at(&y0, opts)?;
            let series = column_decay(&p, 0)?;
            let fit = exp_fit(&series)?;
            Ok(ViscosityDecay {
                sigma,
                series,
                fit,
                report,
            })
        })
        .collect()
}

/// Default bandwidths and viscosities of the cost error table.
pub const TABLE_BANDS: [usize; 4] = [2, 5, 10, 20];
pub const TABLE_SIGMAS: [f64; 2] = [1e-4, 1e-3];

/// Which functional the cost error table compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostScale {
    /// `∫ yᵀy + uᵀu dt`.
    #[default]
    Unweighted,
    /// `γ ∫ yᵀy + uᵀu dt`.
    Weighted,
}

impl CostScale {
    pub fn of(self, report: &TrajectoryReport) -> f64 {
        match self {
            CostScale::Unweighted => report.unweighted_cost,
            CostScale::Weighted => report.total_cost,
        }
    }
}

/// `|J_r − J_full|` for each bandwidth (rows) and viscosity (columns).
#[derive(Clone, Debug, Serialize)]
pub struct CostErrorTable {
    pub bands: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub scale: CostScale,
    pub full_costs: Vec<f64>,
    /// `errors[row][col]` for `bands[row]`, `sigmas[col]`.
    pub errors: Vec<Vec<f64>>,
    /// The full-feedback trajectory per viscosity.
    #[serde(skip)]
    pub full_runs: Vec<TrajectoryReport>,
}

impl CostErrorTable {
    pub fn column(&self, col: usize) -> Vec<f64> {
        self.errors.iter().map(|row| row[col]).collect()
    }

    /// Header `r,err_sigma_<σ>...`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["r".to_string()];
        header.extend(self.sigmas.iter().map(|s| format!("err_sigma_{s:e}")));
        let mut out = csv_line(header);
        for (r, row) in self.bands.iter().zip(&self.errors) {
            let mut line = vec![r.to_string()];
            line.extend(row.iter().map(|&v| fmt17(v)));
            out.push_str(&csv_line(line));
        }
        out
    }
}

/// Closed-loop cost error of banded feedback from `y0 = sin(πx)`. Any run
/// that does not complete is reported as a solver failure.
pub fn cost_error_table(
    s: usize,
    config: &SdreConfig,
    bands: &[usize],
    sigmas: &[f64],
    scale: CostScale,
) -> Result<CostErrorTable> {
    if bands.is_empty() || sigmas.is_empty() {
        return Err(Error::InvalidParameter(
            "band and viscosity lists must be nonempty".into(),
        ));
    }
    let run = |sigma: f64, band: Option<usize>| -> Result<TrajectoryReport> {
        let model = AllenCahnModel::discretize(s, sigma)?;
        let report = simulate_closed_loop(&model, &config.with_band(band), &model.sine_profile())?;
        match &report.status {
            SimulationStatus::Completed => Ok(report),
            SimulationStatus::BlowUp { step } => Err(Error::Trajectory(format!(
                "blow-up at step {step} (sigma {sigma:e}, band {band:?})"
            ))),
            SimulationStatus::SolverFailed { step, message } => Err(Error::Trajectory(format!(
                "SDRE failure at step {step} (sigma {sigma:e}, band {band:?}): {message}"
            ))),
        }
    };
    let jobs: Vec<(usize, Option<usize>)> = (0..sigmas.len())
        .flat_map(|c| std::iter::once((c, None)).chain(bands.iter().map(move |&r| (c, Some(r)))))
        .collect();
    let reports: Vec<TrajectoryReport> = jobs
        .par_iter()
        .map(|&(c, band)| run(sigmas[c], band))
        .collect::<Result<_>>()?;
    let per_col = bands.len() + 1;
    let costs: Vec<f64> = reports.iter().map(|r| scale.of(r)).collect();
    let full_costs: Vec<f64> = (0..sigmas.len()).map(|c| costs[c * per_col]).collect();
    let errors = (0..bands.len())
        .map(|row| {
            (0..sigmas.len())
                .map(|c| (costs[c * per_col + 1 + row] - full_costs[c]).abs())
                .collect()
        })
        .collect();
    let full_runs = reports.into_iter().step_by(per_col).collect();
    Ok(CostErrorTable {
        bands: bands.to_vec(),
        sigmas: sigmas.to_vec(),
        scale,
        full_costs,
        errors,
        full_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cell_laplacian() {
        let m = AllenCahnModel::discretize(2, 1.0).unwrap();
        let expected = Matrix::from_rows(&[vec![-4.0, 4.0], vec![4.0, -4.0]]).unwrap();
        assert_eq!(m.laplacian(), &expected);
        assert_eq!(m.grid(), &[0.25, 0.75]);
        assert_eq!(m.gamma(), 0.5);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        for s in [2, 3, 7, 50] {
            let m = AllenCahnModel::discretize(s, 0.3).unwrap();
            let l = m.laplacian();
            assert_eq!(l.asymmetry(), 0.0);
            for i in 0..s {
                let sum: f64 = l.row(i).iter().sum();
                assert!(sum.abs() < 1e-9 * l.max_abs());
            }
        }
        assert!(AllenCahnModel::discretize(1, 1.0).is_err());
        assert!(AllenCahnModel::discretize(4, 0.0).is_err());
    }

    #[test]
    fn semilinear_form_matches_rhs() {
        let m = AllenCahnModel::discretize(6, 0.01).unwrap();
        let y = [0.3, -0.2, 1.5, 0.0, 0.9, -1.1];
        let ay = m.semilinear_a(&y).unwrap().matvec(&y).unwrap();
        let f = m.rhs(&y).unwrap();
        for (a, b) in ay.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
        let ones = vec![1.0; 6];
        assert!(norm_inf(&m.semilinear_a(&ones).unwrap().matvec(&ones).unwrap()) < 1e-12);
        assert!(m.semilinear_a(&[0.0; 5]).is_err());
    }

    #[test]
    fn constant_state_sees_only_logistic_term() {
        let m = AllenCahnModel::discretize(5, 0.5).unwrap();
        let f = m.rhs(&[0.4; 5]).unwrap();
        for v in f {
            assert!((v - 0.24).abs() < 1e-12);
        }
    }

    #[test]
    fn feedback_vanishes() {
        let m = AllenCahnModel::discretize(3, 0.1).unwrap();
        assert_eq!(
            m.sdre_feedback(&Matrix::zeros(3, 3), &[1.0, 2.0, 3.0]).unwrap(),
            vec![0.0; 3]
        );
        let p = Matrix::from_fn(3, 3, |i, j| (i + j) as f64);
        assert!(m.sdre_feedback(&p, &[0.0; 3]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(SdreConfig::default().validate().is_ok());
        assert_eq!(SdreConfig::default().steps(), 1000);
        let bad = SdreConfig {
            dt: 0.0,
            ..SdreConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SdreConfig {
            horizon: -1.0,
            ..SdreConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_state_is_an_equilibrium() {
        let m = AllenCahnModel::discretize(8, 1e-2).unwrap();
        let cfg = SdreConfig {
            horizon: 0.5,
            ..SdreConfig::default()
        };
        let rep = simulate_closed_loop(&m, &cfg, &[0.0; 8]).unwrap();
        assert!(rep.completed());
        assert_eq!(rep.total_cost, 0.0);
        assert!(rep.states.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(rep.states.len(), 51);
    }

    #[test]
    fn full_band_matches_full_feedback() {
        let m = AllenCahnModel::discretize(10, 1e-3).unwrap();
        let cfg = SdreConfig {
            horizon: 1.0,
            ..SdreConfig::default()
        };
        let y0 = m.sine_profile();
        let full = simulate_closed_loop(&m, &cfg, &y0).unwrap();
        let banded = simulate_closed_loop(&m, &cfg.with_band(Some(10)), &y0).unwrap();
        assert_eq!(full.states, banded.states);
        assert_eq!(full.total_cost, banded.total_cost);
        assert!((full.unweighted_cost * m.gamma() - full.total_cost).abs() <= 1e-14 * full.total_cost);
        assert!(full.final_norm < norm_inf(&y0));
    }

    #[test]
    fn table_csv_layout() {
        let t = CostErrorTable {
            bands: vec![2, 5],
            sigmas: vec![1e-4, 1e-3],
            scale: CostScale::Unweighted,
            full_costs: vec![1.0, 1.0],
            errors: vec![vec![0.5, 0.25], vec![0.125, 0.0]],
            full_runs: Vec::new(),
        };
        let csv = t.to_csv();
        assert!(csv.starts_with("r,err_sigma_1e-4,err_sigma_1e-3\n2,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
