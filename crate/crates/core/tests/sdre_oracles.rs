use sepval::linalg::Matrix;
use sepval::riccati::{care_residual, solve_care, CareProblem, SolverOptions};
use sepval::rng::SplitMix64;
use sepval::sdre::{frozen_decay_study, simulate_closed_loop, AllenCahnModel, RefreshPolicy, SdreConfig};

/// Cyclic Jacobi rotations; returns eigenvalues and column eigenvectors.
fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
        }
        if off < 1e-30 * (1.0 + m.norm_fro().powi(2)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (m.diagonal(), v)
}

/// `γ(A + sqrt(A² + I))` through the spectral decomposition of symmetric `A`.
fn closed_form(a: &Matrix, gamma: f64) -> Matrix {
    let (lambda, v) = jacobi_eigen(a);
    let f: Vec<f64> = lambda.iter().map(|l| gamma * (l + (l * l + 1.0).sqrt())).collect();
    v.matmul(&Matrix::from_diag(&f))
        .unwrap()
        .matmul(&v.transpose())
        .unwrap()
}

fn random_state(s: usize, rng: &mut SplitMix64) -> Vec<f64> {
    (0..s).map(|_| rng.uniform(0.0, 1.0)).collect()
}

#[test]
fn jacobi_oracle_reconstructs_matrix() {
    let model = AllenCahnModel::discretize(8, 1e-2).unwrap();
    let a = model.semilinear_a(&model.sine_profile()).unwrap();
    let (lambda, v) = jacobi_eigen(&a);
    let back = v
        .matmul(&Matrix::from_diag(&lambda))
        .unwrap()
        .matmul(&v.transpose())
        .unwrap();
    assert!(back.sub(&a).unwrap().max_abs() < 1e-10 * a.max_abs());
}

#[test]
fn sdre_matches_spectral_closed_form() {
    let mut rng = SplitMix64::new(31);
    let opts = SolverOptions::default();
    for sigma in [1e-1, 1e-3] {
        let model = AllenCahnModel::discretize(20, sigma).unwrap();
        for _ in 0..10 {
            let y = random_state(20, &mut rng);
            let (p, report) = model.sdre_solve_at(&y, &opts).unwrap();
            assert!(report.residual <= 1e-9, "{}", report.residual);
            let problem = model.sdre_problem(&y).unwrap();
            assert!(care_residual(&problem, &p).unwrap().norm_inf() <= 1e-9 * (1.0 + p.norm_inf()));
            let oracle = closed_form(&model.semilinear_a(&y).unwrap(), model.gamma());
            let diff = p.sub(&oracle).unwrap().max_abs();
            assert!(diff <= 1e-8 * (1.0 + oracle.max_abs()), "sigma={sigma}: {diff}");
        }
    }
}

#[test]
fn scalar_surrogate_feedback() {
    for gamma in [1.0, 0.1, 1.0 / 60.0] {
        let prob = CareProblem::with_scalar_weight(Matrix::identity(1), Matrix::identity(1), gamma).unwrap();
        let (p, _) = solve_care(&prob, &SolverOptions::default()).unwrap();
        let expected = gamma * (1.0 + 2f64.sqrt());
        assert!((p[(0, 0)] - expected).abs() < 1e-12 * (1.0 + expected));
        let u = -p[(0, 0)] / gamma * 0.7;
        assert!((u + (1.0 + 2f64.sqrt()) * 0.7).abs() < 1e-12);
    }
}

#[test]
fn feedback_is_scaled_state_product() {
    let model = AllenCahnModel::discretize(12, 1e-2).unwrap();
    let y = model.sine_profile();
    let (p, _) = model.sdre_solve_at(&y, &SolverOptions::default()).unwrap();
    let u = model.sdre_feedback(&p, &y).unwrap();
    let py = p.matvec(&y).unwrap();
    for (ui, pyi) in u.iter().zip(&py) {
        assert!((ui + pyi / model.gamma()).abs() < 1e-14 * (1.0 + pyi.abs() / model.gamma()));
    }
}

#[test]
fn semilinear_factorization_reproduces_rhs() {
    let mut rng = SplitMix64::new(4);
    for sigma in [1e-1, 1e-4] {
        let model = AllenCahnModel::discretize(16, sigma).unwrap();
        for _ in 0..10 {
            let y: Vec<f64> = (0..16).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let ay = model.semilinear_a(&y).unwrap().matvec(&y).unwrap();
            let f = model.rhs(&y).unwrap();
            for (a, b) in ay.iter().zip(&f) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn grid_and_neumann_rows() {
    let model = AllenCahnModel::discretize(4, 1.0).unwrap();
    assert_eq!(model.grid(), &[0.125, 0.375, 0.625, 0.875]);
    assert_eq!(model.gamma(), 0.25);
    let l = model.laplacian();
    for i in 0..4 {
        let row_sum: f64 = (0..4).map(|j| l[(i, j)]).sum();
        assert_eq!(row_sum, 0.0);
    }
    assert_eq!(l[(0, 0)], -16.0);
    assert_eq!(l[(1, 1)], -32.0);
    assert!(AllenCahnModel::discretize(1, 1.0).is_err());
    assert!(AllenCahnModel::discretize(4, 0.0).is_err());
}

#[test]
fn frozen_decay_orders_by_viscosity() {
    let study = frozen_decay_study(20, &[1e-1, 1e-2, 1e-3], &SolverOptions::default()).unwrap();
    for w in study.windows(2) {
        assert!(
            w[1].fit.b_fit < w[0].fit.b_fit,
            "{} vs {}",
            w[0].fit.b_fit,
            w[1].fit.b_fit
        );
    }
    for d in &study {
        assert!(d.fit.b_fit < 0.0);
        let lead = d.series[0].1.abs();
        assert!(d.series.iter().all(|&(_, v)| v.abs() <= lead));
    }
}

#[test]
fn closed_loop_cost_is_stable_under_step_halving() {
    let model = AllenCahnModel::discretize(20, 1e-2).unwrap();
    let y0 = model.sine_profile();
    let coarse = SdreConfig::default();
    let fine = SdreConfig {
        dt: coarse.dt / 2.0,
        refresh: RefreshPolicy::Threshold {
            tau: 0.05,
            max_steps: 50,
        },
        ..coarse
    };
    let a = simulate_closed_loop(&model, &coarse, &y0).unwrap();
    let b = simulate_closed_loop(&model, &fine, &y0).unwrap();
    assert!(a.completed() && b.completed());
    let rel = (a.total_cost - b.total_cost).abs() / b.total_cost;
    assert!(rel < 1e-2, "{rel}");
    assert!(a.final_norm < 1e-3 * a.states[0].iter().fold(0.0f64, |m, v| m.max(v.abs())));
}

#[test]
fn running_cost_is_monotone_and_matches_total() {
    let model = AllenCahnModel::discretize(10, 1e-2).unwrap();
    let config = SdreConfig {
        horizon: 1.0,
        refresh: RefreshPolicy::EveryStep,
        ..SdreConfig::default()
    };
    let r = simulate_closed_loop(&model, &config, &model.sine_profile()).unwrap();
    assert_eq!(r.states.len(), 101);
    assert_eq!(r.solves, 101);
    assert!(r.running_cost.windows(2).all(|w| w[1] >= w[0]));
    let dt = config.dt;
    let direct: f64 = (0..100)
        .map(|k| {
            let y2: f64 = r.states[k].iter().map(|v| v * v).sum();
            let u2: f64 = r.controls[k].iter().map(|v| v * v).sum();
            dt * (y2 + u2)
        })
        .sum();
    assert!((direct - r.unweighted_cost).abs() < 1e-12 * direct);
    assert!((direct * model.gamma() - r.total_cost).abs() < 1e-12 * direct);
}
