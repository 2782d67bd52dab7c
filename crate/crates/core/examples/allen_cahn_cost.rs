//! Closed-loop cost error of banded SDRE feedback. Grid size and horizon
//! can be passed as arguments; the full s = 100, T = 10 table takes a few
//! minutes on one core.

use sepval::sdre::{cost_error_table, simulate_closed_loop, AllenCahnModel, CostScale, SdreConfig, TABLE_SIGMAS};

fn main() -> sepval::Result<()> {
    let mut args = std::env::args().skip(1);
    let s: usize = args.next().and_then(|v| v.parse().ok()).unwrap_or(40);
    let horizon: f64 = args.next().and_then(|v| v.parse().ok()).unwrap_or(10.0);
    let config = SdreConfig {
        horizon,
        ..SdreConfig::default()
    };

    let model = AllenCahnModel::discretize(s, 1e-4)?;
    let run = simulate_closed_loop(&model, &config, &model.sine_profile())?;
    println!(
        "full feedback, sigma 1e-4: J = {:.8}, |y(T)| = {:.2e}, {} SDRE solves",
        run.total_cost, run.final_norm, run.solves
    );

    let bands: Vec<usize> = [2, 5, 10, 20].into_iter().filter(|&r| r < s).collect();
    let table = cost_error_table(s, &config, &bands, &TABLE_SIGMAS, CostScale::Unweighted)?;
    print!("{}", table.to_csv());
    Ok(())
}
