//! Sample-size and switching-horizon checks with the run counts they need.

use innkeeper::calibration::calibrate;
use innkeeper::harness::{bound_checks, Tolerances};
use innkeeper::model::ModelParams;

fn main() -> innkeeper::Result<()> {
    let model = ModelParams::new(0.5, 0.8, 0.3, 0.5);
    let params = calibrate(&model, 0.1, 1.0)?.params;
    let report = bound_checks(&model, &params, 0, 11, &Tolerances::default())?;
    println!(
        "N = K + n_hat = {}, runs per state {:?}, required {}",
        report.horizon_population, report.horizon_runs, report.required_runs
    );
    for check in &report.checks {
        println!("{}", check.line());
    }
    Ok(())
}
