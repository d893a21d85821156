//! Monte Carlo audit of the canonical calibration: budget, ε-optimality,
//! switching structure and the per-class incentive checks.
//!
//! `cargo run --release --example monte_carlo_audit -- 2000`

use innkeeper::calibration::calibrate;
use innkeeper::engine::RunConfig;
use innkeeper::harness::{self, MonteCarloConfig, StateSampling, Tolerances};
use innkeeper::model::ModelParams;

fn main() -> innkeeper::Result<()> {
    let runs = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    let model = ModelParams::new(0.5, 0.8, 0.3, 0.5);
    let params = calibrate(&model, 0.1, 1.0)?.params;
    let mut mc = MonteCarloConfig::new(RunConfig::new(model, params, params.n_prime, 0), runs, 1);
    mc.sampling = StateSampling::Stratified;
    let report = harness::monte_carlo(&mc)?;
    for check in harness::audit_checks(&report, &Tolerances::default()) {
        println!("{}", check.line());
    }
    report.write_classes_csv(std::io::stderr().lock())?;
    Ok(())
}
