//! A six-stage run with K=1, the coin forced to 1 and the first two risky
//! draws forced to 1 and 0.

use innkeeper::calibration::calibrate_with_k;
use innkeeper::engine::{self, RunConfig};
use innkeeper::model::ModelParams;

fn main() -> innkeeper::Result<()> {
    let model = ModelParams::new(0.5, 0.8, 0.3, 0.5);
    let params = calibrate_with_k(&model, 1, 0.1, 1.0)?.params;
    let mut cfg = RunConfig::new(model, params, 6, 0);
    cfg.forced_coin = Some(true);
    cfg.forced_rewards = Some(vec![true, false]);
    let trace = engine::run(&cfg)?;
    for r in &trace.records {
        println!(
            "stage {} saw {:<5} -> ({}, {}, {}) pulled {} reward {}",
            r.stage,
            r.observation,
            r.message.arm,
            r.message.signal,
            r.message.subsidy,
            r.action,
            r.reward.value(model.b)
        );
    }
    let s = &trace.summary;
    println!(
        "subsidy {} X {} switches ({}, {})",
        s.total_subsidy_promised, s.x, s.switch_to_s_count, s.switch_to_r_count
    );
    Ok(())
}
