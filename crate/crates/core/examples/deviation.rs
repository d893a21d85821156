//! An agent ignores its recommendation during the switching phase; every
//! later message carries s4 and the subsidy stops.

use innkeeper::agents::{DeviationRule, StrategyProfile};
use innkeeper::calibration::calibrate_with_k;
use innkeeper::engine::{self, RunConfig};
use innkeeper::model::ModelParams;

fn main() -> innkeeper::Result<()> {
    let model = ModelParams::new(0.5, 0.8, 0.3, 0.5);
    let k = 10;
    let params = calibrate_with_k(&model, k, 0.1, 1.0)?.params;
    let mut cfg = RunConfig::new(model, params, 60, 3);
    cfg.forced_coin = Some(true);
    cfg.profile = StrategyProfile::deviant([k + 3], DeviationRule::Flip);
    let trace = engine::run(&cfg)?;
    for r in &trace.records[(k as usize - 1)..(k as usize + 8)] {
        let mark = if r.complied() { "" } else { "  <- deviation" };
        println!(
            "stage {:>2}: ({}, {}, {:.3}) pulled {}{mark}",
            r.stage, r.message.arm, r.message.signal, r.message.subsidy, r.action
        );
    }
    println!(
        "deviation recorded at {:?}, promised subsidy {}",
        trace.summary.deviation_stage, trace.summary.total_subsidy_promised
    );
    Ok(())
}
