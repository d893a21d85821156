//! One seeded run at the calibrated population; writes the trace CSV to
//! stdout when given `--csv`.

use innkeeper::calibration::calibrate;
use innkeeper::engine::{self, RunConfig};
use innkeeper::model::ModelParams;

fn main() -> innkeeper::Result<()> {
    let model = ModelParams::new(0.5, 0.8, 0.3, 0.5);
    let params = calibrate(&model, 0.1, 1.0)?.params;
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let trace = engine::run(&RunConfig::new(model, params, params.n_prime, seed))?;
    if std::env::args().any(|a| a == "--csv") {
        return trace.write_csv(0, std::io::stdout().lock());
    }
    println!("state {} coin {:?}", trace.world_state, trace.coin);
    println!("{}", serde_json::to_string_pretty(&trace.summary)?);
    Ok(())
}
