//! The coin bias δ that leaves a blind switching agent indifferent, for a
//! range of sample sizes.

use innkeeper::calibration::{blind_expectation, solve_delta};
use innkeeper::model::ModelParams;

fn main() -> innkeeper::Result<()> {
    let model = ModelParams::new(0.5, 0.8, 0.3, 0.5);
    println!(
        "{:>5} {:>8} {:>8} {:>8} {:>10} {:>10}",
        "K", "P(R1)", "P(R2)", "P(S)", "delta", "E(t|s2)-b"
    );
    for k in [1, 2, 5, 10, 34, 135, 500] {
        let sol = solve_delta(&model, k)?;
        let gap = blind_expectation(&sol.probs, &sol.expectations, sol.delta) - model.b;
        println!(
            "{k:>5} {:>8.4} {:>8.4} {:>8.4} {:>10.6} {:>10.1e}",
            sol.probs.p_r1(),
            sol.probs.p_r2(),
            sol.probs.p_s(),
            sol.delta,
            gap
        );
    }
    Ok(())
}
