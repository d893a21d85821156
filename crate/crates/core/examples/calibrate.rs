//! Mechanism constants for a model, printed as JSON.
//!
//! `cargo run --example calibrate -- 0.5 0.8 0.3 0.5 0.1 1`

use innkeeper::calibration::calibrate;
use innkeeper::model::ModelParams;

fn main() -> innkeeper::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let [q, p_h, p_l, b, eps, beta] = match args.as_slice() {
        [] => [0.5, 0.8, 0.3, 0.5, 0.1, 1.0],
        &[q, p_h, p_l, b, eps, beta] => [q, p_h, p_l, b, eps, beta],
        _ => panic!("usage: calibrate q p_h p_l b eps beta"),
    };
    let cal = calibrate(&ModelParams::new(q, p_h, p_l, b), eps, beta)?;
    println!("{}", serde_json::to_string_pretty(&cal)?);
    Ok(())
}
