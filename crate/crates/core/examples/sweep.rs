//! Calibration constants over an (eps, beta) grid, through the CLI entry
//! point. Output goes to a temporary directory and is echoed here.

fn main() {
    let dir = std::env::temp_dir().join("innkeeper-sweep-example");
    let out = dir.to_str().expect("utf-8 temp path").to_string();
    let args = [
        "innkeeper",
        "sweep",
        "--eps-grid",
        "0.1,0.2,0.4",
        "--beta-grid",
        "0.5,1,2",
        "--runs",
        "0",
        "--out",
        &out,
    ];
    let code = innkeeper::cli::run(args, &mut std::io::stdout(), &mut std::io::stderr());
    println!("exit {code}, table in {}", dir.join("sweep.csv").display());
}
