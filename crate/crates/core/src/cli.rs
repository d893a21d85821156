//! The `innkeeper` command line: `calibrate`, `simulate`, `audit`, `sweep`.
//!
//! Every flag has a JSON config key of the same name with `-` replaced by
//! `_` (`--p-h` is `p_h`). Values are resolved as: flag, then `--config`
//! file, then built-in default. The output directory falls back to
//! `INNKEEPER_OUT_DIR` and then the working directory.
//!
//! Exit codes: 0 success, 1 usage or validation error (or a failed audit),
//! 2 degenerate calibration, 3 I/O failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{DeviationRule, ProfileConfig, StrategyKind, StrategyProfile};
use crate::calibration::{self, Calibration};
use crate::engine::{self, RunConfig};
use crate::error::Error;
use crate::harness::{self, Check, MonteCarloConfig, StateSampling, Tolerances, Verdict};
use crate::model::{ModelParams, WorldState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const OUT_DIR_ENV: &str = "INNKEEPER_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "innkeeper",
    version,
    about = "Calibrate, simulate and audit the innkeeper mediator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute K, δ, n̂, N′ and the subsidy; print them as JSON.
    Calibrate(Flags),
    /// Run one seeded simulation; write trace and summary.
    Simulate(Flags),
    /// Monte Carlo audit of budget, ε-optimality and incentive compatibility.
    Audit(Flags),
    /// Calibrate (and optionally audit) over an (eps, beta) grid.
    Sweep(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Prior,
    Stratified,
}

/// Flags shared by every subcommand. Each one is optional so that unset
/// flags fall through to the config file.
#[derive(Debug, Clone, Default, Args)]
struct Flags {
    /// JSON file whose keys mirror these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "p-h")]
    p_h: Option<f64>,
    #[arg(long = "p-l")]
    p_l: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Override the calibrated sample size K.
    #[arg(long)]
    k: Option<u64>,
    /// Override the calibrated coin bias δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Population N (default N′).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long = "forced-coin", value_parser = parse_bit)]
    forced_coin: Option<bool>,
    /// Comma-separated 0/1 risky draws for the first stages.
    #[arg(long = "forced-rewards", value_delimiter = ',', value_parser = parse_bit)]
    forced_rewards: Option<Vec<bool>>,
    #[arg(long = "forced-state", value_parser = parse_state)]
    forced_state: Option<WorldState>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<StrategyKind>,
    #[arg(long = "deviation-stages", value_delimiter = ',')]
    deviation_stages: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_rule)]
    rule: Option<DeviationRule>,
    #[arg(long, value_enum)]
    sampling: Option<Sampling>,
    #[arg(long = "stage-bucket")]
    stage_bucket: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Treat inconclusive audit checks as failures.
    #[arg(long)]
    strict: bool,
    /// Also run the sample-size and switching-horizon checks.
    #[arg(long)]
    bounds: bool,
    /// Confidence multiplier for statistical checks.
    #[arg(long)]
    z: Option<f64>,
    #[arg(long = "min-count")]
    min_count: Option<u64>,
    #[arg(long = "eps-grid", value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long = "beta-grid", value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
}

/// A `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    q: Option<f64>,
    p_h: Option<f64>,
    p_l: Option<f64>,
    b: Option<f64>,
    eps: Option<f64>,
    beta: Option<f64>,
    k: Option<u64>,
    delta: Option<f64>,
    n: Option<u64>,
    seed: Option<u64>,
    runs: Option<u64>,
    forced_coin: Option<Bit>,
    forced_rewards: Option<Vec<Bit>>,
    forced_state: Option<WorldState>,
    strategy: Option<StrategyKind>,
    deviation_stages: Option<Vec<u64>>,
    rule: Option<DeviationRule>,
    sampling: Option<Sampling>,
    stage_bucket: Option<u64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    strict: Option<bool>,
    bounds: Option<bool>,
    z: Option<f64>,
    min_count: Option<u64>,
    eps_grid: Option<Vec<f64>>,
    beta_grid: Option<Vec<f64>>,
}

/// 0/1 or false/true.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Bit {
    Bool(bool),
    Int(u8),
}

impl Bit {
    fn get(self) -> Result<bool, String> {
        match self {
            Bit::Bool(b) => Ok(b),
            Bit::Int(0) => Ok(false),
            Bit::Int(1) => Ok(true),
            Bit::Int(n) => Err(format!("expected 0 or 1, got {n}")),
        }
    }
}

/// Fully resolved settings; echoed into every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub command: String,
    pub q: f64,
    pub p_h: f64,
    pub p_l: f64,
    pub b: f64,
    pub eps: f64,
    pub beta: f64,
    pub k: Option<u64>,
    pub delta: Option<f64>,
    pub n: Option<u64>,
    pub seed: u64,
    pub runs: u64,
    pub forced_coin: Option<bool>,
    pub forced_rewards: Option<Vec<bool>>,
    pub forced_state: Option<WorldState>,
    pub profile: ProfileConfig,
    pub sampling: Sampling,
    pub stage_bucket: Option<u64>,
    pub out: PathBuf,
    pub format: Option<Format>,
    pub strict: bool,
    pub bounds: bool,
    pub z: f64,
    pub min_count: u64,
    pub eps_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
}

impl Resolved {
    fn model(&self) -> ModelParams {
        ModelParams::new(self.q, self.p_h, self.p_l, self.b)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            z: self.z,
            min_count: self.min_count,
        }
    }
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::DegenerateDelta(_) => EXIT_DEGENERATE,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

fn parse_bit(s: &str) -> Result<bool, String> {
    match s.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(format!("expected 0 or 1, got {other:?}")),
    }
}

fn parse_state(s: &str) -> Result<WorldState, String> {
    match s.trim() {
        "H" | "h" => Ok(WorldState::H),
        "L" | "l" => Ok(WorldState::L),
        other => Err(format!("expected H or L, got {other:?}")),
    }
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| format!("expected compliant, deviant or myopic, got {s:?}"))
}

fn parse_rule(s: &str) -> Result<DeviationRule, String> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| format!("expected flip, always_s or always_r, got {s:?}"))
}

fn resolve(command: &str, flags: Flags) -> Result<Resolved, Failure> {
    let file = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let forced_coin = match flags.forced_coin {
        Some(c) => Some(c),
        None => file
            .forced_coin
            .map(Bit::get)
            .transpose()
            .map_err(Failure::invalid)?,
    };
    let forced_rewards = match flags.forced_rewards {
        Some(r) => Some(r),
        None => file
            .forced_rewards
            .map(|v| v.into_iter().map(Bit::get).collect::<Result<Vec<_>, _>>())
            .transpose()
            .map_err(Failure::invalid)?,
    };
    let out = flags
        .out
        .or(file.out)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let r = Resolved {
        command: command.to_string(),
        q: flags.q.or(file.q).unwrap_or(0.5),
        p_h: flags.p_h.or(file.p_h).unwrap_or(0.8),
        p_l: flags.p_l.or(file.p_l).unwrap_or(0.3),
        b: flags.b.or(file.b).unwrap_or(0.5),
        eps: flags.eps.or(file.eps).unwrap_or(0.1),
        beta: flags.beta.or(file.beta).unwrap_or(1.0),
        k: flags.k.or(file.k),
        delta: flags.delta.or(file.delta),
        n: flags.n.or(file.n),
        seed: flags.seed.or(file.seed).unwrap_or(0),
        runs: flags
            .runs
            .or(file.runs)
            .unwrap_or(if command == "sweep" { 0 } else { 2000 }),
        forced_coin,
        forced_rewards,
        forced_state: flags.forced_state.or(file.forced_state),
        profile: ProfileConfig {
            strategy: flags
                .strategy
                .or(file.strategy)
                .unwrap_or(StrategyKind::Compliant),
            deviation_stages: flags
                .deviation_stages
                .or(file.deviation_stages)
                .unwrap_or_default(),
            rule: flags.rule.or(file.rule).unwrap_or_default(),
        },
        sampling: flags.sampling.or(file.sampling).unwrap_or(Sampling::Prior),
        stage_bucket: flags.stage_bucket.or(file.stage_bucket),
        out,
        format: flags.format.or(file.format),
        strict: flags.strict || file.strict.unwrap_or(false),
        bounds: flags.bounds || file.bounds.unwrap_or(false),
        z: flags.z.or(file.z).unwrap_or(3.0),
        min_count: flags.min_count.or(file.min_count).unwrap_or(30),
        eps_grid: flags
            .eps_grid
            .or(file.eps_grid)
            .unwrap_or_else(|| vec![0.1]),
        beta_grid: flags
            .beta_grid
            .or(file.beta_grid)
            .unwrap_or_else(|| vec![1.0]),
    };
    if !(r.z > 0.0 && r.z.is_finite()) {
        return Err(Failure::invalid(format!("z must be positive, got {}", r.z)));
    }
    if r.stage_bucket == Some(0) {
        return Err(Failure::invalid("stage_bucket must be at least 1"));
    }
    Ok(r)
}

/// Calibration honouring the K and δ overrides.
fn calibration_for(r: &Resolved, eps: f64, beta: f64) -> Result<Calibration, Failure> {
    let model = r.model();
    let mut cal = match r.k {
        Some(k) => calibration::calibrate_with_k(&model, k, eps, beta)?,
        None => calibration::calibrate(&model, eps, beta)?,
    };
    if let Some(delta) = r.delta {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Failure::invalid(format!("delta {delta} outside [0, 1]")));
        }
        cal.params.delta = delta;
    }
    Ok(cal)
}

fn run_config(r: &Resolved, cal: &Calibration) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::new(
        r.model(),
        cal.params,
        r.n.unwrap_or(cal.params.n_prime),
        r.seed,
    );
    cfg.profile = StrategyProfile::from(r.profile.clone());
    cfg.forced_state = r.forced_state;
    cfg.forced_rewards = r.forced_rewards.clone();
    cfg.forced_coin = r.forced_coin;
    cfg.validate()?;
    Ok(cfg)
}

fn meta(r: &Resolved) -> Value {
    json!({ "version": VERSION, "config": r })
}

/// `payload` with a leading `meta` entry.
fn with_meta(r: &Resolved, payload: impl Serialize) -> Result<Value, Failure> {
    let mut obj = serde_json::Map::new();
    obj.insert("meta".into(), meta(r));
    match serde_json::to_value(payload).map_err(Error::from)? {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("data".into(), other);
        }
    }
    Ok(Value::Object(obj))
}

/// `# innkeeper <version>` and `# config: <json>` lines.
fn csv_header(r: &Resolved) -> Vec<u8> {
    let config = serde_json::to_string(r).expect("resolved config serializes");
    format!("# innkeeper {VERSION}\n# config: {config}\n").into_bytes()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn cmd_calibrate(r: &Resolved, out: &mut dyn Write) -> Result<i32, Failure> {
    let cal = calibration_for(r, r.eps, r.beta)?;
    let doc = with_meta(r, cal)?;
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
    writeln!(out, "{text}").map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    if r.format.is_some() || r.out != Path::new(".") {
        ensure_dir(&r.out)?;
        match r.format.unwrap_or(Format::Json) {
            Format::Json => write_json(&r.out.join("calibration.json"), &doc)?,
            Format::Csv => {
                let p = &cal.params;
                let mut bytes = csv_header(r);
                bytes.extend_from_slice(b"k,delta,n_hat,n_prime,beta,subsidy,eps\n");
                bytes.extend(
                    format!(
                        "{},{},{},{},{},{},{}\n",
                        p.k, p.delta, p.n_hat, p.n_prime, p.beta, p.subsidy, p.eps
                    )
                    .into_bytes(),
                );
                write_file(&r.out.join("calibration.csv"), &bytes)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(r: &Resolved, out: &mut dyn Write) -> Result<i32, Failure> {
    let cal = calibration_for(r, r.eps, r.beta)?;
    let cfg = run_config(r, &cal)?;
    let trace = engine::run(&cfg)?;
    ensure_dir(&r.out)?;
    let trace_path = match r.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut bytes = csv_header(r);
            trace.write_csv(0, &mut bytes)?;
            let path = r.out.join("trace.csv");
            write_file(&path, &bytes)?;
            path
        }
        Format::Json => {
            let path = r.out.join("trace.json");
            write_json(&path, &with_meta(r, json!({ "records": trace.records }))?)?;
            path
        }
    };
    let summary = json!({
        "world_state": trace.world_state,
        "coin": trace.coin,
        "summary": trace.summary,
    });
    let summary_path = r.out.join("summary.json");
    write_json(&summary_path, &with_meta(r, summary)?)?;
    let s = &trace.summary;
    writeln!(
        out,
        "state {} coin {} mean reward {:.6} promised subsidy {} exploit {:?}",
        trace.world_state,
        trace
            .coin
            .map_or("-".to_string(), |c| u8::from(c).to_string()),
        s.mean_reward,
        s.total_subsidy_promised,
        s.exploit_value
    )
    .and_then(|_| {
        writeln!(
            out,
            "wrote {} and {}",
            trace_path.display(),
            summary_path.display()
        )
    })
    .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(EXIT_OK)
}

fn monte_carlo_config(r: &Resolved, cfg: RunConfig) -> MonteCarloConfig {
    let mut mc = MonteCarloConfig::new(cfg, r.runs, r.seed);
    mc.sampling = match (r.forced_state, r.sampling) {
        (Some(w), _) => StateSampling::Forced(w),
        (None, Sampling::Stratified) => StateSampling::Stratified,
        (None, Sampling::Prior) => StateSampling::Prior,
    };
    mc.stage_bucket = r.stage_bucket;
    mc
}

fn all_pass(checks: &[Check], strict: bool) -> bool {
    checks.iter().all(|c| match c.verdict {
        Verdict::Pass => true,
        Verdict::Fail => false,
        Verdict::Inconclusive => !strict,
    })
}

fn cmd_audit(r: &Resolved, out: &mut dyn Write) -> Result<i32, Failure> {
    if r.runs == 0 {
        return Err(Failure::invalid("runs must be at least 1"));
    }
    let cal = calibration_for(r, r.eps, r.beta)?;
    let cfg = run_config(r, &cal)?;
    let tol = r.tolerances();
    let report = harness::monte_carlo(&monte_carlo_config(r, cfg))?;
    let mut checks = harness::audit_checks(&report, &tol);
    let bounds = if r.bounds {
        let lr = harness::bound_checks(&r.model(), &cal.params, r.runs, r.seed, &tol)?;
        checks.extend(lr.checks.iter().cloned());
        Some(lr)
    } else {
        None
    };
    ensure_dir(&r.out)?;
    let doc = with_meta(
        r,
        json!({ "report": report, "checks": checks, "bounds": bounds }),
    )?;
    write_json(&r.out.join("audit.json"), &doc)?;
    if r.format.unwrap_or(Format::Csv) == Format::Csv {
        let mut bytes = csv_header(r);
        report.write_classes_csv(&mut bytes)?;
        write_file(&r.out.join("classes.csv"), &bytes)?;
    }
    let mut text = String::new();
    for c in &checks {
        text.push_str(&c.line());
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(if all_pass(&checks, r.strict) {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "eps",
    "beta",
    "k",
    "delta",
    "n_hat",
    "n_prime",
    "subsidy",
    "population",
    "runs",
    "budget",
    "epsilon_opt_h",
    "epsilon_opt_l",
    "ic",
    "switching",
    "error",
];

fn verdict_str(checks: &[&Check], strict: bool) -> &'static str {
    if checks.is_empty() {
        return "SKIP";
    }
    let owned: Vec<Check> = checks.iter().map(|c| (*c).clone()).collect();
    if all_pass(&owned, strict) {
        "PASS"
    } else {
        "FAIL"
    }
}

fn sweep_row(r: &Resolved, eps: f64, beta: f64) -> Result<Vec<String>, Failure> {
    let cal = calibration_for(r, eps, beta)?;
    let p = cal.params;
    let cfg = run_config(r, &cal)?;
    let population = cfg.population;
    let mut row = vec![
        eps.to_string(),
        beta.to_string(),
        p.k.to_string(),
        p.delta.to_string(),
        p.n_hat.to_string(),
        p.n_prime.to_string(),
        p.subsidy.to_string(),
        population.to_string(),
        r.runs.to_string(),
    ];
    let checks = if r.runs > 0 {
        let report = harness::monte_carlo(&monte_carlo_config(r, cfg))?;
        harness::audit_checks(&report, &r.tolerances())
    } else {
        Vec::new()
    };
    let pick = |prefix: &str| {
        checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .collect::<Vec<_>>()
    };
    let eps_h: Vec<_> = pick("epsilon-optimality H");
    let eps_l: Vec<_> = pick("epsilon-optimality L");
    let ic: Vec<_> = checks
        .iter()
        .filter(|c| c.name.starts_with("ic ") || c.name.contains("E(t|"))
        .collect();
    let mut switching = pick("switch");
    switching.extend(pick("blind"));
    for group in [pick("budget"), eps_h, eps_l, ic, switching] {
        row.push(verdict_str(&group, r.strict).to_string());
    }
    row.push(String::new());
    Ok(row)
}

fn cmd_sweep(r: &Resolved, out: &mut dyn Write) -> Result<i32, Failure> {
    if r.eps_grid.is_empty() || r.beta_grid.is_empty() {
        return Err(Failure::invalid("eps_grid and beta_grid must be non-empty"));
    }
    let mut rows = Vec::new();
    for &eps in &r.eps_grid {
        for &beta in &r.beta_grid {
            let row = match sweep_row(r, eps, beta) {
                Ok(row) => row,
                Err(f) if f.code == EXIT_IO => return Err(f),
                Err(f) => {
                    let mut row = vec![eps.to_string(), beta.to_string()];
                    row.resize(SWEEP_COLUMNS.len() - 1, String::new());
                    row.push(f.message);
                    row
                }
            };
            rows.push(row);
        }
    }
    ensure_dir(&r.out)?;
    match r.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut bytes = csv_header(r);
            {
                let mut w = csv::Writer::from_writer(&mut bytes);
                w.write_record(SWEEP_COLUMNS).map_err(Error::from)?;
                for row in &rows {
                    w.write_record(row).map_err(Error::from)?;
                }
                w.flush().map_err(Error::from)?;
            }
            write_file(&r.out.join("sweep.csv"), &bytes)?;
        }
        Format::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let m: serde_json::Map<String, Value> = SWEEP_COLUMNS
                        .iter()
                        .zip(row)
                        .map(|(k, v)| (k.to_string(), Value::String(v.clone())))
                        .collect();
                    Value::Object(m)
                })
                .collect();
            write_json(
                &r.out.join("sweep.json"),
                &with_meta(r, json!({ "rows": table }))?,
            )?;
        }
    }
    let mut text = String::new();
    for row in &rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command,
/// writing normal output to `out` and diagnostics to `err`. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let (name, flags) = match cli.command {
        Command::Calibrate(f) => ("calibrate", f),
        Command::Simulate(f) => ("simulate", f),
        Command::Audit(f) => ("audit", f),
        Command::Sweep(f) => ("sweep", f),
    };
    let result = resolve(name, flags).and_then(|r| match name {
        "calibrate" => cmd_calibrate(&r, out),
        "simulate" => cmd_simulate(&r, out),
        "audit" => cmd_audit(&r, out),
        _ => cmd_sweep(&r, out),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
