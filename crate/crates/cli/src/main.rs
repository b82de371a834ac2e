//! `blowlab`: simulate blow-up of the gradient reaction-diffusion system
//! and judge the measured rates against the predicted exponents.

mod commands;

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
#[macro_export]
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Exit status for usage, parse and missing-input errors.
pub const EXIT_USAGE: u8 = 1;
/// Exit status of `check` when the hypotheses fail.
pub const EXIT_HYPOTHESES: u8 = 2;
/// Exit status when a verdict fails.
pub const EXIT_VERDICT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "blowlab",
    version,
    about = "Finite-time blow-up laboratory for u_t = Δu + |∇u|^q1 + v^p1, v_t = Δv + |∇v|^q2 + u^p2"
)]
struct Cli {
    /// Print one JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the exponents and whether the blow-up rate hypotheses hold.
    Check(ConfigArgs),
    /// Simulate to blow-up and write series, snapshots, fits and manifest.
    Run(RunArgs),
    /// Fit rate exponents on a prior run.
    Fit(FitArgs),
    /// Doubling-time analysis of a prior run.
    Doubling(PriorArgs),
    /// Trace Φ = M_u^{-1/2α}·M_v^{1/2β} over a prior run.
    Ratio(PriorArgs),
    /// Check rescaled frames of a prior run against a coarse-grid rerun.
    RescaleVerify(RescaleArgs),
    /// Homogeneous run against the closed-form ODE blow-up time.
    OracleOde(OdeArgs),
    /// Direct q = 2 scalar run against its log-transformed image.
    OracleTransform(TransformArgs),
    /// Half-max width of the q = 2 scalar solution near blow-up.
    BlowupSet(BlowupSetArgs),
    /// Run a one- or two-axis parameter sweep and write phase.csv.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct ConfigArgs {
    /// TOML configuration, or a manifest.json whose configuration is replayed.
    #[arg(long)]
    config: PathBuf,
    /// Override a numeric configuration key, e.g. `--set grid.nodes=1001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Directory for the output files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a verdict threshold, e.g. `--threshold exponent_tol=0.1`.
    #[arg(long = "threshold", value_name = "NAME=VALUE")]
    thresholds: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RunArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Skip series.svg.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PriorArgs {
    /// Directory holding a prior `run`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "threshold", value_name = "NAME=VALUE")]
    thresholds: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FitArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Lower end of the fit window in units of T_est (default from the run).
    #[arg(long)]
    window_lo: Option<f64>,
    /// Upper end of the fit window in units of T_est.
    #[arg(long)]
    window_hi: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RescaleArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Number of doubling levels to frame.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Skip the coarse-grid rerun and the residual comparison.
    #[arg(long)]
    no_coarse: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OdeArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Reaction cap used for this oracle. Forward Euler overshoots the ODE
    /// blow-up time by about the cap, so the default is tight.
    #[arg(long, default_value_t = 1e-4)]
    reaction_cap: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TransformArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Compare while max u stays below this value.
    #[arg(long, default_value_t = 6.0)]
    u_cap: f64,
    /// Compare every this many direct steps.
    #[arg(long, default_value_t = 50)]
    check_every: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ViaArg {
    Direct,
    Transform,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BlowupSetArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// How the q = 2 solution is computed.
    #[arg(long, value_enum, default_value_t = ViaArg::Transform)]
    via: ViaArg,
    /// With `--via transform`, stop once max u reaches this value.
    #[arg(long, default_value_t = 230.0)]
    u_stop: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Swept key and inclusive range, `key=lo:hi:step`; give once or twice.
    #[arg(long, value_name = "KEY=LO:HI:STEP", required = true)]
    vary: Vec<String>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::dispatch(&cli.command, cli.json) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = commands::exit_code_of(&e);
            if cli.json {
                out!(
                    "{}",
                    serde_json::json!({ "error": format!("{e:#}"), "exit_code": code })
                );
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}
