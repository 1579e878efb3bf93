//! `reskit`: batch analysis of superconducting resonator measurements.
//!
//! Exit status: 0 on success, 1 when a fit or analysis fails, 2 on bad input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "reskit", version, about = "Resonator fitting, loss budgets and quasiparticle analysis")]
pub struct Cli {
    /// Analysis configuration file.
    #[arg(long, global = true, env = "RESKIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// JSON report path; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tidy CSV with plot data or derived values.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one frequency sweep.
    FitS21(FitS21Args),
    /// Fit a set of sweeps at increasing power: Kerr shift and TLS loss.
    PowerSweep(PowerSweepArgs),
    /// Kinetic inductance per device and sheet inductance across strips.
    SheetInductance(SheetArgs),
    /// Effective junction-array parameters from a Kerr coefficient.
    Kerr(KerrArgs),
    /// Package and internal loss decomposition.
    LossBudget,
    /// Quasiparticle burst recovery and rates.
    QpBurst(QpArgs),
    /// Critical temperature from the frequency shift vs temperature.
    TcFit(TcArgs),
    /// Write a seeded synthetic measurement.
    Simulate(SimulateArgs),
    /// Merge JSON reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FitS21Args {
    /// Trace CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Cable delay: `auto`, `off`, or a value such as `55 ns`.
    #[arg(long)]
    pub delay: Option<String>,
    /// Source power (e.g. `-120 dBm`); the configured attenuation is applied.
    #[arg(long)]
    pub power: Option<String>,
    /// Monte-Carlo refits for parameter spread.
    #[arg(long)]
    pub mc_draws: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PowerSweepArgs {
    /// Trace CSVs, one per power.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub delay: Option<String>,
}

#[derive(Debug, Args)]
pub struct SheetArgs {
    /// CSV with `n_sq,l_k[,sigma]`; config devices are used otherwise.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KerrArgs {
    /// Measured Kerr coefficient, e.g. `-2.15 Hz`.
    #[arg(long, allow_hyphen_values = true)]
    pub kerr: Option<String>,
    #[arg(long)]
    pub c_s: Option<String>,
    #[arg(long)]
    pub l_k: Option<String>,
    #[arg(long)]
    pub l_strip: Option<String>,
    #[arg(long)]
    pub w_strip: Option<String>,
    #[arg(long)]
    pub thickness: Option<String>,
    #[arg(long, default_value = "1")]
    pub p_strip: String,
}

#[derive(Debug, Args)]
pub struct QpArgs {
    /// Zero-span trace CSV (`t_s,re,im`).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Sweep CSV used to fit the reference circle.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub f_r: Option<String>,
    #[arg(long)]
    pub q_int: Option<String>,
    #[arg(long)]
    pub q_c: Option<String>,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi: String,
    #[arg(long)]
    pub alpha: String,
    /// Steady-state density (upper bound).
    #[arg(long)]
    pub x0: Option<String>,
    /// Residual quality factor, with `--t-c`, to estimate `x0`.
    #[arg(long)]
    pub q_res: Option<String>,
    #[arg(long)]
    pub t_c: Option<String>,
    /// Excluded interval after the peak.
    #[arg(long, default_value = "50 us")]
    pub mask: String,
}

#[derive(Debug, Args)]
pub struct TcArgs {
    /// CSV with `t_k,delta_f_hz`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub f_r: String,
    #[arg(long)]
    pub alpha: String,
    /// Fit a constant frequency offset as well.
    #[arg(long)]
    pub offset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Trace,
    PowerSweep,
    Burst,
    TempSweep,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub kind: SimKind,
    /// Noise seed; overrides the scenario file. Defaults to 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the noise level of the built-in scenario.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Scenario JSON replacing the built-in parameters.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files to merge.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
