//! `xtalk`: batch front end for OTDR crosstalk simulation and analysis,
//! spectral scans, and switch crosstalk sweeps and planning.
//!
//! Every command writes its outputs plus a `<out>.manifest.json` run record.
//! Failures print one JSON object to standard error and exit with
//! 2 (input), 3 (data), 4 (parameter) or 5 (resource).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod failure;
pub mod manifest;
pub mod units;

use failure::{CliResult, Failure};

#[derive(Debug, Parser)]
#[command(name = "xtalk", version, about = "Fiber and switch crosstalk toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an OTDR tag stream.
    Simulate(SimulateArgs),
    /// Fold a tag stream, find crosstalk peaks, locate and size them.
    Analyze(AnalyzeArgs),
    /// Simulate a tunable-filter spectral scan.
    Scan(ScanArgs),
    /// Find leak lines in a spectral scan.
    ScanAnalyze(ScanAnalyzeArgs),
    /// Switch crosstalk sweeps and port planning.
    #[command(subcommand)]
    Switch(SwitchCommand),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Ignore unknown keys in JSON inputs instead of rejecting them.
    #[arg(long)]
    pub lax: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    /// Detector JSON; defaults apply when omitted.
    #[arg(long)]
    pub detector: Option<PathBuf>,
    #[arg(long, value_parser = units::seconds)]
    pub duration: f64,
    #[arg(long)]
    pub seed: u64,
    /// Tag file; a `.csv` extension selects CSV, anything else XTT1.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = xtalk_core::sim::SimOptions::DEFAULT_MAX_TAGS)]
    pub max_tags: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub tags: PathBuf,
    #[arg(long)]
    pub topology: PathBuf,
    /// Stream metadata; defaults to `<tags>.meta.json` when present.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, value_parser = units::picoseconds, default_value = "100ps")]
    pub bin: u64,
    #[arg(long, default_value_t = xtalk_core::tcspc::DEFAULT_K_SIGMA)]
    pub k_sigma: f64,
    #[arg(long, default_value_t = xtalk_core::tcspc::DEFAULT_MIN_SEPARATION_BINS)]
    pub min_separation: usize,
    /// Delay window `lo:hi`, for example `0:30us`.
    #[arg(long, value_parser = units::ps_window)]
    pub window: Option<(u64, u64)>,
    #[arg(long, value_parser = units::metres, default_value = "1m")]
    pub map_tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Histogram CSV.
    #[arg(long)]
    pub hist: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// JSON `{"lines": [{"wavelength_nm": .., "rate_photons_per_s": ..}]}`.
    #[arg(long)]
    pub lines: PathBuf,
    #[arg(long)]
    pub filter: Option<PathBuf>,
    #[arg(long)]
    pub detector: Option<PathBuf>,
    /// `lo:hi:step`.
    #[arg(long, value_parser = units::nm_grid, default_value = "1260nm:1360nm:0.1nm")]
    pub grid: units::Grid,
    #[arg(long, value_parser = units::seconds, default_value = "1s")]
    pub dwell: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScanAnalyzeArgs {
    #[arg(long)]
    pub scan: PathBuf,
    /// Dwell per grid point; defaults to the value in `<scan>.meta.json`.
    #[arg(long, value_parser = units::seconds)]
    pub dwell: Option<f64>,
    #[arg(long, default_value_t = xtalk_core::tcspc::DEFAULT_K_SIGMA)]
    pub k_sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 8)]
    pub n_in: u32,
    #[arg(long, default_value_t = 8)]
    pub n_out: u32,
    #[arg(long, value_parser = units::decibels, default_value = "-50dB", allow_hyphen_values = true)]
    pub c0: f64,
    #[arg(long, value_parser = units::decibels, default_value = "5dB")]
    pub beta_in: f64,
    #[arg(long, value_parser = units::decibels, default_value = "5dB")]
    pub beta_out: f64,
    #[arg(long, value_parser = units::nanometres, default_value = "1310nm")]
    pub reference: f64,
    /// dB per nm; default is +10 dB over 300 nm.
    #[arg(long, allow_hyphen_values = true)]
    pub slope: Option<f64>,
    #[arg(long, value_parser = units::decibels, default_value = "-120dB", allow_hyphen_values = true)]
    pub floor: f64,
    /// Measured CSV `a_in,a_out,v_in,v_out,lambda_nm,xtalk_db`; replaces the parametric model.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SwitchCommand {
    /// Crosstalk into one victim output over aggressor and victim routings.
    SweepConfig {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1)]
        aggressor_in: u32,
        /// Defaults to the first output port.
        #[arg(long)]
        victim_out: Option<u32>,
        #[arg(long, value_parser = units::nanometres, default_value = "1310nm")]
        wavelength: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Crosstalk of one aggressor/victim pair across wavelength.
    SweepWavelength {
        #[command(flatten)]
        model: ModelArgs,
        /// `aggressor,victim` paths as `in:out`.
        #[arg(long, default_value = "1:9,2:10")]
        config: String,
        #[arg(long, value_parser = units::nm_grid, default_value = "1260nm:1560nm:1nm")]
        grid: units::Grid,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Place classical and quantum channels to minimize worst-case leakage.
    Plan {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        classical: usize,
        #[arg(long)]
        quantum: usize,
        /// `O`, `C`, or `lo:hi:nominal` in nm.
        #[arg(long, default_value = "O")]
        classical_band: String,
        #[arg(long, default_value = "C")]
        quantum_band: String,
        #[arg(long, default_value_t = xtalk_core::switch::DEFAULT_EXHAUSTIVE_LIMIT)]
        exhaustive_limit: u128,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn jobs(&self) -> Option<usize> {
        match self {
            Command::Simulate(a) => a.common.jobs,
            Command::Analyze(a) => a.common.jobs,
            Command::Scan(a) => a.common.jobs,
            Command::ScanAnalyze(a) => a.common.jobs,
            Command::Switch(
                SwitchCommand::SweepConfig { common, .. }
                | SwitchCommand::SweepWavelength { common, .. }
                | SwitchCommand::Plan { common, .. },
            ) => common.jobs,
        }
    }
}

/// Execute a parsed command, returning the manifest it wrote.
pub fn execute(cli: Cli) -> CliResult<manifest::RunManifest> {
    match cli.command {
        Command::Simulate(a) => commands::otdr::simulate(a),
        Command::Analyze(a) => commands::otdr::analyze(a),
        Command::Scan(a) => commands::scan::scan(a),
        Command::ScanAnalyze(a) => commands::scan::scan_analyze(a),
        Command::Switch(s) => commands::switch::run(s),
    }
}

/// Parse arguments and run, printing a JSON summary or error. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let f = Failure::param(e.render().to_string().trim().to_string());
            eprintln!("{}", f.to_json());
            return f.exit_code;
        }
    };
    let jobs = cli.command.jobs();
    let result = match jobs {
        Some(0) => Err(Failure::param("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::new("E_RESOURCE", failure::EXIT_RESOURCE, format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| execute(cli))),
        None => execute(cli),
    };
    match result {
        Ok(m) => {
            let summary = serde_json::json!({
                "schema_version": manifest::SCHEMA_VERSION,
                "command": m.command,
                "outputs": m.outputs,
            });
            println!("{summary}");
            0
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.exit_code
        }
    }
}
