//! `elq`: run scenarios, optimize pulses and analyze series from the
//! command line. Errors go to stderr as one JSON object.

mod commands;
mod output;
mod plot;
mod state_spec;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "elq", version, about = "Binomial-code logical qubit simulations")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed recorded in the outputs; also seeds the GRAPE start pulse
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Override the cavity Fock cutoff
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overwrite outputs produced by a different config
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one or more scenario files
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// GRAPE pulse CSV used as the recovery gate on node A
        #[arg(long)]
        pulse_a: Option<PathBuf>,
        #[arg(long)]
        pulse_b: Option<PathBuf>,
    },
    /// Optimize a recovery pulse
    Grape { problem: PathBuf },
    /// Wigner function of a single-cavity state, e.g. `logical:+i` or `fock:3`
    Wigner {
        state: String,
        /// Half-width of the square grid in |β|
        #[arg(long, default_value_t = 2.5)]
        extent: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Bell signal versus analysis angle after the scenario's cycles
    BellSweep {
        scenario: PathBuf,
        #[arg(long, default_value_t = 33)]
        points: usize,
    },
    /// Error-budget table (`builtin` or a device TOML path)
    Budget {
        params: String,
        #[arg(long, default_value_t = 50.0)]
        tau: f64,
    },
    /// Fit columns of a series CSV
    Fit {
        csv: PathBuf,
        /// `exp` or `damped-sinusoid`
        #[arg(long, default_value = "exp")]
        model: String,
        #[arg(long, default_value_t = 0.25)]
        floor: f64,
        /// cycle period for the depolarizing cross-check, µs
        #[arg(long)]
        tau: Option<f64>,
        /// columns to fit (default: all)
        #[arg(long = "column")]
        columns: Vec<String>,
    },
}

#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
    extra: Map<String, Value>,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), extra: Map::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.into(), value.into());
        self
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("io", e.to_string()).with("path", path.display().to_string())
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("error".into(), json!(self.kind));
        m.insert("message".into(), json!(self.message));
        m.extend(self.extra.clone());
        Value::Object(m)
    }
}

impl From<elq_core::Error> for CliError {
    fn from(e: elq_core::Error) -> Self {
        use elq_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config { field, .. } => CliError::new("config", msg).with("field", field),
            E::DegeneratePostselection { cycle } => CliError::new("runtime", msg).with("cycle", cycle),
            E::Integration { t, .. } => CliError::new("runtime", msg).with("t_us", t),
            E::Fit { .. } => CliError::new("fit", msg),
            _ => CliError::new("runtime", msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::new("usage", e.to_string().trim_end().to_string())),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return fail(CliError::new("usage", e.to_string())),
    };
    let g = &cli.global;
    let res = pool.install(|| match &cli.command {
        Command::Run { scenarios, pulse_a, pulse_b } => commands::run(g, scenarios, pulse_a.as_deref(), pulse_b.as_deref()),
        Command::Grape { problem } => commands::grape(g, problem),
        Command::Wigner { state, extent, points } => commands::wigner(g, state, *extent, *points),
        Command::BellSweep { scenario, points } => commands::bell_sweep(g, scenario, *points),
        Command::Budget { params, tau } => commands::budget(params, *tau),
        Command::Fit { csv, model, floor, tau, columns } => commands::fit(csv, model, *floor, *tau, columns),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(if e.kind == "usage" { 2 } else { 1 })
}
