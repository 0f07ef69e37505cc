//! Command-line front end: argument parsing, config merging, run directories and
//! the command implementations.

use std::ffi::OsString;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hapnav_core::config::Config;
use hapnav_core::error::ConfigError;

mod commands;
pub mod run;

pub use commands::{execute, Outputs};

/// Exit code for usage errors (bad flags, missing config).
pub const EXIT_USAGE: i32 = 2;
/// Exit code for runtime failures.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hapnav_core::Error),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Io { .. } => "io",
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Core(e.into())
    }
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}
core_from!(hapnav_core::error::TaskError, hapnav_core::error::TrainError, hapnav_core::error::PolicyError, hapnav_core::error::ClothError);

#[derive(Debug, Parser)]
#[command(name = "hapnav", version, about = "Haptic navigation through simulated cloth")]
pub struct Cli {
    /// Worker threads for trials and rollouts (default: all cores).
    #[arg(long, global = true, env = "HAPNAV_WORKERS")]
    pub workers: Option<usize>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file; a run manifest works too.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a config key, e.g. `--set cloth.friction=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Parent of the timestamped run directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Write into exactly this directory instead of a timestamped one.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Train a sphere policy on the funnel task.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a policy's mean action on held-out funnel starts.
    EvalFunnel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run a campaign of dressing trials with one controller.
    RunTask {
        #[command(flatten)]
        common: Common,
        /// `proposed`, `baseline1` or `baseline2`.
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        friction: Option<f64>,
        /// Also write the per-step trajectory of this trial index.
        #[arg(long)]
        trajectory: Option<usize>,
    },
    /// Success rate against friction for all three controllers.
    SweepFriction {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        proposed_policy: Option<PathBuf>,
        #[arg(long)]
        baseline2_policy: Option<PathBuf>,
        #[arg(long)]
        max_friction: Option<f64>,
        #[arg(long)]
        coefficients: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Estimate the tearing force of a task's cloth with the probe protocol.
    CalibrateFmax {
        #[command(flatten)]
        common: Common,
    },
    /// Write a task's garment as OBJ plus loop sidecar.
    ExportMesh {
        #[command(flatten)]
        common: Common,
        /// Seconds of settling under gravity before export.
        #[arg(long)]
        settle: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::EvalFunnel { .. } => "eval-funnel",
            Command::RunTask { .. } => "run-task",
            Command::SweepFriction { .. } => "sweep-friction",
            Command::CalibrateFmax { .. } => "calibrate-fmax",
            Command::ExportMesh { .. } => "export-mesh",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Train { common }
            | Command::EvalFunnel { common, .. }
            | Command::RunTask { common, .. }
            | Command::SweepFriction { common, .. }
            | Command::CalibrateFmax { common }
            | Command::ExportMesh { common, .. } => common,
        }
    }

    /// Command-specific flags as config keys; they override file values and `--set`.
    fn flag_keys(&self) -> Result<Vec<(&'static str, String)>, CliError> {
        let abs = |p: &PathBuf| -> Result<String, CliError> {
            Ok(std::path::absolute(p).map_err(|e| CliError::io(p, e))?.to_string_lossy().into_owned())
        };
        let mut kv = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k, v));
            }
        };
        match self {
            Command::Train { .. } | Command::CalibrateFmax { .. } => {}
            Command::EvalFunnel { policy, episodes, .. } => {
                put("run.policy", policy.as_ref().map(abs).transpose()?);
                put("run.episodes", episodes.map(|v| v.to_string()));
            }
            Command::RunTask { controller, policy, trials, friction, trajectory, .. } => {
                put("run.controller", controller.clone());
                put("run.policy", policy.as_ref().map(abs).transpose()?);
                put("run.trials", trials.map(|v| v.to_string()));
                put("cloth.friction", friction.map(|v| v.to_string()));
                put("run.trajectory", trajectory.map(|v| v.to_string()));
            }
            Command::SweepFriction { proposed_policy, baseline2_policy, max_friction, coefficients, trials, .. } => {
                put("run.proposed_policy", proposed_policy.as_ref().map(abs).transpose()?);
                put("run.baseline2_policy", baseline2_policy.as_ref().map(abs).transpose()?);
                put("run.max_friction", max_friction.map(|v| v.to_string()));
                put("run.coefficients", coefficients.map(|v| v.to_string()));
                put("run.trials", trials.map(|v| v.to_string()));
            }
            Command::ExportMesh { settle, .. } => put("run.settle", settle.map(|v| v.to_string())),
        }
        Ok(kv)
    }
}

/// Reads the config file and applies `--set`, then dedicated flags, then `--seed`.
/// Relative `run.*` paths from the file are resolved against the file's directory.
pub fn merged_config(cmd: &Command) -> Result<(Config, PathBuf), CliError> {
    let common = cmd.common();
    let mut cfg = Config::load(&common.config)?;
    let base_dir = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    for key in ["run.policy", "run.proposed_policy", "run.baseline2_policy"] {
        if let Some(v) = cfg.raw(key).map(str::to_string) {
            let p = PathBuf::from(&v);
            if p.is_relative() {
                cfg.set(key, base_dir.join(p).to_string_lossy());
            }
        }
    }
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    for (k, v) in cmd.flag_keys()? {
        cfg.set(k, v);
    }
    if let Some(s) = common.seed {
        cfg.set("seed", s);
    }
    Ok((cfg, base_dir))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.workers {
        hapnav_core::par::init_workers(n);
    }
    if !cli.command.common().config.is_file() {
        eprintln!("error[usage]: config file {} not found", cli.command.common().config.display());
        eprintln!("usage: hapnav {} --config <FILE> [OPTIONS]", cli.command.name());
        return EXIT_USAGE;
    }
    match execute(&cli.command) {
        Ok(out) => {
            println!("run directory: {}", out.run_dir.display());
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            EXIT_FAILURE
        }
    }
}
