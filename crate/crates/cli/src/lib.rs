//! Command line front end for `onco-core`: scenario files, batch sweeps and
//! CSV/summary output.

pub mod config;
pub mod output;
pub mod sweep;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use onco_core::model::find_equilibria;
use onco_core::planner::ShootingCriteria;
use onco_core::scenario::{preset, run_scenario, ScenarioConfig, PRESETS};
use onco_core::PatientParams;
use thiserror::Error;

use crate::config::ConfigError;

/// Default output root when neither `--out` nor `ONCO_OUT_DIR` is set.
pub const DEFAULT_OUT_DIR: &str = "onco-out";
pub const OUT_DIR_ENV: &str = "ONCO_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "onco",
    version,
    about = "Tumor/immune therapy scenarios with model-free feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in scenarios.
    ListPresets,
    /// Run one scenario and write CSV, summary and manifest.
    Run {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output root; files go to `<out>/<scenario name>/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank ramp durations for a scenario.
    Sweep {
        #[arg(long)]
        preset: String,
        /// Comma separated ramp durations in days.
        #[arg(long, value_delimiter = ',', required = true)]
        ramp: Vec<f64>,
        #[arg(long)]
        max_total_u: Option<f64>,
        #[arg(long)]
        max_total_v: Option<f64>,
        #[arg(long)]
        max_peak_u: Option<f64>,
        #[arg(long)]
        max_peak_v: Option<f64>,
        /// Reject ramps whose open-loop plan misses the benign ball.
        #[arg(long)]
        require_benign: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the equilibria of a parameter preset.
    Equilibria {
        #[arg(long, default_value = onco_core::params::EQUILIBRIA_CALIBRATED)]
        preset: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Core(#[from] onco_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("simulation aborted: {0}")]
    Aborted(onco_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Core(_) => "model",
            CliError::Io(_) => "io",
            CliError::Aborted(_) => "abort",
        }
    }

    /// 2 for an aborted simulation, 1 for every other failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Aborted(_) => 2,
            _ => 1,
        }
    }

    /// One `key=value` line for stderr.
    pub fn machine_line(&self) -> String {
        format!("error kind={} message={:?}", self.kind(), self.to_string())
    }
}

fn out_root(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn load_config(
    preset_name: Option<String>,
    path: Option<PathBuf>,
) -> Result<ScenarioConfig, CliError> {
    match (preset_name, path) {
        (Some(name), _) => preset(&name).map_err(|e| CliError::Config {
            path: name,
            source: e.into(),
        }),
        (None, Some(path)) => {
            let shown = path.display().to_string();
            let text = fs::read_to_string(&path).map_err(|e| CliError::Config {
                path: shown.clone(),
                source: ConfigError::Syntax {
                    line: 0,
                    message: e.to_string(),
                },
            })?;
            config::parse(&text).map_err(|source| CliError::Config {
                path: shown,
                source,
            })
        }
        (None, None) => Err(CliError::Usage(
            "one of --preset or --config is required".to_string(),
        )),
    }
}

fn run_one(cfg: &ScenarioConfig, root: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = config::serialize(cfg);
    let hash = config::config_hash(cfg);
    let start = Instant::now();
    let rec = run_scenario(cfg)?;
    let manifest = output::write_run(
        &root.join(&cfg.name),
        &cfg.name,
        &text,
        &hash,
        &rec,
        start.elapsed(),
    )?;
    write!(stdout, "{}", manifest.text())?;
    match rec.abort {
        Some(e) => Err(CliError::Aborted(e)),
        None => Ok(()),
    }
}

fn equilibria(preset_name: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    let p = PatientParams::preset(preset_name)?;
    let eq = find_equilibria(&p)?;
    writeln!(stdout, "kind,x,y,residual,stability,eig1_re,eig2_re,eig_im")?;
    for (kind, e) in ["benign", "saddle", "malignant"].iter().zip(eq.as_array()) {
        let ev = e.eigenvalues;
        writeln!(
            stdout,
            "{kind},{},{},{:e},{},{},{},{}",
            e.state.x,
            e.state.y,
            e.residual,
            e.stability.label(),
            ev.re[0],
            ev.re[1],
            ev.im
        )?;
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::ListPresets => {
            for name in PRESETS {
                writeln!(stdout, "{name}")?;
            }
            Ok(())
        }
        Command::Run {
            preset,
            config,
            out,
        } => {
            let cfg = load_config(preset, config)?;
            run_one(&cfg, &out_root(out), stdout)
        }
        Command::Sweep {
            preset,
            ramp,
            max_total_u,
            max_total_v,
            max_peak_u,
            max_peak_v,
            require_benign,
            out,
        } => {
            let cfg = load_config(Some(preset), None)?;
            let criteria = ShootingCriteria {
                max_total_u,
                max_total_v,
                max_peak_u,
                max_peak_v,
                require_benign_arrival: require_benign,
            };
            let entries = sweep::sweep(&cfg, &ramp, &criteria)?;
            let table = sweep::ranking_csv(&entries);
            let dir = out_root(out).join(format!("{}-sweep", cfg.name));
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("ranking.csv"), &table)?;
            write!(stdout, "{table}")?;
            Ok(())
        }
        Command::Equilibria { preset } => equilibria(&preset, stdout),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{}", CliError::Usage(e.kind().to_string()).machine_line());
            return 1;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            e.exit_code()
        }
    }
}
