//! Command-line experiments for the `cvswap` simulator.
//!
//! `cvswap <experiment> [flags]` resolves a config (file, then flags),
//! runs the experiment on a worker pool and writes a CSV or JSON table plus
//! a `<out>.manifest.json` run manifest.

pub mod config;
pub mod experiments;
pub mod table;

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use config::{ConfigError, Experiment, ExperimentConfig, Settings};

/// Overrides the worker count from the config.
pub const WORKERS_ENV: &str = "CVSWAP_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_UNKNOWN_EXPERIMENT: i32 = 2;
pub const EXIT_INVALID_CONFIG: i32 = 3;
pub const EXIT_UNWRITABLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cvswap", version, about = "Continuous-variable entanglement swapping experiments")]
struct Args {
    /// swap-check, fig2a, fig2b, network-sweep, fig2c, fig2d or ghz-limit
    experiment: Option<String>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Data file; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// angular or ordinary
    #[arg(long)]
    kappa_convention: Option<String>,
    /// on or off
    #[arg(long)]
    local_preprocessing: Option<String>,
    #[arg(long)]
    n_max: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    x_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    /// Asymmetry grid for fig2b.
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    /// Detuning grid in units of the mechanical frequency.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Effective coupling grid, ordinary frequency in Hz.
    #[arg(long, allow_hyphen_values = true)]
    g_eff: Option<String>,
    /// Bath temperature grid in K.
    #[arg(long, allow_hyphen_values = true)]
    temp: Option<String>,
}

impl Args {
    fn flag_settings(&self) -> Result<Settings, ConfigError> {
        let mut s = Settings::new();
        let flags = [
            ("seed", &self.seed),
            ("out", &self.out),
            ("format", &self.format),
            ("kappa_convention", &self.kappa_convention),
            ("local_preprocessing", &self.local_preprocessing),
            ("n_max", &self.n_max),
            ("samples", &self.samples),
            ("x_max", &self.x_max),
            ("mu", &self.mu),
            ("eta", &self.eta),
            ("omega", &self.omega),
            ("n", &self.n),
            ("d", &self.d),
            ("delta", &self.delta),
            ("g_eff", &self.g_eff),
            ("temp", &self.temp),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v.as_str())?;
            }
        }
        Ok(s)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    workers: usize,
    rows: usize,
    passed: bool,
    summary: &'a str,
    wall_time_s: f64,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("cvswap: {msg}");
    code
}

fn resolve(args: &Args) -> Result<ExperimentConfig, (i32, String)> {
    let invalid = |e: ConfigError| match e {
        ConfigError::UnknownExperiment(_) => (EXIT_UNKNOWN_EXPERIMENT, e.to_string()),
        ConfigError::Invalid(_) => (EXIT_INVALID_CONFIG, e.to_string()),
    };
    let mut settings = match &args.config {
        Some(path) => Settings::load(path).map_err(invalid)?,
        None => Settings::new(),
    };
    settings.merge(&args.flag_settings().map_err(invalid)?);
    let name = args
        .experiment
        .clone()
        .or_else(|| settings.get("experiment").map(str::to_string))
        .ok_or((EXIT_UNKNOWN_EXPERIMENT, "no experiment given".to_string()))?;
    let experiment: Experiment = name.parse().map_err(invalid)?;
    let mut cfg = ExperimentConfig::resolve(experiment, &settings).map_err(invalid)?;
    if let Ok(w) = std::env::var(WORKERS_ENV) {
        match w.trim().parse::<usize>() {
            Ok(w) if w >= 1 => cfg.workers = Some(w),
            _ => {
                return Err((
                    EXIT_INVALID_CONFIG,
                    format!("{WORKERS_ENV} must be a positive integer, got '{w}'"),
                ))
            }
        }
    }
    Ok(cfg)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(&args) {
        Ok(c) => c,
        Err((code, msg)) => return fail(code, msg),
    };

    // Fail on an unwritable destination before doing any work.
    let mut data_file = match &cfg.out {
        Some(path) => match File::create(path) {
            Ok(f) => Some(f),
            Err(e) => return fail(EXIT_UNWRITABLE, format!("cannot write {}: {e}", path.display())),
        },
        None => None,
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => return fail(EXIT_FAILED, format!("cannot start worker pool: {e}")),
    };
    let started = Instant::now();
    let outcome = match pool.install(|| experiments::run(&cfg)) {
        Ok(o) => o,
        Err(e) => return fail(EXIT_FAILED, format!("{} failed: {e}", cfg.experiment)),
    };
    let wall_time_s = started.elapsed().as_secs_f64();

    let data = outcome.table.encode(cfg.format);
    match (&mut data_file, &cfg.out) {
        (Some(f), Some(path)) => {
            if let Err(e) = f.write_all(data.as_bytes()) {
                return fail(EXIT_UNWRITABLE, format!("cannot write {}: {e}", path.display()));
            }
            let manifest = Manifest {
                experiment: cfg.experiment.name(),
                version: env!("CARGO_PKG_VERSION"),
                config: &cfg,
                workers: pool.current_num_threads(),
                rows: outcome.table.rows.len(),
                passed: outcome.passed,
                summary: &outcome.summary,
                wall_time_s,
            };
            let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
            let mpath = manifest_path(path);
            if let Err(e) = std::fs::write(&mpath, text + "\n") {
                return fail(EXIT_UNWRITABLE, format!("cannot write {}: {e}", mpath.display()));
            }
        }
        _ => {
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = stdout.write_all(data.as_bytes()) {
                return fail(EXIT_UNWRITABLE, format!("cannot write to stdout: {e}"));
            }
        }
    }
    eprintln!("{}", outcome.summary);
    if outcome.passed {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}
