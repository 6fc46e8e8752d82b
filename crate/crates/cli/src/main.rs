use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use electrode_bo::pipeline::{self, files};
use electrode_bo::{Error, PipelineConfig, Result};

/// Inverse design of electrode manufacturing parameters: DOE, simulation,
/// GP surrogates and weighted bi-objective Bayesian optimization.
#[derive(Debug, Parser)]
#[command(name = "electrode-bo", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed, overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the design of experiments.
    Doe,
    /// Simulate a DOE file into a dataset.
    Simulate {
        /// DOE file [default: <out>/doe.csv].
        #[arg(long, value_name = "PATH")]
        doe: Option<PathBuf>,
        /// Also write one discharge curve per dataset row.
        #[arg(long)]
        curves: bool,
    },
    /// Resampling validation, final surrogates and fitness scaler.
    Train {
        /// Dataset file [default: <out>/dataset.csv].
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Run Bayesian optimization for one or more scenarios.
    Optimize {
        /// Directory holding the trained models [default: <out>].
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
        /// Scenario to run; repeat for several. All configured scenarios when omitted.
        #[arg(long = "scenario", value_name = "NAME")]
        scenarios: Vec<String>,
    },
    /// Write plot-ready CSV files from a completed run directory.
    Report {
        /// Run directory [default: <out>].
        #[arg(long, value_name = "DIR")]
        run_dir: Option<PathBuf>,
    },
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Debug, Subcommand)]
enum ConfigCommand {
    /// Print the default configuration, or write it to PATH.
    Init {
        path: Option<PathBuf>,
        /// Overwrite PATH if it exists.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let o = execute(std::env::args_os());
    let _ = std::io::stdout().lock().write_all(o.stdout.as_bytes());
    let _ = std::io::stderr().lock().write_all(o.stderr.as_bytes());
    ExitCode::from(o.code)
}

#[derive(Debug)]
struct Outcome {
    code: u8,
    stdout: String,
    stderr: String,
}

fn execute<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: 1, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    match run(cli) {
        Ok(stdout) => Outcome { code: 0, stdout, stderr: String::new() },
        Err(e) => Outcome { code: exit_code(&e), stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}

/// 2 for filesystem trouble, 1 for everything the user can fix in the inputs.
fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        2
    } else {
        1
    }
}

fn load_config(opts: &GlobalOpts) -> Result<PipelineConfig> {
    let mut cfg = match &opts.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

/// Runs one command and returns what it has to say on stdout.
fn run(cli: Cli) -> Result<String> {
    if let Command::Config(ConfigCommand::Init { path, force }) = &cli.command {
        return config_init(path.as_deref(), *force);
    }
    let cfg = load_config(&cli.global)?;
    let out = cfg.out_dir.clone();
    let mut lines: Vec<String> = Vec::new();
    match cli.command {
        Command::Doe => {
            prepare_out(&out)?;
            let o = pipeline::doe_stage(&cfg, &out)?;
            lines.push(format!(
                "doe: {} points written to {} ({} rejected)",
                o.doe.len(),
                out.join(files::DOE).display(),
                o.rejected.len()
            ));
            for (p, why) in &o.rejected {
                lines.push(format!("  rejected am={} sc={} cd={}: {why}", p.am_pct, p.sc_pct, p.cd_pct));
            }
        }
        Command::Simulate { doe, curves } => {
            let doe = doe.unwrap_or_else(|| out.join(files::DOE));
            prepare_out(&out)?;
            let o = pipeline::simulate_stage(&cfg, &doe, &out, curves)?;
            lines.push(format!(
                "simulate: {} rows written to {} ({} rejected)",
                o.dataset.len(),
                out.join(files::DATASET).display(),
                o.rejected.len()
            ));
            if !o.dataset.is_empty() {
                let (e_lo, e_hi) = range(&o.dataset.energy());
                let (p_lo, p_hi) = range(&o.dataset.power());
                lines.push(format!("  E {e_lo:.1}..{e_hi:.1} Wh/kg, P {p_lo:.1}..{p_hi:.1} W/kg"));
            }
            if curves {
                lines.push(format!("  curves in {}", out.join(files::CURVES).display()));
            }
        }
        Command::Train { dataset } => {
            let dataset = dataset.unwrap_or_else(|| out.join(files::DATASET));
            prepare_out(&out)?;
            let o = pipeline::train_stage(&cfg, &dataset, &out)?;
            lines.push(o.report.to_markdown().trim_end().to_owned());
            lines.push(format!(
                "models: {}, {}; scaler: {}",
                out.join(files::MODEL_E).display(),
                out.join(files::MODEL_P).display(),
                out.join(files::SCALER).display()
            ));
        }
        Command::Optimize { models, scenarios } => {
            let models = models.unwrap_or_else(|| out.clone());
            // reject unknown names before any work
            for name in &scenarios {
                cfg.scenario(name)?;
            }
            prepare_out(&out)?;
            let outcomes = pipeline::optimize_stage(&cfg, &models, &out, &scenarios)?;
            lines.push("| Scenario | w_E | w_P | AM% | SC% | CD% | E (Wh/kg) | P (W/kg) |".into());
            lines.push("|---|---|---|---|---|---|---|---|".into());
            for o in &outcomes {
                let r = o.row();
                lines.push(format!(
                    "| {} | {:.3} | {:.3} | {:.1} | {:.1} | {:.1} | {:.1} | {:.1} |",
                    r.scenario, r.w_energy, r.w_power, r.am_pct, r.sc_pct, r.cd_pct, r.energy_density, r.power_density
                ));
            }
            lines.push(format!("table: {}", out.join(files::SCENARIOS).display()));
        }
        Command::Report { run_dir } => {
            let run_dir = run_dir.unwrap_or(out);
            for p in pipeline::report_stage(&run_dir)? {
                lines.push(p.display().to_string());
            }
        }
        Command::Config(_) => unreachable!(),
    }
    lines.push(String::new());
    Ok(lines.join("\n"))
}

/// Without a path the default configuration is returned for stdout.
fn config_init(path: Option<&Path>, force: bool) -> Result<String> {
    let text = PipelineConfig::default().to_toml()?;
    let Some(p) = path else {
        return Ok(text);
    };
    if p.exists() && !force {
        return Err(Error::Io {
            path: p.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::AlreadyExists, "file exists (use --force)"),
        });
    }
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(parent)?;
    }
    std::fs::write(p, text).map_err(|source| Error::Io { path: p.to_path_buf(), source })?;
    Ok(format!("wrote {}\n", p.display()))
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
