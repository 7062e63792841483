//! `devilstick` command line: run scenarios, print linearizations and gains,
//! and check reports against reference values.
//!
//! Exit codes: 0 success, 2 bad config or arguments, 3 runtime failure,
//! 4 a reference check failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

mod compare;
mod config;
mod report;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{error, info};

use config::{Mode, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(
    name = "devilstick",
    version,
    about = "Devil-stick propeller motion experiments"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run scenarios and write trajectory.csv, crossings.json and report.json.
    Simulate {
        /// Scenario files. With several, each writes to `<out>/<file stem>/`.
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long, env = "DEVILSTICK_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Scenarios run at once, each in its own process.
        #[arg(long, short, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: u32,
    },
    /// Print the fixed point, linearized map and epsilon sweep as JSON.
    Linearize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the linearization and feedback gain as JSON.
    Gain {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a report against a reference file.
    Compare {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Mismatch,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Mismatch => 4,
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::load(path).map_err(Failure::Config)
}

fn write_outputs(dir: &Path, cfg: &ScenarioConfig, out: &report::Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("config.json"), cfg.to_json())?;
    if let Some(log) = &out.log {
        let file = File::create(dir.join("trajectory.csv"))?;
        log.write_csv(BufWriter::new(file))?;
        fs::write(dir.join("crossings.json"), log.crossings_json()?)?;
    }
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&out.report)?,
    )?;
    Ok(())
}

fn simulate_one(path: &Path, dir: &Path) -> Outcome {
    let cfg = load(path)?;
    info!("running {} ({:?})", path.display(), cfg.mode);
    let out = report::execute(&cfg, cfg.mode).map_err(Failure::Runtime)?;
    write_outputs(dir, &cfg, &out).map_err(Failure::Runtime)?;
    println!("{}: wrote {}", path.display(), dir.display());
    Ok(())
}

fn out_dir_for(out: &Path, config: &Path, several: bool) -> PathBuf {
    if several {
        let stem = config
            .file_stem()
            .map_or("scenario".into(), |s| s.to_string_lossy());
        out.join(stem.as_ref())
    } else {
        out.to_path_buf()
    }
}

fn simulate(configs: &[PathBuf], out: &Path, jobs: u32, verbose: u8) -> Outcome {
    let several = configs.len() > 1;
    // validate everything up front so a typo fails before any long run
    for c in configs {
        load(c)?;
    }
    if jobs <= 1 || !several {
        for c in configs {
            simulate_one(c, &out_dir_for(out, c, several))?;
        }
        return Ok(());
    }
    let exe = std::env::current_exe()
        .context("cannot locate own executable")
        .map_err(Failure::Runtime)?;
    let mut worst = 0u8;
    for batch in configs.chunks(jobs as usize) {
        let children: Vec<_> = batch
            .iter()
            .map(|c| {
                let mut cmd = Command::new(&exe);
                if verbose > 0 {
                    cmd.arg(format!("-{}", "v".repeat(verbose as usize)));
                }
                cmd.arg("simulate")
                    .arg("--config")
                    .arg(c)
                    .arg("--out")
                    .arg(out_dir_for(out, c, true))
                    .spawn()
                    .with_context(|| format!("cannot spawn run for {}", c.display()))
            })
            .collect::<anyhow::Result<_>>()
            .map_err(Failure::Runtime)?;
        for (mut child, c) in children.into_iter().zip(batch) {
            let status = child.wait().map_err(|e| Failure::Runtime(e.into()))?;
            if !status.success() {
                let code = status.code().unwrap_or(3).clamp(1, 255) as u8;
                error!("{} failed with exit code {code}", c.display());
                worst = worst.max(code);
            }
        }
    }
    match worst {
        0 => Ok(()),
        2 => Err(Failure::Config(anyhow::anyhow!(
            "a scenario had an invalid config"
        ))),
        _ => Err(Failure::Runtime(anyhow::anyhow!("a scenario failed"))),
    }
}

fn print_mode(path: &Path, mode: Mode) -> Outcome {
    let cfg = load(path)?;
    if cfg.orbit_energy.is_none() {
        return Err(Failure::Config(anyhow::anyhow!(
            "{}: {mode:?} needs orbit_energy",
            path.display()
        )));
    }
    let out = report::execute(&cfg, mode).map_err(Failure::Runtime)?;
    let text = serde_json::to_string_pretty(&out.report).map_err(|e| Failure::Runtime(e.into()))?;
    println!("{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Cmd::Simulate { configs, out, jobs } => simulate(&configs, &out, jobs, cli.verbose),
        Cmd::Linearize { config } => print_mode(&config, Mode::Linearize),
        Cmd::Gain { config } => print_mode(&config, Mode::Gain),
        Cmd::Compare { report, reference } => match compare::run(&report, &reference) {
            Ok(true) => Ok(()),
            Ok(false) => Err(Failure::Mismatch),
            Err(e) => Err(Failure::Config(e)),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) => eprintln!("config error: {e:#}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Mismatch => eprintln!("reference comparison failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
