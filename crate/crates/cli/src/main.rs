//! `wstate`: command-line harness for W-state preparation experiments.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use wstate_core::{Engine, Strategy};

use crate::config::{parse_axes, parse_number, parse_range, ExperimentConfig};
use crate::report::RunReport;

#[derive(Parser, Debug)]
#[command(name = "wstate", version, about = "W-state preparation through spin-torque scattering")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. They override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// Target register size (max size for curves).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Seed register size.
    #[arg(long, global = true)]
    q: Option<usize>,
    /// Qubit spacing phase; accepts multiples of pi such as `pi/2`.
    #[arg(long, global = true, value_parser = num, allow_hyphen_values = true)]
    kd: Option<f64>,
    /// Barrier-to-first-qubit phase.
    #[arg(long, global = true, value_parser = num, allow_hyphen_values = true)]
    kd0: Option<f64>,
    /// Barrier strength.
    #[arg(long, global = true, value_parser = num)]
    gamma: Option<f64>,
    /// Electron-qubit exchange strength.
    #[arg(long, global = true, value_parser = num, allow_hyphen_values = true)]
    omega: Option<f64>,
    /// Exchange constant of the ideal model.
    #[arg(long, global = true, value_parser = num, allow_hyphen_values = true)]
    j: Option<f64>,
    /// Stage schedule: `min-backward` or `max-forward`.
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    /// Reflection representation: `sector` or `full`.
    #[arg(long, global = true)]
    engine: Option<Engine>,
    /// Electron cap per run.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Flip the first qubit exactly instead of with a y-polarized channel.
    #[arg(long, global = true)]
    exact_flip: bool,
    /// Output directory [default: $WSTATE_OUT, else ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Smaller full-space checks.
    #[arg(long, global = true)]
    fast: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form jump W_q -> W_n (or the whole schedule when --q is absent).
    Ideal,
    /// One torque stage q -> n; writes the electron-by-electron trace.
    Evolve,
    /// Figure-of-merit landscape over two channel parameters.
    Sweep {
        /// Points per axis.
        #[arg(long)]
        points: Option<usize>,
        /// Swept parameters, e.g. `kd,kd0` or `gamma,omega`.
        #[arg(long)]
        axes: Option<String>,
        /// `lo:hi` for the first axis.
        #[arg(long, allow_hyphen_values = true)]
        x_range: Option<String>,
        /// `lo:hi` for the second axis.
        #[arg(long, allow_hyphen_values = true)]
        y_range: Option<String>,
    },
    /// Stage fidelity against n, from |1> and from W_3.
    FidelityCurve,
    /// Simulated against predicted electron counts.
    Electrons,
    /// Invariant and oracle checks.
    Verify {
        /// Force the named check to fail.
        #[arg(long)]
        inject: Option<String>,
    },
    /// Stage plan as JSON.
    Schedule {
        /// Fill in predicted electron counts.
        #[arg(long)]
        predict: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ideal => "ideal",
            Command::Evolve => "evolve",
            Command::Sweep { .. } => "sweep",
            Command::FidelityCurve => "fidelity-curve",
            Command::Electrons => "electrons",
            Command::Verify { .. } => "verify",
            Command::Schedule { .. } => "schedule",
        }
    }
}

fn num(s: &str) -> std::result::Result<f64, String> {
    parse_number(s).map_err(|e| e.to_string())
}

/// Defaults, then `$WSTATE_OUT`, then the config file, then flags.
fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(dir) = std::env::var_os("WSTATE_OUT").filter(|v| !v.is_empty()) {
        cfg.out = dir.into();
    }
    let c = &cli.common;
    if let Some(path) = &c.config {
        cfg.apply_file(path)?;
    }
    cfg.n = c.n.or(cfg.n);
    cfg.q = c.q.or(cfg.q);
    cfg.kd = c.kd.unwrap_or(cfg.kd);
    cfg.kd0 = c.kd0.unwrap_or(cfg.kd0);
    cfg.gamma = c.gamma.unwrap_or(cfg.gamma);
    cfg.omega = c.omega.unwrap_or(cfg.omega);
    cfg.j = c.j.unwrap_or(cfg.j);
    cfg.strategy = c.strategy.unwrap_or(cfg.strategy);
    cfg.engine = c.engine.unwrap_or(cfg.engine);
    cfg.cap = c.cap.unwrap_or(cfg.cap);
    cfg.torque_flip &= !c.exact_flip;
    cfg.fast |= c.fast;
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Command::Sweep { points, axes, x_range, y_range } = &cli.command {
        cfg.points = points.unwrap_or(cfg.points);
        if let Some(a) = axes {
            cfg.axes = parse_axes(a)?;
        }
        if let Some(r) = x_range {
            cfg.x_range = Some(parse_range(r)?);
        }
        if let Some(r) = y_range {
            cfg.y_range = Some(parse_range(r)?);
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    match &cli.command {
        Command::Ideal => commands::ideal(cfg, report),
        Command::Evolve => commands::evolve(cfg, report),
        Command::Sweep { .. } => commands::sweep_fom(cfg, report),
        Command::FidelityCurve => commands::fidelity_curve(cfg, report),
        Command::Electrons => commands::electrons(cfg, report),
        Command::Verify { inject } => commands::verify(cfg, inject.clone(), report),
        Command::Schedule { predict } => commands::schedule(cfg, *predict, report),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let mut report = RunReport::new(cli.command.name(), cfg.clone());
    let result = run(&cli, &cfg, &mut report);
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
        report.error = Some(format!("{e:#}"));
    }
    match report.finish(&cfg.out) {
        Ok(path) => eprintln!("report: {}", path.display()),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    if result.is_err() {
        return ExitCode::from(2);
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.skipped && !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
