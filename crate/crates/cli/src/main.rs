use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use critbd_cli::{
    cmd_dominating, cmd_hitting_times, cmd_ks, cmd_simulate, cmd_survival, cmd_tailfit,
    render_persistence, render_tailfit, write_hitting_times, write_survival, Column,
    DominatingConfig, Grid, HarnessError, Mode, SimulateConfig,
};

#[derive(Debug, Parser)]
#[command(name = "critbd", version, about = "Return-time experiments for the critical birth-death chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate hitting/return times and write one CSV row per repeat.
    Simulate {
        #[arg(long, default_value = "hybrid")]
        mode: Mode,
        /// Tail probability; the hybrid threshold is 1/p.
        #[arg(long, default_value_t = 0.005)]
        p: f64,
        #[arg(long, default_value_t = 1_000_000)]
        repeats: u64,
        /// Jump budget of direct mode.
        #[arg(long = "step-cap", default_value_t = 1_000_000)]
        step_cap: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical survival function of one or more record files.
    Survival {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Explicit evaluation points, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "window")]
        grid: Option<Vec<f64>>,
        /// Log-spaced grid over lo,hi.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value = "h")]
        column: Column,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-sample Kolmogorov-Smirnov test restricted to an open interval.
    Ks {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
        #[arg(long, default_value = "h")]
        column: Column,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log-log least-squares slope of the empirical survival function.
    Tailfit {
        input: PathBuf,
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
        #[arg(long, default_value_t = critbd::empirics::DEFAULT_GRID_POINTS)]
        points: usize,
        #[arg(long, default_value = "h")]
        column: Column,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact mean hitting time from state 2 with births disabled at each ceiling.
    HittingTimes {
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        ceilings: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability that the dominating type at delta*t is still dominating at t.
    Dominating {
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 500.0)]
        horizon: f64,
        #[arg(long, alias = "reps", default_value_t = 2000)]
        repeats: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi but got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    Ok((lo, hi))
}

fn emit(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), HarnessError> {
    let wrap = |path: &Path| {
        let path = path.display().to_string();
        move |source| HarnessError::Io {
            context: format!("cannot write {path}"),
            source,
        }
    };
    match out {
        Some(path) => {
            let file = File::create(path).map_err(wrap(path))?;
            let mut w = BufWriter::new(file);
            f(&mut w).map_err(wrap(path))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|source| HarnessError::Io {
                context: "cannot write to stdout".into(),
                source,
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate {
            mode,
            p,
            repeats,
            step_cap,
            lambda,
            seed,
            threads,
            out,
        } => {
            let cfg = SimulateConfig {
                mode,
                p,
                step_cap,
                lambda,
                repeats,
                seed,
                threads,
            };
            let manifest = cmd_simulate(&cfg, &out)?;
            eprint!("{}", manifest.render());
        }
        Command::Survival {
            inputs,
            grid,
            window,
            points,
            column,
            out,
        } => {
            let grid = match (grid, window) {
                (Some(g), _) => Grid::Points(g),
                (None, Some(window)) => Grid::LogSpaced { window, points },
                (None, None) => {
                    return Err(HarnessError::Config("survival needs --grid or --window".into()))
                }
            };
            let rows = cmd_survival(&inputs, &grid, column)?;
            emit(out.as_deref(), |w| write_survival(w, &rows))?;
        }
        Command::Ks {
            a,
            b,
            window,
            column,
            out,
        } => {
            let report = cmd_ks(&a, &b, window, column)?;
            emit(out.as_deref(), |w| w.write_all(report.render().as_bytes()))?;
        }
        Command::Tailfit {
            input,
            window,
            points,
            column,
            out,
        } => {
            let fit = cmd_tailfit(&input, window, points, column)?;
            emit(out.as_deref(), |w| w.write_all(render_tailfit(&fit).as_bytes()))?;
        }
        Command::HittingTimes { ceilings, out } => {
            let rows = cmd_hitting_times(&ceilings)?;
            emit(out.as_deref(), |w| write_hitting_times(w, &rows))?;
        }
        Command::Dominating {
            lambda,
            delta,
            horizon,
            repeats,
            seed,
            threads,
            out,
        } => {
            let est = cmd_dominating(&DominatingConfig {
                lambda,
                delta,
                horizon,
                reps: repeats,
                seed,
                threads,
            })?;
            emit(out.as_deref(), |w| w.write_all(render_persistence(&est).as_bytes()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
