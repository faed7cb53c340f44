use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tubeflow_cli::commands::bounds_json;
use tubeflow_cli::{
    catalog_csv, cmd_bounds, cmd_cmc_search, cmd_refine, cmd_run, cmd_sweep, format_refine, load_config,
    sweep_exit_code, GridSpec,
};

/// Volume-preserving mean curvature flow of radial tubes.
///
/// Exit codes: 0 clean completion, 1 usage/config/I/O error,
/// 2 numerical failure, 3 monitor violation.
#[derive(Parser)]
#[command(name = "tubeflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one flow; writes timeseries.csv and summary.json.
    Run {
        config: PathBuf,
        /// Output directory, overriding [output] dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of flows into cell_<i>_<j> directories.
    Sweep {
        config: PathBuf,
        /// e.g. "r0=0.3,0.5,0.7;amplitude=0.01,0.05,0.1"
        #[arg(long)]
        grid: GridSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the bounds of the initial profile as JSON.
    Bounds { config: PathBuf },
    /// Shoot for a constant-mean-curvature profile.
    CmcSearch {
        config: PathBuf,
        #[arg(long)]
        hstar: f64,
        /// Centre radius to start from; defaults to init r0.
        #[arg(long)]
        from: Option<f64>,
    },
    /// Residual audits under grid refinement and step halving.
    Refine {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the space catalog as CSV.
    Catalog,
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("TUBEFLOW_THREADS") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("TUBEFLOW_THREADS = `{v}`"))?)),
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let s = cmd_run(&cfg, &dir)?.summary;
            println!(
                "outcome {} t {} steps {} vol_d drift {:e} monitors {}",
                serde_json::to_value(s.outcome)?.as_str().unwrap_or_default(),
                s.t_final,
                s.steps,
                s.vol_d_drift,
                if s.monitors_ok { "ok" } else { "VIOLATED" }
            );
            if let Some(f) = &s.failure {
                eprintln!("numerical failure: {f}");
            }
            Ok(s.exit_code)
        }
        Command::Sweep { config, grid, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let rows = cmd_sweep(&cfg, &grid, &dir, threads()?)?;
            for r in &rows {
                println!("cell_{}_{} {} exit {}{}", r.i, r.j, r.outcome, r.exit_code, if r.error.is_empty() { String::new() } else { format!(" ({})", r.error) });
            }
            Ok(sweep_exit_code(&rows))
        }
        Command::Bounds { config } => {
            println!("{}", bounds_json(&cmd_bounds(&load_config(&config)?)?)?);
            Ok(0)
        }
        Command::CmcSearch { config, hstar, from } => {
            let result = cmd_cmc_search(&load_config(&config)?, hstar, from)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(0)
        }
        Command::Refine { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            print!("{}", format_refine(&cmd_refine(&cfg, &dir)?));
            Ok(0)
        }
        Command::Catalog => {
            print!("{}", catalog_csv()?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1 so that 2 stays reserved for numerical failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
