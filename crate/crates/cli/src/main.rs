use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netcheb_core::harness::{run_experiment, ExperimentConfig, ExperimentReport, HarnessError};

/// Experiment runner for the network conservation-law solvers.
#[derive(Parser, Debug)]
#[command(name = "netcheb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    ///
    /// Exit status: 0 on success, 1 on a config error, 2 when a run fails.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// chebyshev, fvs, both or cheb2d (overrides `method`).
        #[arg(long)]
        method: Option<String>,
        /// Degree or cell count, comma separated (overrides `n`).
        #[arg(long)]
        n: Option<String>,
        /// Time step (overrides `dt`).
        #[arg(long)]
        dt: Option<String>,
    },
}

fn load(
    config: &Path,
    out: Option<PathBuf>,
    overrides: &[(&str, Option<String>)],
) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)
                .map_err(|e| HarnessError::Config(format!("--{key}: {e}")))?;
        }
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn print_report(report: &ExperimentReport) {
    for r in &report.runs {
        let mut line = format!(
            "{:<9} N={:<5} {:>9.3}s  range [{:.4}, {:.4}]",
            r.method.name(),
            r.n,
            r.seconds,
            r.range.0,
            r.range.1
        );
        if let (Some(a), Some(b)) = (r.error_incoming, r.error_network) {
            line += &format!("  E_in {a:.4e}  E_net {b:.4e}");
        }
        if let Some(res) = r.max_junction_residual {
            line += &format!("  junction residual {res:.1e}");
        }
        println!("{line}");
    }
    for row in &report.rates {
        if let Some(rate) = row.rate {
            println!("rate {:<9} N={:<5} {rate:.4}", row.method.name(), row.n);
        }
    }
    if let Some(j) = &report.junction {
        println!(
            "u_b = {:.10} (spread {:.1e} over the second half)",
            j.u_b_final, j.u_b_spread
        );
    }
    if let Some(s) = &report.spacetime {
        println!(
            "cheb2d N={} converged in {} iterations, L1 gap to midpoint N={}: {:.3e}",
            s.n, s.iterations, s.reference_n, s.gap_l1
        );
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        method,
        n,
        dt,
    } = cli.command;
    let result = load(&config, out, &[("method", method), ("n", n), ("dt", dt)])
        .and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(report) => {
            print_report(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
