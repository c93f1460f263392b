use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rieszlab_cli::fixtures::{list_fixtures, CATALOG};
use rieszlab_cli::{emit_plot_data, report, run_experiment, CliError, ExperimentConfig, Overrides};

/// Exit status when an audited invariant fails.
const AUDIT_FAILED: u8 = 1;
/// Exit status for bad input: config, lookup, report parsing.
const BAD_INPUT: u8 = 2;
const RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "rieszlab", version, about = "Run lattice-integration and kernel-operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Quadrature nodes per segment.
        #[arg(long)]
        resolution: Option<usize>,
        /// Largest n (or sample count, for experiments without a kernel index).
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the fixture catalog.
    ListFixtures {
        #[arg(long)]
        module: Option<String>,
    },
    /// Turn a JSON report into long-format series,x,y CSV.
    PlotData {
        report: PathBuf,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        CliError::Config(_) | CliError::Lookup(_) | CliError::Report(_) => BAD_INPUT,
        _ => RUNTIME,
    })
}

fn run(config: PathBuf, overrides: Overrides) -> Result<ExitCode, CliError> {
    let mut cfg = ExperimentConfig::load(&config)?;
    cfg.apply(&overrides)?;
    let report = run_experiment(&cfg)?;
    let (json, csv) = report.save(&cfg.output.dir, cfg.stem())?;
    println!("{}: {}", report.experiment, if report.passed { "pass" } else { "FAIL" });
    println!("wrote {}", json.display());
    println!("wrote {}", csv.display());
    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.failures {
            eprintln!("failed: {f}");
        }
        Ok(ExitCode::from(AUDIT_FAILED))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            resolution,
            horizon,
            out_dir,
        } => run(
            config,
            Overrides {
                seed,
                resolution,
                horizon,
                out_dir,
            },
        ),
        Command::ListFixtures { module } => {
            let mut out = std::io::stdout().lock();
            for f in list_fixtures(CATALOG, module.as_deref()) {
                let _ = writeln!(out, "{}\t{}\t{}", f.id, f.module, f.anchor);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::PlotData { report: path, out } => (|| {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            match out {
                Some(p) => {
                    let mut buf = Vec::new();
                    emit_plot_data(&text, &mut buf)?;
                    report::write_atomic(&p, &buf)?;
                }
                None => emit_plot_data(&text, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        })(),
    };
    result.unwrap_or_else(|e| fail(&e))
}
