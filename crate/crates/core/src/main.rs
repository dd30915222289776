use std::path::{Path, PathBuf};
use std::process::ExitCode;

use am_msrsb::cli::{self, CaseConfig, CaseReport};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "am-msrsb",
    version,
    about = "Monotone multiscale pressure solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides the one in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Overrides every random seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case.
    Run { config: PathBuf },
    /// Solve every *.toml in a directory concurrently.
    Batch { dir: PathBuf },
    /// Print positive off-diagonal statistics of the fine and coarse operators.
    RepairReport { config: PathBuf },
    /// Write basis columns as CSV.
    ExportBasis { config: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> am_msrsb::Result<CaseConfig> {
    let mut config = CaseConfig::load(path)?;
    if let Some(s) = seed {
        config.override_seed(s);
    }
    Ok(config)
}

fn summary(r: &CaseReport) -> String {
    let s = &r.solve;
    let mut out = format!(
        "{}: {} cells, {} blocks",
        r.name, r.fine_cells, r.coarse_blocks
    );
    if !s.residual_history.is_empty() {
        let last = s.residual_history.last().copied().unwrap_or(f64::NAN);
        let state = if s.converged {
            "converged"
        } else {
            "not converged"
        };
        out += &format!(
            ", {state} after {} cycles (residual {last:.3e})",
            s.iterations
        );
    }
    if let Some(n) = &s.error_norms {
        out += &format!(", error l2 {:.3e} linf {:.3e}", n.l2, n.linf);
    }
    if let Some(v) = &s.violations {
        out += &format!(", {} bound violations", v.total());
    }
    if let Some(f) = &r.failure {
        out += &format!(", diverged: {f}");
    }
    if let Some(note) = &r.reference_note {
        out += &format!(" ({note})");
    }
    out
}

fn execute(args: &Cli) -> am_msrsb::Result<bool> {
    match &args.command {
        Command::Run { config } => {
            let config = load(config, args.seed)?;
            let result = cli::run_case(&config, args.output.as_deref())?;
            if !args.quiet {
                println!("{}", summary(&result.report));
            }
            Ok(true)
        }
        Command::Batch { dir } => {
            let items = cli::run_batch(dir, args.output.as_deref(), args.seed)?;
            let mut ok = true;
            for item in items {
                match item.result {
                    Ok(r) if !args.quiet => println!("{}", summary(&r)),
                    Ok(_) => {}
                    Err(e) => {
                        ok = false;
                        eprintln!("{}: {e}", item.config.display());
                    }
                }
            }
            Ok(ok)
        }
        Command::RepairReport { config } => {
            let summary = cli::repair_report(&load(config, args.seed)?)?;
            if !args.quiet {
                print!("{}", summary.to_text());
            }
            Ok(true)
        }
        Command::ExportBasis { config } => {
            let config = load(config, args.seed)?;
            let dir = args
                .output
                .clone()
                .or_else(|| config.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            let files = cli::export_basis(&config, &dir)?;
            if !args.quiet {
                for f in files {
                    println!("{}", f.display());
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
