use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heatlab::cli::{self, RunConfig};
use heatlab::functionals::Backend;
use heatlab::Error;

/// Tsallis entropy along the heat flow: identity checks, concavity scans
/// and extremal searches.
#[derive(Parser)]
#[command(name = "heatlab", version)]
struct Args {
    /// TOML run configuration; defaults to a 2-d torus run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized identity, IBP and inequality-margin trials.
    VerifyIdentities,
    /// Sign of d²S_q/dt² over (q, t), with finite-difference oracles.
    ScanConcavity,
    /// Multi-start search for large inequality ratios.
    Extremal,
    /// Summarize finished run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn load(args: &Args) -> heatlab::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_for(Backend::Torus, 2),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(args: &Args) -> heatlab::Result<cli::Outcome> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Report { runs } = &args.command {
        return cli::cmd_report(runs, args.out.as_deref());
    }
    let cfg = load(args)?;
    let out = cli::output_dir(args.out.as_deref(), &cfg);
    match args.command {
        Command::VerifyIdentities => cli::cmd_verify_identities(&cfg, &out),
        Command::ScanConcavity => cli::cmd_scan_concavity(&cfg, &out),
        Command::Extremal => cli::cmd_extremal(&cfg, &out),
        Command::Report { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = run(&args);
    match &result {
        Ok(o) => {
            // a closed pipe downstream is not an error of the run
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", o.message.trim_end());
            for a in &o.artifacts {
                let _ = writeln!(stdout, "wrote {}", a.display());
            }
            if !o.passed {
                eprintln!("claim violated");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
