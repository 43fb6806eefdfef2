use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xccy_cli::{run, Command, Overrides};

#[derive(Debug, Parser)]
#[command(name = "xccy", version, about = "Cross-currency HJM simulation, pricing and verification")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Override simulation.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override simulation.paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Override output.dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "XCCY_THREADS")]
    threads: Option<usize>,
    /// Scale every simulated drift (mutation test hook).
    #[arg(long, global = true, hide = true)]
    drift_scale: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Simulate and export path states as CSV.
    Simulate { config: PathBuf },
    /// Price the configured instruments.
    Price { config: PathBuf },
    /// Run the configured martingale checks; exit 3 if any fails.
    Verify { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, config) = match &cli.command {
        Cmd::Simulate { config } => (Command::Simulate, config),
        Cmd::Price { config } => (Command::Price, config),
        Cmd::Verify { config } => (Command::Verify, config),
    };
    let ov = Overrides { seed: cli.seed, paths: cli.paths, out_dir: cli.out_dir.clone(), drift_scale: cli.drift_scale };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("runtime error: cannot start worker threads: {e}");
            return ExitCode::from(4);
        }
    };
    match pool.install(|| run(cmd, config, &ov)) {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
