use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use onestep::figures::{self, CommandOutput, Overrides, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// fig1_*: one path, its v-curve, tangent and intercept
    Path,
    /// fig2_*: several paths indexed by distance from the target
    Multipath,
    /// fig3_*: the 3-point simplex surface with paths
    Simplex,
    /// Monte Carlo study of the split one-step estimator
    Simulate,
    /// Convergence-rate sweep
    Rates,
}

#[derive(Debug, Parser)]
#[command(name = "onestep", version, about = "One-step estimation along distribution paths")]
struct Cli {
    command: Command,
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Seed for stochastic commands (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out` and $ONESTEP_OUT)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Functional name (overrides `functional`)
    #[arg(long)]
    functional: Option<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn run(cli: &Cli) -> Result<CommandOutput, onestep::Error> {
    let mut cfg = RunConfig::load(&cli.config)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        functional: cli.functional.clone(),
    });
    let out_dir = cfg.out_dir();
    match cli.command {
        Command::Path => figures::cmd_path(&cfg, &out_dir),
        Command::Multipath => figures::cmd_multipath(&cfg, &out_dir),
        Command::Simplex => figures::cmd_simplex(&cfg, &out_dir),
        Command::Simulate => figures::cmd_simulate(&cfg, &out_dir),
        Command::Rates => figures::cmd_rates(&cfg, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERIC };
            let err = anyhow::Error::new(e).context(format!("onestep {:?} failed", cli.command).to_lowercase());
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
