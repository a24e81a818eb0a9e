use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hypoflow::config::{CaseName, ExperimentConfig, ExperimentName};
use hypoflow::experiments;
use hypoflow::Error;

#[derive(Parser)]
#[command(name = "hypoflow", version, about = "Hypocoercive decay simulation and certification")]
struct Cli {
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random data (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a TOML config.
    Run { config: PathBuf },
    /// Print and check the rate certificate of a model.
    Certify {
        #[arg(long, value_enum)]
        case: Case,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Case {
    A,
    B,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.command {
        Command::Run { config } => ExperimentConfig::load(config)?,
        Command::Certify { case, d } => {
            let mut cfg = ExperimentConfig::new(ExperimentName::Certify);
            cfg.model.case = Some(match case {
                Case::A => CaseName::A,
                Case::B => CaseName::B,
            });
            cfg.model.d = *d;
            cfg
        }
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("hypoflow: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("hypoflow: {e}");
            return ExitCode::from(2);
        }
    }
    let outcomes = match experiments::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("hypoflow: {} failed: {e}", cfg.experiment.as_str());
            return ExitCode::from(1);
        }
    };
    for o in &outcomes {
        println!("{}", o.summary_line());
    }
    if let Some(dir) = &cfg.out {
        match experiments::persist(&cfg, &outcomes, dir) {
            Ok(path) => println!("manifest {}", path.display()),
            Err(e) => {
                eprintln!("hypoflow: cannot write reports: {e}");
                return ExitCode::from(1);
            }
        }
    }
    if outcomes.iter().all(|o| o.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
