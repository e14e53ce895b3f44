use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use streamalloc_cli::output::write_outputs;
use streamalloc_cli::{run_experiment, ExperimentConfig, ExperimentKind};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "streamalloc", version, about = "Run streaming allocation experiments")]
struct Cli {
    #[command(subcommand)]
    experiment: Command,
    /// Flat `key = value` config; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for results.csv and manifest.json.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the power-law exponent.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// AllocateChannels long-run cost against the lower bound.
    Fig2a,
    /// Learning scheduler under fading against round robin without fading.
    Fig2b,
    /// Regret of the learning scheduler at log-spaced horizons.
    Regret,
    /// Feedback-free allocation on random uniform instances.
    Noback,
    /// Extreme-point solver against exhaustive search.
    Oracle,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Fig2a => ExperimentKind::Fig2a,
            Command::Fig2b => ExperimentKind::Fig2b,
            Command::Regret => ExperimentKind::Regret,
            Command::Noback => ExperimentKind::Noback,
            Command::Oracle => ExperimentKind::Oracle,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let kind = cli.experiment.kind();
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse(&text, kind).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(theta) = cli.theta {
        cfg.theta = theta;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let start = Instant::now();
    let rows = match run_experiment(&cfg) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let wall = start.elapsed().as_secs_f64();
    if let Err(e) = write_outputs(&cli.out, &cfg, &rows, wall) {
        eprintln!("error: cannot write to {}: {e}", cli.out.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    println!("{} rows written to {} in {wall:.1}s", rows.len(), cli.out.join("results.csv").display());
    ExitCode::SUCCESS
}
