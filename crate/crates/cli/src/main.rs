use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use zforce_cli::config::{ExperimentConfig, Resolved};
use zforce_cli::{output, run, CliError};

#[derive(Parser)]
#[command(name = "zforce", version, about = "Run sigma-z spin-dependent force experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<name>.csv` and `<name>.manifest.toml`.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output` or the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweeps.
        #[arg(long)]
        threads: Option<usize>,
        /// Override the shot-noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config and report derived quantities without running it.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::parse(&text)
}

fn report(cfg: &ExperimentConfig, resolved: &Resolved) {
    println!("{}: {} is valid", cfg.name(), cfg.experiment.name());
    for line in &resolved.derived {
        println!("  {line}");
    }
}

fn run_cmd(path: &Path, out: Option<PathBuf>, threads: Option<usize>, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = load(path)?;
    if let Some(seed) = seed {
        match cfg.noise.as_mut() {
            Some(n) => n.seed = seed,
            None => return Err(CliError::validation("--seed needs a [noise] section in the config")),
        }
    }
    let resolved = cfg.resolve()?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::validation("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }
    let result = run::execute(&resolved)?;
    let dir = out.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    let paths = output::artifact_paths(&dir, &cfg);
    let table = output::csv(&cfg, &result);
    let manifest = output::manifest(&cfg, &resolved.sim, &resolved.derived).to_toml();
    output::write(&paths, &table, &manifest)?;
    println!("wrote {} and {}", paths.table.display(), paths.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads, seed } => run_cmd(&config, out, threads, seed),
        Command::Validate { config } => load(&config).and_then(|cfg| {
            let resolved = cfg.resolve()?;
            report(&cfg, &resolved);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zforce: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
