use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use tailrisk_cli::{run, Command, RunConfig};

/// Worst-case tail risk under Wasserstein and φ-divergence ambiguity.
#[derive(Debug, Parser)]
#[command(
    version,
    about,
    after_help = "Data files: `format = \"plain\"` reads one loss per line; `format = \"fama_french\"` reads the first \
                  table of a 48-industry portfolio CSV. Loss files are taken as given: the Danish fire losses are \
                  already inflation adjusted to 1985 values by their publisher and are not rescaled here."
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; keys are documented in the README.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    let code = cfg.and_then(|mut cfg| {
        if cli.seed.is_some() {
            cfg.seed = cli.seed;
        }
        if cli.out.is_some() {
            cfg.out = cli.out.clone();
        }
        run(cli.command, &cfg)
    });
    match code {
        Ok(c) => ExitCode::from(c as u8),
        Err(e) => {
            eprintln!("tailrisk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
