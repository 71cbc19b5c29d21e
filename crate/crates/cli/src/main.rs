use anisopml::Complex64;
use anisopml_cli::commands::{self, CliError, Outcome, EXIT_CONFIG};
use anisopml_cli::config::{parse_complex, LoadedConfig};
use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Resonances of exterior Helmholtz problems with radial complex scaling.
#[derive(Parser)]
#[command(name = "anisopml", version)]
struct Cli {
    /// Log solver progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the sufficient conditions on scaling and medium.
    Check {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference resonances of the sound-hard unit disk.
    Reference {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute and filter the spectrum.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Match a computed spectrum against reference values.
    Compare {
        computed: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        tolerance: f64,
        /// Number of leading references that must match.
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decay rates of the scaled fundamental solution along rays.
    Damping {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = complex_arg)]
        omega: Option<Complex64>,
        #[arg(long)]
        rays: Option<usize>,
    },
}

fn complex_arg(s: &str) -> Result<Complex64, String> {
    parse_complex(s).ok_or_else(|| format!("cannot read {s:?} as a complex number"))
}

fn with_config(path: &Path, out: Option<&Path>, f: impl FnOnce(&LoadedConfig, &Path) -> Result<Outcome, CliError>) -> Result<Outcome, CliError> {
    let cfg = LoadedConfig::load(path).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    let dir = commands::output_dir(&cfg, out);
    f(&cfg, &dir)
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Check { config, out } => with_config(&config, out.as_deref(), commands::check),
        Command::Reference { config, out } => with_config(&config, out.as_deref(), commands::reference),
        Command::Solve { config, out, seed } => with_config(&config, out.as_deref(), |c, d| commands::solve(c, d, seed)),
        Command::Compare { computed, reference, tolerance, count, out } => {
            commands::compare(&computed, &reference, tolerance, count, out.as_deref())
        }
        Command::Damping { config, out, omega, rays } => {
            with_config(&config, out.as_deref(), |c, d| commands::damping(c, d, omega, rays))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.text.as_bytes());
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
