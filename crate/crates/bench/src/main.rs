use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nlmor_bench::{run_command, BenchConfig, BenchError, Command, Method, Selection};

/// Reduction benchmark on advection, diffusion and advection-diffusion manifolds.
///
/// Exit status: 0 on success, 1 on invalid input (including usage errors),
/// 2 when a numerical method failed. Failed cells are still written, flagged.
#[derive(Parser, Debug)]
#[command(name = "nlmor-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML config file, or `default` for the built-in protocol.
    #[arg(long, global = true, default_value = "default")]
    config: PathBuf,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Restrict to these case labels (comma-separated or repeated).
    #[arg(long, global = true, value_delimiter = ',')]
    case: Vec<String>,

    /// Restrict to these methods: pod, registration, autoencoder, linear,
    /// mds, isomap, spectral_clustering, lle, or kpca for all five kernels.
    #[arg(long, global = true, value_delimiter = ',')]
    method: Vec<String>,

    /// Also write SVG plots next to the spectra and error CSVs.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Write the training and test snapshot sets.
    Generate,
    /// Normalised POD, registered-POD and kernel spectra.
    Spectra,
    /// Train/test reconstruction errors over the latent sweep.
    Errors,
    /// Latent trajectories at the plotting dimension.
    Latents,
    /// Everything above.
    All,
}

fn run(cli: Cli) -> Result<i32, BenchError> {
    let mut cfg = BenchConfig::load(&cli.config)?;
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut methods = Vec::new();
    for m in &cli.method {
        for parsed in Method::parse_list(m)? {
            if !methods.contains(&parsed) {
                methods.push(parsed);
            }
        }
    }
    let sel = Selection {
        cases: cli.case,
        methods,
        svg: cli.svg,
    };
    let command = match cli.command {
        Cmd::Generate => Command::Generate,
        Cmd::Spectra => Command::Spectra,
        Cmd::Errors => Command::Errors,
        Cmd::Latents => Command::Latents,
        Cmd::All => Command::All,
    };
    let summary = run_command(&cfg, command, &sel)?;
    println!("wrote {} files under {}", summary.files.len(), cfg.output_dir.display());
    if summary.failures.is_empty() {
        Ok(0)
    } else {
        eprintln!("{} failed cells (flagged in the CSVs)", summary.failures.len());
        Ok(2)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
