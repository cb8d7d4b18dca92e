use std::path::PathBuf;
use std::process::ExitCode;

use birkhoff_cli::{cmd_check, cmd_converge, cmd_run, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Box-scheme integration and dissipation-law checks for the damped wave equation.
#[derive(Parser)]
#[command(name = "birkhoff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate and write the solution CSV.
    Run(Overrides),
    /// Self-adjointness and discrete dissipation-law checks.
    Check(Overrides),
    /// Convergence table against the exact solution.
    Converge(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<String>,
    #[arg(long)]
    mode_k: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Refinement levels for `converge`.
    #[arg(long)]
    levels: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("scheme", &self.scheme),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("mode_k", &self.mode_k),
            ("nx", &self.nx),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("levels", &self.levels),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let (overrides, command): (&Overrides, fn(&RunConfig, &mut dyn std::io::Write) -> Result<(), CliError>) =
        match &cli.command {
            Command::Run(o) => (o, cmd_run),
            Command::Check(o) => (o, cmd_check),
            Command::Converge(o) => (o, cmd_converge),
        };
    let result = overrides.resolve().and_then(|cfg| command(&cfg, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
