use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use warpscal::commands::{self, Outcome};
use warpscal::config::RunConfig;

#[derive(Parser)]
#[command(name = "warpscal", version, about = "Prescribed scalar curvature by vertical warping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every applicable sufficient-condition certificate.
    Feasibility(Common),
    /// Minimize the functional, verify the warped metric, write artifacts.
    Solve(Common),
    /// Re-verify a persisted solution CSV.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Canonical-variation scan table and certificate.
    ScanCanonical(Common),
    /// First eigenvalue, volume and scalar curvature range of the base.
    Spectrum(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Outcome> {
        let mut cfg = RunConfig::load(&self.config).map_err(|e| Outcome::error(&e))?;
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(e) = self.epsilon0 {
            cfg.solver.epsilon0 = e;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
        }
        if let Some(n) = self.max_iter {
            cfg.solver.max_iter = n;
        }
        if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 {
            let e = warpscal::Error::Config(format!("epsilon must be positive, got {}", cfg.epsilon));
            return Err(Outcome::error(&e));
        }
        cfg.solver.validate().map_err(|e| Outcome::error(&e))?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Feasibility(c) => c.load().map(|cfg| commands::cmd_feasibility(&cfg, c.out.as_deref())),
        Command::Solve(c) => c.load().map(|cfg| {
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            commands::cmd_solve(&cfg, &out)
        }),
        Command::Verify { common, solution } => common
            .load()
            .map(|cfg| commands::cmd_verify(&cfg, solution.as_deref(), common.out.as_deref())),
        Command::ScanCanonical(c) => c.load().map(|cfg| commands::cmd_scan_canonical(&cfg, c.out.as_deref())),
        Command::Spectrum(c) => c.load().map(|cfg| commands::cmd_spectrum(&cfg)),
    }
    .unwrap_or_else(|o| o);
    for m in &outcome.messages {
        eprintln!("{m}");
    }
    match serde_json::to_string_pretty(&outcome.report) {
        Ok(s) => {
            let _ = writeln!(std::io::stdout().lock(), "{s}");
        }
        Err(e) => eprintln!("error: cannot serialize report: {e}"),
    }
    ExitCode::from(outcome.exit_code as u8)
}
