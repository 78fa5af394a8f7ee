use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use folioid::runner::{self, ScenarioConfig};

/// Groupoid quotients and multiplicative foliations, checked numerically.
#[derive(Debug, Parser)]
#[command(name = "folioid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the check pipeline of a scenario config.
    Run {
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override numeric.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override numeric.samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// List the available checks.
    ListChecks,
    /// Describe a builtin scenario family and its parameters.
    DescribeFamily { name: String },
}

fn load(path: &Path, seed: Option<u64>, samples: Option<usize>) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed {
        cfg.numeric.seed = s;
    }
    if let Some(n) = samples {
        cfg.numeric.samples = n;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(config: &Path, out: Option<&Path>, seed: Option<u64>, samples: Option<usize>) -> Result<u8, String> {
    let cfg = load(config, seed, samples)?;
    let report = runner::run_config(&cfg, config.parent()).map_err(|e| e.to_string())?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => print!("{text}"),
    }
    for c in &report.checks {
        eprintln!("{:<32} {} (max residual {:e})", c.name, if c.pass { "pass" } else { "FAIL" }, c.max_residual);
    }
    if let Some(sc) = &report.short_circuit {
        eprintln!("stopped at {}: {}", sc.check, sc.error);
    }
    Ok(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed, samples } => run(&config, out.as_deref(), seed, samples),
        Command::ListChecks => {
            print!("{}", runner::list_checks());
            Ok(0)
        }
        Command::DescribeFamily { name } => runner::describe_family(&name)
            .map(|t| {
                print!("{t}");
                0
            })
            .map_err(|e| e.to_string()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
