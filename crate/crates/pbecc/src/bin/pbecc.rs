use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pbecc::harness::runner::{render_summary, run_scenario, summarize_trace_dir, write_outputs};
use pbecc::harness::scenario::{bundled, bundled_by_name, Scenario};

#[derive(Parser)]
#[command(name = "pbecc", about = "Cellular congestion-control simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a bundled name or a TOML file path) and write traces.
    Run {
        scenario: String,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics.json and the CSV traces.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a previously written trace directory.
    Report { trace_dir: PathBuf },
    /// List the bundled scenarios.
    ListScenarios,
}

fn load_scenario(name: &str) -> Result<Scenario, String> {
    if let Some(s) = bundled_by_name(name) {
        return Ok(s);
    }
    let path = PathBuf::from(name);
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        return Scenario::from_toml(&text).map_err(|e| e.to_string());
    }
    Err(format!(
        "unknown scenario `{name}` (not a bundled name or an existing file); try `pbecc list-scenarios`"
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, seed, out } => (|| -> Result<(), String> {
            let spec = load_scenario(&scenario)?;
            let seed = seed.unwrap_or(spec.seed);
            let output = run_scenario(&spec, seed);
            print!("{}", render_summary(&output.metrics));
            if let Some(dir) = out {
                write_outputs(&output, &dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                println!("traces written to {}", dir.display());
            }
            Ok(())
        })(),
        Command::Report { trace_dir } => summarize_trace_dir(&trace_dir)
            .map(|s| print!("{s}"))
            .map_err(|e| format!("{}: {e}", trace_dir.display())),
        Command::ListScenarios => {
            for (name, text) in bundled() {
                let first_comment = text
                    .lines()
                    .find_map(|l| l.strip_prefix("# "))
                    .unwrap_or("");
                println!("{name:28} {first_comment}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
