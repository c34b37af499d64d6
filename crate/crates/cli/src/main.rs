//! `cactus`: reproducible experiments on the sandpile of the expanded cactus.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 size guard, 3 input error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "cactus",
    version,
    about = "Sandpile experiments on the expanded cactus"
)]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for exhaustive sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Search or sampling budget.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Write the output here, with a manifest alongside.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the run manifest here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
#[group(required = true, multiple = false)]
pub struct GraphSource {
    /// Graph JSON file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Use the ball of this radius about the origin cell.
    #[arg(long)]
    pub ball: Option<usize>,
    /// Use the rooted subtree of this shape, e.g. `(()())`.
    #[arg(long)]
    pub shape: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Regenerate the radical classification tables and diff them.
    VerifyTables {
        /// Corrupt one derived row before comparing.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Count stable and recurrent configurations by brute force.
    BruteCount {
        #[command(flatten)]
        source: GraphSource,
        /// Chain cluster (cell ids) for a decomposition cross-check.
        #[arg(long, value_delimiter = ',')]
        chain: Option<Vec<u32>>,
    },
    /// Radical censuses of the balanced subtrees, as CSV.
    RadicalCensus {
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// Check the filling rules for one cluster against brute force.
    FillCheck {
        #[command(flatten)]
        source: GraphSource,
        /// Cluster cell ids, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        cluster: Vec<u32>,
        /// Check the first-wave rules on a full graph instead of a rooted subtree.
        #[arg(long)]
        first_wave: bool,
    },
    /// Distribution of first-wave cell counts over recurrent configurations.
    FirstWaveDist {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: Mode,
    },
    /// Search for a vertex that topples only after the first wave.
    Witness {
        #[command(flatten)]
        source: GraphSource,
    },
    /// Cluster series coefficients, as CSV.
    Series {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the decay exponent of the scaled cluster series.
    ExponentFit {
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Liberty-compliance fraction of the clusters of one size.
    Phi {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Print the graph JSON of a ball.
    Ball {
        #[arg(long)]
        radius: usize,
    },
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exhaustive,
    Sampled,
}

pub struct Globals {
    pub json: bool,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub budget: Option<u64>,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::VerifyTables { .. } => "verify-tables",
        Command::BruteCount { .. } => "brute-count",
        Command::RadicalCensus { .. } => "radical-census",
        Command::FillCheck { .. } => "fill-check",
        Command::FirstWaveDist { .. } => "first-wave-dist",
        Command::Witness { .. } => "witness",
        Command::Series { .. } => "series",
        Command::ExponentFit { .. } => "exponent-fit",
        Command::Phi { .. } => "phi",
        Command::Ball { .. } => "ball",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals {
        json: cli.json,
        workers: cli.workers,
        seed: cli.seed,
        budget: cli.budget,
    };
    let run = match commands::run(&cli.command, &globals) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return ExitCode::from(e.code);
        }
    };
    let mut text = run.output;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let manifest = manifest::RunManifest::new(
        command_name(&cli.command),
        serde_json::json!({
            "command": serde_json::to_value(&cli.command).unwrap_or_default(),
            "json": cli.json,
            "workers": cli.workers,
            "budget": cli.budget,
        }),
        run.seed,
        text.as_bytes(),
    );
    let manifest_path = cli.manifest.clone().or_else(|| {
        cli.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = &cli.out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(3);
        }
    } else {
        print!("{text}");
    }
    if let Some(path) = manifest_path {
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        if let Err(e) = std::fs::write(&path, body + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(3);
        }
    }
    ExitCode::from(run.status)
}
