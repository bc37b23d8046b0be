//! Command-line front end: boundary extraction, tiling, reachability runs,
//! evaluation, benchmarks and SVG rendering.

mod render;
mod run;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 2 usage, 3 verification failed, 4 numeric failure.
const EXIT_USAGE: u8 = 2;
const EXIT_UNVERIFIED: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "zonoreach",
    about = "Guaranteed inner-approximations of reachable sets via zonotopic boundary analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the exact boundary of a zonotope: facets as JSON, boundary
    /// matrix as CSV.
    Boundary {
        /// Zonotope JSON file: `{"center": [...], "generators": [[row], ...]}`
        zonotope: PathBuf,
        /// Output directory (default: alongside the input)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a zonotope into non-overlapping tiles: tiles as JSON, tiling
    /// matrix as CSV.
    Tile {
        zonotope: PathBuf,
        /// Stop between tiling passes once at least this many tiles exist
        /// (0 = run all passes; the first pass always runs)
        #[arg(long, default_value_t = 0)]
        budget: usize,
        /// Grid-split a parallelotope into k^n congruent pieces instead of
        /// running the tiling pass
        #[arg(long, default_value_t = 0)]
        grid_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the inner-approximation pipeline described by a config file
    /// and/or direct flags.
    Reach {
        /// Run config JSON; see README for the schema. Optional when
        /// --system is given.
        config: Option<PathBuf>,
        /// Bundled benchmark name or system config path (overrides the file)
        #[arg(long)]
        system: Option<String>,
        /// Time step (overrides the file)
        #[arg(long)]
        h: Option<f64>,
        /// Number of steps (overrides the file)
        #[arg(long = "N", visible_alias = "steps")]
        n_steps: Option<usize>,
        /// Boundary piece budget per step (overrides the file)
        #[arg(long)]
        budget: Option<usize>,
        /// Separation margin (overrides the file)
        #[arg(long)]
        epsilon: Option<f64>,
        /// Output directory (overrides the file)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a finished run directory: minimum width ratio and
    /// Monte-Carlo soundness.
    Eval {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 20240001)]
        seed: u64,
    },
    /// Run a bundled benchmark end-to-end and print a summary row.
    Bench {
        /// Benchmark name (see `bench --list`)
        #[arg(long)]
        name: Option<String>,
        /// Run every bundled benchmark
        #[arg(long, default_value_t = false)]
        all: bool,
        /// List bundled benchmark names
        #[arg(long, default_value_t = false)]
        list: bool,
    },
    /// Render a finished run as an SVG overlay of 2-d projections.
    Render {
        run_dir: PathBuf,
        /// The two (1-based) state axes to project onto
        #[arg(long, num_args = 2, default_values_t = [1usize, 2usize])]
        axes: Vec<usize>,
        /// Overlay the boundary pieces of the final step
        #[arg(long, default_value_t = false)]
        pieces: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Boundary { zonotope, out } => run::cmd_boundary(&zonotope, out.as_deref()),
        Command::Tile { zonotope, budget, grid_k, out } => {
            run::cmd_tile(&zonotope, budget, grid_k, out.as_deref())
        }
        Command::Reach { config, system, h, n_steps, budget, epsilon, out } => {
            let overrides = run::ReachOverrides { system, h, n_steps, budget, epsilon, out };
            run::cmd_reach(config.as_deref(), overrides)
        }
        Command::Eval { run_dir, samples, seed } => run::cmd_eval(&run_dir, samples, seed),
        Command::Bench { name, all, list } => run::cmd_bench(name.as_deref(), all, list),
        Command::Render { run_dir, axes, pieces, out } => {
            run::cmd_render(&run_dir, &axes, pieces, out.as_deref())
        }
    };
    match outcome {
        Ok(run::Outcome::Success) => ExitCode::SUCCESS,
        Ok(run::Outcome::Unverified) => ExitCode::from(EXIT_UNVERIFIED),
        Err(run::CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(run::CmdError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
