mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};

use manifest::RunManifest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_EXHAUSTED: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_IO: u8 = 74;

/// Linear network coding toolkit for the generalized M-network.
#[derive(Debug, Parser)]
#[command(name = "mnet", version)]
pub struct Cli {
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Write the primary JSON document here; a manifest goes beside it.
    #[arg(short, long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Write the run manifest to this path.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the generalized M-network.
    Gen {
        #[arg(long)]
        m: usize,
    },
    /// Emit the m-dimensional routing solution.
    RoutingCode {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: u64,
    },
    /// Check whether a code solves a network. Exit 0 iff it does.
    Verify { net: PathBuf, code: PathBuf },
    /// Exhaustive search for a (d,d) solution.
    Search(SearchArgs),
    /// Evaluate the divisibility ledger on a code for the M-network.
    Ledger {
        net: PathBuf,
        code: PathBuf,
        /// Evaluate non-solutions too (final equality reported, not counted).
        #[arg(long)]
        allow_nonsolution: bool,
    },
    /// Rank tables and polymatroid checks.
    #[command(subcommand)]
    Polymatroid(PolyCommand),
    /// End-to-end run: build, route, verify, ledger and (m = 2) searches.
    Demo {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..=3))]
        m: u64,
        #[arg(long)]
        shards: Option<usize>,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("limit").required(true).args(["budget", "exhaustive"])))]
pub struct SearchArgs {
    pub net: PathBuf,
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub d: usize,
    /// Examine at most this many interior assignments.
    #[arg(long)]
    pub budget: Option<u128>,
    /// Run until the space is exhausted.
    #[arg(long)]
    pub exhaustive: bool,
    /// Worker shards; defaults to the available parallelism.
    #[arg(long)]
    pub shards: Option<usize>,
    /// Disable every reduction of the interior space.
    #[arg(long)]
    pub naive: bool,
    /// Enumerate raw matrices instead of reduced row-echelon forms.
    #[arg(long)]
    pub no_interior_canonicalization: bool,
    /// Enumerate terminal in-edge maps jointly with the interior.
    #[arg(long)]
    pub joint: bool,
}

#[derive(Debug, Subcommand)]
pub enum PolyCommand {
    /// Check normalization, monotonicity and submodularity of a rank table.
    CheckAxioms { table: PathBuf },
    /// Smallest d with rho(A) <= d|A|.
    RhoMax { table: PathBuf },
    /// Whether a vector lies in the polymatroid.
    Membership {
        table: PathBuf,
        /// Comma-separated entries, e.g. `2,0,1`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        vector: Vec<usize>,
    },
    /// Rank table of a subspace arrangement.
    FromSubspaces {
        /// JSON array of matrices `{"p","rows","cols","entries"}`.
        subspaces: Option<PathBuf>,
        /// Take subspaces from a code's global matrices instead.
        #[arg(long, requires = "code", conflicts_with = "subspaces")]
        net: Option<PathBuf>,
        #[arg(long, requires = "net")]
        code: Option<PathBuf>,
        /// Message ids (edge ids or source message ids); default all.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        messages: Vec<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen { .. } => "gen",
            Command::RoutingCode { .. } => "routing-code",
            Command::Verify { .. } => "verify",
            Command::Search(_) => "search",
            Command::Ledger { .. } => "ledger",
            Command::Polymatroid(PolyCommand::CheckAxioms { .. }) => "polymatroid check-axioms",
            Command::Polymatroid(PolyCommand::RhoMax { .. }) => "polymatroid rho-max",
            Command::Polymatroid(PolyCommand::Membership { .. }) => "polymatroid membership",
            Command::Polymatroid(PolyCommand::FromSubspaces { .. }) => "polymatroid from-subspaces",
            Command::Demo { .. } => "demo",
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let start = Instant::now();
    let mut ctx = commands::Context::new();
    let result = commands::run(&cli.command, &mut ctx);
    let (code, outcome) = match result {
        Ok(run) => match commands::emit(&run, cli.output.as_deref(), cli.pretty) {
            Ok(()) => (run.exit, run.outcome),
            Err(e) => {
                eprintln!("error: {}", e.message);
                (e.code, format!("error: {}", e.message))
            }
        },
        Err(e) => {
            eprintln!("error: {}", e.message);
            let outcome = e.outcome.clone().unwrap_or_else(|| format!("error: {}", e.message));
            (e.code, outcome)
        }
    };
    let manifest_path = cli.manifest.clone().or_else(|| cli.output.as_deref().map(manifest::default_path));
    if let Some(path) = manifest_path {
        let m = RunManifest {
            command: cli.command.name().to_string(),
            args: args.iter().skip(1).cloned().collect(),
            inputs: ctx.inputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outcome,
            exit_code: code,
            wall_time_ms: start.elapsed().as_millis(),
        };
        if let Err(e) = m.write(&path) {
            eprintln!("error: cannot write manifest {}: {e}", path.display());
            return ExitCode::from(EXIT_IO);
        }
    }
    ExitCode::from(code)
}
