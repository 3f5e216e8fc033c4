use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use acap_bench::Operation;
use acap_cli::bench::{cmd_bench, BenchArgs};
use acap_cli::demo::{cmd_demo, DemoArgs};
use acap_cli::diff::cmd_diff;
use acap_cli::explore::{cmd_explore, ExploreArgs};
use acap_cli::hash::cmd_hash;
use acap_cli::serve::{cmd_serve, ServeArgs};
use acap_cli::validate::{cmd_validate, ValidateArgs};
use acap_cli::{CliError, Output};
use acap_core::lifecycle::{ExplorationBounds, ExploreOrder, Mutation};
use acap_middleware::AdherenceMode;

/// Agent consent tooling: hashing, validation, policy diffs, lifecycle
/// exploration, benchmarks and a two-agent demo.
#[derive(Debug, Parser)]
#[command(name = "acap", version)]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Log progress and HTTP traffic to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Content hash of a policy document or capability manifest.
    Hash { file: PathBuf },
    /// Validate a consent chain (or audit export) and adherence trails.
    Validate {
        /// Consent records as a JSON array, or an audit export.
        chain: PathBuf,
        /// Adherence events as a JSON array; repeatable.
        #[arg(long = "trail")]
        trails: Vec<PathBuf>,
        /// Policy documents the records bind to; repeatable.
        #[arg(long = "policy")]
        policies: Vec<PathBuf>,
        /// Verification key as kid=hex; repeatable. Enables signature checks.
        #[arg(long = "key")]
        keys: Vec<String>,
    },
    /// Claim-level diff between two policy versions.
    Diff { old: PathBuf, new: PathBuf },
    /// Explore the consent lifecycle and check its safety and liveness properties.
    Explore(ExploreFlags),
    /// Time hashing and validation over the reference grid.
    Bench(BenchFlags),
    /// Run the two-agent demo over loopback HTTP.
    Demo(DemoFlags),
    /// Serve a callee until interrupted.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        adherence_mode: Option<AdherenceMode>,
    },
}

#[derive(Debug, Args)]
struct ExploreFlags {
    #[arg(long, default_value_t = ExplorationBounds::REFERENCE.max_versions)]
    max_versions: u32,
    #[arg(long, default_value_t = ExplorationBounds::REFERENCE.max_adherence_events)]
    max_adherence: u32,
    #[arg(long, default_value_t = ExplorationBounds::REFERENCE.max_cap_versions)]
    max_cap: u32,
    /// Inject a transition bug; repeatable.
    #[arg(long)]
    inject: Vec<Mutation>,
    /// Enable the governance review tier.
    #[arg(long)]
    governance: bool,
    #[arg(long, default_value = "bfs", value_parser = parse_order)]
    order: ExploreOrder,
    #[arg(long, default_value_t = 2_000_000)]
    max_states: usize,
}

#[derive(Debug, Args)]
struct BenchFlags {
    /// Operation to measure; repeatable, all by default.
    #[arg(long = "operation")]
    operations: Vec<Operation>,
    /// Sizes replacing each selected operation's grid.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Timed samples per row, 200 to 500.
    #[arg(long, default_value_t = 300)]
    samples: usize,
}

#[derive(Debug, Args)]
struct DemoFlags {
    /// Port for the in-process callee; 0 picks a free one.
    #[arg(long, default_value_t = 0)]
    callee_port: u16,
    /// Use a callee running elsewhere (for example `acap serve`).
    #[arg(long, conflicts_with = "callee_port")]
    callee_url: Option<String>,
    #[arg(long, default_value = "local")]
    adherence_mode: AdherenceMode,
    /// Write the fetched audit export here.
    #[arg(long)]
    audit_out: Option<PathBuf>,
    /// Write the served policy document here.
    #[arg(long)]
    policy_out: Option<PathBuf>,
}

fn parse_order(s: &str) -> Result<ExploreOrder, String> {
    match s {
        "bfs" => Ok(ExploreOrder::Bfs),
        "dfs" => Ok(ExploreOrder::Dfs),
        other => Err(format!("unknown order '{other}' (bfs or dfs)")),
    }
}

fn run(command: Command) -> Result<Option<Output>, CliError> {
    let output = match command {
        Command::Hash { file } => cmd_hash(&file)?,
        Command::Validate {
            chain,
            trails,
            policies,
            keys,
        } => cmd_validate(&ValidateArgs {
            chain,
            trails,
            policies,
            keys,
        })?,
        Command::Diff { old, new } => cmd_diff(&old, &new)?,
        Command::Explore(f) => cmd_explore(&ExploreArgs {
            max_versions: f.max_versions,
            max_adherence: f.max_adherence,
            max_cap: f.max_cap,
            inject: f.inject,
            governance: f.governance,
            order: f.order,
            max_states: f.max_states,
        })?,
        Command::Bench(f) => cmd_bench(&BenchArgs {
            operations: f.operations,
            sizes: f.sizes,
            samples: f.samples,
        })?,
        Command::Demo(f) => cmd_demo(&DemoArgs {
            callee_port: f.callee_port,
            callee_url: f.callee_url,
            mode: f.adherence_mode,
            audit_out: f.audit_out,
            policy_out: f.policy_out,
        })?,
        Command::Serve {
            config,
            listen,
            adherence_mode,
        } => {
            cmd_serve(&ServeArgs {
                config,
                listen,
                mode: adherence_mode,
            })?;
            return Ok(None);
        }
    };
    Ok(Some(output))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = if cli.verbose { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(cli.command) {
        Ok(Some(output)) => {
            println!("{}", output.render(cli.json));
            ExitCode::from(output.code)
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&e.json()).expect("JSON values serialize")
                );
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.code)
        }
    }
}
