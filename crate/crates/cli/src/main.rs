use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sola_cli::{repl, report, SimulateArgs};
use sola_core::sim::MetricsLog;
use sola_server::AppState;

#[derive(Parser)]
#[command(name = "sola", version, about = "Teachable command-grounding agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Talk to the agent on the terminal.
    Repl {
        #[arg(long, env = "SOLA_CONFIG")]
        config: PathBuf,
        /// Loaded at start if it exists; `:save` writes it.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long, default_value = "user")]
        user: String,
    },
    /// Serve the HTTP API. The snapshot is loaded if present and saved on ctrl-c.
    Serve {
        #[arg(long, env = "SOLA_CONFIG")]
        config: PathBuf,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Run a scenario with simulated users and write the metrics log.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Used when the scenario names no config of its own.
        #[arg(long, env = "SOLA_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "metrics.jsonl")]
        out: PathBuf,
        /// Also write the end state here.
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        window: usize,
    },
    /// Print the seed commands and facts held in a snapshot.
    Inspect {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Summarize a metrics log.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value_t = 50)]
        window: usize,
        /// Print one curve row every this many intents.
        #[arg(long, default_value_t = 20)]
        step: usize,
        /// Write the learning curve as SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Repl { config, snapshot, user } => {
            let cfg = sola_cli::load_config(&config)?;
            let agent = sola_cli::load_agent(&cfg, snapshot.as_deref())?;
            let mut r = repl::Repl::new(agent, sola_cli::world_for(&cfg), &user, snapshot.as_deref());
            println!("{}", repl::HELP);
            repl::run(&mut r, std::io::stdin().lock(), &mut std::io::stdout())
        }
        Command::Serve { config, snapshot, port, host } => {
            let cfg = sola_cli::load_config(&config)?;
            let agent = sola_cli::load_agent(&cfg, snapshot.as_deref())?;
            let mut state = AppState::new(agent, sola_cli::world_for(&cfg));
            if let Some(p) = snapshot {
                state = state.with_snapshot_path(p);
            }
            let addr = SocketAddr::new(host, port);
            eprintln!("listening on http://{addr}");
            tokio::runtime::Runtime::new()?.block_on(sola_server::serve(state, addr))?;
            Ok(())
        }
        Command::Simulate { scenario, config, seed, out, snapshot_out, window } => {
            let summary = sola_cli::simulate(&SimulateArgs {
                scenario: &scenario,
                config: config.as_deref(),
                seed,
                out: &out,
                snapshot_out: snapshot_out.as_deref(),
                window,
            })?;
            println!("{}", sola_cli::summary_line(&summary));
            println!("metrics written to {}", out.display());
            Ok(())
        }
        Command::Inspect { snapshot } => {
            print!("{}", sola_cli::inspect(&snapshot)?);
            Ok(())
        }
        Command::Report { metrics, window, step, plot } => {
            let text = std::fs::read_to_string(&metrics).with_context(|| format!("reading {}", metrics.display()))?;
            let log = MetricsLog::from_jsonl(&text).context("parsing metrics log")?;
            print!("{}", report::text(&log, window, step));
            if let Some(p) = plot {
                std::fs::write(&p, report::svg(&log.summary(window)))?;
                println!("plot written to {}", p.display());
            }
            Ok(())
        }
    }
}
