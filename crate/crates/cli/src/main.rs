use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use manetsim::harness::Metric;
use manetsim::{parse_scenario, Protocol, Scenario};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "manetsim", version, about = "MANET simulator comparing AODV and EAODV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario under one protocol.
    Run {
        /// Scenario file; built-in defaults when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        protocol: Option<Protocol>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every seed under both protocols and write comparison.csv.
    Compare {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn load(path: Option<&Path>) -> Result<Scenario> {
    let Some(path) = path else {
        return Ok(Scenario::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("scenario {}", path.display()))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, protocol, seed, out } => {
            let mut sc = load(scenario.as_deref())?;
            if let Some(p) = protocol {
                sc = sc.with_protocol(p);
            }
            if let Some(s) = seed {
                sc = sc.with_seed(s);
            }
            let sum = manetsim::run(&sc, &out)?;
            let total = sum.conservation.total();
            println!(
                "protocol={} seed={} sent={} received={} dropped={} in_flight={} trace_sha256={} dir={}",
                sum.protocol,
                sum.seed,
                total.generated,
                total.received,
                total.dropped.total(),
                total.in_flight,
                sum.trace_sha256,
                sum.dir.display()
            );
        }
        Command::Compare { scenario, seeds, out } => {
            let sc = load(scenario.as_deref())?;
            let rep = manetsim::compare(&sc, &seeds, &out)?;
            for r in rep.rows.iter().filter(|r| r.metric == Metric::ThroughputPps) {
                let mean = |s: Option<manetsim::harness::SampleStats>| s.map_or(f64::NAN, |s| s.mean);
                println!(
                    "{}..{} throughput aodv={:.3} eaodv={:.3} eaodv_wins={} aodv_wins={} ties={}",
                    r.start,
                    r.end,
                    mean(r.aodv),
                    mean(r.eaodv),
                    r.eaodv_wins,
                    r.aodv_wins,
                    r.ties
                );
            }
            println!("comparison={}", rep.csv_path.display());
        }
        Command::Validate { scenario } => {
            let sc = load(Some(&scenario))?;
            println!(
                "ok nodes={} sim_time={} flows={} protocol={} seed={}",
                sc.node_count,
                sc.sim_time,
                sc.flows.len(),
                sc.protocol,
                sc.seed
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("MANETSIM_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
