//! Command-line front end.
//!
//! Exit codes are a stable contract: 0 success, 1 domain error (validation
//! failures, insufficient data, scenario errors), 2 I/O or usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use henge::ids::OperatorId;
use henge::juice::topology_juice;
use henge::metrics::EdgeWindowCounters;
use henge::report;
use henge::runner::{run, RunOptions};
use henge::scenario::{load_scenario, load_topology_file, ScenarioError};
use henge::topology::validate;
use henge::Value;

#[derive(Parser)]
#[command(
    name = "henge",
    about = "SLO-driven elasticity for simulated stream-processing clusters",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a topology file against every structural invariant.
    Validate {
        /// Topology file (TOML).
        topology: PathBuf,
    },
    /// Compute per-operator and topology juice from windowed edge counters.
    Juice {
        /// Topology file (TOML).
        topology: PathBuf,
        /// Stats file: CSV `from,to,sent,executed`, one row per edge.
        stats: PathBuf,
    },
    /// Run a scenario end to end and write metrics, actions, and summary.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics.csv, actions.csv, summary.json.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Baseline arm: simulate without taking any scheduler action.
        #[arg(long)]
        no_scheduler: bool,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { topology } => cmd_validate(&topology),
        Command::Juice { topology, stats } => cmd_juice(&topology, &stats),
        Command::Run {
            scenario,
            seed,
            out_dir,
            no_scheduler,
        } => cmd_run(&scenario, seed, &out_dir, no_scheduler),
    }
}

const EXIT_DOMAIN: u8 = 1;
const EXIT_IO: u8 = 2;

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn scenario_exit(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Io { .. } => EXIT_IO,
        _ => EXIT_DOMAIN,
    }
}

fn cmd_validate(path: &Path) -> ExitCode {
    let spec = match load_topology_file(path) {
        Ok(spec) => spec,
        Err(err) => return fail(scenario_exit(&err), err),
    };
    let report = validate(&spec);
    if report.is_empty() {
        println!("{}: ok", spec.id);
        ExitCode::SUCCESS
    } else {
        for violation in &report.violations {
            println!("{violation}");
        }
        ExitCode::from(EXIT_DOMAIN)
    }
}

type EdgeCounters = BTreeMap<(OperatorId, OperatorId), EdgeWindowCounters<Value>>;

fn parse_stats(path: &Path) -> Result<EdgeCounters, (u8, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| (EXIT_IO, format!("failed to read {}: {e}", path.display())))?;
    let mut counters = BTreeMap::new();
    let mut lines = lines_of(&text);
    match lines.next() {
        Some((_, "from,to,sent,executed")) => {}
        Some((n, other)) => {
            return Err((
                EXIT_DOMAIN,
                format!("{}:{n}: expected header 'from,to,sent,executed', got '{other}'", path.display()),
            ))
        }
        None => return Err((EXIT_DOMAIN, format!("{}: empty stats file", path.display()))),
    }
    for (n, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err((
                EXIT_DOMAIN,
                format!("{}:{n}: expected 4 fields, got {}", path.display(), fields.len()),
            ));
        }
        let sent: Value = fields[2].parse().map_err(|_| {
            (EXIT_DOMAIN, format!("{}:{n}: invalid sent count '{}'", path.display(), fields[2]))
        })?;
        let executed: Value = fields[3].parse().map_err(|_| {
            (EXIT_DOMAIN, format!("{}:{n}: invalid executed count '{}'", path.display(), fields[3]))
        })?;
        counters.insert(
            (OperatorId::from(fields[0]), OperatorId::from(fields[1])),
            EdgeWindowCounters { sent, executed },
        );
    }
    Ok(counters)
}

fn lines_of(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn cmd_juice(topology: &Path, stats: &Path) -> ExitCode {
    let spec = match load_topology_file(topology) {
        Ok(spec) => spec,
        Err(err) => return fail(scenario_exit(&err), err),
    };
    let report = validate(&spec);
    if !report.is_empty() {
        return fail(EXIT_DOMAIN, format!("invalid topology:\n{report}"));
    }
    let counters = match parse_stats(stats) {
        Ok(counters) => counters,
        Err((code, message)) => return fail(code, message),
    };
    match topology_juice(&spec, &counters) {
        Ok(juice) => {
            println!("operator,source,juice");
            for ((op, source), value) in &juice.per_operator {
                println!("{op},{source},{}", report::fmt6(*value));
            }
            println!("topology_juice,{}", report::fmt6(juice.topology_juice));
            ExitCode::SUCCESS
        }
        Err(err) => fail(EXIT_DOMAIN, err),
    }
}

fn cmd_run(scenario_path: &Path, seed: Option<u64>, out_dir: &Path, no_scheduler: bool) -> ExitCode {
    let mut scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(err) => return fail(scenario_exit(&err), err),
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }

    let options = RunOptions {
        scheduler_enabled: !no_scheduler,
    };
    let output = run(&scenario, &options);

    if let Err(e) = fs::create_dir_all(out_dir) {
        return fail(EXIT_IO, format!("failed to create {}: {e}", out_dir.display()));
    }
    let write = |name: &str, contents: String| -> Result<(), String> {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| format!("failed to write {}: {e}", path.display()))
    };
    let mut result = write("metrics.csv", report::render_metrics_csv(&output.metric_rows))
        .and_then(|_| write("actions.csv", report::render_actions_csv(&output.action_rows)))
        .and_then(|_| write("summary.json", report::render_summary_json(&output.summary)));
    if scenario.sim.event_log {
        result = result.and_then(|_| write("events.csv", report::render_events_csv(&output.events)));
    }
    if let Err(message) = result {
        return fail(EXIT_IO, message);
    }

    let cluster = &output.summary.cluster;
    println!(
        "{}: {} rounds, total utility {} of {}",
        scenario.name,
        cluster.rounds,
        report::fmt6(cluster.final_total_utility),
        report::fmt6(cluster.max_total_utility),
    );
    println!("reports written to {}", out_dir.display());
    ExitCode::SUCCESS
}
