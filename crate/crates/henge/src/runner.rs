//! Couples the simulator and the scheduler into a full run.
//!
//! One driver owns the world, ticks it a second at a time, and at every
//! 10-second round boundary snapshots the cluster, records metric rows,
//! and (once the warm-up has passed) lets the scheduler take its action.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ids::TopologyId;
use crate::scenario::Scenario;
use crate::scheduler::{
    step, ActionKind, ClusterState, ConfigHistory, MachineState, SchedulerAction,
};
use crate::simulator::{EventRow, World};
use crate::utility::SATISFIED_EPSILON;
use crate::Value;

pub use crate::scheduler::ROUND_SECS;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// False runs the baseline arm: the simulator alone, no actions.
    pub scheduler_enabled: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            scheduler_enabled: true,
        }
    }
}

/// One metrics-export row.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub round: u64,
    pub time_s: u64,
    pub topology: TopologyId,
    pub latency_ms: Value,
    pub juice: Value,
    pub utility: Value,
    pub input_rate: Value,
    pub output_rate: Value,
}

/// One action-log row. `total_utility_after` is the cluster utility at the
/// next round boundary; the final row repeats its pre-action value.
#[derive(Debug, Clone)]
pub struct ActionRow {
    pub round: u64,
    pub time_s: u64,
    pub action: SchedulerAction,
    pub total_utility_before: Value,
    pub total_utility_after: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologySummary {
    pub final_utility: Value,
    pub max_utility: Value,
    /// Fraction of metric rounds with the SLO satisfied.
    pub slo_satisfied_fraction: Value,
    pub reconfigurations: u64,
    /// First time after which the topology stayed at max utility through the
    /// end of the run.
    pub convergence_time_s: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub final_total_utility: Value,
    pub max_total_utility: Value,
    pub rounds: u64,
    pub final_state: ClusterState,
    /// Time of the first transition into the converged state, if any.
    pub converged_at_s: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub topologies: BTreeMap<TopologyId, TopologySummary>,
    pub cluster: ClusterSummary,
}

#[derive(Debug)]
pub struct RunOutput {
    pub metric_rows: Vec<MetricRow>,
    pub action_rows: Vec<ActionRow>,
    pub events: Vec<EventRow>,
    pub summary: Summary,
}

/// Runs a scenario to completion, returning every row stream plus the
/// summary. Deterministic: equal scenarios and seeds give identical output.
pub fn run(scenario: &Scenario, options: &RunOptions) -> RunOutput {
    let mut world = World::new(scenario);
    let mut history = ConfigHistory::default();
    let mut machine = MachineState::default();

    let mut metric_rows = Vec::new();
    let mut action_rows: Vec<ActionRow> = Vec::new();
    let mut pending_after: Option<usize> = None;
    let mut converged_at: Option<u64> = None;

    let max_utilities: BTreeMap<TopologyId, Value> = scenario
        .topologies
        .iter()
        .map(|b| (b.spec.id.clone(), b.spec.slo.max_utility))
        .collect();

    for _ in 0..scenario.duration_s {
        world.tick();
        let time = world.time();
        if !time.is_multiple_of(ROUND_SECS) {
            continue;
        }
        let round = time / ROUND_SECS;
        let snapshot = world.snapshot();
        let total = snapshot.total_utility();

        if let Some(idx) = pending_after.take() {
            action_rows[idx].total_utility_after = total;
        }

        for (id, obs) in &snapshot.topologies {
            metric_rows.push(MetricRow {
                round,
                time_s: time,
                topology: id.clone(),
                latency_ms: obs.metrics.latency_ms,
                juice: obs.metrics.juice,
                utility: obs.utility.current,
                input_rate: obs.metrics.input_rate,
                output_rate: obs.metrics.output_rate,
            });
        }

        if options.scheduler_enabled && time >= scenario.scheduler_start_s {
            let was_converged = machine.state == ClusterState::Converged;
            let (action, next_machine, next_history) = step(&snapshot, history, machine);
            machine = next_machine;
            history = next_history;
            if !was_converged && machine.state == ClusterState::Converged {
                converged_at.get_or_insert(time);
            }
            if action.mutates() {
                world.apply_action(&action);
            }
            action_rows.push(ActionRow {
                round,
                time_s: time,
                action,
                total_utility_before: total,
                total_utility_after: total,
            });
            pending_after = Some(action_rows.len() - 1);
        }
    }

    let summary = summarize(
        scenario,
        &metric_rows,
        &action_rows,
        &max_utilities,
        machine.state,
        converged_at,
    );

    RunOutput {
        metric_rows,
        action_rows,
        events: world.take_events(),
        summary,
    }
}

fn summarize(
    scenario: &Scenario,
    metric_rows: &[MetricRow],
    action_rows: &[ActionRow],
    max_utilities: &BTreeMap<TopologyId, Value>,
    final_state: ClusterState,
    converged_at: Option<u64>,
) -> Summary {
    let mut topologies = BTreeMap::new();
    for (id, max_utility) in max_utilities {
        let rows: Vec<&MetricRow> = metric_rows.iter().filter(|r| &r.topology == id).collect();
        let satisfied =
            |r: &MetricRow| r.utility >= *max_utility - SATISFIED_EPSILON;
        let satisfied_count = rows.iter().filter(|r| satisfied(r)).count();
        // Convergence: the time of the first row of the final all-satisfied
        // suffix, None when the last round still misses the SLO.
        let convergence_time_s = if rows.last().is_some_and(|r| satisfied(r)) {
            let mut t = rows.last().map(|r| r.time_s);
            for r in rows.iter().rev() {
                if satisfied(r) {
                    t = Some(r.time_s);
                } else {
                    break;
                }
            }
            t
        } else {
            None
        };
        let reconfigurations = action_rows
            .iter()
            .filter(|a| {
                a.action.kind == ActionKind::Reconfigure && a.action.targets.contains(id)
            })
            .count() as u64;
        topologies.insert(
            id.clone(),
            TopologySummary {
                final_utility: rows.last().map(|r| r.utility).unwrap_or(0.0),
                max_utility: *max_utility,
                slo_satisfied_fraction: if rows.is_empty() {
                    0.0
                } else {
                    satisfied_count as Value / rows.len() as Value
                },
                reconfigurations,
                convergence_time_s,
            },
        );
    }

    let last_round = metric_rows.last().map(|r| r.round).unwrap_or(0);
    let final_total = metric_rows
        .iter()
        .filter(|r| r.round == last_round)
        .map(|r| r.utility)
        .sum();

    Summary {
        topologies,
        cluster: ClusterSummary {
            final_total_utility: final_total,
            max_total_utility: max_utilities.values().sum(),
            rounds: scenario.duration_s / ROUND_SECS,
            final_state,
            converged_at_s: converged_at,
        },
    }
}
