//! The cluster state machine: one action per round.
//!
//! Each 10-second round the scheduler looks at an immutable cluster snapshot
//! and picks exactly one action:
//!
//! * **Reconfiguration**: grant executors to the SLO-missing topology with
//!   the highest max utility, sized by how congested each operator is.
//! * **Reduction**: when a reconfiguration dropped total utility on a
//!   congested cluster, shrink every satisfied topology's uncongested bolts
//!   by 80%, at most once per topology between resets.
//! * **Reversion**: when a reconfiguration dropped total utility and no
//!   reduction applies, restore the highest-utility configuration on record
//!   and declare the cluster converged.
//!
//! After any action the scheduler waits [`QUIESCE_ROUNDS`] rounds (one full
//! metric window) before judging its effect. Targets whose reconfiguration
//! bought less than a 5% utility gain are blacklisted for an hour so
//! unattainable SLOs cannot hog the cluster. Once every job sits at max
//! utility for [`STABLE_ROUNDS`] consecutive rounds the cluster converges;
//! a later drop of more than 5% below the best utility seen while converged
//! wipes all history and restarts the search.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, OperatorId, TopologyId};
use crate::metrics::{is_congested, TopologyMetrics};
use crate::utility::{total_cluster_utility, UtilityValue};
use crate::Value;

/// Scheduler cadence, seconds.
pub const ROUND_SECS: u64 = 10;
/// Rounds to let utilities quiesce after an action before judging it.
pub const QUIESCE_ROUNDS: u32 = 6;
/// Consecutive max-utility rounds required before converging.
pub const STABLE_ROUNDS: u32 = 4;
/// How long a marginally-improving topology is skipped, seconds.
pub const BLACKLIST_SECS: u64 = 3600;
/// Relative utility gain below which a reconfiguration counts as marginal.
pub const MARGINAL_GAIN_FRACTION: Value = 0.05;
/// Relative drop below the converged-state best that wipes history.
pub const CONVERGED_DROP_FRACTION: Value = 0.05;
/// Absolute drop in total utility that counts as a regression after an action.
pub const DROP_EPSILON: Value = 1e-6;
/// Multiplier applied to normalized congestion when sizing executor grants.
pub const GRANT_SCALE: Value = 10.0;
/// Fraction of executors a reduction keeps on uncongested bolts.
pub const REDUCTION_KEEP_FRACTION: Value = 0.2;
/// Tolerance when comparing total utility against the cluster maximum.
pub const TOTAL_EPSILON: Value = 1e-9;

/// Everything the scheduler knows about one topology at a round boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyObservation {
    pub metrics: TopologyMetrics<Value>,
    pub utility: UtilityValue<Value>,
    /// Operator id -> executor count currently deployed.
    pub executors: BTreeMap<OperatorId, u32>,
    /// Operators that are spouts; reductions never touch them.
    pub spouts: BTreeSet<OperatorId>,
}

/// Load of one node: `cpu_load` counts runnable-process equivalents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeLoad {
    pub id: NodeId,
    pub cores: u32,
    pub cpu_load: Value,
}

/// Immutable view of the cluster at one round boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    /// Seconds since simulation start.
    pub time: u64,
    pub topologies: BTreeMap<TopologyId, TopologyObservation>,
    pub nodes: Vec<NodeLoad>,
    /// False while metrics are stale (faults, warm-up); the scheduler then
    /// does nothing at all.
    pub data_fresh: bool,
}

impl ClusterSnapshot {
    pub fn total_utility(&self) -> Value {
        total_cluster_utility(self.topologies.values().map(|t| &t.utility))
    }

    pub fn max_total_utility(&self) -> Value {
        self.topologies.values().map(|t| t.utility.max).sum()
    }

    /// Full executor-count mapping across all topologies.
    pub fn config(&self) -> ClusterConfig {
        self.topologies
            .iter()
            .map(|(id, obs)| (id.clone(), obs.executors.clone()))
            .collect()
    }

    /// A cluster is congested when a strict majority of nodes carry more
    /// runnable load than they have cores.
    pub fn cluster_congested(&self) -> bool {
        let overloaded = self
            .nodes
            .iter()
            .filter(|n| n.cpu_load > n.cores as Value)
            .count();
        overloaded * 2 > self.nodes.len()
    }
}

/// Executor counts for every operator of every topology.
pub type ClusterConfig = BTreeMap<TopologyId, BTreeMap<OperatorId, u32>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Reconfigure,
    Reduce,
    Revert,
    Wait,
    Converge,
}

impl ActionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Reconfigure => "reconfigure",
            ActionKind::Reduce => "reduce",
            ActionKind::Revert => "revert",
            ActionKind::Wait => "wait",
            ActionKind::Converge => "converge",
        }
    }
}

/// The decision for one round. Reconfigurations carry exactly one target
/// with non-negative deltas; reductions and reversions may span topologies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerAction {
    pub kind: ActionKind,
    pub targets: Vec<TopologyId>,
    /// topology -> operator -> executor-count change; zero entries omitted.
    pub deltas: BTreeMap<TopologyId, BTreeMap<OperatorId, i64>>,
    /// Human-readable diagnostic for wait actions.
    pub note: Option<String>,
}

impl SchedulerAction {
    fn wait(note: impl Into<String>) -> Self {
        Self {
            kind: ActionKind::Wait,
            targets: Vec::new(),
            deltas: BTreeMap::new(),
            note: Some(note.into()),
        }
    }

    fn converge() -> Self {
        Self {
            kind: ActionKind::Converge,
            targets: Vec::new(),
            deltas: BTreeMap::new(),
            note: None,
        }
    }

    /// True for kinds that change executor counts.
    pub fn mutates(&self) -> bool {
        matches!(
            self.kind,
            ActionKind::Reconfigure | ActionKind::Reduce | ActionKind::Revert
        )
    }
}

/// One evaluated configuration: what was deployed and what it earned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub config: ClusterConfig,
    pub total_utility: Value,
    pub time: u64,
}

/// Record of evaluated configurations plus the bookkeeping that throttles
/// intrusive actions. Reset wipes everything: the search starts afresh.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConfigHistory {
    pub entries: Vec<ConfigEntry>,
    /// Topologies already reduced since the last reset.
    pub reduction_done: BTreeSet<TopologyId>,
    /// Topology -> time at which it becomes selectable again.
    pub blacklist: BTreeMap<TopologyId, u64>,
}

impl ConfigHistory {
    pub fn record(&mut self, config: ClusterConfig, total_utility: Value, time: u64) {
        self.entries.push(ConfigEntry {
            config,
            total_utility,
            time,
        });
    }

    pub fn is_blacklisted(&self, id: &TopologyId, now: u64) -> bool {
        self.blacklist.get(id).is_some_and(|expiry| now < *expiry)
    }

    /// Forgets all past actions; used on converged-state utility drops and
    /// when the job set changes.
    pub fn reset(&mut self) {
        self.entries.clear();
        self.reduction_done.clear();
        self.blacklist.clear();
    }

    /// Entry with the highest total utility; ties go to the most recent.
    pub fn best_entry(&self) -> Option<&ConfigEntry> {
        self.entries
            .iter()
            .fold(None, |best: Option<&ConfigEntry>, e| match best {
                Some(b) if e.total_utility >= b.total_utility => Some(e),
                None => Some(e),
                keep => keep,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterState {
    NotConverged,
    Converged,
}

/// An action whose effect is still quiescing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PendingAction {
    pub kind: ActionKind,
    /// Reconfiguration target; reductions have none.
    pub target: Option<TopologyId>,
    pub rounds_remaining: u32,
    pub pre_total_utility: Value,
    pub pre_target_utility: Value,
}

/// Cross-round scheduler state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineState {
    pub state: ClusterState,
    /// Max-utility rounds still required before converging.
    pub stable_rounds_remaining: u32,
    /// Best total utility observed while converged.
    pub last_best_utility: Value,
    pub pending: Option<PendingAction>,
}

impl Default for MachineState {
    fn default() -> Self {
        Self {
            state: ClusterState::NotConverged,
            stable_rounds_remaining: STABLE_ROUNDS,
            last_best_utility: 0.0,
            pending: None,
        }
    }
}

/// Picks the SLO-missing, non-blacklisted topology with the highest max
/// utility; ties prefer lower current utility, then id order. `None` when
/// every topology is satisfied or blacklisted.
pub fn select_target(snapshot: &ClusterSnapshot, history: &ConfigHistory) -> Option<TopologyId> {
    let mut candidates: Vec<(&TopologyId, &TopologyObservation)> = snapshot
        .topologies
        .iter()
        .filter(|(id, obs)| !obs.utility.satisfied && !history.is_blacklisted(id, snapshot.time))
        .collect();
    candidates.sort_by(|(a_id, a), (b_id, b)| {
        b.utility
            .max
            .total_cmp(&a.utility.max)
            .then(a.utility.current.total_cmp(&b.utility.current))
            .then(a_id.cmp(b_id))
    });
    candidates.first().map(|(id, _)| (*id).clone())
}

/// Extra executors for one congested operator: `(capacity / threshold - 1) * 10`,
/// rounded half-up, but always at least one.
pub fn extra_executors(capacity: Value) -> i64 {
    let raw = (capacity / crate::metrics::CONGESTION_THRESHOLD - 1.0) * GRANT_SCALE;
    ((raw + 0.5).floor() as i64).max(1)
}

/// Sizes a grant for every congested operator of `target`. `None` when the
/// target has no congested operator to give resources to.
pub fn plan_reconfiguration(
    snapshot: &ClusterSnapshot,
    target: &TopologyId,
) -> Option<SchedulerAction> {
    let obs = &snapshot.topologies[target];
    let mut ops: BTreeMap<OperatorId, i64> = BTreeMap::new();
    for (op, capacity) in &obs.metrics.per_operator_capacity {
        if is_congested(*capacity) {
            ops.insert(op.clone(), extra_executors(*capacity));
        }
    }
    if ops.is_empty() {
        return None;
    }
    let mut deltas = BTreeMap::new();
    deltas.insert(target.clone(), ops);
    Some(SchedulerAction {
        kind: ActionKind::Reconfigure,
        targets: vec![target.clone()],
        deltas,
        note: None,
    })
}

/// The three reduction preconditions, separately, for inspection and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionClauses {
    /// (a) A majority of nodes carry more load than cores.
    pub cluster_congested: bool,
    /// (b) At least one topology currently satisfies its SLO.
    pub any_satisfied: bool,
    /// (c) At least one satisfied topology has not been reduced since reset.
    pub unreduced_satisfied: bool,
}

impl ReductionClauses {
    pub fn evaluate(snapshot: &ClusterSnapshot, history: &ConfigHistory) -> Self {
        let satisfied: Vec<&TopologyId> = snapshot
            .topologies
            .iter()
            .filter(|(_, obs)| obs.utility.satisfied)
            .map(|(id, _)| id)
            .collect();
        Self {
            cluster_congested: snapshot.cluster_congested(),
            any_satisfied: !satisfied.is_empty(),
            unreduced_satisfied: satisfied
                .iter()
                .any(|id| !history.reduction_done.contains(*id)),
        }
    }

    pub fn all(&self) -> bool {
        self.cluster_congested && self.any_satisfied && self.unreduced_satisfied
    }
}

/// True when a reduction is the right response to a post-reconfiguration
/// utility drop: congested cluster, a satisfied topology, and no prior
/// reduction for at least one of them.
pub fn should_reduce(snapshot: &ClusterSnapshot, history: &ConfigHistory) -> bool {
    ReductionClauses::evaluate(snapshot, history).all()
}

/// Shrinks every not-yet-reduced satisfied topology: each uncongested bolt
/// keeps `max(1, round(0.2 * executors))`. Spouts and congested operators
/// are untouched. Marks the affected topologies as reduced.
pub fn plan_reduction(snapshot: &ClusterSnapshot, history: &mut ConfigHistory) -> SchedulerAction {
    let mut targets = Vec::new();
    let mut deltas: BTreeMap<TopologyId, BTreeMap<OperatorId, i64>> = BTreeMap::new();
    for (id, obs) in &snapshot.topologies {
        if !obs.utility.satisfied || history.reduction_done.contains(id) {
            continue;
        }
        let mut ops: BTreeMap<OperatorId, i64> = BTreeMap::new();
        for (op, count) in &obs.executors {
            if obs.spouts.contains(op) {
                continue;
            }
            let capacity = obs
                .metrics
                .per_operator_capacity
                .get(op)
                .copied()
                .unwrap_or(0.0);
            if is_congested(capacity) {
                continue;
            }
            let keep = ((REDUCTION_KEEP_FRACTION * *count as Value + 0.5).floor() as i64).max(1);
            let delta = keep - *count as i64;
            if delta != 0 {
                ops.insert(op.clone(), delta);
            }
        }
        targets.push(id.clone());
        history.reduction_done.insert(id.clone());
        if !ops.is_empty() {
            deltas.insert(id.clone(), ops);
        }
    }
    SchedulerAction {
        kind: ActionKind::Reduce,
        targets,
        deltas,
        note: None,
    }
}

/// Restores every topology to the highest-utility configuration on record
/// (ties to the most recent). `None` when the history is empty.
pub fn plan_reversion(
    history: &ConfigHistory,
    snapshot: &ClusterSnapshot,
) -> Option<SchedulerAction> {
    let best = history.best_entry()?;
    let mut targets = Vec::new();
    let mut deltas: BTreeMap<TopologyId, BTreeMap<OperatorId, i64>> = BTreeMap::new();
    for (id, wanted) in &best.config {
        targets.push(id.clone());
        let Some(obs) = snapshot.topologies.get(id) else {
            continue; // topology left the cluster; nothing to restore
        };
        let mut ops: BTreeMap<OperatorId, i64> = BTreeMap::new();
        for (op, count) in wanted {
            let current = obs.executors.get(op).copied().unwrap_or(0) as i64;
            let delta = *count as i64 - current;
            if delta != 0 {
                ops.insert(op.clone(), delta);
            }
        }
        if !ops.is_empty() {
            deltas.insert(id.clone(), ops);
        }
    }
    Some(SchedulerAction {
        kind: ActionKind::Revert,
        targets,
        deltas,
        note: None,
    })
}

/// Runs one round of the state machine. Pure in its inputs: identical
/// snapshot, history, and machine state always produce the same action.
pub fn step(
    snapshot: &ClusterSnapshot,
    mut history: ConfigHistory,
    mut machine: MachineState,
) -> (SchedulerAction, MachineState, ConfigHistory) {
    // No fresh data: take no decision at all, and keep pending countdowns
    // frozen so effects are always judged on a full post-action window.
    if !snapshot.data_fresh {
        return (SchedulerAction::wait("stale metrics"), machine, history);
    }

    let total = snapshot.total_utility();
    let max_total = snapshot.max_total_utility();

    if machine.state == ClusterState::Converged {
        let dropped = machine.last_best_utility > 0.0
            && total < (1.0 - CONVERGED_DROP_FRACTION) * machine.last_best_utility;
        if dropped {
            // Workload changed under a converged cluster: forget everything
            // and search afresh, starting this very round.
            history.reset();
            machine = MachineState::default();
        } else {
            machine.last_best_utility = machine.last_best_utility.max(total);
            return (SchedulerAction::wait("converged"), machine, history);
        }
    }

    // Judge the pending action once its quiesce period has elapsed.
    if let Some(pending) = machine.pending.as_mut() {
        pending.rounds_remaining -= 1;
        if pending.rounds_remaining > 0 {
            return (SchedulerAction::wait("quiescing"), machine, history);
        }
        let pending = machine.pending.take().expect("pending checked above");
        history.record(snapshot.config(), total, snapshot.time);

        if pending.kind == ActionKind::Reconfigure {
            if total < pending.pre_total_utility - DROP_EPSILON {
                // The exploration step hurt: back off via reduction when the
                // cluster qualifies, otherwise revert to the best known state.
                if should_reduce(snapshot, &history) {
                    let action = plan_reduction(snapshot, &mut history);
                    machine.pending = Some(PendingAction {
                        kind: ActionKind::Reduce,
                        target: None,
                        rounds_remaining: QUIESCE_ROUNDS,
                        pre_total_utility: total,
                        pre_target_utility: 0.0,
                    });
                    machine.stable_rounds_remaining = STABLE_ROUNDS;
                    return (action, machine, history);
                }
                return match plan_reversion(&history, snapshot) {
                    Some(action) => {
                        machine.state = ClusterState::Converged;
                        machine.last_best_utility = history
                            .best_entry()
                            .map(|e| e.total_utility)
                            .unwrap_or(total);
                        machine.pending = None;
                        (action, machine, history)
                    }
                    None => (SchedulerAction::wait("no history to revert to"), machine, history),
                };
            }

            // Kept or improved; a marginal gain blacklists the target so it
            // stops soaking up rounds, though the grant itself is retained.
            if let Some(target) = &pending.target {
                let pre = pending.pre_target_utility;
                let post = snapshot
                    .topologies
                    .get(target)
                    .map(|t| t.utility.current)
                    .unwrap_or(0.0);
                let gain = if pre > DROP_EPSILON {
                    (post - pre) / pre
                } else if post > DROP_EPSILON {
                    Value::INFINITY
                } else {
                    0.0
                };
                if gain < MARGINAL_GAIN_FRACTION {
                    history
                        .blacklist
                        .insert(target.clone(), snapshot.time + BLACKLIST_SECS);
                }
            }
        }
        // Fall through: the round that finishes an evaluation may also act.
    }

    if let Some(target) = select_target(snapshot, &history) {
        machine.stable_rounds_remaining = STABLE_ROUNDS;
        return match plan_reconfiguration(snapshot, &target) {
            Some(action) => {
                if history.entries.is_empty() {
                    // Remember the configuration the search started from so a
                    // reversion can always fall back to it.
                    history.record(snapshot.config(), total, snapshot.time);
                }
                machine.pending = Some(PendingAction {
                    kind: ActionKind::Reconfigure,
                    target: Some(target.clone()),
                    rounds_remaining: QUIESCE_ROUNDS,
                    pre_total_utility: total,
                    pre_target_utility: snapshot.topologies[&target].utility.current,
                });
                (action, machine, history)
            }
            None => {
                let mut wait = SchedulerAction::wait(format!(
                    "{target} misses its SLO but has no congested operator"
                ));
                wait.targets = vec![target];
                (wait, machine, history)
            }
        };
    }

    if total >= max_total - TOTAL_EPSILON {
        machine.stable_rounds_remaining = machine.stable_rounds_remaining.saturating_sub(1);
        if machine.stable_rounds_remaining == 0 {
            machine.state = ClusterState::Converged;
            machine.last_best_utility = total;
            machine.stable_rounds_remaining = STABLE_ROUNDS;
            return (SchedulerAction::converge(), machine, history);
        }
        return (SchedulerAction::wait("at max utility, stabilizing"), machine, history);
    }

    machine.stable_rounds_remaining = STABLE_ROUNDS;
    (SchedulerAction::wait("no eligible target"), machine, history)
}
