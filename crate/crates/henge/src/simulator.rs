//! Deterministic fluid simulation of a multi-node cluster.
//!
//! Tuples move as rates, not as individual events: each one-second tick the
//! spouts emit `rate * tick` tuples downstream, and every operator drains
//! `min(backlog + arrivals, executors * service rate)` from its per-edge
//! input queues, in topological order so a tuple can traverse an idle chain
//! within one tick. Queues are bounded; overflow is dropped and counted, so
//! loss shows up in juice. Per-executor service rates carry seeded uniform
//! jitter; with `jitter_pct = 0` runs are exactly reproducible arithmetic.
//!
//! CPU load on a node is the sum of executor utilizations placed there: one
//! runnable-process equivalent per fully busy executor, fractional below.
//!
//! End-to-end latency is estimated from the fluid state via Little's law:
//! per operator, queueing delay `queue / throughput` plus service time and
//! state overhead, accumulated along paths weighted by tuple flow.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, OperatorId, TopologyId};
use crate::juice::topology_juice;
use crate::metrics::{
    executor_capacity, operator_capacity, EdgeWindowCounters, ExecutorAccum, Merge, MetricsError,
    SlidingWindow, TopologyMetrics, SUB_WINDOW_SECS, WINDOW_SECS,
};
use crate::scenario::Scenario;
use crate::scheduler::{ActionKind, ClusterSnapshot, NodeLoad, SchedulerAction, TopologyObservation};
use crate::topology::{topological_order, OperatorKind, TopologySpec};
use crate::utility::{self, SloKind, UtilityValue};
use crate::workload::{rate_at, RateProfile};
use crate::Value;

/// One simulated machine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub cores: u32,
}

/// Simulation knobs shared by every operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    /// Uniform jitter on per-executor service rates, in percent.
    pub jitter_pct: Value,
    /// Bound on each operator's total input backlog, in tuples.
    pub queue_capacity: Value,
    /// Cluster-wide executor budget; grants beyond it are truncated.
    pub executor_cap: u32,
    /// Record per-tick event rows (time, operator, queue, executed, dropped).
    pub event_log: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            jitter_pct: 5.0,
            queue_capacity: 100_000.0,
            executor_cap: 100_000,
            event_log: false,
        }
    }
}

/// Service-rate degradation once an operator's parallelism crosses a
/// threshold, modeling thread-contention overheads. Also the harness knob
/// that makes a reconfiguration genuinely backfire in tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContentionHook {
    pub topology: TopologyId,
    pub operator: OperatorId,
    /// Executor count above which the slowdown kicks in.
    pub healthy_executors: u32,
    /// Factor by which per-executor service rate degrades.
    pub slowdown: Value,
}

/// Per-tick trace row for the optional event log.
#[derive(Debug, Clone)]
pub struct EventRow {
    pub time: u64,
    pub topology: TopologyId,
    pub operator: OperatorId,
    pub queue_len: Value,
    pub executed: Value,
    pub dropped: Value,
}

/// Sub-window bucket of one operator's work.
#[derive(Debug, Clone, Default)]
pub struct OperatorAccum {
    pub emitted: Value,
    pub executed: Value,
    pub dropped: Value,
    /// Sum over ticks of the post-drain backlog, for mean queue length.
    pub queue_len_ticks: Value,
    pub ticks: Value,
    pub per_exec: Vec<ExecutorAccum<Value>>,
}

impl Merge for OperatorAccum {
    fn merge(&mut self, other: &Self) {
        self.emitted += other.emitted;
        self.executed += other.executed;
        self.dropped += other.dropped;
        self.queue_len_ticks += other.queue_len_ticks;
        self.ticks += other.ticks;
        if self.per_exec.len() < other.per_exec.len() {
            self.per_exec.resize_with(other.per_exec.len(), Default::default);
        }
        for (mine, theirs) in self.per_exec.iter_mut().zip(&other.per_exec) {
            mine.merge(theirs);
        }
    }
}

/// Sub-window bucket of one node's load.
#[derive(Debug, Clone, Default)]
struct LoadBucket {
    load_ticks: Value,
    ticks: Value,
}

impl Merge for LoadBucket {
    fn merge(&mut self, other: &Self) {
        self.load_ticks += other.load_ticks;
        self.ticks += other.ticks;
    }
}

/// Live state of one operator.
#[derive(Debug, Clone)]
pub struct OperatorRuntime {
    pub executor_count: u32,
    pub queue_capacity: Value,
    /// Node index per executor, in placement order.
    pub assigned_nodes: Vec<usize>,
    window: SlidingWindow<OperatorAccum>,
}

impl OperatorRuntime {
    fn new(executor_count: u32, queue_capacity: Value) -> Self {
        Self {
            executor_count,
            queue_capacity,
            assigned_nodes: Vec::new(),
            window: SlidingWindow::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct TopologyRuntime {
    spec: TopologySpec<Value>,
    order: Vec<OperatorId>,
    spouts: Vec<OperatorId>,
    sinks: Vec<OperatorId>,
    operators: BTreeMap<OperatorId, OperatorRuntime>,
    profiles: BTreeMap<OperatorId, RateProfile<Value>>,
    /// Backlog per incoming edge, keyed (parent, operator).
    edge_queues: BTreeMap<(OperatorId, OperatorId), Value>,
    edge_windows: BTreeMap<(OperatorId, OperatorId), SlidingWindow<EdgeWindowCounters<Value>>>,
}

/// The whole simulated cluster, advanced one tick at a time by one driver.
#[derive(Debug)]
pub struct World {
    time: u64,
    nodes: Vec<NodeSpec>,
    node_windows: Vec<SlidingWindow<LoadBucket>>,
    topologies: BTreeMap<TopologyId, TopologyRuntime>,
    settings: SimSettings,
    contention: Vec<ContentionHook>,
    faults: Vec<(u64, u64)>,
    rng: ChaCha8Rng,
    total_executors: u32,
    events: Vec<EventRow>,
}

impl World {
    pub fn new(scenario: &Scenario) -> Self {
        let mut world = Self {
            time: 0,
            nodes: scenario.nodes.clone(),
            node_windows: scenario.nodes.iter().map(|_| SlidingWindow::new()).collect(),
            topologies: BTreeMap::new(),
            settings: scenario.sim.clone(),
            contention: scenario.contention.clone(),
            faults: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            total_executors: 0,
            events: Vec::new(),
        };
        for fault in &scenario.faults {
            world.inject_fault(fault.start_s, fault.end_s);
        }

        for binding in &scenario.topologies {
            let spec = binding.spec.clone();
            let order = topological_order(&spec).expect("scenario topologies are validated");
            let spouts = spec.spouts();
            let sinks = crate::topology::sinks(&spec);

            let mut profiles: BTreeMap<OperatorId, RateProfile<Value>> = spouts
                .iter()
                .map(|s| (s.clone(), RateProfile::constant(spec.input_rate)))
                .collect();
            for (spout, profile) in &binding.rates {
                profiles.insert(spout.clone(), profile.clone());
            }

            let mut operators = BTreeMap::new();
            for op in &spec.operators {
                operators.insert(
                    op.id.clone(),
                    OperatorRuntime::new(op.parallelism, world.settings.queue_capacity),
                );
            }
            let mut edge_queues = BTreeMap::new();
            let mut edge_windows = BTreeMap::new();
            for e in &spec.edges {
                edge_queues.insert((e.from.clone(), e.to.clone()), 0.0);
                edge_windows.insert((e.from.clone(), e.to.clone()), SlidingWindow::new());
            }

            world.topologies.insert(
                spec.id.clone(),
                TopologyRuntime {
                    spec,
                    order,
                    spouts,
                    sinks,
                    operators,
                    profiles,
                    edge_queues,
                    edge_windows,
                },
            );
        }

        // Initial placement: plain round-robin across nodes, topologies in id
        // order, operators in topological order.
        let mut cursor = 0usize;
        let node_count = world.nodes.len().max(1);
        let ids: Vec<TopologyId> = world.topologies.keys().cloned().collect();
        for id in ids {
            let order = world.topologies[&id].order.clone();
            for op in order {
                let rt = world
                    .topologies
                    .get_mut(&id)
                    .and_then(|t| t.operators.get_mut(&op))
                    .expect("operator exists");
                for _ in 0..rt.executor_count {
                    rt.assigned_nodes.push(cursor % node_count);
                    cursor += 1;
                }
                world.total_executors += rt.executor_count;
            }
        }
        world
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn settings(&self) -> &SimSettings {
        &self.settings
    }

    /// Marks `[start, end)` as a span with no fresh metrics; freshness
    /// returns one full sliding window after the fault lifts. Empty spans
    /// are ignored.
    pub fn inject_fault(&mut self, start: u64, end: u64) {
        if end > start {
            self.faults.push((start, end));
        }
    }

    fn metrics_stale_at(&self, t: u64) -> bool {
        self.faults
            .iter()
            .any(|(start, end)| t >= *start && t < end + WINDOW_SECS)
    }

    /// Drains the accumulated event-log rows.
    pub fn take_events(&mut self) -> Vec<EventRow> {
        std::mem::take(&mut self.events)
    }

    /// Effective per-executor service rate in tuples/second, after any
    /// contention slowdown for over-parallelized operators.
    fn base_rate(&self, topology: &TopologyId, op: &OperatorId, service_time: Value, execs: u32) -> Value {
        let mut rate = 1000.0 / service_time;
        for hook in &self.contention {
            if &hook.topology == topology && &hook.operator == op && execs > hook.healthy_executors {
                rate /= hook.slowdown;
            }
        }
        rate
    }

    /// Advances the world by one one-second tick.
    pub fn tick(&mut self) {
        let t = self.time;
        let jitter = self.settings.jitter_pct / 100.0;
        let mut node_loads = vec![0.0; self.nodes.len()];

        let ids: Vec<TopologyId> = self.topologies.keys().cloned().collect();
        for id in &ids {
            let order = self.topologies[id].order.clone();
            for op_id in &order {
                let spec_op = self.topologies[id].spec.operator(op_id).cloned().expect("known op");
                let out_edges: Vec<(OperatorId, Value)> = self.topologies[id]
                    .spec
                    .outgoing(op_id)
                    .iter()
                    .map(|e| (e.to.clone(), e.share))
                    .collect();

                let (executed, emitted, dropped, queue_after) = match spec_op.kind {
                    OperatorKind::Spout => {
                        let topo = self.topologies.get_mut(id).expect("known topology");
                        let rate = rate_at(&topo.profiles[op_id], t);
                        let emitted = rate * 1.0;
                        let rt = topo.operators.get_mut(op_id).expect("known op");
                        let bucket = rt.window.current_mut();
                        bucket.emitted += emitted;
                        bucket.ticks += 1.0;
                        if bucket.per_exec.len() < rt.executor_count as usize {
                            bucket
                                .per_exec
                                .resize_with(rt.executor_count as usize, Default::default);
                        }
                        for exec in bucket.per_exec.iter_mut() {
                            exec.window_ms += 1000.0;
                        }
                        (0.0, emitted, 0.0, 0.0)
                    }
                    OperatorKind::Bolt => {
                        let execs = self.topologies[id].operators[op_id].executor_count;
                        let base = self.base_rate(id, op_id, spec_op.service_time, execs);
                        // Per-executor capacity this tick, jittered.
                        let mut caps = Vec::with_capacity(execs as usize);
                        for _ in 0..execs {
                            let factor = if jitter > 0.0 {
                                self.rng.gen_range(1.0 - jitter..=1.0 + jitter)
                            } else {
                                1.0
                            };
                            caps.push(base * factor);
                        }
                        let cap_total: Value = caps.iter().sum();

                        let topo = self.topologies.get_mut(id).expect("known topology");
                        let in_edges: Vec<(OperatorId, OperatorId)> = topo
                            .edge_queues
                            .keys()
                            .filter(|(_, to)| to == op_id)
                            .cloned()
                            .collect();

                        // Enforce the bounded queue across all input edges;
                        // overflow is dropped proportionally and counted.
                        let cap_q = topo.operators[op_id].queue_capacity;
                        let total_q: Value =
                            in_edges.iter().map(|k| topo.edge_queues[k]).sum();
                        let mut dropped = 0.0;
                        if total_q > cap_q && total_q > 0.0 {
                            let keep = cap_q / total_q;
                            for key in &in_edges {
                                let q = topo.edge_queues.get_mut(key).expect("edge");
                                dropped += *q * (1.0 - keep);
                                *q *= keep;
                            }
                        }
                        let total_q = total_q.min(cap_q);

                        let executed = total_q.min(cap_total * 1.0);
                        if total_q > 0.0 && executed > 0.0 {
                            let frac = executed / total_q;
                            for key in &in_edges {
                                let q = topo.edge_queues.get_mut(key).expect("edge");
                                let taken = *q * frac;
                                *q -= taken;
                                topo.edge_windows
                                    .get_mut(key)
                                    .expect("edge window")
                                    .current_mut()
                                    .executed += taken;
                            }
                        }
                        let queue_after: Value =
                            in_edges.iter().map(|k| topo.edge_queues[k]).sum();

                        let emitted = executed * spec_op.selectivity;

                        // Work splits across executors in proportion to their
                        // jittered rates, so busy time is uniform.
                        let rt = topo.operators.get_mut(op_id).expect("known op");
                        let bucket = rt.window.current_mut();
                        bucket.executed += executed;
                        bucket.emitted += emitted;
                        bucket.dropped += dropped;
                        bucket.queue_len_ticks += queue_after;
                        bucket.ticks += 1.0;
                        if bucket.per_exec.len() < execs as usize {
                            bucket.per_exec.resize_with(execs as usize, Default::default);
                        }
                        let busy_ms = if cap_total > 0.0 {
                            executed / cap_total * 1000.0
                        } else {
                            0.0
                        };
                        for (i, exec) in bucket.per_exec.iter_mut().enumerate().take(execs as usize) {
                            let share = if cap_total > 0.0 { caps[i] / cap_total } else { 0.0 };
                            exec.executed += executed * share;
                            exec.busy_ms += busy_ms;
                            exec.window_ms += 1000.0;
                        }
                        let utilization = busy_ms / 1000.0;
                        for &node in &rt.assigned_nodes {
                            node_loads[node] += utilization;
                        }

                        (executed, emitted, dropped, queue_after)
                    }
                };

                // Route output downstream; `sent` on every outgoing edge is
                // the parent's total output, which is what makes juice charge
                // splits and losses to the right place.
                let topo = self.topologies.get_mut(id).expect("known topology");
                if emitted > 0.0 || !out_edges.is_empty() {
                    for (child, share) in &out_edges {
                        let key = (op_id.clone(), child.clone());
                        topo.edge_windows
                            .get_mut(&key)
                            .expect("edge window")
                            .current_mut()
                            .sent += emitted;
                        *topo.edge_queues.get_mut(&key).expect("edge queue") += emitted * share;
                    }
                }

                if self.settings.event_log {
                    self.events.push(EventRow {
                        time: t,
                        topology: id.clone(),
                        operator: op_id.clone(),
                        queue_len: queue_after,
                        executed,
                        dropped,
                    });
                }
            }
        }

        for (node, load) in node_loads.iter().enumerate() {
            let bucket = self.node_windows[node].current_mut();
            bucket.load_ticks += load;
            bucket.ticks += 1.0;
        }

        self.time += 1;
        if self.time.is_multiple_of(SUB_WINDOW_SECS) {
            for topo in self.topologies.values_mut() {
                for rt in topo.operators.values_mut() {
                    rt.window.roll();
                }
                for w in topo.edge_windows.values_mut() {
                    w.roll();
                }
            }
            for w in &mut self.node_windows {
                w.roll();
            }
        }
    }

    /// Applies a scheduler action: executor-count deltas, placement of new
    /// executors on the least-loaded nodes, and a fresh metric window for
    /// every touched operator. Grants beyond the cluster executor cap are
    /// truncated with a warning.
    pub fn apply_action(&mut self, action: &SchedulerAction) {
        if !matches!(
            action.kind,
            ActionKind::Reconfigure | ActionKind::Reduce | ActionKind::Revert
        ) {
            return;
        }

        let mut projected: Vec<Value> = self
            .node_windows
            .iter()
            .map(|w| {
                w.aggregate()
                    .map(|b| if b.ticks > 0.0 { b.load_ticks / b.ticks } else { 0.0 })
                    .unwrap_or(0.0)
            })
            .collect();

        for (topo_id, ops) in &action.deltas {
            for (op_id, delta) in ops {
                let Some(topo) = self.topologies.get_mut(topo_id) else {
                    continue;
                };
                let Some(rt) = topo.operators.get_mut(op_id) else {
                    continue;
                };
                if *delta > 0 {
                    let headroom = self.settings.executor_cap.saturating_sub(self.total_executors);
                    let want = *delta as u32;
                    let grant = want.min(headroom);
                    if grant < want {
                        log::warn!(
                            "executor cap {} reached: {topo_id}/{op_id} granted {grant} of {want}",
                            self.settings.executor_cap
                        );
                    }
                    for _ in 0..grant {
                        // Least projected load wins; ties go to the lowest
                        // node index. Each placement counts as one future
                        // busy process so grants spread out.
                        let node = projected
                            .iter()
                            .enumerate()
                            .min_by(|(ai, a), (bi, b)| a.total_cmp(b).then(ai.cmp(bi)))
                            .map(|(i, _)| i)
                            .unwrap_or(0);
                        projected[node] += 1.0;
                        rt.assigned_nodes.push(node);
                        rt.executor_count += 1;
                        self.total_executors += 1;
                    }
                } else {
                    let remove = (-*delta) as u32;
                    let floor = 1u32;
                    let actual = remove.min(rt.executor_count.saturating_sub(floor));
                    for _ in 0..actual {
                        if let Some(node) = rt.assigned_nodes.pop() {
                            projected[node] = (projected[node] - 1.0).max(0.0);
                        }
                        rt.executor_count -= 1;
                        self.total_executors -= 1;
                    }
                }

                // Fresh window for the touched operator and its input edges.
                rt.window.reset();
                let in_edges: Vec<(OperatorId, OperatorId)> = topo
                    .edge_windows
                    .keys()
                    .filter(|(_, to)| to == op_id)
                    .cloned()
                    .collect();
                for key in in_edges {
                    topo.edge_windows.get_mut(&key).expect("edge window").reset();
                }
            }
        }
    }

    /// Executor counts per operator for one topology.
    pub fn executor_counts(&self, id: &TopologyId) -> BTreeMap<OperatorId, u32> {
        self.topologies[id]
            .operators
            .iter()
            .map(|(op, rt)| (op.clone(), rt.executor_count))
            .collect()
    }

    /// Builds the immutable snapshot handed to the scheduler at a round
    /// boundary: aggregated metrics, utilities, placements, node loads.
    pub fn snapshot(&self) -> ClusterSnapshot {
        let mut topologies = BTreeMap::new();
        let mut all_fresh = true;

        for (id, topo) in &self.topologies {
            match observe_topology(topo) {
                Ok(obs) => {
                    topologies.insert(id.clone(), obs);
                }
                Err(_) => {
                    all_fresh = false;
                    topologies.insert(id.clone(), stale_observation(topo));
                }
            }
        }

        let nodes = self
            .nodes
            .iter()
            .zip(&self.node_windows)
            .map(|(spec, w)| NodeLoad {
                id: spec.id.clone(),
                cores: spec.cores,
                cpu_load: w
                    .aggregate()
                    .map(|b| if b.ticks > 0.0 { b.load_ticks / b.ticks } else { 0.0 })
                    .unwrap_or(0.0),
            })
            .collect();

        ClusterSnapshot {
            time: self.time,
            topologies,
            nodes,
            data_fresh: all_fresh && !self.metrics_stale_at(self.time),
        }
    }
}

/// Flow numbers for one operator over an aggregated window, inputs to the
/// latency estimate.
#[derive(Debug, Clone, Copy, Default)]
pub struct OperatorFlow {
    /// Mean backlog over the window, tuples.
    pub mean_queue: Value,
    /// Observed processing rate over the window, tuples/second.
    pub throughput_tps: Value,
    /// Tuples executed over the window.
    pub executed: Value,
}

/// Mean end-to-end latency: per bolt, `queue / throughput` queueing delay
/// plus service time and state overhead, accumulated along paths weighted by
/// per-edge executed counts, then averaged across sinks weighted by sink
/// throughput. Spouts contribute nothing; tuples enter when emitted.
pub fn tuple_latency_estimate(
    spec: &TopologySpec<Value>,
    flows: &BTreeMap<OperatorId, OperatorFlow>,
    edge_executed: &BTreeMap<(OperatorId, OperatorId), Value>,
) -> Result<Value, MetricsError> {
    let order = topological_order(spec).expect("valid topology");
    let mut latency_to: BTreeMap<OperatorId, Value> = BTreeMap::new();

    for op_id in &order {
        let op = spec.operator(op_id).expect("known op");
        if op.kind == OperatorKind::Spout {
            latency_to.insert(op_id.clone(), 0.0);
            continue;
        }
        let flow = flows.get(op_id).copied().unwrap_or_default();
        let queue_delay_ms = if flow.mean_queue > 0.0 && flow.throughput_tps > 0.0 {
            flow.mean_queue / flow.throughput_tps * 1000.0
        } else {
            0.0
        };
        let own = queue_delay_ms + op.service_time + op.state_overhead;

        let incoming = spec.incoming(op_id);
        let weights: Vec<Value> = incoming
            .iter()
            .map(|e| {
                edge_executed
                    .get(&(e.from.clone(), e.to.clone()))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect();
        let total_in: Value = weights.iter().sum();
        let upstream = if total_in > 0.0 {
            incoming
                .iter()
                .zip(&weights)
                .map(|(e, w)| latency_to[&e.from] * (w / total_in))
                .sum()
        } else {
            0.0
        };
        latency_to.insert(op_id.clone(), own + upstream);
    }

    let sink_ids = crate::topology::sinks(spec);
    let mut weighted = 0.0;
    let mut total = 0.0;
    for sink in &sink_ids {
        let done = flows.get(sink).map(|f| f.executed).unwrap_or(0.0);
        let is_spout = spec.operator(sink).map(|o| o.kind) == Some(OperatorKind::Spout);
        // A spout that is its own sink completes tuples by emitting them.
        let done = if is_spout { 1.0 } else { done };
        weighted += latency_to[sink] * done;
        total += done;
    }
    if total <= 0.0 {
        return Err(MetricsError::InsufficientData(
            "no completed tuples in window".into(),
        ));
    }
    Ok(weighted / total)
}

fn observe_topology(topo: &TopologyRuntime) -> Result<TopologyObservation, MetricsError> {
    // Aggregate every operator and edge window; any cold window means the
    // whole topology is not yet observable.
    let mut op_agg: BTreeMap<OperatorId, OperatorAccum> = BTreeMap::new();
    for (op, rt) in &topo.operators {
        op_agg.insert(op.clone(), rt.window.aggregate()?);
    }
    let mut edge_agg: BTreeMap<(OperatorId, OperatorId), EdgeWindowCounters<Value>> =
        BTreeMap::new();
    for (key, w) in &topo.edge_windows {
        edge_agg.insert(key.clone(), w.aggregate()?);
    }

    let mut per_operator_capacity = BTreeMap::new();
    let mut executors = BTreeMap::new();
    for (op, rt) in &topo.operators {
        executors.insert(op.clone(), rt.executor_count);
        let agg = &op_agg[op];
        let caps: Vec<Value> = agg
            .per_exec
            .iter()
            .map(|e| executor_capacity(&e.counters()))
            .collect::<Result<_, _>>()?;
        let cap = if caps.is_empty() {
            0.0
        } else {
            operator_capacity(&caps)?
        };
        per_operator_capacity.insert(op.clone(), cap.clamp(0.0, 1.0));
    }

    let juice_report =
        topology_juice(&topo.spec, &edge_agg).map_err(|e| MetricsError::InsufficientData(e.to_string()))?;

    let mut flows = BTreeMap::new();
    for (op, agg) in &op_agg {
        let secs = agg.ticks.max(1.0);
        flows.insert(
            op.clone(),
            OperatorFlow {
                mean_queue: agg.queue_len_ticks / secs,
                throughput_tps: agg.executed / secs,
                executed: agg.executed,
            },
        );
    }
    let edge_executed: BTreeMap<(OperatorId, OperatorId), Value> = edge_agg
        .iter()
        .map(|(k, c)| (k.clone(), c.executed))
        .collect();
    let latency = tuple_latency_estimate(&topo.spec, &flows, &edge_executed);

    let window_secs = op_agg
        .values()
        .map(|a| a.ticks)
        .fold(0.0, Value::max)
        .max(1.0);
    let input_rate: Value = topo
        .spouts
        .iter()
        .map(|s| op_agg[s].emitted)
        .sum::<Value>()
        / window_secs;
    let output_rate: Value = topo
        .sinks
        .iter()
        .map(|s| op_agg[s].emitted)
        .sum::<Value>()
        / window_secs;

    let utility = match topo.spec.slo.kind {
        SloKind::Throughput => {
            utility::throughput_utility(juice_report.topology_juice.max(0.0), &topo.spec.slo)
        }
        SloKind::Latency | SloKind::Hybrid => {
            let latency = latency.clone()?;
            utility::evaluate(&topo.spec.slo, latency, juice_report.topology_juice.max(0.0))
        }
    }
    .map_err(|e| MetricsError::InsufficientData(e.to_string()))?;

    Ok(TopologyObservation {
        metrics: TopologyMetrics {
            latency_ms: latency.unwrap_or(0.0),
            juice: juice_report.topology_juice,
            input_rate,
            output_rate,
            per_operator_capacity,
        },
        utility,
        executors,
        spouts: topo.spouts.iter().cloned().collect(),
    })
}

/// Placeholder observation for a topology whose windows are still cold:
/// zeroed metrics, zero utility, and the snapshot is marked not fresh.
fn stale_observation(topo: &TopologyRuntime) -> TopologyObservation {
    TopologyObservation {
        metrics: TopologyMetrics {
            latency_ms: 0.0,
            juice: 0.0,
            input_rate: 0.0,
            output_rate: 0.0,
            per_operator_capacity: topo.operators.keys().map(|k| (k.clone(), 0.0)).collect(),
        },
        utility: UtilityValue {
            current: 0.0,
            max: topo.spec.slo.max_utility,
            satisfied: false,
        },
        executors: topo
            .operators
            .iter()
            .map(|(op, rt)| (op.clone(), rt.executor_count))
            .collect(),
        spouts: topo.spouts.iter().cloned().collect(),
    }
}
