//! Dataflow topology model: operators, edges, and structural validation.
//!
//! A topology is a DAG of operators. Source operators (spouts) pull input
//! tuples; every other operator (bolt) executes tuples from its parents and
//! emits `selectivity` output tuples per executed tuple, routed to children
//! according to per-edge `share` fractions. Operators without outgoing edges
//! are sinks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{OperatorId, TopologyId};
use crate::scalar::Scalar;
use crate::utility::SloSpec;

/// Whether an operator pulls input or processes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Spout,
    Bolt,
}

/// One operator of a topology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpec<S: Scalar> {
    pub id: OperatorId,
    pub kind: OperatorKind,
    /// Number of executors (threads) running this operator. The unit of
    /// resource allocation.
    #[serde(default = "default_parallelism")]
    pub parallelism: u32,
    /// Mean time to execute one tuple, in milliseconds. Must be positive for
    /// bolts; unused for spouts (they emit, they do not execute).
    #[serde(default = "S::zero")]
    pub service_time: S,
    /// Output tuples emitted per executed tuple. Zero models pure sinks and
    /// total filters; values above one model fan-out transforms.
    #[serde(default = "S::one")]
    pub selectivity: S,
    /// Extra per-tuple latency for stateful operators, in milliseconds. Does
    /// not consume executor time.
    #[serde(default = "S::zero")]
    pub state_overhead: S,
}

fn default_parallelism() -> u32 {
    1
}

/// A directed edge routing a fraction of the parent's output to a child.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSpec<S: Scalar> {
    pub from: OperatorId,
    pub to: OperatorId,
    /// Fraction of the parent's emitted tuples routed to this child, in
    /// (0, 1]. A parent's outgoing shares may sum below 1 (the remainder is
    /// not produced for anyone) but never above.
    #[serde(default = "S::one")]
    pub share: S,
}

/// A complete topology: operators, edges, SLO, and baseline input rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologySpec<S: Scalar> {
    pub id: TopologyId,
    /// Baseline tuples per second emitted by each spout.
    pub input_rate: S,
    pub slo: SloSpec<S>,
    pub operators: Vec<OperatorSpec<S>>,
    pub edges: Vec<EdgeSpec<S>>,
}

/// One structural defect found by [`validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("duplicate operator id {0}")]
    DuplicateOperator(OperatorId),
    #[error("edge references unknown operator {0}")]
    UnknownOperator(OperatorId),
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: OperatorId, to: OperatorId },
    #[error("operator {0}: parallelism must be at least 1")]
    ZeroParallelism(OperatorId),
    #[error("bolt {0}: service_time must be positive")]
    NonPositiveServiceTime(OperatorId),
    #[error("operator {0}: selectivity must be non-negative")]
    NegativeSelectivity(OperatorId),
    #[error("operator {0}: state_overhead must be non-negative")]
    NegativeStateOverhead(OperatorId),
    #[error("spout {0} has an incoming edge")]
    SpoutWithParent(OperatorId),
    #[error("edge {from} -> {to}: share must be in (0, 1]")]
    ShareOutOfRange { from: OperatorId, to: OperatorId },
    #[error("operator {0}: outgoing share sum exceeds 1")]
    ShareSumExceedsOne(OperatorId),
    #[error("cycle detected through edge {from} -> {to}")]
    Cycle { from: OperatorId, to: OperatorId },
    #[error("bolt {0} is not reachable from any spout")]
    Unreachable(OperatorId),
    #[error("topology has no spout")]
    NoSpout,
    #[error("input_rate must be non-negative")]
    NegativeInputRate,
    #[error("invalid SLO: {0}")]
    InvalidSlo(String),
}

/// Outcome of [`validate`]: empty means the topology satisfies every invariant.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Raised by [`topological_order`] when the edge set contains a cycle.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("cycle detected through edge {from} -> {to}")]
pub struct CycleError {
    pub from: OperatorId,
    pub to: OperatorId,
}

impl<S: Scalar> TopologySpec<S> {
    pub fn operator(&self, id: &OperatorId) -> Option<&OperatorSpec<S>> {
        self.operators.iter().find(|o| &o.id == id)
    }

    /// Ids of all spouts, in id order.
    pub fn spouts(&self) -> Vec<OperatorId> {
        let mut out: Vec<_> = self
            .operators
            .iter()
            .filter(|o| o.kind == OperatorKind::Spout)
            .map(|o| o.id.clone())
            .collect();
        out.sort();
        out
    }

    /// Edges arriving at `id`, in source id order.
    pub fn incoming(&self, id: &OperatorId) -> Vec<&EdgeSpec<S>> {
        let mut out: Vec<_> = self.edges.iter().filter(|e| &e.to == id).collect();
        out.sort_by(|a, b| a.from.cmp(&b.from));
        out
    }

    /// Edges leaving `id`, in target id order.
    pub fn outgoing(&self, id: &OperatorId) -> Vec<&EdgeSpec<S>> {
        let mut out: Vec<_> = self.edges.iter().filter(|e| &e.from == id).collect();
        out.sort_by(|a, b| a.to.cmp(&b.to));
        out
    }
}

/// Checks every structural invariant and reports all violations found.
///
/// Pure: the same spec always yields the same report. An ill-formed spec is
/// not an error at this level; the report carries the defects.
pub fn validate<S: Scalar>(spec: &TopologySpec<S>) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut ids = BTreeSet::new();
    for op in &spec.operators {
        if !ids.insert(op.id.clone()) {
            report.violations.push(Violation::DuplicateOperator(op.id.clone()));
        }
        if op.parallelism < 1 {
            report.violations.push(Violation::ZeroParallelism(op.id.clone()));
        }
        if op.kind == OperatorKind::Bolt && op.service_time <= S::zero() {
            report
                .violations
                .push(Violation::NonPositiveServiceTime(op.id.clone()));
        }
        if op.selectivity < S::zero() {
            report.violations.push(Violation::NegativeSelectivity(op.id.clone()));
        }
        if op.state_overhead < S::zero() {
            report
                .violations
                .push(Violation::NegativeStateOverhead(op.id.clone()));
        }
    }

    let mut seen_edges = BTreeSet::new();
    for edge in &spec.edges {
        for end in [&edge.from, &edge.to] {
            if !ids.contains(end) {
                report.violations.push(Violation::UnknownOperator(end.clone()));
            }
        }
        if !seen_edges.insert((edge.from.clone(), edge.to.clone())) {
            report.violations.push(Violation::DuplicateEdge {
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
        }
        if edge.share <= S::zero() || edge.share > S::one() {
            report.violations.push(Violation::ShareOutOfRange {
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
        }
        if let Some(op) = spec.operator(&edge.to) {
            if op.kind == OperatorKind::Spout {
                report.violations.push(Violation::SpoutWithParent(edge.to.clone()));
            }
        }
    }

    // Share sums get a hair of slack so "0.5 + 0.5" style splits written in
    // decimal never trip the check.
    let slack = S::from_config(1e-9);
    let mut share_sums: BTreeMap<OperatorId, S> = BTreeMap::new();
    for edge in &spec.edges {
        *share_sums.entry(edge.from.clone()).or_insert_with(S::zero) += edge.share;
    }
    for (id, sum) in share_sums {
        if sum > S::one() + slack {
            report.violations.push(Violation::ShareSumExceedsOne(id));
        }
    }

    if !spec.operators.iter().any(|o| o.kind == OperatorKind::Spout) {
        report.violations.push(Violation::NoSpout);
    }
    if spec.input_rate < S::zero() {
        report.violations.push(Violation::NegativeInputRate);
    }
    if let Err(msg) = spec.slo.check() {
        report.violations.push(Violation::InvalidSlo(msg));
    }

    match topological_order(spec) {
        Ok(order) => {
            // Reachability from spouts, walked in topological order.
            let mut reachable: BTreeSet<OperatorId> = spec.spouts().into_iter().collect();
            for id in &order {
                if spec
                    .incoming(id)
                    .iter()
                    .any(|e| reachable.contains(&e.from))
                {
                    reachable.insert(id.clone());
                }
            }
            for op in &spec.operators {
                if op.kind == OperatorKind::Bolt && !reachable.contains(&op.id) {
                    report.violations.push(Violation::Unreachable(op.id.clone()));
                }
            }
        }
        Err(CycleError { from, to }) => {
            report.violations.push(Violation::Cycle { from, to });
        }
    }

    report
}

/// Operators with no outgoing edges, in id order.
pub fn sinks<S: Scalar>(spec: &TopologySpec<S>) -> Vec<OperatorId> {
    let has_out: BTreeSet<_> = spec.edges.iter().map(|e| e.from.clone()).collect();
    let mut out: Vec<_> = spec
        .operators
        .iter()
        .filter(|o| !has_out.contains(&o.id))
        .map(|o| o.id.clone())
        .collect();
    out.sort();
    out
}

/// Kahn's algorithm with a deterministic frontier: sources drain before
/// bolts, ties within a kind break by id order. On a cycle, reports one
/// residual edge.
pub fn topological_order<S: Scalar>(spec: &TopologySpec<S>) -> Result<Vec<OperatorId>, CycleError> {
    let known: BTreeSet<_> = spec.operators.iter().map(|o| o.id.clone()).collect();
    let rank = |id: &OperatorId| -> u8 {
        match spec.operator(id).map(|o| o.kind) {
            Some(OperatorKind::Spout) => 0,
            _ => 1,
        }
    };
    let mut indegree: BTreeMap<OperatorId, usize> =
        known.iter().map(|id| (id.clone(), 0)).collect();
    for edge in &spec.edges {
        if known.contains(&edge.from) && known.contains(&edge.to) {
            *indegree.get_mut(&edge.to).expect("known id") += 1;
        }
    }

    let mut frontier: BTreeSet<(u8, OperatorId)> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| (rank(id), id.clone()))
        .collect();
    let mut order = Vec::with_capacity(known.len());

    while let Some(key) = frontier.iter().next().cloned() {
        frontier.remove(&key);
        let (_, next) = key;
        for edge in spec.outgoing(&next) {
            if let Some(d) = indegree.get_mut(&edge.to) {
                *d -= 1;
                if *d == 0 {
                    frontier.insert((rank(&edge.to), edge.to.clone()));
                }
            }
        }
        order.push(next);
    }

    if order.len() == known.len() {
        Ok(order)
    } else {
        let placed: BTreeSet<_> = order.into_iter().collect();
        let back = spec
            .edges
            .iter()
            .find(|e| !placed.contains(&e.from) && !placed.contains(&e.to))
            .expect("cycle implies a residual edge");
        Err(CycleError {
            from: back.from.clone(),
            to: back.to.clone(),
        })
    }
}
