//! Sliding-window counters and the operator capacity metric.
//!
//! Metrics accumulate in 10-second sub-windows; a ring of the six most recent
//! complete sub-windows forms the one-minute sliding window everything else
//! reads. Aggregation only ever covers complete sub-windows; when none exist
//! yet the window reports [`MetricsError::InsufficientData`], a first-class
//! signal the scheduler treats as "wait" rather than as zero.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::OperatorId;
use crate::scalar::Scalar;

/// Sub-window length in seconds.
pub const SUB_WINDOW_SECS: u64 = 10;
/// Complete sub-windows per sliding window.
pub const SUB_WINDOWS: usize = 6;
/// Sliding window span in seconds.
pub const WINDOW_SECS: u64 = SUB_WINDOW_SECS * SUB_WINDOWS as u64;

/// Capacity above which an operator counts as congested.
pub const CONGESTION_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    /// No complete sub-window (or a counter set is missing an entry); the
    /// caller should wait for data rather than assume zero.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("window length must be positive, got {0} ms")]
    NonPositiveWindow(f64),
    #[error("operator capacity needs at least one executor sample")]
    NoExecutors,
}

/// Additive combination of two buckets covering disjoint time ranges.
pub trait Merge {
    fn merge(&mut self, other: &Self);
}

/// Per-edge tuple counts over one window: `sent` is the total number of
/// tuples the parent emitted (the denominator that accounts for splits and
/// drops), `executed` is how many of them this operator executed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeWindowCounters<S: Scalar> {
    pub sent: S,
    pub executed: S,
}

impl<S: Scalar> Default for EdgeWindowCounters<S> {
    fn default() -> Self {
        Self {
            sent: S::zero(),
            executed: S::zero(),
        }
    }
}

impl<S: Scalar> Merge for EdgeWindowCounters<S> {
    fn merge(&mut self, other: &Self) {
        self.sent += other.sent;
        self.executed += other.executed;
    }
}

/// Per-executor work accounting over one window.
///
/// `execute_latency` is the mean milliseconds spent per executed tuple, so
/// `executed_tuples * execute_latency` is the busy time within `window_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutorWindowCounters<S: Scalar> {
    pub executed_tuples: S,
    pub execute_latency: S,
    pub window_ms: S,
}

/// Accumulator behind [`ExecutorWindowCounters`]: busy time sums cleanly
/// across sub-windows where mean latencies do not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutorAccum<S: Scalar> {
    pub executed: S,
    pub busy_ms: S,
    pub window_ms: S,
}

impl<S: Scalar> Default for ExecutorAccum<S> {
    fn default() -> Self {
        Self {
            executed: S::zero(),
            busy_ms: S::zero(),
            window_ms: S::zero(),
        }
    }
}

impl<S: Scalar> Merge for ExecutorAccum<S> {
    fn merge(&mut self, other: &Self) {
        self.executed += other.executed;
        self.busy_ms += other.busy_ms;
        self.window_ms += other.window_ms;
    }
}

impl<S: Scalar> ExecutorAccum<S> {
    pub fn counters(&self) -> ExecutorWindowCounters<S> {
        let latency = if self.executed > S::zero() {
            self.busy_ms / self.executed
        } else {
            S::zero()
        };
        ExecutorWindowCounters {
            executed_tuples: self.executed,
            execute_latency: latency,
            window_ms: self.window_ms,
        }
    }
}

/// Fraction of the window one executor spent executing tuples, clamped to
/// [0, 1]: `min(1, executed * latency / window)`.
pub fn executor_capacity<S: Scalar>(c: &ExecutorWindowCounters<S>) -> Result<S, MetricsError> {
    if c.window_ms <= S::zero() {
        return Err(MetricsError::NonPositiveWindow(
            c.window_ms.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let raw = c.executed_tuples * c.execute_latency / c.window_ms;
    Ok(raw.min(S::one()))
}

/// An operator's capacity is the maximum over its executors.
pub fn operator_capacity<S: Scalar>(per_executor: &[S]) -> Result<S, MetricsError> {
    per_executor
        .iter()
        .copied()
        .fold(None, |acc: Option<S>, c| {
            Some(acc.map_or(c, |m| m.max(c)))
        })
        .ok_or(MetricsError::NoExecutors)
}

/// Strictly above the threshold counts as congested; the threshold itself
/// does not.
pub fn is_congested<S: Scalar>(capacity: S) -> bool {
    capacity > S::from_config(CONGESTION_THRESHOLD)
}

/// Ring of complete sub-window buckets plus the partial bucket being filled.
#[derive(Debug, Clone)]
pub struct SlidingWindow<B> {
    complete: VecDeque<B>,
    current: B,
}

impl<B: Default + Merge + Clone> SlidingWindow<B> {
    pub fn new() -> Self {
        Self {
            complete: VecDeque::with_capacity(SUB_WINDOWS),
            current: B::default(),
        }
    }

    /// The partial sub-window currently accumulating.
    pub fn current_mut(&mut self) -> &mut B {
        &mut self.current
    }

    /// Finalizes the current sub-window into the ring, evicting the oldest
    /// bucket once six are held.
    pub fn roll(&mut self) {
        if self.complete.len() == SUB_WINDOWS {
            self.complete.pop_front();
        }
        self.complete.push_back(std::mem::take(&mut self.current));
    }

    /// Number of complete sub-windows available.
    pub fn len(&self) -> usize {
        self.complete.len()
    }

    pub fn is_empty(&self) -> bool {
        self.complete.is_empty()
    }

    /// Drops all data, complete and partial, starting a fresh window.
    pub fn reset(&mut self) {
        self.complete.clear();
        self.current = B::default();
    }

    /// Merges all complete sub-windows; the partial bucket is excluded.
    pub fn aggregate(&self) -> Result<B, MetricsError> {
        aggregate_window(self)
    }
}

impl<B: Default + Merge + Clone> Default for SlidingWindow<B> {
    fn default() -> Self {
        Self::new()
    }
}

/// Sums counts (and busy time, and anything else additive) across complete
/// sub-windows. Weighted means fall out of the sums downstream.
pub fn aggregate_window<B: Default + Merge + Clone>(
    window: &SlidingWindow<B>,
) -> Result<B, MetricsError> {
    if window.complete.is_empty() {
        return Err(MetricsError::InsufficientData(
            "no complete sub-window".into(),
        ));
    }
    let mut out = B::default();
    for bucket in &window.complete {
        out.merge(bucket);
    }
    Ok(out)
}

/// Per-topology aggregates derived from one sliding window, as consumed by
/// the scheduler and the metrics export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyMetrics<S: Scalar> {
    /// Mean end-to-end tuple latency over the window, milliseconds.
    pub latency_ms: S,
    /// Fraction of source input processed per unit time, nominally in [0, 1].
    pub juice: S,
    /// Tuples per second entering at the spouts.
    pub input_rate: S,
    /// Tuples per second emitted by the sinks.
    pub output_rate: S,
    /// Operator id -> capacity, clamped to [0, 1].
    pub per_operator_capacity: BTreeMap<OperatorId, S>,
}
