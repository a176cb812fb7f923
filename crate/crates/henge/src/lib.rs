//! Utility-driven elasticity for multi-tenant stream processing.
//!
//! A cluster runs many dataflow topologies at once, each annotated with a
//! latency or throughput SLO and a utility function. The scheduler watches
//! windowed per-operator metrics (juice, capacity, end-to-end latency) and
//! navigates the configuration space one action per round: grant executors to
//! SLO-missing jobs, shrink overprovisioned satisfied jobs, or revert to the
//! best configuration seen so far. A deterministic fluid simulator stands in
//! for the real cluster so policies can be exercised at desk scale.
//!
//! Math kernels (juice, capacity, utility, rate profiles) are generic over the
//! scalar type via [`Scalar`]; the simulator, scheduler, and runner are pinned
//! to [`Value`] (`f64`).

pub mod ids;
pub mod juice;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod scheduler;
pub mod simulator;
pub mod topology;
pub mod utility;
pub mod workload;

pub use ids::{NodeId, OperatorId, TopologyId};
pub use scalar::Scalar;

/// Scalar type used by the simulator, scheduler, and all file formats.
pub type Value = f64;

/// [`topology::TopologySpec`] at the default scalar.
pub type Topology = topology::TopologySpec<Value>;
/// [`utility::SloSpec`] at the default scalar.
pub type Slo = utility::SloSpec<Value>;
/// [`utility::UtilityValue`] at the default scalar.
pub type Utility = utility::UtilityValue<Value>;
/// [`metrics::TopologyMetrics`] at the default scalar.
pub type Metrics = metrics::TopologyMetrics<Value>;
/// [`juice::JuiceReport`] at the default scalar.
pub type Juice = juice::JuiceReport<Value>;
/// [`workload::RateProfile`] at the default scalar.
pub type Rates = workload::RateProfile<Value>;
