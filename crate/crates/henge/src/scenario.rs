//! Scenario definition: topologies, nodes, workload bindings, faults.
//!
//! A scenario file is TOML referencing topology files by path (relative to
//! the scenario file), giving the node inventory, binding rate profiles to
//! spouts, and optionally injecting faults and contention hooks. Everything
//! resolves into the in-memory [`Scenario`] the runner consumes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::OperatorId;
use crate::simulator::{ContentionHook, NodeSpec, SimSettings};
use crate::topology::validate;
use crate::workload::{load_trace, RateProfile, TraceError, DEFAULT_SECONDS_PER_HOUR};
use crate::{Topology, Value};

/// Default hands-off warm-up before the scheduler may act, seconds.
pub const DEFAULT_SCHEDULER_START_S: u64 = 900;

/// A topology together with the rate profiles bound to its spouts. Spouts
/// without a binding run at the topology's constant `input_rate`.
#[derive(Debug, Clone)]
pub struct TopologyBinding {
    pub spec: Topology,
    pub rates: BTreeMap<OperatorId, RateProfile<Value>>,
}

/// Metrics blackout span, `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FaultSpan {
    pub start_s: u64,
    pub end_s: u64,
}

/// A fully resolved simulation scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub duration_s: u64,
    pub seed: u64,
    pub scheduler_start_s: u64,
    pub nodes: Vec<NodeSpec>,
    pub topologies: Vec<TopologyBinding>,
    pub sim: SimSettings,
    pub faults: Vec<FaultSpan>,
    pub contention: Vec<ContentionHook>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("topology {path} is invalid:\n{report}")]
    InvalidTopology { path: String, report: String },
    #[error("duplicate topology id {0}")]
    DuplicateTopology(String),
    #[error("rate binding for topology {topology} references unknown spout {spout}")]
    UnknownSpout { topology: String, spout: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("scenario is invalid: {0}")]
    Invalid(String),
}

impl Scenario {
    /// Structural checks for programmatically built scenarios: validated
    /// topologies, unique ids, known spouts, at least one node.
    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.duration_s == 0 {
            return Err(ScenarioError::Invalid("duration_s must be positive".into()));
        }
        if self.nodes.is_empty() {
            return Err(ScenarioError::Invalid("at least one node is required".into()));
        }
        let mut seen = BTreeSet::new();
        for binding in &self.topologies {
            if !seen.insert(binding.spec.id.clone()) {
                return Err(ScenarioError::DuplicateTopology(binding.spec.id.to_string()));
            }
            let report = validate(&binding.spec);
            if !report.is_empty() {
                return Err(ScenarioError::InvalidTopology {
                    path: binding.spec.id.to_string(),
                    report: report.to_string(),
                });
            }
            let spouts: BTreeSet<OperatorId> = binding.spec.spouts().into_iter().collect();
            for spout in binding.rates.keys() {
                if !spouts.contains(spout) {
                    return Err(ScenarioError::UnknownSpout {
                        topology: binding.spec.id.to_string(),
                        spout: spout.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

// ---- file schema ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    duration_s: u64,
    seed: u64,
    #[serde(default = "default_scheduler_start")]
    scheduler_start_s: u64,
    nodes: Vec<NodeSpec>,
    topologies: Vec<TopologyRef>,
    #[serde(default)]
    sim: SimSettings,
    #[serde(default)]
    faults: Vec<FaultSpan>,
    #[serde(default)]
    contention: Vec<ContentionHook>,
}

fn default_scheduler_start() -> u64 {
    DEFAULT_SCHEDULER_START_S
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRef {
    file: PathBuf,
    #[serde(default)]
    rates: Vec<RateBinding>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
enum RateBinding {
    Constant {
        spout: OperatorId,
        base_rate: Option<Value>,
    },
    Spike {
        spout: OperatorId,
        base_rate: Option<Value>,
        start_s: u64,
        end_s: u64,
        multiplier: Value,
    },
    Trace {
        spout: OperatorId,
        base_rate: Option<Value>,
        trace_file: PathBuf,
        seconds_per_hour: Option<f64>,
    },
}

impl RateBinding {
    fn spout(&self) -> &OperatorId {
        match self {
            RateBinding::Constant { spout, .. }
            | RateBinding::Spike { spout, .. }
            | RateBinding::Trace { spout, .. } => spout,
        }
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a topology file (TOML) without validating it.
pub fn load_topology_file(path: impl AsRef<Path>) -> Result<Topology, ScenarioError> {
    let path = path.as_ref();
    let text = read(path)?;
    toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Loads and fully resolves a scenario file: topology files and traces are
/// read relative to the scenario's directory, and every topology must pass
/// validation.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = read(path)?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut topologies = Vec::new();
    for topo_ref in &file.topologies {
        let topo_path = base.join(&topo_ref.file);
        let spec = load_topology_file(&topo_path)?;
        let report = validate(&spec);
        if !report.is_empty() {
            return Err(ScenarioError::InvalidTopology {
                path: topo_path.display().to_string(),
                report: report.to_string(),
            });
        }

        let mut rates = BTreeMap::new();
        for binding in &topo_ref.rates {
            let profile = match binding {
                RateBinding::Constant { base_rate, .. } => RateProfile::Constant {
                    base_rate: base_rate.unwrap_or(spec.input_rate),
                },
                RateBinding::Spike {
                    base_rate,
                    start_s,
                    end_s,
                    multiplier,
                    ..
                } => RateProfile::Spike {
                    base_rate: base_rate.unwrap_or(spec.input_rate),
                    start_s: *start_s,
                    end_s: *end_s,
                    multiplier: *multiplier,
                },
                RateBinding::Trace {
                    base_rate,
                    trace_file,
                    seconds_per_hour,
                    ..
                } => load_trace(
                    base.join(trace_file),
                    base_rate.unwrap_or(spec.input_rate),
                    seconds_per_hour.unwrap_or(DEFAULT_SECONDS_PER_HOUR),
                )?,
            };
            rates.insert(binding.spout().clone(), profile);
        }
        topologies.push(TopologyBinding { spec, rates });
    }

    let scenario = Scenario {
        name: file.name.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into())
        }),
        duration_s: file.duration_s,
        seed: file.seed,
        scheduler_start_s: file.scheduler_start_s,
        nodes: file.nodes,
        topologies,
        sim: file.sim,
        faults: file.faults,
        contention: file.contention,
    };
    scenario.check()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const TOPOLOGY: &str = r#"
id = "pageload"
input_rate = 100.0

[slo]
kind = "latency"
latency_threshold_ms = 60.0
max_utility = 35.0

[[operators]]
id = "spout"
kind = "spout"

[[operators]]
id = "filter"
kind = "bolt"
parallelism = 2
service_time = 5.0
selectivity = 0.5

[[operators]]
id = "sink"
kind = "bolt"
service_time = 2.0
selectivity = 0.0

[[edges]]
from = "spout"
to = "filter"

[[edges]]
from = "filter"
to = "sink"
"#;

    fn write_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let mut topo = fs::File::create(dir.path().join("pageload.toml")).unwrap();
        topo.write_all(TOPOLOGY.as_bytes()).unwrap();
        let mut trace = fs::File::create(dir.path().join("trace.csv")).unwrap();
        trace
            .write_all(b"offset_hours,multiplier\n0,1.0\n1,2.0\n")
            .unwrap();
        dir
    }

    #[test]
    fn topology_file_round_trips_defaults() {
        let dir = write_dir();
        let spec = load_topology_file(dir.path().join("pageload.toml")).unwrap();
        assert!(validate(&spec).is_empty());
        assert_eq!(spec.operators.len(), 3);
        let spout = spec.operator(&"spout".into()).unwrap();
        assert_eq!(spout.parallelism, 1);
        assert_eq!(spout.selectivity, 1.0);
        let filter = spec.operator(&"filter".into()).unwrap();
        assert_eq!(filter.parallelism, 2);
        assert_eq!(filter.state_overhead, 0.0);
        assert_eq!(spec.edges[0].share, 1.0);
        assert_eq!(spec.slo.latency_threshold, Some(60.0));
    }

    #[test]
    fn scenario_resolves_topologies_and_traces() {
        let dir = write_dir();
        let scenario_toml = r#"
duration_s = 1200
seed = 7

[[nodes]]
id = "n0"
cores = 8

[[topologies]]
file = "pageload.toml"

[[topologies.rates]]
kind = "trace"
spout = "spout"
trace_file = "trace.csv"

[sim]
jitter_pct = 0.0
"#;
        let path = dir.path().join("scenario.toml");
        fs::write(&path, scenario_toml).unwrap();
        let scenario = load_scenario(&path).unwrap();
        assert_eq!(scenario.name, "scenario");
        assert_eq!(scenario.scheduler_start_s, DEFAULT_SCHEDULER_START_S);
        assert_eq!(scenario.topologies.len(), 1);
        let rates = &scenario.topologies[0].rates;
        assert!(matches!(
            rates[&OperatorId::from("spout")],
            RateProfile::Trace { .. }
        ));
        assert_eq!(scenario.sim.jitter_pct, 0.0);
    }

    #[test]
    fn unknown_spout_binding_is_rejected() {
        let dir = write_dir();
        let scenario_toml = r#"
duration_s = 100
seed = 1

[[nodes]]
id = "n0"
cores = 8

[[topologies]]
file = "pageload.toml"

[[topologies.rates]]
kind = "constant"
spout = "nope"
"#;
        let path = dir.path().join("scenario.toml");
        fs::write(&path, scenario_toml).unwrap();
        assert!(matches!(
            load_scenario(&path),
            Err(ScenarioError::UnknownSpout { .. })
        ));
    }

    #[test]
    fn invalid_topology_fails_with_its_report() {
        let dir = write_dir();
        fs::write(
            dir.path().join("bad.toml"),
            TOPOLOGY.replace("to = \"filter\"", "to = \"missing\""),
        )
        .unwrap();
        let scenario_toml = r#"
duration_s = 100
seed = 1
[[nodes]]
id = "n0"
cores = 8
[[topologies]]
file = "bad.toml"
"#;
        let path = dir.path().join("scenario.toml");
        fs::write(&path, scenario_toml).unwrap();
        match load_scenario(&path) {
            Err(ScenarioError::InvalidTopology { report, .. }) => {
                assert!(report.contains("unknown operator"));
            }
            other => panic!("expected invalid topology, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_scenario("/nonexistent/scenario.toml"),
            Err(ScenarioError::Io { .. })
        ));
    }
}
