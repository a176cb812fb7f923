//! Juice: an input-rate-independent throughput metric for dataflow DAGs.
//!
//! An operator's juice per source is the fraction of that source's input it
//! effectively processed, accumulated multiplicatively along the DAG: for
//! each parent edge the ratio `executed / sent` (with `sent` being the
//! parent's *total* output, so splits and drops are charged) scales the
//! parent's juice, and the terms over all parents sum. A topology's juice is
//! the sum over sinks and sources of the sink's per-source juice, divided by
//! the number of sources. Lossless steady state yields exactly 1.0.
//!
//! Everything here is a ratio of windowed counts, so scaling every counter by
//! the same factor leaves juice unchanged.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ids::OperatorId;
use crate::metrics::EdgeWindowCounters;
use crate::scalar::Scalar;
use crate::topology::{sinks, topological_order, OperatorKind, TopologySpec};

/// Per-source juice rows for every operator, plus the topology total.
#[derive(Debug, Clone, PartialEq)]
pub struct JuiceReport<S: Scalar> {
    /// (operator, source spout) -> juice contribution.
    pub per_operator: BTreeMap<(OperatorId, OperatorId), S>,
    pub topology_juice: S,
    /// Number of source spouts the total is normalized by.
    pub sources: usize,
    /// Sink operators, in id order.
    pub sinks: Vec<OperatorId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JuiceError {
    #[error("parent juice and counter sequences differ in length ({juices} vs {counters})")]
    LengthMismatch { juices: usize, counters: usize },
    #[error("insufficient data: no counters for edge {from} -> {to}")]
    MissingEdge { from: OperatorId, to: OperatorId },
    #[error("{0} is not a sink of this topology")]
    UnknownSink(OperatorId),
    #[error("sink weight for {0} must be non-negative")]
    NegativeWeight(OperatorId),
}

/// One application of the per-operator juice rule: sum over parents of
/// parent juice times `executed / sent`. Idle edges (`sent == 0`) contribute
/// zero so warm-up windows cannot poison the report.
pub fn operator_juice<S: Scalar>(
    parent_juices: &[S],
    counters: &[EdgeWindowCounters<S>],
) -> Result<S, JuiceError> {
    if parent_juices.len() != counters.len() {
        return Err(JuiceError::LengthMismatch {
            juices: parent_juices.len(),
            counters: counters.len(),
        });
    }
    let mut juice = S::zero();
    for (parent, c) in parent_juices.iter().zip(counters) {
        if c.sent > S::zero() {
            juice += *parent * (c.executed / c.sent);
        }
    }
    Ok(juice)
}

/// Forward pass over the whole topology, keeping per-source rows through
/// merges, then the normalized sink sum with uniform sink weights.
pub fn topology_juice<S: Scalar>(
    spec: &TopologySpec<S>,
    counters: &BTreeMap<(OperatorId, OperatorId), EdgeWindowCounters<S>>,
) -> Result<JuiceReport<S>, JuiceError> {
    topology_juice_weighted(spec, counters, &BTreeMap::new())
}

/// Like [`topology_juice`] but with per-sink weights; sinks absent from the
/// map weigh 1.0, which recovers the unweighted metric.
pub fn topology_juice_weighted<S: Scalar>(
    spec: &TopologySpec<S>,
    counters: &BTreeMap<(OperatorId, OperatorId), EdgeWindowCounters<S>>,
    sink_weights: &BTreeMap<OperatorId, S>,
) -> Result<JuiceReport<S>, JuiceError> {
    for (sink, w) in sink_weights {
        if *w < S::zero() {
            return Err(JuiceError::NegativeWeight(sink.clone()));
        }
    }

    let order = topological_order(spec).expect("valid topology");
    let spouts = spec.spouts();
    let sink_ids = sinks(spec);

    // rows[op][source] built in topological order; spouts seed themselves.
    let mut rows: BTreeMap<OperatorId, BTreeMap<OperatorId, S>> = BTreeMap::new();
    for op in &order {
        let spec_op = spec.operator(op).expect("ordered id exists");
        let mut row: BTreeMap<OperatorId, S> = BTreeMap::new();
        if spec_op.kind == OperatorKind::Spout {
            row.insert(op.clone(), S::one());
        } else {
            for edge in spec.incoming(op) {
                let key = (edge.from.clone(), edge.to.clone());
                let c = counters.get(&key).ok_or_else(|| JuiceError::MissingEdge {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                })?;
                let parent_row = &rows[&edge.from];
                for source in &spouts {
                    // A source with no path through this parent contributes 0.
                    let parent_juice = parent_row.get(source).copied().unwrap_or_else(S::zero);
                    let term = operator_juice(&[parent_juice], &[*c])?;
                    *row.entry(source.clone()).or_insert_with(S::zero) += term;
                }
            }
        }
        rows.insert(op.clone(), row);
    }

    let mut total = S::zero();
    for sink in &sink_ids {
        let weight = sink_weights.get(sink).copied().unwrap_or_else(S::one);
        for juice in rows[sink].values() {
            total += weight * *juice;
        }
    }
    let sources = spouts.len();
    let topology_juice = total / S::from_usize(sources.max(1)).expect("small count");

    let mut per_operator = BTreeMap::new();
    for (op, row) in rows {
        for (source, juice) in row {
            per_operator.insert((op.clone(), source), juice);
        }
    }

    Ok(JuiceReport {
        per_operator,
        topology_juice,
        sources,
        sinks: sink_ids,
    })
}

/// Per-source juice of one sink, read out of a finished report.
pub fn per_source_attribution<S: Scalar>(
    report: &JuiceReport<S>,
    sink: &OperatorId,
) -> Result<BTreeMap<OperatorId, S>, JuiceError> {
    if !report.sinks.contains(sink) {
        return Err(JuiceError::UnknownSink(sink.clone()));
    }
    Ok(report
        .per_operator
        .iter()
        .filter(|((op, _), _)| op == sink)
        .map(|((_, source), juice)| (source.clone(), *juice))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{validate, EdgeSpec, OperatorSpec, TopologySpec};
    use crate::utility::{SloKind, SloSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    type Counters = BTreeMap<(OperatorId, OperatorId), EdgeWindowCounters<f64>>;

    fn c(map: &mut Counters, from: &str, to: &str, sent: f64, executed: f64) {
        map.insert(
            (from.into(), to.into()),
            EdgeWindowCounters { sent, executed },
        );
    }

    fn diamond() -> TopologySpec<f64> {
        crate::topology::tests::diamond()
    }

    fn split_merge() -> TopologySpec<f64> {
        crate::topology::tests::split_merge()
    }

    /// Counter set behind the diamond example: the spout emits 10K, A
    /// executes all of it and emits 16K split evenly, B keeps up with its
    /// half, C only manages 6K, D keeps up with both parents.
    fn diamond_counters() -> Counters {
        let mut m = Counters::new();
        c(&mut m, "spout", "a", 10_000.0, 10_000.0);
        c(&mut m, "a", "b", 16_000.0, 8_000.0);
        c(&mut m, "a", "c", 16_000.0, 6_000.0);
        c(&mut m, "b", "d", 8_000.0, 8_000.0);
        c(&mut m, "c", "d", 6_000.0, 6_000.0);
        m
    }

    fn split_merge_counters() -> Counters {
        let mut m = Counters::new();
        c(&mut m, "spout1", "a", 10_000.0, 5_000.0);
        c(&mut m, "a", "b", 5_000.0, 5_000.0);
        c(&mut m, "spout2", "d", 10_000.0, 10_000.0);
        c(&mut m, "d", "e", 10_000.0, 5_000.0);
        c(&mut m, "e", "b", 8_000.0, 4_000.0);
        c(&mut m, "e", "f", 8_000.0, 3_200.0);
        c(&mut m, "b", "c", 9_000.0, 9_000.0);
        m
    }

    #[test]
    fn single_split_halves_juice() {
        // B under the diamond counters: parent juice 1.0, E=8K of T=16K.
        let j = operator_juice(
            &[1.0],
            &[EdgeWindowCounters {
                sent: 16_000.0,
                executed: 8_000.0,
            }],
        )
        .unwrap();
        assert_eq!(j, 0.5);
    }

    #[test]
    fn merge_sums_parent_terms() {
        // D under the diamond counters: parents at 0.5 and 0.375, lossless.
        let j = operator_juice(
            &[0.5, 0.375],
            &[
                EdgeWindowCounters {
                    sent: 8_000.0,
                    executed: 8_000.0,
                },
                EdgeWindowCounters {
                    sent: 6_000.0,
                    executed: 6_000.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(j, 0.875);
    }

    #[test]
    fn lossless_single_parent_passes_juice_through() {
        let j = operator_juice(
            &[0.7],
            &[EdgeWindowCounters {
                sent: 123.0,
                executed: 123.0,
            }],
        )
        .unwrap();
        assert_eq!(j, 0.7);
    }

    #[test]
    fn idle_edge_contributes_zero() {
        let j = operator_juice(
            &[1.0, 1.0],
            &[
                EdgeWindowCounters {
                    sent: 0.0,
                    executed: 0.0,
                },
                EdgeWindowCounters {
                    sent: 10.0,
                    executed: 5.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(j, 0.5);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(operator_juice(&[1.0], &[]).is_err());
    }

    #[test]
    fn diamond_example_gives_0875() {
        let report = topology_juice(&diamond(), &diamond_counters()).unwrap();
        let get = |op: &str, src: &str| report.per_operator[&(op.into(), src.into())];
        assert!((get("a", "spout") - 1.0).abs() < 1e-12);
        assert!((get("b", "spout") - 0.5).abs() < 1e-12);
        assert!((get("c", "spout") - 0.375).abs() < 1e-12);
        assert!((get("d", "spout") - 0.875).abs() < 1e-12);
        assert!((report.topology_juice - 0.875).abs() < 1e-12);
    }

    #[test]
    fn split_merge_example_gives_0475() {
        let spec = split_merge();
        assert!(validate(&spec).is_empty());
        let report = topology_juice(&spec, &split_merge_counters()).unwrap();
        let get = |op: &str, src: &str| report.per_operator[&(op.into(), src.into())];
        assert!((get("a", "spout1") - 0.5).abs() < 1e-12);
        assert!((get("e", "spout2") - 0.5).abs() < 1e-12);
        assert!((get("b", "spout1") - 0.5).abs() < 1e-12);
        assert!((get("b", "spout2") - 0.25).abs() < 1e-12);
        assert!((get("f", "spout2") - 0.2).abs() < 1e-12);
        // Sink juices 0.75 and 0.2 over two sources.
        assert!((report.topology_juice - 0.475).abs() < 1e-12);
    }

    #[test]
    fn lossless_run_scores_one() {
        let spec = diamond();
        let mut m = Counters::new();
        c(&mut m, "spout", "a", 10_000.0, 10_000.0);
        c(&mut m, "a", "b", 10_000.0, 5_000.0);
        c(&mut m, "a", "c", 10_000.0, 5_000.0);
        c(&mut m, "b", "d", 5_000.0, 5_000.0);
        c(&mut m, "c", "d", 5_000.0, 5_000.0);
        let report = topology_juice(&spec, &m).unwrap();
        assert!((report.topology_juice - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_edge_counters_are_insufficient_data() {
        let mut m = diamond_counters();
        m.remove(&("b".into(), "d".into()));
        assert!(matches!(
            topology_juice(&diamond(), &m),
            Err(JuiceError::MissingEdge { .. })
        ));
    }

    #[test]
    fn attribution_reads_sink_rows() {
        let report = topology_juice(&split_merge(), &split_merge_counters()).unwrap();
        let attr = per_source_attribution(&report, &"c".into()).unwrap();
        assert!((attr[&OperatorId::from("spout1")] - 0.5).abs() < 1e-12);
        assert!((attr[&OperatorId::from("spout2")] - 0.25).abs() < 1e-12);

        let single = topology_juice(&diamond(), &diamond_counters()).unwrap();
        let attr = per_source_attribution(&single, &"d".into()).unwrap();
        assert_eq!(attr.len(), 1);
        assert!((attr[&OperatorId::from("spout")] - single.topology_juice).abs() < 1e-12);

        assert!(per_source_attribution(&report, &"a".into()).is_err());
    }

    #[test]
    fn sink_weights_default_to_uniform() {
        let spec = split_merge();
        let counters = split_merge_counters();
        let unweighted = topology_juice(&spec, &counters).unwrap();
        let mut weights = BTreeMap::new();
        weights.insert(OperatorId::from("c"), 1.0);
        weights.insert(OperatorId::from("f"), 1.0);
        let weighted = topology_juice_weighted(&spec, &counters, &weights).unwrap();
        assert_eq!(unweighted.topology_juice, weighted.topology_juice);

        let mut favor_c = BTreeMap::new();
        favor_c.insert(OperatorId::from("f"), 0.0);
        let only_c = topology_juice_weighted(&spec, &counters, &favor_c).unwrap();
        assert!((only_c.topology_juice - 0.75 / 2.0).abs() < 1e-12);
    }

    /// Independent route: enumerate every source-to-sink path and sum the
    /// per-path products of `executed / sent`. Equivalent to unrolling the
    /// per-operator recurrence, but shares no code with it.
    pub(crate) fn path_product_oracle(spec: &TopologySpec<f64>, counters: &Counters) -> f64 {
        fn walk(
            spec: &TopologySpec<f64>,
            counters: &Counters,
            at: &OperatorId,
            product: f64,
            sink_set: &[OperatorId],
            total: &mut f64,
        ) {
            if sink_set.contains(at) {
                *total += product;
            }
            for edge in spec.outgoing(at) {
                let c = &counters[&(edge.from.clone(), edge.to.clone())];
                let ratio = if c.sent > 0.0 { c.executed / c.sent } else { 0.0 };
                walk(spec, counters, &edge.to, product * ratio, sink_set, total);
            }
        }
        let sink_set = sinks(spec);
        let mut total = 0.0;
        for spout in spec.spouts() {
            walk(spec, counters, &spout, 1.0, &sink_set, &mut total);
        }
        total / spec.spouts().len() as f64
    }

    /// Random DAG with `n` operators, the first `k` of them spouts; every
    /// bolt has at least one earlier parent, and counters are integral.
    pub(crate) fn random_dag(
        rng: &mut impl Rng,
        max_ops: usize,
        max_sources: usize,
    ) -> (TopologySpec<f64>, Counters) {
        let n = rng.gen_range(3..=max_ops);
        let k = rng.gen_range(1..=max_sources.min(n - 1));
        let ops: Vec<OperatorSpec<f64>> = (0..n)
            .map(|i| OperatorSpec {
                id: format!("op{i}").into(),
                kind: if i < k {
                    OperatorKind::Spout
                } else {
                    OperatorKind::Bolt
                },
                parallelism: 1,
                service_time: if i < k { 0.0 } else { 1.0 },
                selectivity: 1.0,
                state_overhead: 0.0,
            })
            .collect();

        let mut edges = Vec::new();
        for i in k..n {
            let parents = rng.gen_range(1..=2.min(i));
            let mut chosen = std::collections::BTreeSet::new();
            while chosen.len() < parents {
                chosen.insert(rng.gen_range(0..i));
            }
            for p in chosen {
                edges.push(EdgeSpec {
                    from: format!("op{p}").into(),
                    to: format!("op{i}").into(),
                    share: 1.0,
                });
            }
        }
        // Even out shares per parent so validation passes.
        for i in 0..n {
            let id: OperatorId = format!("op{i}").into();
            let out: Vec<usize> = edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.from == id)
                .map(|(idx, _)| idx)
                .collect();
            let share = 1.0 / out.len().max(1) as f64;
            for idx in out {
                edges[idx].share = share;
            }
        }

        // Physically consistent counters: an edge can execute at most the
        // tuples routed to it, which is share * (parent's total output).
        let mut counters = Counters::new();
        let mut emitted: BTreeMap<OperatorId, f64> = BTreeMap::new();
        for i in 0..n {
            emitted.insert(format!("op{i}").into(), rng.gen_range(1..=10_000) as f64);
        }
        for e in &edges {
            let sent = emitted[&e.from];
            let routed = (e.share * sent).floor();
            let executed = rng.gen_range(0..=routed as u64) as f64;
            counters.insert((e.from.clone(), e.to.clone()), EdgeWindowCounters { sent, executed });
        }

        let spec = TopologySpec {
            id: "random".into(),
            input_rate: 100.0,
            slo: SloSpec {
                kind: SloKind::Throughput,
                latency_threshold: None,
                juice_threshold: Some(1.0),
                max_utility: 1.0,
            },
            operators: ops,
            edges,
        };
        debug_assert!(validate(&spec).is_empty(), "{}", validate(&spec));
        (spec, counters)
    }

    #[test]
    fn matches_path_product_oracle_on_random_dags() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (spec, counters) = random_dag(&mut rng, 6, 2);
            let report = topology_juice(&spec, &counters).unwrap();
            let oracle = path_product_oracle(&spec, &counters);
            assert!(
                (report.topology_juice - oracle).abs() < 1e-9,
                "juice {} vs oracle {}",
                report.topology_juice,
                oracle
            );
        }
    }

    proptest! {
        /// Scaling every counter by the same factor leaves juice unchanged.
        #[test]
        fn juice_is_rate_independent(scale in 0.001..1000.0f64, seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (spec, counters) = random_dag(&mut rng, 8, 2);
            let base = topology_juice(&spec, &counters).unwrap().topology_juice;
            let scaled: Counters = counters
                .iter()
                .map(|(k, v)| {
                    (k.clone(), EdgeWindowCounters { sent: v.sent * scale, executed: v.executed * scale })
                })
                .collect();
            let after = topology_juice(&spec, &scaled).unwrap().topology_juice;
            prop_assert!((base - after).abs() < 1e-9);
        }

        /// With every edge executing exactly what was routed to it, juice is
        /// 1; with executed bounded by the routed amount it never exceeds 1.
        #[test]
        fn lossless_is_one_and_bounded(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (spec, counters) = random_dag(&mut rng, 8, 2);
            let lossless: Counters = spec
                .edges
                .iter()
                .map(|e| {
                    let sent = counters[&(e.from.clone(), e.to.clone())].sent;
                    ((e.from.clone(), e.to.clone()), EdgeWindowCounters { sent, executed: e.share * sent })
                })
                .collect();
            let full = topology_juice(&spec, &lossless).unwrap().topology_juice;
            prop_assert!((full - 1.0).abs() < 1e-9);

            let bounded = topology_juice(&spec, &counters).unwrap().topology_juice;
            prop_assert!(bounded >= 0.0);
            prop_assert!(bounded <= 1.0 + 1e-9);
        }
    }
}
