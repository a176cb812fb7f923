//! Rendering of run output into the stable on-disk formats.
//!
//! All numeric columns print with exactly six decimal places so equal runs
//! produce byte-identical files.

use std::fmt::Write as _;

use crate::runner::{ActionRow, MetricRow, Summary};
use crate::simulator::EventRow;
use crate::Value;

pub const METRICS_HEADER: &str =
    "round,time_s,topology_id,latency_ms,juice,utility,input_rate,output_rate";
pub const ACTIONS_HEADER: &str =
    "round,time_s,action_kind,target,deltas,total_utility_before,total_utility_after";
pub const EVENTS_HEADER: &str = "time_s,topology_id,operator_id,queue_len,executed,dropped";

/// Fixed six-decimal rendering used by every numeric column.
pub fn fmt6(v: Value) -> String {
    format!("{v:.6}")
}

pub fn render_metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.round,
            r.time_s,
            r.topology,
            fmt6(r.latency_ms),
            fmt6(r.juice),
            fmt6(r.utility),
            fmt6(r.input_rate),
            fmt6(r.output_rate),
        )
        .expect("writing to string");
    }
    out
}

pub fn render_actions_csv(rows: &[ActionRow]) -> String {
    let mut out = String::from(ACTIONS_HEADER);
    out.push('\n');
    for r in rows {
        let targets = r
            .action
            .targets
            .iter()
            .map(|t| t.as_str())
            .collect::<Vec<_>>()
            .join(";");
        let deltas = r
            .action
            .deltas
            .iter()
            .flat_map(|(topo, ops)| {
                ops.iter().map(move |(op, delta)| format!("{topo}/{op}:{delta}"))
            })
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            r.time_s,
            r.action.kind.as_str(),
            targets,
            deltas,
            fmt6(r.total_utility_before),
            fmt6(r.total_utility_after),
        )
        .expect("writing to string");
    }
    out
}

pub fn render_events_csv(rows: &[EventRow]) -> String {
    let mut out = String::from(EVENTS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.time,
            r.topology,
            r.operator,
            fmt6(r.queue_len),
            fmt6(r.executed),
            fmt6(r.dropped),
        )
        .expect("writing to string");
    }
    out
}

/// Pretty JSON with stable key order (maps are sorted by construction).
pub fn render_summary_json(summary: &Summary) -> String {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::{ActionKind, SchedulerAction};
    use std::collections::BTreeMap;

    #[test]
    fn metrics_rows_render_with_six_decimals() {
        let rows = vec![MetricRow {
            round: 1,
            time_s: 10,
            topology: "t1".into(),
            latency_ms: 12.5,
            juice: 1.0,
            utility: 35.0,
            input_rate: 100.0,
            output_rate: 50.0,
        }];
        let text = render_metrics_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "1,10,t1,12.500000,1.000000,35.000000,100.000000,50.000000"
        );
    }

    #[test]
    fn action_rows_join_deltas_with_semicolons() {
        let mut ops = BTreeMap::new();
        ops.insert("a".into(), 10i64);
        ops.insert("b".into(), -16i64);
        let mut deltas = BTreeMap::new();
        deltas.insert("t1".into(), ops);
        let rows = vec![ActionRow {
            round: 91,
            time_s: 910,
            action: SchedulerAction {
                kind: ActionKind::Reconfigure,
                targets: vec!["t1".into()],
                deltas,
                note: None,
            },
            total_utility_before: 17.5,
            total_utility_after: 35.0,
        }];
        let text = render_actions_csv(&rows);
        assert!(text.ends_with(
            "91,910,reconfigure,t1,t1/a:10;t1/b:-16,17.500000,35.000000\n"
        ));
    }
}
