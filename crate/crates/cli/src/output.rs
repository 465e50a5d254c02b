//! CSV outputs.
//!
//! | file          | columns                                                                      |
//! |---------------|------------------------------------------------------------------------------|
//! | `trace.csv`   | run_id, iteration, node_id, role, value_db, reported_db, min_trust_toward_node |
//! | `summary.csv` | run_id, converged, iterations, decision, ground_truth, x_star_db             |
//! | `curves.csv`  | p_av, mode, p_success (availability) or vm_count, cloud_kind, latency_ms (latency) |
//!
//! Reals are written in plain decimal notation with nine significant digits
//! so outputs diff cleanly across runs and platforms.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use ssaas_core::cloud::{CloudKind, SensingMode};
use ssaas_core::consensus::Decision;
use ssaas_core::scenario::{ExperimentReport, RunSummary};
use ssaas_core::topology::Topology;

pub const TRACE_HEADER: [&str; 7] = [
    "run_id",
    "iteration",
    "node_id",
    "role",
    "value_db",
    "reported_db",
    "min_trust_toward_node",
];
pub const SUMMARY_HEADER: [&str; 6] = ["run_id", "converged", "iterations", "decision", "ground_truth", "x_star_db"];
pub const AVAILABILITY_HEADER: [&str; 3] = ["p_av", "mode", "p_success"];
pub const LATENCY_HEADER: [&str; 3] = ["vm_count", "cloud_kind", "latency_ms"];

const SIGNIFICANT_DIGITS: i32 = 9;

/// Fixed decimal rendering with nine significant digits.
pub fn format_real(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    if value == 0.0 {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, 0.0);
    }
    let render = |magnitude: i32| {
        let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).max(0) as usize;
        format!("{value:.decimals$}")
    };
    let magnitude = value.abs().log10().floor() as i32;
    let text = render(magnitude);
    // rounding can carry into a new leading digit, e.g. 9.9999999996 -> 10.0000000
    let rounded: f64 = text.parse().expect("formatted float parses");
    if rounded.abs() >= 10f64.powi(magnitude + 1) {
        render(magnitude + 1)
    } else {
        text
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub run_id: usize,
    pub converged: bool,
    pub iterations: usize,
    pub decision: Decision,
    pub ground_truth: Decision,
    pub x_star_db: f64,
}

impl SummaryRecord {
    /// The record as it will read back from disk: `x_star_db` carries the
    /// written precision.
    pub fn from_summary(s: &RunSummary) -> Self {
        Self {
            run_id: s.run_id,
            converged: s.converged,
            iterations: s.iterations,
            decision: s.decision,
            ground_truth: s.ground_truth,
            x_star_db: format_real(s.x_star_db).parse().expect("formatted float parses"),
        }
    }
}

fn parse_decision(field: &str) -> Result<Decision> {
    Ok(match field {
        "present" => Decision::Present,
        "absent" => Decision::Absent,
        "undecided" => Decision::Undecided,
        other => bail!("unknown decision {other:?}"),
    })
}

pub fn write_summary<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in report.summaries() {
        w.write_record([
            s.run_id.to_string(),
            s.converged.to_string(),
            s.iterations.to_string(),
            s.decision.to_string(),
            s.ground_truth.to_string(),
            format_real(s.x_star_db),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRecord>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(SUMMARY_HEADER) {
        bail!("unexpected summary header {:?}", r.headers()?);
    }
    r.records()
        .enumerate()
        .map(|(line, record)| {
            let record = record?;
            let field = |i: usize| record.get(i).with_context(|| format!("row {line}: missing column {i}"));
            Ok(SummaryRecord {
                run_id: field(0)?.parse()?,
                converged: field(1)?.parse()?,
                iterations: field(2)?.parse()?,
                decision: parse_decision(field(3)?)?,
                ground_truth: parse_decision(field(4)?)?,
                x_star_db: field(5)?.parse()?,
            })
        })
        .collect()
}

/// `min_trust_toward_node` is the lowest trust any honest neighbour holds in
/// the node at that iteration, blank when the node has no honest neighbour.
pub fn write_trace<W: Write>(report: &ExperimentReport, topology: &Topology, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for rep in &report.repetitions {
        let run = &rep.run;
        let n = run.node_count();
        let honest = run.honest_nodes();
        for k in 0..=run.iterations_used {
            let trust = &run.trust_trace[k];
            for node in 0..n {
                let role = if run.is_attacker(node) { "attacker" } else { "honest" };
                let min_trust = honest
                    .iter()
                    .filter(|&&i| topology.is_adjacent(i, node))
                    .map(|&i| trust.trust(i, node))
                    .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
                w.write_record([
                    rep.summary.run_id.to_string(),
                    k.to_string(),
                    node.to_string(),
                    role.to_string(),
                    format_real(run.trace[k][node]),
                    format_real(run.reported[k][node]),
                    min_trust.map(format_real).unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_availability<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AVAILABILITY_HEADER)?;
    for point in &report.availability {
        for mode in [SensingMode::Traditional, SensingMode::Ssaas] {
            w.write_record([format_real(point.p_av), mode.as_str().to_string(), format_real(point.value(mode))])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_latency<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LATENCY_HEADER)?;
    for point in &report.latency {
        for kind in [CloudKind::Local, CloudKind::Conventional] {
            w.write_record([point.n_vms.to_string(), kind.as_str().to_string(), format_real(point.value(kind))])?;
        }
    }
    w.flush()?;
    Ok(())
}
