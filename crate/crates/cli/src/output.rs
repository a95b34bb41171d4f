//! CSV files consumed by the plotting scripts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back recovers every value bit for bit. Empty cells mark agents that
//! have dropped out and a missing Lyapunov value.

use std::io::{Read, Write};

use fence_core::simulator::{MetricsReport, TrajectoryLog};

use crate::CliError;

const AGENT_FIELDS: [&str; 8] = ["x", "y", "vx", "vy", "ex", "ey", "zx", "zy"];
const TAIL_FIELDS: [&str; 9] = ["xd", "yd", "vdx", "vdy", "ebar_x", "ebar_y", "hull_dist", "min_dist", "v1"];

pub const METRICS_HEADER: [&str; 7] = [
    "controller",
    "fencing_converged_at",
    "velocity_converged_at",
    "min_distance_overall",
    "collision",
    "hull_contains_target_from",
    "peak_pairwise_oscillation",
];

pub const COMPARISON_HEADER: [&str; 4] = [
    "label_free_oscillation",
    "label_fixed_oscillation",
    "oscillation_ratio",
    "convergence_time_difference",
];

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Header of a trajectory file for `n` agents; agent labels start at 1.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        h.extend(AGENT_FIELDS.iter().map(|f| format!("{f}{i}")));
    }
    h.extend(TAIL_FIELDS.iter().map(|f| f.to_string()));
    h
}

pub fn write_trajectory<W: Write>(w: W, log: &TrajectoryLog) -> Result<(), CliError> {
    let n = log.snapshots.first().map_or(0, |s| s.agents.len());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(trajectory_header(n)).map_err(csv_err)?;
    for (t, s) in log.iter() {
        let mut row = vec![t.to_string()];
        for a in &s.agents {
            match a {
                Some(a) => row.extend(a.to_array().iter().map(f64::to_string)),
                None => row.extend(std::iter::repeat_n(String::new(), AGENT_FIELDS.len())),
            }
        }
        let tg = s.target;
        row.extend(
            [tg.x_d.x, tg.x_d.y, tg.v_d.x, tg.v_d.y, s.fencing_error.x, s.fencing_error.y, s.hull_distance, s.min_pairwise_distance]
                .iter()
                .map(f64::to_string),
        );
        row.push(cell(s.lyapunov_v1));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// A trajectory file read back as numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl TrajectoryTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn agent_count(&self) -> usize {
        (self.header.len() - 1 - TAIL_FIELDS.len()) / AGENT_FIELDS.len()
    }
}

pub fn read_trajectory<R: Read>(r: R) -> Result<TrajectoryTable, CliError> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let n = header.len().saturating_sub(1 + TAIL_FIELDS.len()) / AGENT_FIELDS.len();
    if header != trajectory_header(n) {
        return Err(CliError::Parse { line: 1, message: "trajectory header does not match the schema".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|e| CliError::Parse { line: i + 2, message: format!("{c:?}: {e}") })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(TrajectoryTable { header, rows })
}

pub fn write_metrics<W: Write>(w: W, rows: &[(&str, MetricsReport)]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER).map_err(csv_err)?;
    for (name, m) in rows {
        out.write_record([
            name.to_string(),
            cell(m.fencing_converged_at),
            cell(m.velocity_converged_at),
            m.min_distance_overall.to_string(),
            m.collision.to_string(),
            cell(m.hull_contains_target_from),
            m.peak_pairwise_oscillation.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_comparison<W: Write>(
    w: W,
    free: Option<&MetricsReport>,
    fixed: Option<&MetricsReport>,
    ratio: Option<f64>,
    time_difference: Option<f64>,
) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COMPARISON_HEADER).map_err(csv_err)?;
    out.write_record([
        cell(free.map(|m| m.peak_pairwise_oscillation)),
        cell(fixed.map(|m| m.peak_pairwise_oscillation)),
        cell(ratio),
        cell(time_difference),
    ])
    .map_err(csv_err)?;
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}
