//! Step logs and run summaries.
//!
//! Step logs are CSV with a fixed column order; summaries are versioned
//! JSON. Float formatting is fixed-precision so identical runs produce
//! byte-identical files.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::foraging::CollectionRecord;

pub const STEP_CSV_HEADER: &str = "t,coverage_fraction,min_sinr_db,connected,modes,events";
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub t: f64,
    pub coverage: f64,
    /// Minimum follower SINR in dB; infinite when unbounded (no interference
    /// and zero noise) or when the scenario has no SINR links.
    pub min_sinr_db: f64,
    pub connected: bool,
    /// Per-agent mode codes joined with '|'.
    pub modes: String,
    /// Step events joined with ';'.
    pub events: String,
}

impl StepRow {
    fn to_csv(&self) -> String {
        format!(
            "{:.6},{:.6},{},{},{},{}",
            self.t,
            self.coverage,
            format_db(self.min_sinr_db),
            self.connected,
            self.modes,
            self.events
        )
    }
}

fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

fn parse_db(s: &str) -> Result<f64, SimError> {
    if s == "inf" {
        Ok(f64::INFINITY)
    } else {
        s.parse().map_err(|_| SimError::config(format!("bad SINR field: {s}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub duration: f64,
    pub steps: u64,
    pub coverage_final: f64,
    pub connected_fraction: f64,
    /// Fraction of steps whose deterministic min follower SINR met the
    /// threshold; absent when the scenario has no SINR links.
    pub sinr_ok_fraction: Option<f64>,
    /// Lowest finite min-SINR in dB seen over the run; absent when every
    /// step was unbounded or the scenario has no links.
    pub min_sinr_db_overall: Option<f64>,
    pub sinr_violation_steps: u64,
    pub infeasible_link_steps: u64,
    /// Sensor-captures-adversary time.
    pub adversary_capture_time: Option<f64>,
    /// Adversary-captures-manipulator time (terminal).
    pub manipulator_lost_time: Option<f64>,
    pub manipulation_success_time: Option<f64>,
    pub tags_collected: u64,
    pub tags_per_hour: Option<f64>,
    /// Total relay kinetic energy (unit mass) at the final step.
    pub final_kinetic_energy: Option<f64>,
    pub terminal: String,
}

impl Summary {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            schema_version: SUMMARY_SCHEMA_VERSION,
            scenario: scenario.to_string(),
            seed,
            duration: 0.0,
            steps: 0,
            coverage_final: 0.0,
            connected_fraction: 0.0,
            sinr_ok_fraction: None,
            min_sinr_db_overall: None,
            sinr_violation_steps: 0,
            infeasible_link_steps: 0,
            adversary_capture_time: None,
            manipulator_lost_time: None,
            manipulation_success_time: None,
            tags_collected: 0,
            tags_per_hour: None,
            final_kinetic_energy: None,
            terminal: "duration".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricsLog {
    pub rows: Vec<StepRow>,
    pub summary: Summary,
    pub tag_events: Vec<CollectionRecord>,
}

impl MetricsLog {
    pub fn to_step_csv(&self) -> String {
        let mut out = String::from(STEP_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
        out
    }

    pub fn to_summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn to_tag_csv(&self) -> String {
        let mut out = String::from("time_s,robot_id,tag_id,cluster_id\n");
        for e in &self.tag_events {
            out.push_str(&format!("{:.6},{},{},{}\n", e.time, e.robot, e.tag, e.cluster));
        }
        out
    }

    pub fn write_step_csv<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        w.write_all(self.to_step_csv().as_bytes())?;
        Ok(())
    }

    /// Parse a step CSV produced by `to_step_csv`.
    pub fn parse_step_csv(text: &str) -> Result<Vec<StepRow>, SimError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == STEP_CSV_HEADER => {}
            other => {
                return Err(SimError::config(format!(
                    "unexpected step CSV header: {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(6, ',').collect();
            if fields.len() != 6 {
                return Err(SimError::config(format!("row {i}: expected 6 fields")));
            }
            rows.push(StepRow {
                t: fields[0]
                    .parse()
                    .map_err(|_| SimError::config(format!("row {i}: bad t")))?,
                coverage: fields[1]
                    .parse()
                    .map_err(|_| SimError::config(format!("row {i}: bad coverage")))?,
                min_sinr_db: parse_db(fields[2])?,
                connected: fields[3]
                    .parse()
                    .map_err(|_| SimError::config(format!("row {i}: bad connected")))?,
                modes: fields[4].to_string(),
                events: fields[5].to_string(),
            });
        }
        Ok(rows)
    }

    /// Recompute the row-level aggregates of a parsed step log.
    pub fn summarize_rows(rows: &[StepRow]) -> RowAggregates {
        let n = rows.len().max(1) as f64;
        let connected = rows.iter().filter(|r| r.connected).count() as f64 / n;
        let coverage_final = rows.last().map(|r| r.coverage).unwrap_or(0.0);
        let min_sinr = rows
            .iter()
            .map(|r| r.min_sinr_db)
            .filter(|v| v.is_finite())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        RowAggregates {
            rows: rows.len() as u64,
            connected_fraction: connected,
            coverage_final,
            min_sinr_db_overall: min_sinr,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RowAggregates {
    pub rows: u64,
    pub connected_fraction: f64,
    pub coverage_final: f64,
    pub min_sinr_db_overall: Option<f64>,
}
