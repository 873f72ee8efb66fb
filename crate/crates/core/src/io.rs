//! File formats: the input dataset CSV, the plot-ready curve CSV, simulated
//! datasets, Monte Carlo replication tables and the JSON report envelope.
//!
//! Input columns: `unit_id`, `period` (0 or 1), `outcome`, and either `dist`
//! or both `x` and `y`. When a row carries both, the distance wins.
//! Numbers are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::curve::TauCurve;
use crate::data::{Location, Observation, Period, Point};
use crate::error::{Error, Result, RowError};
use crate::mc::Replication;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// How the input locates units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationMode {
    Distance,
    Coordinates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    pub mode: LocationMode,
    pub warnings: Vec<String>,
    /// SHA-256 of the raw file bytes, hex encoded.
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn ingest(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    ingest_bytes(&bytes)
}

pub fn ingest_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (id_col, period_col, outcome_col) = match (col("unit_id"), col("period"), col("outcome")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::InputSchema(
                "header must contain unit_id, period and outcome".into(),
            ))
        }
    };
    let (x_col, y_col, dist_col) = (col("x"), col("y"), col("dist"));
    if x_col.is_some() != y_col.is_some() {
        return Err(Error::InputSchema(
            "columns x and y must appear together".into(),
        ));
    }
    if x_col.is_none() && dist_col.is_none() {
        return Err(Error::InputSchema(
            "need a dist column or x and y columns".into(),
        ));
    }

    struct Row {
        line: usize,
        unit_id: String,
        period: Period,
        outcome: f64,
        point: Option<Point>,
        dist: Option<f64>,
    }
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                errors.push(RowError {
                    line,
                    column: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |i: Option<usize>| i.and_then(|i| record.get(i)).filter(|s| !s.is_empty());
        let mut problems: Vec<(&str, String)> = Vec::new();
        let number = |name: &'static str, i: Option<usize>, problems: &mut Vec<(&str, String)>| {
            cell(i).and_then(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    problems.push((name, format!("{name} `{s}` is not a finite number")));
                    None
                }
            })
        };

        let unit_id = cell(Some(id_col)).unwrap_or_default().to_string();
        if unit_id.is_empty() {
            problems.push(("unit_id", "missing unit id".into()));
        }
        let period = match cell(Some(period_col)) {
            Some("0") => Some(Period::Pre),
            Some("1") => Some(Period::Post),
            Some(other) => {
                problems.push(("period", format!("period must be 0 or 1, got `{other}`")));
                None
            }
            None => {
                problems.push(("period", "missing period".into()));
                None
            }
        };
        let outcome = number("outcome", Some(outcome_col), &mut problems);
        if outcome.is_none() && cell(Some(outcome_col)).is_none() {
            problems.push(("outcome", "missing outcome".into()));
        }
        let x = number("x", x_col, &mut problems);
        let y = number("y", y_col, &mut problems);
        let dist = number("dist", dist_col, &mut problems);
        if let Some(d) = dist.filter(|d| *d < 0.0) {
            problems.push(("dist", format!("distance must be nonnegative, got {d}")));
        }
        let point = match (x, y) {
            (Some(x), Some(y)) => Some(Point::new(x, y)),
            (None, None) => None,
            _ => {
                problems.push(("x", "x and y must both be present or both empty".into()));
                None
            }
        };
        if point.is_none() && dist.is_none() && problems.is_empty() {
            problems.push(("dist", "row has neither a distance nor coordinates".into()));
        }
        if problems.is_empty() {
            rows.push(Row {
                line,
                unit_id,
                period: period.unwrap(),
                outcome: outcome.unwrap(),
                point,
                dist,
            });
        } else {
            errors.extend(problems.into_iter().map(|(column, message)| RowError {
                line,
                column: Some(column.to_string()),
                message,
            }));
        }
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("dataset has no rows"));
    }

    let any_dist = rows.iter().any(|r| r.dist.is_some());
    let mode = if any_dist {
        if let Some(r) = rows.iter().find(|r| r.dist.is_none()) {
            return Err(Error::InputSchema(format!(
                "mixed location modes: line {} has coordinates only while other rows give dist",
                r.line
            )));
        }
        LocationMode::Distance
    } else {
        LocationMode::Coordinates
    };
    let mut warnings = Vec::new();
    let both = rows
        .iter()
        .filter(|r| r.dist.is_some() && r.point.is_some())
        .count();
    if both > 0 {
        let w = format!("{both} row(s) give both dist and x/y; using dist");
        log::warn!("{w}");
        warnings.push(w);
    }
    let observations = rows
        .into_iter()
        .map(|r| Observation {
            unit_id: r.unit_id,
            location: match (r.dist, r.point) {
                (Some(d), _) => Location::Distance(d),
                (None, Some(p)) => Location::Coords(p),
                (None, None) => unreachable!(),
            },
            period: r.period,
            outcome: r.outcome,
        })
        .collect();
    Ok(Dataset {
        observations,
        mode,
        warnings,
        digest: sha256_hex(bytes),
    })
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_dataset<W: Write>(out: W, observations: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit_id", "x", "y", "dist", "period", "outcome"])?;
    for o in observations {
        let (x, y, d) = match o.location {
            Location::Coords(p) => (fmt_num(p.x), fmt_num(p.y), String::new()),
            Location::Distance(d) => (String::new(), String::new(), fmt_num(d)),
        };
        w.write_record([
            o.unit_id.as_str(),
            &x,
            &y,
            &d,
            &o.period.index().to_string(),
            &fmt_num(o.outcome),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per bin: `bin, edge_lo, edge_hi, midpoint, tau_hat, se, ci_lo,
/// ci_hi, n_j`.
pub fn write_curve_csv<W: Write>(out: W, curve: &TauCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bin", "edge_lo", "edge_hi", "midpoint", "tau_hat", "se", "ci_lo", "ci_hi", "n_j",
    ])?;
    for b in &curve.bins {
        let (lo, hi) = b.ci();
        w.write_record([
            b.index.to_string(),
            fmt_num(b.edge_lo),
            fmt_num(b.edge_hi),
            fmt_num(b.midpoint),
            fmt_num(b.tau_hat),
            fmt_num(b.se),
            fmt_num(lo),
            fmt_num(hi),
            b.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_replications<W: Write>(out: W, reps: &[Replication]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "replication",
        "seed",
        "target",
        "estimate",
        "se",
        "oracle",
        "covered",
        "error",
    ])?;
    for r in reps {
        if let Some(err) = &r.error {
            w.write_record([
                r.replication.to_string(),
                r.seed.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                err.clone(),
            ])?;
        }
        for v in &r.values {
            w.write_record([
                r.replication.to_string(),
                r.seed.to_string(),
                v.target.clone(),
                fmt_num(v.estimate),
                fmt_num(v.se),
                fmt_num(v.oracle),
                (v.covered as u8).to_string(),
                String::new(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON envelope shared by every command. Everything except `timestamp` is
/// a function of the inputs.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub tool_version: String,
    pub input_digest: Option<String>,
    pub seed: Option<u64>,
    pub config: Value,
    pub estimates: Value,
    pub standard_errors: Value,
    pub diagnostics: Value,
    pub timestamp: String,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            input_digest: None,
            seed: None,
            config: Value::Null,
            estimates: Value::Null,
            standard_errors: Value::Null,
            diagnostics: Value::Null,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_valid_rows() {
        let csv = "unit_id,dist,period,outcome\na,0.1,0,1.5\na,0.1,1,2\nb,0.4,0,3\n";
        let d = ingest_bytes(csv.as_bytes()).unwrap();
        assert_eq!(d.observations.len(), 3);
        assert_eq!(d.mode, LocationMode::Distance);
        assert_eq!(d.observations[1].period, Period::Post);
        assert_eq!(d.observations[2].location, Location::Distance(0.4));
        assert!(d.warnings.is_empty());
        assert_eq!(d.digest.len(), 64);
    }

    #[test]
    fn bad_period_names_line() {
        let csv = "unit_id,dist,period,outcome\na,0.1,0,1\na,0.1,1,2\nb,0.2,0,1\nb,0.2,2,1\n";
        match ingest_bytes(csv.as_bytes()).unwrap_err() {
            Error::Rows(rows) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].line, 5);
                assert_eq!(rows[0].column.as_deref(), Some("period"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn errors_collected_across_rows() {
        let csv = "unit_id,dist,period,outcome\na,x,0,1\n,0.1,1,2\nb,0.2,0,\n";
        let Error::Rows(rows) = ingest_bytes(csv.as_bytes()).unwrap_err() else {
            panic!()
        };
        let lines: Vec<usize> = rows.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![2, 3, 4]);
        let msg = Error::Rows(rows).to_string();
        assert!(msg.contains("line 2, column `dist`"), "{msg}");
    }

    #[test]
    fn distance_wins_over_coordinates() {
        let csv = "unit_id,x,y,dist,period,outcome\na,3,4,1.25,0,1\na,3,4,1.25,1,2\n";
        let d = ingest_bytes(csv.as_bytes()).unwrap();
        assert_eq!(d.observations[0].location, Location::Distance(1.25));
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn mixed_modes_rejected() {
        let csv = "unit_id,x,y,dist,period,outcome\na,,,1.25,0,1\nb,3,4,,1,2\n";
        assert!(matches!(
            ingest_bytes(csv.as_bytes()),
            Err(Error::InputSchema(_))
        ));
    }

    #[test]
    fn coordinate_mode() {
        let csv = "unit_id,x,y,period,outcome\na,3,4,0,1\n";
        let d = ingest_bytes(csv.as_bytes()).unwrap();
        assert_eq!(d.mode, LocationMode::Coordinates);
        assert_eq!(
            d.observations[0].location,
            Location::Coords(Point::new(3.0, 4.0))
        );
    }

    #[test]
    fn header_problems() {
        assert!(ingest_bytes(b"unit_id,period\n").is_err());
        assert!(ingest_bytes(b"unit_id,x,period,outcome\na,1,0,1\n").is_err());
        assert!(ingest_bytes(b"unit_id,period,outcome\na,0,1\n").is_err());
        assert!(matches!(
            ingest_bytes(b"unit_id,dist,period,outcome\n"),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let obs = vec![
            Observation {
                unit_id: "u1".into(),
                location: Location::Distance(0.1 + 0.2),
                period: Period::Pre,
                outcome: 1.0 / 3.0,
            },
            Observation {
                unit_id: "u1".into(),
                location: Location::Distance(0.1 + 0.2),
                period: Period::Post,
                outcome: -2.5e-12,
            },
        ];
        let mut buf = Vec::new();
        write_dataset(&mut buf, &obs).unwrap();
        assert_eq!(ingest_bytes(&buf).unwrap().observations, obs);
    }
}
