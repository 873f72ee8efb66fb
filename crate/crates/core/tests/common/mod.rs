#![allow(dead_code)]

use ringcurve::dgp::{generate, DgpSpec};
use ringcurve::{first_differences, resolve_records, Metric, PanelDiff, Point, Record};

pub fn records(spec: &DgpSpec) -> Vec<Record> {
    let obs = generate(spec).unwrap();
    resolve_records(&obs, Some(Point::new(0.0, 0.0)), Metric::Euclidean).unwrap()
}

pub fn diffs(spec: &DgpSpec) -> Vec<PanelDiff> {
    first_differences(&records(spec)).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}
