//! Domain types shared by every estimator: observations, distances to the
//! treatment point, the empirical distance distribution, first differences
//! and the `Dist <= d_c` subsample.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A location. For the great-circle metric `x` is longitude and `y` is
/// latitude, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    fn validate(&self, metric: Metric) -> std::result::Result<(), String> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(format!("non-finite coordinates ({}, {})", self.x, self.y));
        }
        if metric == Metric::GreatCircle
            && (!(-180.0..=180.0).contains(&self.x) || !(-90.0..=90.0).contains(&self.y))
        {
            return Err(format!(
                "({}, {}) is not a valid longitude/latitude pair",
                self.x, self.y
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Haversine distance in kilometers.
    #[value(name = "greatcircle", alias = "great_circle")]
    GreatCircle,
}

impl Metric {
    pub fn distance(self, a: Point, b: Point) -> f64 {
        match self {
            Metric::Euclidean => (a.x - b.x).hypot(a.y - b.y),
            Metric::GreatCircle => haversine_km(a, b),
        }
    }
}

/// Great-circle distance between two (longitude, latitude) points.
pub fn haversine_km(a: Point, b: Point) -> f64 {
    let (lat1, lat2) = (a.y.to_radians(), b.y.to_radians());
    let dlat = (b.y - a.y).to_radians();
    let dlon = (b.x - a.x).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Survey period: 0 is before treatment, 1 after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Period {
    Pre,
    Post,
}

impl Period {
    pub fn index(self) -> usize {
        match self {
            Period::Pre => 0,
            Period::Post => 1,
        }
    }
}

impl From<Period> for u8 {
    fn from(p: Period) -> u8 {
        p.index() as u8
    }
}

impl TryFrom<u8> for Period {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Period::Pre),
            1 => Ok(Period::Post),
            other => Err(format!("period must be 0 or 1, got {other}")),
        }
    }
}

/// Where a unit sits: raw coordinates, or a distance computed upstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Location {
    Coords(Point),
    Distance(f64),
}

/// One unit-period record as read from the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub unit_id: String,
    pub location: Location,
    pub period: Period,
    pub outcome: f64,
}

/// An observation whose distance to the treatment point is resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub unit_id: String,
    pub distance: f64,
    pub period: Period,
    pub outcome: f64,
}

/// First-differenced outcome of one panel unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDiff {
    pub unit_id: String,
    pub distance: f64,
    pub delta_y: f64,
}

/// Anything located at a distance from the treatment point.
pub trait Distanced {
    fn distance(&self) -> f64;
}

impl Distanced for Record {
    fn distance(&self) -> f64 {
        self.distance
    }
}

impl Distanced for PanelDiff {
    fn distance(&self) -> f64 {
        self.distance
    }
}

impl Distanced for f64 {
    fn distance(&self) -> f64 {
        *self
    }
}

/// Distances with their order statistics. The empirical distribution
/// `F_n` puts mass `1/n` on each entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSample {
    unit_ids: Vec<String>,
    distances: Vec<f64>,
    sorted_index: Vec<usize>,
}

impl DistanceSample {
    /// Builds a sample from bare distances; unit ids are the positions.
    pub fn new(distances: Vec<f64>) -> Result<Self> {
        let ids = (0..distances.len()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, distances)
    }

    pub fn with_ids(unit_ids: Vec<String>, distances: Vec<f64>) -> Result<Self> {
        if unit_ids.len() != distances.len() {
            return Err(Error::InputSchema(format!(
                "{} unit ids for {} distances",
                unit_ids.len(),
                distances.len()
            )));
        }
        if let Some((i, d)) = distances
            .iter()
            .enumerate()
            .find(|(_, d)| !d.is_finite() || **d < 0.0)
        {
            return Err(Error::InputSchema(format!(
                "distance for unit `{}` must be finite and nonnegative, got {d}",
                unit_ids[i]
            )));
        }
        let mut sorted_index: Vec<usize> = (0..distances.len()).collect();
        sorted_index.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
        Ok(DistanceSample {
            unit_ids,
            distances,
            sorted_index,
        })
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn sorted_index(&self) -> &[usize] {
        &self.sorted_index
    }

    /// The `k`-th smallest distance, 1-based.
    pub fn order_statistic(&self, k: usize) -> f64 {
        self.distances[self.sorted_index[k - 1]]
    }

    pub fn min(&self) -> Option<f64> {
        self.sorted_index.first().map(|&i| self.distances[i])
    }

    pub fn max(&self) -> Option<f64> {
        self.sorted_index.last().map(|&i| self.distances[i])
    }

    /// Type-1 quantile at probability `j / parts`, computed in integer
    /// arithmetic so that bin edges never suffer rounding in `n * p`.
    pub(crate) fn quantile_fraction(&self, j: usize, parts: usize) -> f64 {
        let n = self.len();
        let k = (n * j).div_ceil(parts).max(1);
        self.order_statistic(k)
    }
}

/// Per-unit distances to `treatment`, one entry per distinct unit in order
/// of first appearance.
pub fn compute_distances(
    observations: &[Observation],
    treatment: Point,
    metric: Metric,
) -> Result<DistanceSample> {
    treatment
        .validate(metric)
        .map_err(|m| Error::InvalidSpec(format!("treatment point: {m}")))?;
    let mut seen: HashMap<&str, Point> = HashMap::new();
    let mut ids = Vec::new();
    let mut distances = Vec::new();
    for obs in observations {
        let point = match obs.location {
            Location::Coords(p) => p,
            Location::Distance(_) => {
                return Err(Error::InputSchema(format!(
                    "unit `{}` has no coordinates",
                    obs.unit_id
                )))
            }
        };
        point
            .validate(metric)
            .map_err(|m| Error::InputSchema(format!("unit `{}`: {m}", obs.unit_id)))?;
        match seen.get(obs.unit_id.as_str()) {
            Some(prev) if *prev != point => {
                return Err(Error::DataConsistency(format!(
                    "unit `{}` has conflicting locations ({}, {}) and ({}, {})",
                    obs.unit_id, prev.x, prev.y, point.x, point.y
                )))
            }
            Some(_) => {}
            None => {
                seen.insert(&obs.unit_id, point);
                ids.push(obs.unit_id.clone());
                distances.push(metric.distance(point, treatment));
            }
        }
    }
    DistanceSample::with_ids(ids, distances)
}

/// Resolves every observation to a distance. Precomputed distances are
/// used as-is; coordinates need a treatment point. A unit must sit at the
/// same location in every row.
pub fn resolve_records(
    observations: &[Observation],
    treatment: Option<Point>,
    metric: Metric,
) -> Result<Vec<Record>> {
    if let Some(t) = treatment {
        t.validate(metric)
            .map_err(|m| Error::InvalidSpec(format!("treatment point: {m}")))?;
    }
    let mut seen: HashMap<&str, Location> = HashMap::new();
    let mut out = Vec::with_capacity(observations.len());
    for obs in observations {
        if !obs.outcome.is_finite() {
            return Err(Error::InputSchema(format!(
                "unit `{}` has a non-finite outcome",
                obs.unit_id
            )));
        }
        if let Some(prev) = seen.insert(&obs.unit_id, obs.location) {
            if prev != obs.location {
                return Err(Error::DataConsistency(format!(
                    "unit `{}` has conflicting locations {:?} and {:?}",
                    obs.unit_id, prev, obs.location
                )));
            }
        }
        let distance = match obs.location {
            Location::Distance(d) => {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InputSchema(format!(
                        "unit `{}` has invalid distance {d}",
                        obs.unit_id
                    )));
                }
                d
            }
            Location::Coords(p) => {
                let t = treatment.ok_or_else(|| {
                    Error::InputSchema(
                        "coordinates given but no treatment point to measure from".into(),
                    )
                })?;
                p.validate(metric)
                    .map_err(|m| Error::InputSchema(format!("unit `{}`: {m}", obs.unit_id)))?;
                metric.distance(p, t)
            }
        };
        out.push(Record {
            unit_id: obs.unit_id.clone(),
            distance,
            period: obs.period,
            outcome: obs.outcome,
        });
    }
    Ok(out)
}

/// Smallest observed distance `x` with `F_n(x) >= p`; `p = 0` gives the
/// minimum.
pub fn empirical_quantile(sample: &DistanceSample, p: f64) -> Result<f64> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptyInput("distance sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidSpec(format!(
            "quantile level {p} outside [0, 1]"
        )));
    }
    let x = p * n as f64;
    let rounded = x.round();
    let k = if (x - rounded).abs() <= 1e-9 * x.max(1.0) {
        rounded
    } else {
        x.ceil()
    };
    Ok(sample.order_statistic((k as usize).clamp(1, n)))
}

/// `Y_1 - Y_0` per unit, in order of first appearance. Every unit needs
/// exactly one record in each period.
pub fn first_differences(records: &[Record]) -> Result<Vec<PanelDiff>> {
    struct Slot<'a> {
        id: &'a str,
        distance: f64,
        outcome: [Option<f64>; 2],
        duplicated: bool,
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut slots: Vec<Slot> = Vec::new();
    for r in records {
        let i = *index.entry(&r.unit_id).or_insert_with(|| {
            slots.push(Slot {
                id: &r.unit_id,
                distance: r.distance,
                outcome: [None, None],
                duplicated: false,
            });
            slots.len() - 1
        });
        let slot = &mut slots[i];
        if slot.distance != r.distance {
            return Err(Error::DataConsistency(format!(
                "unit `{}` has distances {} and {}",
                r.unit_id, slot.distance, r.distance
            )));
        }
        let cell = &mut slot.outcome[r.period.index()];
        if cell.is_some() {
            slot.duplicated = true;
        }
        *cell = Some(r.outcome);
    }
    let bad: Vec<String> = slots
        .iter()
        .filter(|s| s.duplicated || s.outcome.iter().any(Option::is_none))
        .map(|s| s.id.to_string())
        .collect();
    if !bad.is_empty() {
        return Err(Error::UnbalancedPanel(bad));
    }
    Ok(slots
        .into_iter()
        .map(|s| PanelDiff {
            unit_id: s.id.to_string(),
            distance: s.distance,
            delta_y: s.outcome[1].unwrap() - s.outcome[0].unwrap(),
        })
        .collect())
}

/// Result of restricting to units with `Dist <= d_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample<T> {
    pub kept: Vec<T>,
    pub dropped: usize,
}

pub fn subsample_within<T: Distanced + Clone>(items: &[T], d_c: f64) -> Result<Subsample<T>> {
    if !(d_c > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "d_c must be positive, got {d_c}"
        )));
    }
    let kept: Vec<T> = items
        .iter()
        .filter(|it| it.distance() <= d_c)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySubsample { d_c });
    }
    let dropped = items.len() - kept.len();
    Ok(Subsample { kept, dropped })
}
