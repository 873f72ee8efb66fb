//! Two-ring difference-in-differences.
//!
//! Units within `d_t` of the treatment point form the treated ring, units in
//! `(d_t, d_c]` the control ring, and everything beyond `d_c` is dropped.
//! With panel data the estimate is the difference of ring means of the first
//! differences, which is the OLS slope of `dY` on a treated-ring indicator.
//! With repeated cross-sections it is the double difference of the four
//! ring-by-period cell means.

use serde::{Deserialize, Serialize};

use crate::data::{PanelDiff, Period, Record};
use crate::error::{Error, Result};
use crate::stats::GroupStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    d_t: f64,
    d_c: f64,
}

impl RingSpec {
    pub fn new(d_t: f64, d_c: f64) -> Result<Self> {
        if !(d_t.is_finite() && d_c.is_finite() && d_t > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "ring distances must be finite with d_t > 0, got d_t = {d_t}, d_c = {d_c}"
            )));
        }
        if d_t >= d_c {
            return Err(Error::InvalidSpec("d_t must be < d_c".into()));
        }
        Ok(RingSpec { d_t, d_c })
    }

    pub fn d_t(&self) -> f64 {
        self.d_t
    }

    pub fn d_c(&self) -> f64 {
        self.d_c
    }

    /// Treated is `[0, d_t]`, control is `(d_t, d_c]`.
    pub fn classify(&self, distance: f64) -> Option<Ring> {
        if distance <= self.d_t {
            Some(Ring::Treated)
        } else if distance <= self.d_c {
            Some(Ring::Control)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ring {
    Treated,
    Control,
}

impl Ring {
    pub fn name(self) -> &'static str {
        match self {
            Ring::Treated => "treated",
            Ring::Control => "control",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Design {
    #[serde(rename = "panel")]
    #[value(name = "panel")]
    Panel,
    #[serde(rename = "rc")]
    #[value(name = "rc")]
    RepeatedCrossSection,
}

/// Summary of one ring (panel) or one ring-by-period cell (cross-sections).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub ring: Ring,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<Period>,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingEstimate {
    pub design: Design,
    pub rings: RingSpec,
    /// Difference-in-differences coefficient.
    pub beta1: f64,
    /// Heteroskedasticity-robust standard error.
    pub se: f64,
    pub n_treated: usize,
    pub n_control: usize,
    /// Units or observations beyond `d_c`.
    pub dropped: usize,
    /// Panel: control then treated ring. Cross-sections: control/pre,
    /// control/post, treated/pre, treated/post.
    pub group_means: Vec<CellMean>,
}

impl RingEstimate {
    /// Intercept of the indicator regression, i.e. the control-cell mean
    /// (pre-period control mean for cross-sections).
    pub fn beta0(&self) -> f64 {
        self.group_means[0].mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingOptions {
    /// Smallest admissible ring or cell size. Must be at least 2.
    pub min_cell: usize,
}

impl Default for RingOptions {
    fn default() -> Self {
        RingOptions { min_cell: 2 }
    }
}

pub fn ring_estimate_panel(diffs: &[PanelDiff], rings: RingSpec) -> Result<RingEstimate> {
    ring_estimate_panel_with(diffs, rings, RingOptions::default())
}

pub fn ring_estimate_panel_with(
    diffs: &[PanelDiff],
    rings: RingSpec,
    opts: RingOptions,
) -> Result<RingEstimate> {
    let required = opts.min_cell.max(2);
    let mut treated = Vec::new();
    let mut control = Vec::new();
    let mut dropped = 0;
    for d in diffs {
        match rings.classify(d.distance) {
            Some(Ring::Treated) => treated.push(d.delta_y),
            Some(Ring::Control) => control.push(d.delta_y),
            None => dropped += 1,
        }
    }
    for (ring, values) in [(Ring::Treated, &treated), (Ring::Control, &control)] {
        if values.len() < required {
            return Err(Error::DegenerateRing {
                ring: ring.name(),
                count: values.len(),
                required,
            });
        }
    }
    let t = GroupStats::from_values(&treated);
    let c = GroupStats::from_values(&control);
    Ok(RingEstimate {
        design: Design::Panel,
        rings,
        beta1: t.mean - c.mean,
        se: (t.mean_var() + c.mean_var()).sqrt(),
        n_treated: t.n,
        n_control: c.n,
        dropped,
        group_means: vec![cell(Ring::Control, None, c), cell(Ring::Treated, None, t)],
    })
}

pub fn ring_estimate_rc(records: &[Record], rings: RingSpec) -> Result<RingEstimate> {
    ring_estimate_rc_with(records, rings, RingOptions::default())
}

pub fn ring_estimate_rc_with(
    records: &[Record],
    rings: RingSpec,
    opts: RingOptions,
) -> Result<RingEstimate> {
    let required = opts.min_cell.max(2);
    // [control pre, control post, treated pre, treated post]
    let mut cells: [Vec<f64>; 4] = Default::default();
    let mut dropped = 0;
    for r in records {
        let slot = match rings.classify(r.distance) {
            Some(Ring::Control) => 0,
            Some(Ring::Treated) => 2,
            None => {
                dropped += 1;
                continue;
            }
        };
        cells[slot + r.period.index()].push(r.outcome);
    }
    let layout = [
        (Ring::Control, Period::Pre),
        (Ring::Control, Period::Post),
        (Ring::Treated, Period::Pre),
        (Ring::Treated, Period::Post),
    ];
    for ((ring, period), values) in layout.iter().zip(&cells) {
        if values.len() < required {
            return Err(Error::DegenerateCell {
                cell: format!("{} ring, period {}", ring.name(), period.index()),
                count: values.len(),
                required,
            });
        }
    }
    let stats: Vec<GroupStats> = cells.iter().map(|v| GroupStats::from_values(v)).collect();
    let beta1 = (stats[3].mean - stats[2].mean) - (stats[1].mean - stats[0].mean);
    let se = stats.iter().map(GroupStats::mean_var).sum::<f64>().sqrt();
    Ok(RingEstimate {
        design: Design::RepeatedCrossSection,
        rings,
        beta1,
        se,
        n_treated: stats[2].n + stats[3].n,
        n_control: stats[0].n + stats[1].n,
        dropped,
        group_means: layout
            .iter()
            .zip(stats)
            .map(|(&(ring, period), s)| cell(ring, Some(period), s))
            .collect(),
    })
}

fn cell(ring: Ring, period: Option<Period>, s: GroupStats) -> CellMean {
    CellMean {
        ring,
        period,
        n: s.n,
        mean: s.mean,
        variance: s.variance,
    }
}
