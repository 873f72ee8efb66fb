//! Ring difference-in-differences and partitioned treatment-effect curves
//! for interventions located at a point in space.
//!
//! The estimators take unit-level outcomes observed before and after the
//! intervention, together with each unit's distance to the treatment site.
//! [`ring`] compares a treated ring with a control ring; [`curve`] splits the
//! distance range into quantile bins and measures each bin against the
//! outermost one. [`dgp`] and [`mc`] simulate data with known answers.

pub mod cli;
pub mod curve;
pub mod data;
pub mod dgp;
pub mod error;
pub mod io;
pub mod mc;
pub mod quad;
pub mod ring;
pub mod stats;

pub use curve::{
    aggregate_ate, build_partition, select_bins, tail_zero_check, tau_curve_panel, tau_curve_rc,
    AteEstimate, BinChoice, Cutoff, Partition, TailCheck, TauCurve, DEFAULT_TAIL_FRACTION,
};
pub use data::{
    compute_distances, empirical_quantile, first_differences, resolve_records, DistanceSample,
    Location, Metric, Observation, PanelDiff, Period, Point, Record,
};
pub use error::{Error, Result};
pub use ring::{ring_estimate_panel, ring_estimate_rc, Design, RingEstimate, RingSpec};
