//! Treatment-effect curve by quantile-spaced partitioning of distance.
//!
//! The `Dist <= d_c` subsample is cut into `L` bins holding (nearly) equal
//! numbers of units. Within each bin the outcome change is predicted by its
//! mean, and the outermost bin, assumed unaffected, anchors the
//! counterfactual trend: `tau_j = mean_j - mean_L`. Bin `L` is zero by
//! construction.
//!
//! Bin `j` covers `(q_{j-1}, q_j]` with `q_j` the type-1 empirical quantile
//! at `j / L`; the first bin is closed on the left at the sample minimum.
//! Right-closed bins match the treated ring `[0, d_t]`, so a two-bin curve
//! is exactly the two-ring estimate with `d_t` at the median.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{subsample_within, DistanceSample, PanelDiff, Record};
use crate::error::{Error, Result};
use crate::ring::Design;
use crate::stats::{ci_covers, GroupStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    edges: Vec<f64>,
    assignments: Vec<usize>,
    counts: Vec<usize>,
}

impl Partition {
    /// Number of bins `L`.
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// `L + 1` nondecreasing edges from the minimum to the maximum distance.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Zero-based bin of each unit, aligned with the sample.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Zero-based bin that `distance` falls in. Distances outside the sample
    /// range are clamped to the first or last bin.
    pub fn bin_of(&self, distance: f64) -> usize {
        let inner = &self.edges[1..self.edges.len() - 1];
        inner.partition_point(|&e| e < distance)
    }
}

pub fn build_partition(sample: &DistanceSample, bins: usize) -> Result<Partition> {
    if bins < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    let n = sample.len();
    if n < 2 * bins {
        return Err(Error::TooManyBins { bins, n });
    }
    let edges: Vec<f64> = std::iter::once(sample.order_statistic(1))
        .chain((1..=bins).map(|j| sample.quantile_fraction(j, bins)))
        .collect();
    let mut part = Partition {
        edges,
        assignments: Vec::with_capacity(n),
        counts: vec![0; bins],
    };
    for &d in sample.distances() {
        let b = part.bin_of(d);
        part.assignments.push(b);
        part.counts[b] += 1;
    }
    if let Some(j) = part.counts.iter().position(|&c| c == 0) {
        return Err(Error::DegeneratePartition {
            bin: j + 1,
            count: 0,
            bins,
        });
    }
    Ok(part)
}

/// Smallest sample for which a bin count can be chosen automatically.
pub const MIN_AUTO_BINS_N: usize = 20;

/// Automatic bin count for `n` units: `ceil((n/4)^(1/3))`, kept within
/// `[3, n/10]`; when `n/10 < 3` the cap wins, floored at 2.
pub fn select_bins_for(n: usize) -> Result<usize> {
    if n < MIN_AUTO_BINS_N {
        return Err(Error::InsufficientData {
            n,
            required: MIN_AUTO_BINS_N,
        });
    }
    let rate = (n as f64 / 4.0).cbrt().ceil() as usize;
    let cap = n / 10;
    Ok(if cap < 3 {
        cap.max(2)
    } else {
        rate.clamp(3, cap)
    })
}

pub fn select_bins(sample: &DistanceSample) -> Result<usize> {
    select_bins_for(sample.len())
}

/// Per-bin mean and variance of `values`, which must line up with the
/// partition's assignments. Summation follows input order within each bin.
pub fn bin_statistics(values: &[f64], partition: &Partition) -> Result<Vec<GroupStats>> {
    let groups = group_by_bin(values, partition)?;
    groups
        .iter()
        .enumerate()
        .map(|(j, g)| {
            if g.len() < 2 {
                Err(Error::VarianceUndefined {
                    bin: j + 1,
                    count: g.len(),
                })
            } else {
                Ok(GroupStats::from_values(g))
            }
        })
        .collect()
}

fn group_by_bin(values: &[f64], partition: &Partition) -> Result<Vec<Vec<f64>>> {
    if values.len() != partition.assignments.len() {
        return Err(Error::InputSchema(format!(
            "{} values for {} partitioned units",
            values.len(),
            partition.assignments.len()
        )));
    }
    let mut groups: Vec<Vec<f64>> = partition
        .counts
        .iter()
        .map(|&c| Vec::with_capacity(c))
        .collect();
    for (&v, &b) in values.iter().zip(&partition.assignments) {
        groups[b].push(v);
    }
    Ok(groups)
}

/// Number of bins: fixed or chosen from the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinChoice {
    Auto,
    Fixed(usize),
}

impl BinChoice {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            BinChoice::Auto => select_bins_for(n),
            BinChoice::Fixed(l) => Ok(l),
        }
    }
}

impl FromStr for BinChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BinChoice::Auto);
        }
        s.parse::<usize>()
            .map(BinChoice::Fixed)
            .map_err(|_| format!("expected a bin count or `auto`, got `{s}`"))
    }
}

impl fmt::Display for BinChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinChoice::Auto => f.write_str("auto"),
            BinChoice::Fixed(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    /// 1-based bin index.
    pub index: usize,
    pub edge_lo: f64,
    pub edge_hi: f64,
    pub midpoint: f64,
    pub tau_hat: f64,
    /// Standard error of `tau_hat`; zero for the anchor bin.
    pub se: f64,
    /// Standard error of the bin's own mean outcome change.
    pub sigma: f64,
    pub n: usize,
}

impl CurveBin {
    pub fn ci(&self) -> (f64, f64) {
        let half = crate::stats::Z_95 * self.se;
        (self.tau_hat - half, self.tau_hat + half)
    }

    pub fn covers(&self, target: f64) -> bool {
        ci_covers(self.tau_hat, self.se, target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCurve {
    pub design: Design,
    pub d_c: f64,
    pub n_bins: usize,
    pub auto_bins: bool,
    /// Units (panel) or observations (cross-sections) within `d_c`.
    pub n: usize,
    pub dropped: usize,
    /// Mean outcome change in the outermost bin: the counterfactual trend.
    pub lambda_hat: f64,
    pub lambda_se: f64,
    pub bins: Vec<CurveBin>,
}

impl TauCurve {
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.bins.iter().map(|b| b.edge_lo).collect();
        e.extend(self.bins.last().map(|b| b.edge_hi));
        e
    }

    fn assemble(
        design: Design,
        d_c: f64,
        bins: BinChoice,
        dropped: usize,
        partition: &Partition,
        change: &[(f64, f64)],
    ) -> TauCurve {
        let last = partition.bins() - 1;
        let (anchor_mean, anchor_var) = change[last];
        let edges = partition.edges();
        let bins_out = (0..partition.bins())
            .map(|j| {
                let (mean, var) = change[j];
                let (tau_hat, se) = if j == last {
                    (0.0, 0.0)
                } else {
                    (mean - anchor_mean, (var + anchor_var).sqrt())
                };
                CurveBin {
                    index: j + 1,
                    edge_lo: edges[j],
                    edge_hi: edges[j + 1],
                    midpoint: 0.5 * (edges[j] + edges[j + 1]),
                    tau_hat,
                    se,
                    sigma: var.sqrt(),
                    n: partition.counts()[j],
                }
            })
            .collect();
        TauCurve {
            design,
            d_c,
            n_bins: partition.bins(),
            auto_bins: bins == BinChoice::Auto,
            n: partition.assignments().len(),
            dropped,
            lambda_hat: anchor_mean,
            lambda_se: anchor_var.sqrt(),
            bins: bins_out,
        }
    }
}

pub fn tau_curve_panel(diffs: &[PanelDiff], d_c: f64, bins: BinChoice) -> Result<TauCurve> {
    let sub = subsample_within(diffs, d_c)?;
    let sample = DistanceSample::new(sub.kept.iter().map(|d| d.distance).collect())?;
    let l = bins.resolve(sample.len())?;
    let partition = build_partition(&sample, l)?;
    let values: Vec<f64> = sub.kept.iter().map(|d| d.delta_y).collect();
    let change: Vec<(f64, f64)> = bin_statistics(&values, &partition)?
        .iter()
        .map(|s| (s.mean, s.mean_var()))
        .collect();
    Ok(TauCurve::assemble(
        Design::Panel,
        d_c,
        bins,
        sub.dropped,
        &partition,
        &change,
    ))
}

/// Cross-section version: one partition from the pooled distances of both
/// periods, then per-period bin means. `tau_j` is the double difference of
/// four means.
pub fn tau_curve_rc(records: &[Record], d_c: f64, bins: BinChoice) -> Result<TauCurve> {
    let sub = subsample_within(records, d_c)?;
    let sample = DistanceSample::new(sub.kept.iter().map(|r| r.distance).collect())?;
    let l = bins.resolve(sample.len())?;
    let partition = build_partition(&sample, l)?;
    let mut cells: Vec<[Vec<f64>; 2]> = vec![Default::default(); l];
    for (r, &b) in sub.kept.iter().zip(partition.assignments()) {
        cells[b][r.period.index()].push(r.outcome);
    }
    let mut change = Vec::with_capacity(l);
    for (j, periods) in cells.iter().enumerate() {
        for (p, values) in periods.iter().enumerate() {
            if values.len() < 2 {
                return Err(Error::DegenerateCell {
                    cell: format!("bin {}, period {p}", j + 1),
                    count: values.len(),
                    required: 2,
                });
            }
        }
        let pre = GroupStats::from_values(&periods[0]);
        let post = GroupStats::from_values(&periods[1]);
        change.push((post.mean - pre.mean, post.mean_var() + pre.mean_var()));
    }
    Ok(TauCurve::assemble(
        Design::RepeatedCrossSection,
        d_c,
        bins,
        sub.dropped,
        &partition,
        &change,
    ))
}

/// Which bins count as affected when averaging the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    /// Bins whose upper edge is at most this distance.
    Distance(f64),
    /// Bins before the first two consecutive bins whose 95% intervals
    /// contain zero. A heuristic, reported as such.
    Auto,
}

impl FromStr for Cutoff {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Cutoff::Auto);
        }
        match s.parse::<f64>() {
            Ok(d) if d.is_finite() && d > 0.0 => Ok(Cutoff::Distance(d)),
            _ => Err(format!("expected a positive distance or `auto`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub tau_bar: f64,
    pub se: f64,
    /// 1-based indices of the bins averaged.
    pub bins_used: Vec<usize>,
    /// Upper edge of the last bin averaged.
    pub affected_upto: f64,
    pub cutoff_mode: String,
}

/// Count-weighted average of `tau_j` over the affected bins. The standard
/// error treats bin means as independent and accounts for every `tau_j`
/// sharing the anchor mean.
pub fn aggregate_ate(curve: &TauCurve, cutoff: Cutoff) -> Result<AteEstimate> {
    let l = curve.bins.len();
    if l < 3 {
        return Err(Error::InvalidSpec(format!(
            "averaging needs at least 3 bins, curve has {l}"
        )));
    }
    let (used, mode): (Vec<usize>, &str) = match cutoff {
        Cutoff::Distance(d) => (
            (0..l).filter(|&j| curve.bins[j].edge_hi <= d).collect(),
            "fixed",
        ),
        Cutoff::Auto => {
            let covers: Vec<bool> = curve.bins.iter().map(|b| b.covers(0.0)).collect();
            let stop = (0..l - 1)
                .find(|&j| covers[j] && covers[j + 1])
                .unwrap_or(l - 1);
            ((0..stop).collect(), "auto_heuristic")
        }
    };
    if used.is_empty() {
        return Err(Error::NoAffectedBins(match cutoff {
            Cutoff::Distance(d) => format!("no bin ends at or before {d}"),
            Cutoff::Auto => "the first bins are indistinguishable from zero".into(),
        }));
    }
    let anchor = l - 1;
    let total: f64 = used.iter().map(|&j| curve.bins[j].n as f64).sum();
    let mut tau_bar = 0.0;
    let mut var = 0.0;
    let mut anchor_weight = 0.0;
    for &j in &used {
        let b = &curve.bins[j];
        let w = b.n as f64 / total;
        tau_bar += w * b.tau_hat;
        if j != anchor {
            var += w * w * b.sigma * b.sigma;
            anchor_weight += w;
        }
    }
    var += anchor_weight * anchor_weight * curve.lambda_se * curve.lambda_se;
    Ok(AteEstimate {
        tau_bar,
        se: var.sqrt(),
        affected_upto: curve.bins[*used.last().unwrap()].edge_hi,
        bins_used: used.iter().map(|j| j + 1).collect(),
        cutoff_mode: mode.to_string(),
    })
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.3;
/// Share of tail bins whose intervals must contain zero.
pub const TAIL_PASS_SHARE: f64 = 0.8;

/// Informal look at whether the far end of the curve sits at zero, as it
/// should when trends are common within `d_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub tail_fraction: f64,
    pub tail_bins: Vec<usize>,
    pub tail_mean: f64,
    pub covered_fraction: f64,
    pub pass: bool,
    pub informal: bool,
}

pub fn tail_zero_check(curve: &TauCurve, tail_fraction: f64) -> Result<TailCheck> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "tail fraction must be in (0, 1], got {tail_fraction}"
        )));
    }
    let estimated = curve.bins.len().saturating_sub(1);
    let k = ((tail_fraction * estimated as f64) - 1e-9).ceil().max(0.0) as usize;
    if k < 2 {
        return Err(Error::InsufficientData { n: k, required: 2 });
    }
    let tail = &curve.bins[estimated - k..estimated];
    let tail_mean = tail.iter().map(|b| b.tau_hat).sum::<f64>() / k as f64;
    let covered = tail.iter().filter(|b| b.covers(0.0)).count();
    let covered_fraction = covered as f64 / k as f64;
    Ok(TailCheck {
        tail_fraction,
        tail_bins: tail.iter().map(|b| b.index).collect(),
        tail_mean,
        covered_fraction,
        pass: covered_fraction >= TAIL_PASS_SHARE,
        informal: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Period;
    use proptest::prelude::*;

    fn sample(d: &[f64]) -> DistanceSample {
        DistanceSample::new(d.to_vec()).unwrap()
    }

    fn diff(d: f64, y: f64) -> PanelDiff {
        PanelDiff {
            unit_id: String::new(),
            distance: d,
            delta_y: y,
        }
    }

    #[test]
    fn uniform_quantile_split() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        let p = build_partition(&sample(&d), 4).unwrap();
        assert_eq!(p.counts(), &[25, 25, 25, 25]);
        assert_eq!(p.edges(), &[1.0, 25.0, 50.0, 75.0, 100.0]);
    }

    #[test]
    fn two_bins_of_four() {
        let p = build_partition(&sample(&[3.0, 1.0, 4.0, 2.0]), 2).unwrap();
        assert_eq!(p.edges(), &[1.0, 2.0, 4.0]);
        assert_eq!(p.assignments(), &[1, 0, 1, 0]);
        assert_eq!(p.counts(), &[2, 2]);
    }

    #[test]
    fn identical_distances_degenerate() {
        let err = build_partition(&sample(&[1.0; 10]), 2).unwrap_err();
        assert!(matches!(err, Error::DegeneratePartition { bin: 2, .. }));
    }

    #[test]
    fn too_many_bins() {
        let err = build_partition(&sample(&[1.0, 2.0, 3.0, 4.0, 5.0]), 3).unwrap_err();
        assert!(matches!(err, Error::TooManyBins { bins: 3, n: 5 }));
        assert!(build_partition(&sample(&[1.0, 2.0]), 1).is_err());
    }

    #[test]
    fn select_bins_examples() {
        assert_eq!(select_bins_for(1000).unwrap(), 7);
        assert_eq!(select_bins_for(32).unwrap(), 3);
        assert_eq!(select_bins_for(20).unwrap(), 2);
        assert_eq!(select_bins_for(10_000).unwrap(), 14);
        assert_eq!(select_bins_for(100_000).unwrap(), 30);
        assert!(matches!(
            select_bins_for(19),
            Err(Error::InsufficientData {
                n: 19,
                required: 20
            })
        ));
    }

    #[test]
    fn bin_statistics_examples() {
        let p = build_partition(&sample(&[0.1, 0.2, 0.3, 0.4]), 2).unwrap();
        let s = bin_statistics(&[0.0, 0.0, 6.0, 6.0], &p).unwrap();
        assert_eq!((s[0].mean, s[1].mean), (0.0, 6.0));
        assert_eq!((s[0].variance, s[1].variance), (0.0, 0.0));
        let s = bin_statistics(&[1.0, 3.0, 5.0, 5.0], &p).unwrap();
        assert_eq!((s[0].mean, s[0].variance), (2.0, 2.0));
        assert!(bin_statistics(&[1.0, 2.0], &p).is_err());
    }

    #[test]
    fn variance_needs_two_per_bin() {
        // ties at the median push three units into the first bin
        let p = build_partition(&sample(&[1.0, 2.0, 2.0, 3.0]), 2).unwrap();
        assert_eq!(p.counts(), &[3, 1]);
        assert!(matches!(
            bin_statistics(&[0.0; 4], &p),
            Err(Error::VarianceUndefined { bin: 2, count: 1 })
        ));
    }

    #[test]
    fn pure_trend_curve_is_flat() {
        let d: Vec<PanelDiff> = (0..50).map(|i| diff(i as f64 / 50.0, 0.3)).collect();
        let c = tau_curve_panel(&d, 1.0, BinChoice::Fixed(5)).unwrap();
        assert!((c.lambda_hat - 0.3).abs() < 1e-15);
        assert!(c.bins.iter().all(|b| b.tau_hat == 0.0));
        assert_eq!(c.bins.last().unwrap().se, 0.0);
        assert_eq!(c.n_bins, 5);
        assert!(!c.auto_bins);
    }

    #[test]
    fn curve_hand_example() {
        let d = [
            diff(0.1, 3.0),
            diff(0.2, 5.0),
            diff(0.3, 1.0),
            diff(0.4, 3.0),
            diff(0.5, 0.0),
            diff(0.6, 2.0),
            diff(9.0, 100.0),
        ];
        let c = tau_curve_panel(&d, 1.0, BinChoice::Fixed(3)).unwrap();
        assert_eq!(c.dropped, 1);
        assert_eq!(c.lambda_hat, 1.0);
        let tau: Vec<f64> = c.bins.iter().map(|b| b.tau_hat).collect();
        assert_eq!(tau, vec![3.0, 1.0, 0.0]);
        // every bin has s^2 = 2, n = 2: sigma^2 = 1
        assert!((c.bins[0].se - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.bins[0].sigma, 1.0);
        assert_eq!(c.edges(), vec![0.1, 0.2, 0.4, 0.6]);
    }

    #[test]
    fn rc_curve_cells_and_errors() {
        let mut r = Vec::new();
        for (i, d) in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8].iter().enumerate() {
            let near = *d <= 0.4;
            r.push(Record {
                unit_id: format!("a{i}"),
                distance: *d,
                period: Period::Pre,
                outcome: 1.0,
            });
            r.push(Record {
                unit_id: format!("b{i}"),
                distance: *d,
                period: Period::Post,
                outcome: if near { 4.0 } else { 2.0 },
            });
        }
        let c = tau_curve_rc(&r, 1.0, BinChoice::Fixed(2)).unwrap();
        assert_eq!(c.lambda_hat, 1.0);
        assert_eq!(c.bins[0].tau_hat, 2.0);
        assert_eq!(c.design, Design::RepeatedCrossSection);

        let only_pre: Vec<Record> = r
            .iter()
            .filter(|x| x.period == Period::Pre)
            .cloned()
            .collect();
        assert!(matches!(
            tau_curve_rc(&only_pre, 1.0, BinChoice::Fixed(2)),
            Err(Error::DegenerateCell { .. })
        ));
    }

    fn curve_from(taus: &[(f64, f64)], n: usize) -> TauCurve {
        let bins = taus
            .iter()
            .enumerate()
            .map(|(j, &(tau, se))| CurveBin {
                index: j + 1,
                edge_lo: j as f64,
                edge_hi: (j + 1) as f64,
                midpoint: j as f64 + 0.5,
                tau_hat: tau,
                se,
                sigma: se / 2f64.sqrt(),
                n,
            })
            .collect();
        TauCurve {
            design: Design::Panel,
            d_c: taus.len() as f64,
            n_bins: taus.len(),
            auto_bins: false,
            n: n * taus.len(),
            dropped: 0,
            lambda_hat: 0.0,
            lambda_se: 0.1 / 2f64.sqrt(),
            bins,
        }
    }

    #[test]
    fn one_bin_average() {
        let c = curve_from(&[(2.0, 0.1), (0.0, 0.1), (0.0, 0.1), (0.0, 0.0)], 10);
        let a = aggregate_ate(&c, Cutoff::Distance(1.0)).unwrap();
        assert_eq!(a.tau_bar, 2.0);
        assert_eq!(a.bins_used, vec![1]);
        // var = sigma_1^2 + sigma_L^2 = 0.005 + 0.005
        assert!((a.se - 0.1).abs() < 1e-15);
    }

    #[test]
    fn weighted_average_and_se() {
        let c = curve_from(&[(2.0, 0.1), (1.0, 0.1), (0.0, 0.1), (0.0, 0.0)], 10);
        let a = aggregate_ate(&c, Cutoff::Distance(2.5)).unwrap();
        assert_eq!(a.tau_bar, 1.5);
        // 0.25*0.005 + 0.25*0.005 + 1*0.005
        assert!((a.se - 0.0075f64.sqrt()).abs() < 1e-15);
        let auto = aggregate_ate(&c, Cutoff::Auto).unwrap();
        assert_eq!(auto.bins_used, vec![1, 2]);
        assert_eq!(auto.cutoff_mode, "auto_heuristic");
    }

    #[test]
    fn all_zero_curve_has_no_affected_bins() {
        let c = curve_from(&[(0.0, 0.1), (0.0, 0.1), (0.0, 0.1), (0.0, 0.0)], 10);
        assert!(matches!(
            aggregate_ate(&c, Cutoff::Auto),
            Err(Error::NoAffectedBins(_))
        ));
        assert!(matches!(
            aggregate_ate(&c, Cutoff::Distance(0.5)),
            Err(Error::NoAffectedBins(_))
        ));
        let short = curve_from(&[(1.0, 0.1), (0.0, 0.0)], 10);
        assert!(aggregate_ate(&short, Cutoff::Auto).is_err());
    }

    #[test]
    fn tail_check_flat_and_drifting() {
        let flat = curve_from(
            &[
                (1.0, 0.1),
                (0.02, 0.1),
                (-0.01, 0.1),
                (0.05, 0.1),
                (0.0, 0.0),
            ],
            10,
        );
        let t = tail_zero_check(&flat, 0.5).unwrap();
        assert_eq!(t.tail_bins, vec![3, 4]);
        assert!(t.pass && t.informal);
        assert_eq!(t.covered_fraction, 1.0);

        let drift = curve_from(
            &[
                (1.0, 0.1),
                (-0.6, 0.1),
                (-0.4, 0.1),
                (-0.2, 0.1),
                (0.0, 0.0),
            ],
            10,
        );
        let t = tail_zero_check(&drift, 0.75).unwrap();
        assert_eq!(t.tail_bins, vec![2, 3, 4]);
        assert!(!t.pass);
        assert!((t.tail_mean + 0.4).abs() < 1e-12);

        assert!(tail_zero_check(&flat, 0.2).is_err());
        assert!(tail_zero_check(&flat, 0.0).is_err());
    }

    #[test]
    fn tail_bin_count_rounding() {
        let c = curve_from(&[(0.0, 0.1); 11], 10);
        // 0.3 * 10 = 3 exactly, not 4
        assert_eq!(tail_zero_check(&c, 0.3).unwrap().tail_bins.len(), 3);
    }

    #[test]
    fn parse_choices() {
        assert_eq!("auto".parse::<BinChoice>().unwrap(), BinChoice::Auto);
        assert_eq!("7".parse::<BinChoice>().unwrap(), BinChoice::Fixed(7));
        assert!("x".parse::<BinChoice>().is_err());
        assert_eq!("0.75".parse::<Cutoff>().unwrap(), Cutoff::Distance(0.75));
        assert!("-1".parse::<Cutoff>().is_err());
    }

    proptest! {
        #[test]
        fn balanced_bins_for_distinct_distances(n in 4usize..300, l in 2usize..20) {
            prop_assume!(n >= 2 * l);
            let d: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64 * 0.01).collect();
            let p = build_partition(&sample(&d), l).unwrap();
            let lo = *p.counts().iter().min().unwrap();
            let hi = *p.counts().iter().max().unwrap();
            prop_assert!(hi - lo <= 1);
            prop_assert_eq!(p.counts().iter().sum::<usize>(), n);
            prop_assert!(p.edges().windows(2).all(|w| w[0] <= w[1]));
            for (&x, &b) in d.iter().zip(p.assignments()) {
                prop_assert!(x <= p.edges()[b + 1]);
                prop_assert!(b == 0 || x > p.edges()[b]);
            }
        }

        #[test]
        fn anchor_zero_and_shift(
            rows in prop::collection::vec((0.0..1.0f64, -3.0..3.0f64), 20..80),
            shift in -50.0..50.0f64,
        ) {
            let d: Vec<PanelDiff> = rows.iter().map(|&(x, y)| diff(x, y)).collect();
            let Ok(c) = tau_curve_panel(&d, 1.0, BinChoice::Fixed(4)) else { return Ok(()); };
            prop_assert_eq!(c.bins.last().unwrap().tau_hat, 0.0);
            let s: Vec<PanelDiff> = rows.iter().map(|&(x, y)| diff(x, y + shift)).collect();
            let cs = tau_curve_panel(&s, 1.0, BinChoice::Fixed(4)).unwrap();
            prop_assert!((cs.lambda_hat - c.lambda_hat - shift).abs() < 1e-9);
            for (a, b) in c.bins.iter().zip(&cs.bins) {
                prop_assert!((a.tau_hat - b.tau_hat).abs() < 1e-9);
            }
        }
    }
}
