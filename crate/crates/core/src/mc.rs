//! Monte Carlo bias, RMSE and coverage studies against the oracles.
//!
//! Replication `r` draws its data from a seed derived from the master seed
//! and `r` alone, so results do not depend on how replications are spread
//! over threads. Summaries are accumulated in replication order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{tau_curve_panel, tau_curve_rc, BinChoice, TauCurve};
use crate::data::{first_differences, resolve_records, Metric, Record};
use crate::dgp::{
    curve_targets, generate, oracle_bin_means, oracle_rc_expectation, oracle_ring_expectation,
    DgpSpec, RingDecomposition,
};
use crate::error::{Error, Result};
use crate::ring::{ring_estimate_panel, ring_estimate_rc, Design, RingSpec};
use crate::stats::{ci_covers, median};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorChoice {
    Ring { d_t: f64, d_c: f64 },
    Curve { d_c: f64, bins: BinChoice },
}

/// Seed of replication `rep`: the first word of stream `rep` of a ChaCha8
/// generator keyed by `master_seed`.
pub fn replication_seed(master_seed: u64, rep: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep);
    rng.next_u64()
}

/// One estimate from one replication, next to what it should converge to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetValue {
    pub target: String,
    pub estimate: f64,
    pub se: f64,
    pub oracle: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub replication: usize,
    pub seed: u64,
    /// Estimator error message for failed replications.
    pub error: Option<String>,
    pub values: Vec<TargetValue>,
}

impl Replication {
    /// Largest absolute deviation from the oracle across targets.
    pub fn max_abs_error(&self) -> Option<f64> {
        self.values
            .iter()
            .map(|v| (v.estimate - v.oracle).abs())
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: String,
    pub n: usize,
    pub mean_estimate: f64,
    /// Standard error of `mean_estimate` across replications.
    pub mc_se: f64,
    pub mean_oracle: f64,
    pub bias: f64,
    pub rmse: f64,
    pub ci_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub replications: usize,
    pub failures: usize,
    pub master_seed: u64,
    pub design: Design,
    pub estimator: EstimatorChoice,
    /// Ring studies: the expected estimate and its parts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring_oracle: Option<RingDecomposition>,
    pub targets: Vec<TargetSummary>,
    /// Curve studies: per-replication maximum absolute error over bins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_error: Option<ErrorSummary>,
}

impl McReport {
    pub fn target(&self, name: &str) -> Option<&TargetSummary> {
        self.targets.iter().find(|t| t.target == name)
    }
}

pub fn monte_carlo(
    spec: &DgpSpec,
    estimator: EstimatorChoice,
    replications: usize,
    master_seed: u64,
) -> Result<(McReport, Vec<Replication>)> {
    if replications < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least 2 replications, got {replications}"
        )));
    }
    spec.validate()?;
    let ring_oracle = match estimator {
        EstimatorChoice::Ring { d_t, d_c } => {
            let rings = RingSpec::new(d_t, d_c)?;
            Some(match spec.design {
                Design::Panel => oracle_ring_expectation(spec, rings)?,
                Design::RepeatedCrossSection => oracle_rc_expectation(spec, rings)?,
            })
        }
        EstimatorChoice::Curve { d_c, .. } => {
            if !(d_c > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "d_c must be positive, got {d_c}"
                )));
            }
            None
        }
    };

    let reps: Vec<Replication> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let seed = replication_seed(master_seed, r as u64);
            let rep_spec = DgpSpec {
                seed,
                ..spec.clone()
            };
            match run_once(&rep_spec, estimator, ring_oracle) {
                Ok(values) => Replication {
                    replication: r,
                    seed,
                    error: None,
                    values,
                },
                Err(e) => Replication {
                    replication: r,
                    seed,
                    error: Some(e.to_string()),
                    values: vec![],
                },
            }
        })
        .collect();

    let failures = reps.iter().filter(|r| r.error.is_some()).count();
    let targets = summarize(&reps);
    let max_abs_error = match estimator {
        EstimatorChoice::Curve { .. } => {
            let mut errs: Vec<f64> = reps.iter().filter_map(Replication::max_abs_error).collect();
            (!errs.is_empty()).then(|| ErrorSummary {
                mean: errs.iter().sum::<f64>() / errs.len() as f64,
                median: median(&mut errs),
            })
        }
        EstimatorChoice::Ring { .. } => None,
    };
    Ok((
        McReport {
            replications,
            failures,
            master_seed,
            design: spec.design,
            estimator,
            ring_oracle,
            targets,
            max_abs_error,
        },
        reps,
    ))
}

fn run_once(
    spec: &DgpSpec,
    estimator: EstimatorChoice,
    ring_oracle: Option<RingDecomposition>,
) -> Result<Vec<TargetValue>> {
    let observations = generate(spec)?;
    // Simulated coordinates sit around the origin.
    let records = resolve_records(
        &observations,
        Some(crate::data::Point::new(0.0, 0.0)),
        Metric::Euclidean,
    )?;
    match estimator {
        EstimatorChoice::Ring { d_t, d_c } => {
            let rings = RingSpec::new(d_t, d_c)?;
            let est = match spec.design {
                Design::Panel => ring_estimate_panel(&first_differences(&records)?, rings)?,
                Design::RepeatedCrossSection => ring_estimate_rc(&records, rings)?,
            };
            let oracle = ring_oracle.map_or(f64::NAN, |o| o.total);
            Ok(vec![TargetValue {
                target: "beta1".into(),
                estimate: est.beta1,
                se: est.se,
                oracle,
                covered: ci_covers(est.beta1, est.se, oracle),
            }])
        }
        EstimatorChoice::Curve { d_c, bins } => {
            let curve = estimate_curve(spec.design, &records, d_c, bins)?;
            let oracle = curve_targets(&oracle_bin_means(spec, &curve.edges())?);
            Ok(curve
                .bins
                .iter()
                .take(curve.n_bins - 1)
                .zip(oracle)
                .map(|(b, target)| TargetValue {
                    target: format!("tau_{}", b.index),
                    estimate: b.tau_hat,
                    se: b.se,
                    oracle: target,
                    covered: b.covers(target),
                })
                .collect())
        }
    }
}

fn estimate_curve(
    design: Design,
    records: &[Record],
    d_c: f64,
    bins: BinChoice,
) -> Result<TauCurve> {
    match design {
        Design::Panel => tau_curve_panel(&first_differences(records)?, d_c, bins),
        Design::RepeatedCrossSection => tau_curve_rc(records, d_c, bins),
    }
}

fn summarize(reps: &[Replication]) -> Vec<TargetSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in reps {
        for v in &r.values {
            if !names.contains(&v.target.as_str()) {
                names.push(&v.target);
            }
        }
    }
    names
        .into_iter()
        .map(|name| {
            let vals: Vec<&TargetValue> = reps
                .iter()
                .flat_map(|r| r.values.iter().filter(|v| v.target == name))
                .collect();
            let n = vals.len() as f64;
            let mean_estimate = vals.iter().map(|v| v.estimate).sum::<f64>() / n;
            let sd = (vals
                .iter()
                .map(|v| (v.estimate - mean_estimate).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt();
            TargetSummary {
                target: name.to_string(),
                n: vals.len(),
                mean_estimate,
                mc_se: sd / n.sqrt(),
                mean_oracle: vals.iter().map(|v| v.oracle).sum::<f64>() / n,
                bias: vals.iter().map(|v| v.estimate - v.oracle).sum::<f64>() / n,
                rmse: (vals
                    .iter()
                    .map(|v| (v.estimate - v.oracle).powi(2))
                    .sum::<f64>()
                    / n)
                    .sqrt(),
                ci_coverage: vals.iter().filter(|v| v.covered).count() as f64 / n,
            }
        })
        .collect()
}
