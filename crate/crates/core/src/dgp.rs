//! Synthetic data with a known treatment-effect curve, and closed-form or
//! quadrature oracles for every expectation the estimators target.
//!
//! Panel units follow
//!
//! ```text
//! Y0 = mu + u0
//! Y1 = mu + tau(D) + tau_i + lambda(D) + lambda_i + u1
//! ```
//!
//! where `tau_i`, `lambda_i` and the `u` terms are mean-zero Gaussians drawn
//! independently of the distance `D`. In cross-section mode each unit is
//! observed in one period, chosen by a fair coin, and the unit effect `mu`
//! stays in the outcome. A nonzero `rc_composition_drift` tilts who is
//! observed after treatment: among post-period units at distance `d`, the
//! standardized `mu` is sampled with weight `exp(drift * g(d) * z)`, with
//! `g(d) = 1 - F(d)`. This shifts their mean `mu` by `sd * drift * g(d)`,
//! most strongly next to the treatment point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Location, Observation, Period, Point};
use crate::error::{Error, Result};
use crate::quad::integrate_pieces;
use crate::ring::{Design, RingSpec};

/// Absolute tolerance of every oracle integral.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceLaw {
    Uniform {
        a: f64,
        b: f64,
    },
    /// Piecewise-linear quantile function through `[p, distance]` knots,
    /// from `p = 0` to `p = 1`. The density is constant between knots.
    QuantileTable {
        points: Vec<[f64; 2]>,
    },
}

impl DistanceLaw {
    fn knots(&self) -> Vec<[f64; 2]> {
        match self {
            DistanceLaw::Uniform { a, b } => vec![[0.0, *a], [1.0, *b]],
            DistanceLaw::QuantileTable { points } => points.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.knots();
        let bad = |m: &str| Err(Error::InvalidSpec(format!("distance law: {m}")));
        if k.len() < 2 {
            return bad("need at least two quantile knots");
        }
        if k.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite knot");
        }
        if k[0][0] != 0.0 || k[k.len() - 1][0] != 1.0 {
            return bad("probabilities must run from 0 to 1");
        }
        if k[0][1] < 0.0 {
            return bad("distances must be nonnegative");
        }
        if k.windows(2)
            .any(|w| w[1][0] <= w[0][0] || w[1][1] <= w[0][1])
        {
            return bad("knots must be strictly increasing in both probability and distance");
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        let k = self.knots();
        (k[0][1], k[k.len() - 1][1])
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.knots();
        let i = k[1..].partition_point(|w| w[0] < u).min(k.len() - 2);
        let (p0, d0) = (k[i][0], k[i][1]);
        let (p1, d1) = (k[i + 1][0], k[i + 1][1]);
        d0 + (d1 - d0) * (u - p0) / (p1 - p0)
    }

    pub fn cdf(&self, d: f64) -> f64 {
        let k = self.knots();
        if d <= k[0][1] {
            return 0.0;
        }
        if d >= k[k.len() - 1][1] {
            return 1.0;
        }
        let i = k[1..].partition_point(|w| w[1] < d).min(k.len() - 2);
        let (p0, d0) = (k[i][0], k[i][1]);
        let (p1, d1) = (k[i + 1][0], k[i + 1][1]);
        p0 + (p1 - p0) * (d - d0) / (d1 - d0)
    }

    pub fn density(&self, d: f64) -> f64 {
        let k = self.knots();
        if d < k[0][1] || d > k[k.len() - 1][1] {
            return 0.0;
        }
        let i = k[1..].partition_point(|w| w[1] < d).min(k.len() - 2);
        (k[i + 1][0] - k[i][0]) / (k[i + 1][1] - k[i][1])
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots().iter().map(|k| k[1]).collect()
    }
}

/// Systematic treatment effect as a function of distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauFn {
    /// `amplitude * max(0, 1 - d / cutoff)`.
    LinearDecay {
        amplitude: f64,
        cutoff: f64,
    },
    /// Linear interpolation through `[distance, effect]` knots; zero
    /// outside the knot range.
    Table {
        points: Vec<[f64; 2]>,
    },
    Zero,
}

impl TauFn {
    pub fn eval(&self, d: f64) -> f64 {
        match self {
            TauFn::LinearDecay { amplitude, cutoff } => amplitude * (1.0 - d / cutoff).max(0.0),
            TauFn::Table { points } => interpolate(points, d),
            TauFn::Zero => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TauFn::LinearDecay { amplitude, cutoff } => {
                if !(*amplitude > 0.0
                    && *cutoff > 0.0
                    && amplitude.is_finite()
                    && cutoff.is_finite())
                {
                    return Err(Error::InvalidSpec(
                        "linear_decay needs amplitude > 0 and cutoff > 0".into(),
                    ));
                }
                Ok(())
            }
            TauFn::Table { points } => validate_table("tau table", points),
            TauFn::Zero => Ok(()),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TauFn::LinearDecay { cutoff, .. } => vec![*cutoff],
            TauFn::Table { points } => points.iter().map(|p| p[0]).collect(),
            TauFn::Zero => vec![],
        }
    }

    /// Distance intervals on which the effect is nonzero.
    fn affected_intervals(&self) -> Vec<(f64, f64)> {
        match self {
            TauFn::LinearDecay { cutoff, .. } => vec![(0.0, *cutoff)],
            TauFn::Table { points } => points
                .windows(2)
                .filter(|w| w[0][1] != 0.0 || w[1][1] != 0.0)
                .map(|w| (w[0][0], w[1][0]))
                .collect(),
            TauFn::Zero => vec![],
        }
    }
}

/// Systematic counterfactual trend as a function of distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaFn {
    Constant { value: f64 },
    Linear { slope: f64, intercept: f64 },
}

impl LambdaFn {
    pub fn eval(&self, d: f64) -> f64 {
        match self {
            LambdaFn::Constant { value } => *value,
            LambdaFn::Linear { slope, intercept } => intercept + slope * d,
        }
    }
}

fn interpolate(points: &[[f64; 2]], d: f64) -> f64 {
    if points.is_empty() || d < points[0][0] || d > points[points.len() - 1][0] {
        return 0.0;
    }
    let i = points[1..]
        .partition_point(|p| p[0] < d)
        .min(points.len().saturating_sub(2));
    if points.len() == 1 {
        return points[0][1];
    }
    let ([x0, y0], [x1, y1]) = (points[i], points[i + 1]);
    y0 + (y1 - y0) * (d - x0) / (x1 - x0)
}

fn validate_table(name: &str, points: &[[f64; 2]]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidSpec(format!(
            "{name}: need at least two knots"
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("{name}: non-finite knot")));
    }
    if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(Error::InvalidSpec(format!(
            "{name}: distances must be strictly increasing"
        )));
    }
    Ok(())
}

/// Distribution of the unit fixed effect `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuLaw {
    pub mean: f64,
    pub sd: f64,
}

impl Default for MuLaw {
    fn default() -> Self {
        MuLaw { mean: 0.0, sd: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub n: usize,
    #[serde(default = "default_design")]
    pub design: Design,
    pub distance_law: DistanceLaw,
    pub tau: TauFn,
    pub lambda: LambdaFn,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub idio_te_sd: f64,
    #[serde(default)]
    pub idio_trend_sd: f64,
    #[serde(default)]
    pub mu: MuLaw,
    #[serde(default)]
    pub rc_composition_drift: f64,
    #[serde(default)]
    pub seed: u64,
    /// Write coordinates on a circle of radius `D` around the origin
    /// instead of the distance itself.
    #[serde(default)]
    pub emit_coordinates: bool,
}

fn default_design() -> Design {
    Design::Panel
}

impl DgpSpec {
    /// The vacant-lot example: distances uniform on `[0, 1.5]`, an effect of
    /// one at the lot decaying linearly to zero at 0.75, a common trend of
    /// 0.3 and unit-level noise with standard deviation 0.5.
    pub fn vacant_lot(n: usize, seed: u64) -> Self {
        DgpSpec {
            n,
            design: Design::Panel,
            distance_law: DistanceLaw::Uniform { a: 0.0, b: 1.5 },
            tau: TauFn::LinearDecay {
                amplitude: 1.0,
                cutoff: 0.75,
            },
            lambda: LambdaFn::Constant { value: 0.3 },
            noise_sd: 0.5,
            idio_te_sd: 0.0,
            idio_trend_sd: 0.0,
            mu: MuLaw::default(),
            rc_composition_drift: 0.0,
            seed,
            emit_coordinates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        self.distance_law.validate()?;
        self.tau.validate()?;
        let sds = [
            ("noise_sd", self.noise_sd),
            ("idio_te_sd", self.idio_te_sd),
            ("idio_trend_sd", self.idio_trend_sd),
            ("mu.sd", self.mu.sd),
        ];
        for (name, v) in sds {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        let finite = [
            self.mu.mean,
            self.rc_composition_drift,
            self.lambda.eval(0.0),
            self.lambda.eval(1.0),
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite parameter".into()));
        }
        if self.rc_composition_drift != 0.0 && self.design == Design::Panel {
            return Err(Error::InvalidSpec(
                "rc_composition_drift only applies to the rc design".into(),
            ));
        }
        Ok(())
    }

    /// Strength of the post-period composition tilt at distance `d`.
    fn tilt(&self, d: f64) -> f64 {
        self.rc_composition_drift * (1.0 - self.distance_law.cdf(d))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.distance_law.breakpoints();
        b.extend(self.tau.breakpoints());
        b
    }
}

/// Draws a dataset. Identical specs give bit-identical output.
pub fn generate(spec: &DgpSpec) -> Result<Vec<Observation>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = spec.n.to_string().len();
    let mut out = Vec::with_capacity(match spec.design {
        Design::Panel => 2 * spec.n,
        Design::RepeatedCrossSection => spec.n,
    });
    for i in 0..spec.n {
        let u: f64 = rng.random();
        let d = spec.distance_law.quantile(u);
        let z: f64 = rng.sample(StandardNormal);
        let te_noise: f64 = rng.sample(StandardNormal);
        let trend_noise: f64 = rng.sample(StandardNormal);
        let u0: f64 = rng.sample(StandardNormal);
        let u1: f64 = rng.sample(StandardNormal);
        let post: bool = rng.random();
        let angle: f64 = rng.random::<f64>() * std::f64::consts::TAU;

        let location = if spec.emit_coordinates {
            Location::Coords(Point::new(d * angle.cos(), d * angle.sin()))
        } else {
            Location::Distance(d)
        };
        let shock = spec.tau.eval(d)
            + spec.idio_te_sd * te_noise
            + spec.lambda.eval(d)
            + spec.idio_trend_sd * trend_noise;
        let unit_id = format!("u{i:0width$}");
        let mut push = |period, outcome| {
            out.push(Observation {
                unit_id: unit_id.clone(),
                location,
                period,
                outcome,
            })
        };
        match spec.design {
            Design::Panel => {
                let mu = spec.mu.mean + spec.mu.sd * z;
                push(Period::Pre, mu + spec.noise_sd * u0);
                push(Period::Post, mu + shock + spec.noise_sd * u1);
            }
            Design::RepeatedCrossSection => {
                if post {
                    let mu = spec.mu.mean + spec.mu.sd * (z + spec.tilt(d));
                    push(Period::Post, mu + shock + spec.noise_sd * u1);
                } else {
                    let mu = spec.mu.mean + spec.mu.sd * z;
                    push(Period::Pre, mu + spec.noise_sd * u0);
                }
            }
        }
    }
    Ok(out)
}

/// `E[h(D) | lo < D <= hi]` under the configured distance law. A zero-width
/// interval evaluates `h` at the point.
fn conditional_mean<F: Fn(f64) -> f64>(spec: &DgpSpec, h: F, lo: f64, hi: f64) -> Option<f64> {
    if lo == hi {
        return Some(h(lo));
    }
    let law = &spec.distance_law;
    let (s_lo, s_hi) = law.support();
    let (a, b) = (lo.max(s_lo), hi.min(s_hi));
    let mass = law.cdf(hi) - law.cdf(lo);
    if !(mass > 0.0) || a >= b {
        return None;
    }
    let integrand = |d: f64| h(d) * law.density(d);
    Some(integrate_pieces(&integrand, a, b, &spec.breakpoints(), ORACLE_TOL * mass) / mass)
}

/// Mean effect among affected units, `E[tau(D) | tau(D) != 0]`.
pub fn oracle_tau_bar(spec: &DgpSpec) -> Result<f64> {
    spec.validate()?;
    let law = &spec.distance_law;
    if let (TauFn::LinearDecay { amplitude, cutoff }, DistanceLaw::Uniform { a, b }) =
        (&spec.tau, law)
    {
        if a < cutoff {
            let top = b.min(*cutoff);
            return Ok(amplitude * (1.0 - (a + top) / (2.0 * cutoff)));
        }
        return Err(Error::UndefinedEstimand(
            "no distance in the support has a nonzero effect".into(),
        ));
    }
    let mut mass = 0.0;
    let mut total = 0.0;
    for (lo, hi) in spec.tau.affected_intervals() {
        let m = law.cdf(hi) - law.cdf(lo);
        if m > 0.0 {
            mass += m;
            total += m * conditional_mean(spec, |d| spec.tau.eval(d), lo, hi).unwrap_or(0.0);
        }
    }
    if mass <= 0.0 {
        return Err(Error::UndefinedEstimand(
            "no distance in the support has a nonzero effect".into(),
        ));
    }
    Ok(total / mass)
}

/// Expected ring estimate split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingDecomposition {
    /// `E[tau | treated ring] - E[tau | control ring]`.
    pub te_diff: f64,
    /// `E[lambda | treated ring] - E[lambda | control ring]`.
    pub trend_diff: f64,
    /// Difference in post-period composition shift between the rings;
    /// zero for panels.
    pub composition: f64,
    pub total: f64,
}

fn ring_means<F: Fn(f64) -> f64>(spec: &DgpSpec, rings: RingSpec, h: F) -> Result<f64> {
    let (s_lo, _) = spec.distance_law.support();
    let below = s_lo.min(0.0) - 1.0;
    let t = conditional_mean(spec, &h, below, rings.d_t());
    let c = conditional_mean(spec, &h, rings.d_t(), rings.d_c());
    match (t, c) {
        (Some(t), Some(c)) => Ok(t - c),
        _ => Err(Error::InvalidSpec(format!(
            "rings ({}, {}) leave a ring outside the distance support",
            rings.d_t(),
            rings.d_c()
        ))),
    }
}

/// Expected panel ring estimate.
pub fn oracle_ring_expectation(spec: &DgpSpec, rings: RingSpec) -> Result<RingDecomposition> {
    spec.validate()?;
    let te_diff = ring_means(spec, rings, |d| spec.tau.eval(d))?;
    let trend_diff = ring_means(spec, rings, |d| spec.lambda.eval(d))?;
    Ok(RingDecomposition {
        te_diff,
        trend_diff,
        composition: 0.0,
        total: te_diff + trend_diff,
    })
}

/// Expected cross-section ring estimate, including the composition shift
/// of post-period units.
pub fn oracle_rc_expectation(spec: &DgpSpec, rings: RingSpec) -> Result<RingDecomposition> {
    let base = oracle_ring_expectation(spec, rings)?;
    let composition = if spec.rc_composition_drift == 0.0 || spec.mu.sd == 0.0 {
        0.0
    } else {
        spec.mu.sd * ring_means(spec, rings, |d| spec.tilt(d))?
    };
    Ok(RingDecomposition {
        composition,
        total: base.te_diff + base.trend_diff + composition,
        ..base
    })
}

/// True conditional means within one bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinOracle {
    pub tau: f64,
    pub lambda: f64,
    /// Post-period shift of mean `mu`; zero for panels.
    pub composition: f64,
}

impl BinOracle {
    fn change(&self) -> f64 {
        self.tau + self.lambda + self.composition
    }
}

/// Conditional means of `tau` and `lambda` over bins `[e0, e1]`,
/// `(e1, e2]`, ... given partition edges.
pub fn oracle_bin_means(spec: &DgpSpec, edges: &[f64]) -> Result<Vec<BinOracle>> {
    spec.validate()?;
    let composition_on = spec.design == Design::RepeatedCrossSection
        && spec.rc_composition_drift != 0.0
        && spec.mu.sd != 0.0;
    Ok(edges
        .windows(2)
        .map(|w| {
            let mean =
                |h: &dyn Fn(f64) -> f64| conditional_mean(spec, h, w[0], w[1]).unwrap_or(f64::NAN);
            BinOracle {
                tau: mean(&|d| spec.tau.eval(d)),
                lambda: mean(&|d| spec.lambda.eval(d)),
                composition: if composition_on {
                    spec.mu.sd * mean(&|d| spec.tilt(d))
                } else {
                    0.0
                },
            }
        })
        .collect())
}

/// What each curve estimate converges to given the bins: the expected
/// change in bin `j` minus that in the last bin.
pub fn curve_targets(oracles: &[BinOracle]) -> Vec<f64> {
    let Some(anchor) = oracles.last().map(BinOracle::change) else {
        return vec![];
    };
    oracles.iter().map(|o| o.change() - anchor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lot(lambda: LambdaFn) -> DgpSpec {
        DgpSpec {
            lambda,
            ..DgpSpec::vacant_lot(100, 1)
        }
    }

    #[test]
    fn degenerate_dgp_has_no_change() {
        let spec = DgpSpec {
            tau: TauFn::Zero,
            lambda: LambdaFn::Constant { value: 0.0 },
            noise_sd: 0.0,
            ..DgpSpec::vacant_lot(50, 3)
        };
        let obs = generate(&spec).unwrap();
        for pair in obs.chunks(2) {
            assert_eq!(pair[0].outcome, pair[1].outcome);
        }
    }

    #[test]
    fn noiseless_change_is_exact() {
        let spec = DgpSpec {
            noise_sd: 0.0,
            ..DgpSpec::vacant_lot(200, 9)
        };
        let obs = generate(&spec).unwrap();
        for pair in obs.chunks(2) {
            let Location::Distance(d) = pair[0].location else {
                panic!()
            };
            let expected = (1.0 - d / 0.75).max(0.0) + 0.3;
            let dy = pair[1].outcome - pair[0].outcome;
            assert!((dy - expected).abs() < 1e-12, "{dy} vs {expected}");
        }
    }

    #[test]
    fn same_seed_same_data() {
        let spec = DgpSpec::vacant_lot(500, 42);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = DgpSpec::vacant_lot(500, 43);
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn rc_rows_one_per_unit() {
        let spec = DgpSpec {
            design: Design::RepeatedCrossSection,
            ..DgpSpec::vacant_lot(1000, 5)
        };
        let obs = generate(&spec).unwrap();
        assert_eq!(obs.len(), 1000);
        let post = obs.iter().filter(|o| o.period == Period::Post).count();
        assert!((400..600).contains(&post));
    }

    #[test]
    fn validation() {
        let mut s = DgpSpec::vacant_lot(10, 0);
        s.noise_sd = -1.0;
        assert!(generate(&s).is_err());
        let mut s = DgpSpec::vacant_lot(10, 0);
        s.tau = TauFn::LinearDecay {
            amplitude: 0.0,
            cutoff: 0.75,
        };
        assert!(s.validate().is_err());
        let mut s = DgpSpec::vacant_lot(10, 0);
        s.rc_composition_drift = 1.0;
        assert!(s.validate().is_err());
        let mut s = DgpSpec::vacant_lot(10, 0);
        s.distance_law = DistanceLaw::QuantileTable {
            points: vec![[0.0, 0.0], [0.5, 0.0], [1.0, 1.0]],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn law_quantile_cdf_inverse() {
        let law = DistanceLaw::QuantileTable {
            points: vec![[0.0, 0.0], [0.5, 0.2], [1.0, 1.5]],
        };
        for u in [0.0, 0.1, 0.25, 0.5, 0.7, 1.0] {
            assert!((law.cdf(law.quantile(u)) - u).abs() < 1e-14);
        }
        assert!((law.density(0.1) - 2.5).abs() < 1e-14);
        assert!((law.density(1.0) - 0.5 / 1.3).abs() < 1e-14);
        assert_eq!(law.density(2.0), 0.0);
    }

    #[test]
    fn tau_bar_examples() {
        assert_eq!(
            oracle_tau_bar(&lot(LambdaFn::Constant { value: 0.0 })).unwrap(),
            0.5
        );
        let mut s = lot(LambdaFn::Constant { value: 0.0 });
        s.tau = TauFn::LinearDecay {
            amplitude: 2.0,
            cutoff: 0.75,
        };
        assert_eq!(oracle_tau_bar(&s).unwrap(), 1.0);
        s.tau = TauFn::Table {
            points: vec![[0.0, 3.0], [0.75, 3.0]],
        };
        assert!((oracle_tau_bar(&s).unwrap() - 3.0).abs() < 1e-12);
        s.tau = TauFn::Zero;
        assert!(matches!(
            oracle_tau_bar(&s),
            Err(Error::UndefinedEstimand(_))
        ));
    }

    #[test]
    fn tau_bar_closed_form_matches_quadrature() {
        for (amp, cut, b) in [
            (1.0, 0.75, 1.5),
            (2.5, 0.4, 1.0),
            (0.3, 1.2, 1.0),
            (1.0, 0.9, 3.0),
        ] {
            let mut s = lot(LambdaFn::Constant { value: 0.0 });
            s.distance_law = DistanceLaw::Uniform { a: 0.0, b };
            s.tau = TauFn::LinearDecay {
                amplitude: amp,
                cutoff: cut,
            };
            let closed = oracle_tau_bar(&s).unwrap();
            // same law written as a quantile table takes the quadrature path
            s.distance_law = DistanceLaw::QuantileTable {
                points: vec![[0.0, 0.0], [0.5, b / 2.0], [1.0, b]],
            };
            let numeric = oracle_tau_bar(&s).unwrap();
            assert!((closed - numeric).abs() < 1e-8, "{closed} vs {numeric}");
            if cut <= b {
                assert!((closed - amp / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ring_oracle_examples() {
        let s = lot(LambdaFn::Constant { value: 0.0 });
        let r = |t, c| RingSpec::new(t, c).unwrap();
        let correct = oracle_ring_expectation(&s, r(0.75, 1.5)).unwrap();
        assert!((correct.total - 0.5).abs() < 1e-8);
        let wide = oracle_ring_expectation(&s, r(1.0, 1.5)).unwrap();
        assert!((wide.total - 0.375).abs() < 1e-8);
        let narrow = oracle_ring_expectation(&s, r(0.375, 1.5)).unwrap();
        assert!((narrow.total - 2.0 / 3.0).abs() < 1e-8);
        assert!(matches!(
            oracle_ring_expectation(&s, r(1.6, 2.0)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn trend_decomposition() {
        let s = lot(LambdaFn::Linear {
            slope: 0.2,
            intercept: 0.0,
        });
        let o = oracle_ring_expectation(&s, RingSpec::new(0.75, 1.5).unwrap()).unwrap();
        assert!((o.te_diff - 0.5).abs() < 1e-8);
        assert!((o.trend_diff + 0.15).abs() < 1e-8);
        assert_eq!(o.total, o.te_diff + o.trend_diff);
    }

    #[test]
    fn rc_oracle_reduces_and_adds() {
        let mut s = lot(LambdaFn::Constant { value: 0.0 });
        s.design = Design::RepeatedCrossSection;
        let rings = RingSpec::new(0.75, 1.5).unwrap();
        let panel = oracle_ring_expectation(&s, rings).unwrap();
        assert_eq!(oracle_rc_expectation(&s, rings).unwrap(), panel);

        s.rc_composition_drift = 0.5;
        s.mu = MuLaw { mean: 2.0, sd: 1.0 };
        let rc = oracle_rc_expectation(&s, rings).unwrap();
        // E[1 - F | D <= .75] - E[1 - F | D > .75] = 0.75 - 0.25
        assert!((rc.composition - 0.25).abs() < 1e-8);
        assert!((rc.total - (panel.total + rc.composition)).abs() < 1e-15);

        s.tau = TauFn::Zero;
        let pure = oracle_rc_expectation(&s, rings).unwrap();
        assert!((pure.total - 0.25).abs() < 1e-8);
    }

    #[test]
    fn bin_oracle_examples() {
        let s = lot(LambdaFn::Constant { value: 0.3 });
        let b = oracle_bin_means(&s, &[0.0, 0.15, 0.75, 0.9, 1.5]).unwrap();
        assert!((b[0].tau - 0.9).abs() < 1e-8);
        assert!((b[1].tau - 0.4).abs() < 1e-8);
        assert_eq!(b[2].tau, 0.0);
        assert!(b.iter().all(|o| (o.lambda - 0.3).abs() < 1e-12));
        let t = curve_targets(&b);
        assert!((t[0] - 0.9).abs() < 1e-8);
        assert_eq!(*t.last().unwrap(), 0.0);

        let mut z = s.clone();
        z.tau = TauFn::Zero;
        assert!(oracle_bin_means(&z, &[0.0, 0.5, 1.0])
            .unwrap()
            .iter()
            .all(|o| o.tau == 0.0));
    }

    #[test]
    fn idiosyncratic_noise_uncorrelated_with_distance() {
        let spec = DgpSpec {
            idio_te_sd: 0.3,
            idio_trend_sd: 0.2,
            ..DgpSpec::vacant_lot(100_000, 11)
        };
        let obs = generate(&spec).unwrap();
        let mut d = Vec::new();
        let mut e = Vec::new();
        for pair in obs.chunks(2) {
            let Location::Distance(x) = pair[0].location else {
                panic!()
            };
            let systematic = spec.tau.eval(x) + spec.lambda.eval(x);
            d.push(x);
            e.push(pair[1].outcome - pair[0].outcome - systematic);
        }
        let n = d.len() as f64;
        let (md, me) = (d.iter().sum::<f64>() / n, e.iter().sum::<f64>() / n);
        let cov: f64 = d.iter().zip(&e).map(|(a, b)| (a - md) * (b - me)).sum();
        let vd: f64 = d.iter().map(|a| (a - md).powi(2)).sum();
        let ve: f64 = e.iter().map(|b| (b - me).powi(2)).sum();
        let rho = cov / (vd * ve).sqrt();
        assert!(rho.abs() < 0.05, "{rho}");
    }
}
