//! Command-line front end. Exit codes: 0 success, 1 estimation or data
//! error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::curve::{
    aggregate_ate, tail_zero_check, tau_curve_panel, tau_curve_rc, BinChoice, Cutoff, TauCurve,
    DEFAULT_TAIL_FRACTION,
};
use crate::data::{compute_distances, first_differences, resolve_records, Metric, Point, Record};
use crate::dgp::{generate, DgpSpec};
use crate::error::Error;
use crate::io::{
    ingest, sha256_hex, write_curve_csv, write_dataset, write_replications, Dataset, Report,
};
use crate::mc::{monte_carlo, EstimatorChoice};
use crate::ring::{ring_estimate_panel_with, ring_estimate_rc_with, Design, RingOptions, RingSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RINGCURVE_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ESTIMATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ringcurve",
    version,
    about = "Spatial ring and treatment-effect-curve estimators"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance from each unit to the treatment point.
    Distances(DistancesArgs),
    /// Two-ring difference-in-differences.
    Ring(RingArgs),
    /// Partitioned treatment-effect curve.
    Curve(CurveArgs),
    /// Draw a synthetic dataset.
    Simulate(SimulateArgs),
    /// Monte Carlo study of an estimator against the oracles.
    Mc(McArgs),
}

#[derive(Debug, Args)]
struct OutDir {
    /// Directory for output files.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Dataset CSV.
    #[arg(long)]
    input: PathBuf,
    /// Treatment location; required when the input has coordinates.
    #[arg(long, requires = "treatment_y", allow_hyphen_values = true)]
    treatment_x: Option<f64>,
    #[arg(long, requires = "treatment_x", allow_hyphen_values = true)]
    treatment_y: Option<f64>,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: Metric,
}

impl InputArgs {
    fn treatment(&self) -> Option<Point> {
        Some(Point::new(self.treatment_x?, self.treatment_y?))
    }

    fn config(&self) -> Value {
        json!({
            "input": self.input.display().to_string(),
            "treatment": self.treatment(),
            "metric": self.metric,
        })
    }
}

#[derive(Debug, Args)]
struct DistancesArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct RingArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Outer edge of the treated ring.
    #[arg(long)]
    dt: f64,
    /// Outer edge of the control ring.
    #[arg(long)]
    dc: f64,
    #[arg(long, value_enum, default_value = "panel")]
    design: Design,
    /// Smallest admissible ring or cell size.
    #[arg(long, default_value_t = 2)]
    min_cell: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Outer edge of the estimation sample.
    #[arg(long)]
    dc: f64,
    /// Bin count, or `auto`.
    #[arg(long, default_value = "auto")]
    bins: BinChoice,
    #[arg(long, value_enum, default_value = "panel")]
    design: Design,
    /// Share of non-anchor bins examined by the tail check.
    #[arg(long, default_value_t = DEFAULT_TAIL_FRACTION)]
    tail_fraction: f64,
    /// Distance bounding the bins averaged into the overall effect, or `auto`.
    #[arg(long, default_value = "auto")]
    affected_cutoff: Cutoff,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// TOML data-generating process; defaults to the vacant-lot example.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the number of units.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    design: Option<Design>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset path (default: `simulated.csv` in the output directory).
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum EstimatorKind {
    Ring,
    Curve,
}

#[derive(Debug, Args)]
struct McArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    reps: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to `ring` when `--dt` is given, `curve` otherwise.
    #[arg(long, value_enum)]
    estimator: Option<EstimatorKind>,
    #[arg(long)]
    dt: Option<f64>,
    /// Defaults to the upper end of the distance support.
    #[arg(long)]
    dc: Option<f64>,
    #[arg(long, default_value = "auto")]
    bins: BinChoice,
    #[command(flatten)]
    out: OutDir,
}

/// Failure of a command, split by exit code.
enum Failure {
    Usage(String),
    Estimation(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Estimation(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Estimation(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Usage(format!("cannot start {t} threads: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Estimation(e)) => {
            let body = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            EXIT_ESTIMATION
        }
    }
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Distances(a) => cmd_distances(a),
        Command::Ring(a) => cmd_ring(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mc(a) => cmd_mc(a),
    }
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn emit_report(dir: &Path, name: &str, report: &Report) -> CmdResult {
    let text = report.to_json()?;
    let path = write(dir, name, text.as_bytes())?;
    print!("{text}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn load(input: &InputArgs) -> Result<(Dataset, Vec<Record>), Failure> {
    let data = ingest(&input.input)?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    let records = resolve_records(&data.observations, input.treatment(), input.metric)?;
    Ok((data, records))
}

fn cmd_distances(a: DistancesArgs) -> CmdResult {
    let treatment = a
        .input
        .treatment()
        .ok_or_else(|| Failure::Usage("--treatment-x and --treatment-y are required".into()))?;
    let data = ingest(&a.input.input)?;
    let sample = compute_distances(&data.observations, treatment, a.input.metric)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["unit_id", "dist"]).map_err(Error::from)?;
    for (id, d) in sample.unit_ids().iter().zip(sample.distances()) {
        w.write_record([id.as_str(), &crate::io::fmt_num(*d)])
            .map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let path = write(&a.out.out_dir, "distances.csv", &bytes)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_ring(a: RingArgs) -> CmdResult {
    let rings = RingSpec::new(a.dt, a.dc).map_err(|e| match e {
        Error::InvalidSpec(m) => Failure::Usage(m),
        other => Failure::Estimation(other),
    })?;
    if a.min_cell < 2 {
        return Err(Failure::Usage("--min-cell must be at least 2".into()));
    }
    let (data, records) = load(&a.input)?;
    let opts = RingOptions {
        min_cell: a.min_cell,
    };
    let est = match a.design {
        Design::Panel => ring_estimate_panel_with(&first_differences(&records)?, rings, opts)?,
        Design::RepeatedCrossSection => ring_estimate_rc_with(&records, rings, opts)?,
    };
    let mut report = Report::new("ring");
    report.input_digest = Some(data.digest);
    report.config = json!({
        "data": a.input.config(),
        "dt": a.dt,
        "dc": a.dc,
        "design": a.design,
        "min_cell": a.min_cell,
    });
    report.estimates = json!({
        "beta1": est.beta1,
        "beta0": est.beta0(),
        "group_means": est.group_means,
    });
    report.standard_errors = json!({ "beta1": est.se });
    report.diagnostics = json!({
        "n_treated": est.n_treated,
        "n_control": est.n_control,
        "dropped_beyond_dc": est.dropped,
        "location_mode": data.mode,
        "warnings": data.warnings,
    });
    emit_report(&a.out.out_dir, "ring_report.json", &report)
}

fn estimate_curve(
    design: Design,
    records: &[Record],
    d_c: f64,
    bins: BinChoice,
) -> crate::error::Result<TauCurve> {
    match design {
        Design::Panel => tau_curve_panel(&first_differences(records)?, d_c, bins),
        Design::RepeatedCrossSection => tau_curve_rc(records, d_c, bins),
    }
}

fn outcome_json<T: serde::Serialize>(r: crate::error::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": { "kind": e.kind(), "message": e.to_string() } }),
    }
}

fn cmd_curve(a: CurveArgs) -> CmdResult {
    if !(a.dc > 0.0) {
        return Err(Failure::Usage("--dc must be positive".into()));
    }
    if !(a.tail_fraction > 0.0 && a.tail_fraction <= 1.0) {
        return Err(Failure::Usage("--tail-fraction must be in (0, 1]".into()));
    }
    let (data, records) = load(&a.input)?;
    let curve = estimate_curve(a.design, &records, a.dc, a.bins)?;
    let ate = aggregate_ate(&curve, a.affected_cutoff);
    let tail = tail_zero_check(&curve, a.tail_fraction);

    let mut report = Report::new("curve");
    report.input_digest = Some(data.digest);
    report.config = json!({
        "data": a.input.config(),
        "dc": a.dc,
        "bins": a.bins.to_string(),
        "design": a.design,
        "tail_fraction": a.tail_fraction,
        "affected_cutoff": a.affected_cutoff,
    });
    report.estimates = json!({
        "L": curve.n_bins,
        "lambda_hat": curve.lambda_hat,
        "tau_bar": ate.as_ref().ok().map(|x| x.tau_bar),
        "bins": curve.bins,
    });
    report.standard_errors = json!({
        "lambda_hat": curve.lambda_se,
        "tau_bar": ate.as_ref().ok().map(|x| x.se),
        "tau_hat": curve.bins.iter().map(|b| b.se).collect::<Vec<_>>(),
    });
    report.diagnostics = json!({
        "n": curve.n,
        "dropped_beyond_dc": curve.dropped,
        "auto_bins": curve.auto_bins,
        "aggregate": outcome_json(ate),
        "tail_check": outcome_json(tail),
        "location_mode": data.mode,
        "warnings": data.warnings,
    });
    let mut csv = Vec::new();
    write_curve_csv(&mut csv, &curve)?;
    let path = write(&a.out.out_dir, "curve_bins.csv", &csv)?;
    eprintln!("wrote {}", path.display());
    emit_report(&a.out.out_dir, "curve_report.json", &report)
}

fn load_spec(a: &SpecArgs) -> Result<DgpSpec, Failure> {
    let mut spec = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str::<DgpSpec>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => DgpSpec::vacant_lot(2000, 0),
    };
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(d) = a.design {
        spec.design = d;
    }
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(spec)
}

fn spec_digest(spec: &DgpSpec) -> Result<String, Failure> {
    Ok(sha256_hex(
        serde_json::to_string(spec).map_err(Error::from)?.as_bytes(),
    ))
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let mut spec = load_spec(&a.spec)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let obs = generate(&spec)?;
    let mut buf = Vec::new();
    write_dataset(&mut buf, &obs)?;
    let path = match &a.output {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, &buf)?;
            p.clone()
        }
        None => write(&a.out.out_dir, "simulated.csv", &buf)?,
    };
    eprintln!("wrote {}", path.display());

    let mut report = Report::new("simulate");
    report.input_digest = Some(spec_digest(&spec)?);
    report.seed = Some(spec.seed);
    report.config = serde_json::to_value(&spec).map_err(Error::from)?;
    report.estimates = json!({ "rows": obs.len(), "dataset_sha256": sha256_hex(&buf) });
    emit_report(&a.out.out_dir, "simulate_report.json", &report)
}

fn cmd_mc(a: McArgs) -> CmdResult {
    let spec = load_spec(&a.spec)?;
    if a.reps < 2 {
        return Err(Failure::Usage("--reps must be at least 2".into()));
    }
    let dc = a.dc.unwrap_or_else(|| spec.distance_law.support().1);
    let kind = a.estimator.unwrap_or(match a.dt {
        Some(_) => EstimatorKind::Ring,
        None => EstimatorKind::Curve,
    });
    let estimator = match kind {
        EstimatorKind::Ring => {
            let dt = a
                .dt
                .ok_or_else(|| Failure::Usage("--dt is required for the ring estimator".into()))?;
            RingSpec::new(dt, dc).map_err(|e| Failure::Usage(e.to_string()))?;
            EstimatorChoice::Ring { d_t: dt, d_c: dc }
        }
        EstimatorKind::Curve => {
            if !(dc > 0.0) {
                return Err(Failure::Usage("--dc must be positive".into()));
            }
            EstimatorChoice::Curve {
                d_c: dc,
                bins: a.bins,
            }
        }
    };
    let (mc, reps) = monte_carlo(&spec, estimator, a.reps, a.seed)?;

    let mut csv = Vec::new();
    write_replications(&mut csv, &reps)?;
    let path = write(&a.out.out_dir, "mc_replications.csv", &csv)?;
    eprintln!("wrote {}", path.display());

    let mut report = Report::new("mc");
    report.input_digest = Some(spec_digest(&spec)?);
    report.seed = Some(a.seed);
    report.config = json!({
        "dgp": spec,
        "estimator": estimator,
        "replications": a.reps,
    });
    report.estimates = json!({
        "targets": mc.targets.iter().map(|t| json!({
            "target": t.target,
            "mean_estimate": t.mean_estimate,
            "mean_oracle": t.mean_oracle,
            "bias": t.bias,
            "rmse": t.rmse,
        })).collect::<Vec<_>>(),
        "ring_oracle": mc.ring_oracle,
    });
    report.standard_errors = json!(mc
        .targets
        .iter()
        .map(|t| (t.target.clone(), json!(t.mc_se)))
        .collect::<serde_json::Map<_, _>>());
    report.diagnostics = json!({
        "failures": mc.failures,
        "ci_coverage": mc.targets.iter()
            .map(|t| (t.target.clone(), json!(t.ci_coverage)))
            .collect::<serde_json::Map<_, _>>(),
        "max_abs_error": mc.max_abs_error,
        "replications_sha256": sha256_hex(&csv),
    });
    emit_report(&a.out.out_dir, "mc_report.json", &report)
}
