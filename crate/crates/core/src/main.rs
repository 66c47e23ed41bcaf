use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bundlechoice::ccp::CcpHyper;
use bundlechoice::dgp::{choice_shares, simulate, CovariateScheme, DgpConfig, Design};
use bundlechoice::estimators::{
    estimate_fe_logit, estimate_msm_parametric, estimate_semi_nobundle, estimate_set, estimate_two_step, AxisSpec,
    GridSpec, MsmOptions, SemiNoBundleOptions, TwoStepOptions,
};
use bundlechoice::harness::io::{load_json, load_panel, save_json, save_metrics_csv, save_panel, to_json};
use bundlechoice::harness::{run_monte_carlo, EstimatorKind, RunConfig};
use bundlechoice::sharpness::{rationalize, RationalizeInstance};
use bundlechoice::testing::{eta_bounds, test_complementarity, test_substitutability, TestOptions, ZBound, ZCell};
use bundlechoice::{Error, Result};

#[derive(Parser)]
#[command(name = "bundlechoice", version, about = "Panel bundle choice: simulation, estimation and testing")]
struct Cli {
    /// Worker threads; overrides BUNDLECHOICE_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Add wall-clock runtime_ms to the JSON output.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel and write it as CSV.
    Simulate(SimulateArgs),
    /// Point-estimate θ or β from a panel.
    Estimate(EstimateArgs),
    /// Grid set estimate of the identified set.
    Set(SetArgs),
    /// Test complementarity or substitutability.
    Test(TestArgs),
    /// Bounds on the share of individuals with complementary goods.
    Bounds(BoundsArgs),
    /// Monte Carlo replications of one design.
    Montecarlo(MonteCarloArgs),
    /// Check whether exact CCPs are rationalizable at a parameter.
    Rationalize(RationalizeArgs),
}

#[derive(Args)]
struct Output {
    /// JSON output file; stdout when absent.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// DGP config JSON, or a run config JSON with a `dgp` field.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    design: u8,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Scheme::Gaussian)]
    scheme: Scheme,
    /// Panel CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Gaussian,
    Bounded,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    TwoStep,
    Msm,
    FeLogit,
    SemiNb,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulation draws for msm.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SetArgs {
    #[arg(long)]
    data: PathBuf,
    /// lo:hi:intervals, applied to every free coordinate.
    #[arg(long, default_value = "-5:5:100", allow_hyphen_values = true)]
    grid: String,
    /// Override the acceptance constant ĉ_N.
    #[arg(long)]
    c_hat: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum HypothesisArg {
    #[value(alias = "complements")]
    Comp,
    #[value(alias = "substitutes")]
    Sub,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    hypothesis: HypothesisArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict to z_k in [lo, hi], given as k:lo:hi with k counted from 1. Repeatable.
    #[arg(long = "z-cell", allow_hyphen_values = true)]
    z_cell: Vec<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct MonteCarloArgs {
    /// Run config JSON; overrides the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    design: u8,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    t: usize,
    #[arg(long, default_value_t = 100)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Scheme::Gaussian)]
    scheme: Scheme,
    /// Comma-separated estimators.
    #[arg(long, default_value = "two-step,msm,fe-logit,semi-nb")]
    estimators: String,
    /// Metrics table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RationalizeArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    output: Output,
}

fn scheme(s: Scheme) -> CovariateScheme {
    match s {
        Scheme::Gaussian => CovariateScheme::Gaussian,
        Scheme::Bounded => CovariateScheme::Bounded,
    }
}

fn dgp_from_flags(design: u8, n: usize, t: usize, seed: u64, s: Scheme) -> Result<DgpConfig> {
    let mut cfg = DgpConfig::standard(Design::try_from(design)?, n, t, seed);
    cfg.covariate_scheme = scheme(s);
    Ok(cfg)
}

fn load_dgp(path: &Path) -> Result<DgpConfig> {
    let value: Value = load_json(path)?;
    let dgp = value.get("dgp").cloned().unwrap_or(value);
    Ok(serde_json::from_value(dgp)?)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad number {s:?} in {what}")))
}

fn parse_grid(spec: &str, dims: usize) -> Result<GridSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!("grid must be lo:hi:intervals, got {spec:?}")));
    }
    let lo = parse_f64(parts[0], "grid")?;
    let hi = parse_f64(parts[1], "grid")?;
    let intervals: usize =
        parts[2].trim().parse().map_err(|_| Error::InvalidArgument(format!("bad interval count {:?}", parts[2])))?;
    if !(lo <= hi) || intervals == 0 {
        return Err(Error::InvalidArgument(format!("grid needs lo <= hi and intervals >= 1, got {spec:?}")));
    }
    Ok(GridSpec { axes: vec![AxisSpec { lo, hi, intervals }; dims], c_hat: None })
}

fn parse_cell(specs: &[String]) -> Result<ZCell> {
    let mut bounds = Vec::new();
    for s in specs {
        let parts: Vec<&str> = s.split(':').collect();
        let k: usize = match parts.as_slice() {
            [k, _, _] => k.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad z-cell {s:?}")))?,
            _ => return Err(Error::InvalidArgument(format!("z-cell must be k:lo:hi, got {s:?}"))),
        };
        if k == 0 {
            return Err(Error::InvalidArgument("z-cell coordinates count from 1".into()));
        }
        bounds.push(ZBound { coordinate: k - 1, lo: parse_f64(parts[1], "z-cell")?, hi: parse_f64(parts[2], "z-cell")? });
    }
    Ok(ZCell { bounds })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Value> {
    let cfg = match &a.config {
        Some(p) => load_dgp(p)?,
        None => dgp_from_flags(a.design, a.n, a.t, a.seed, a.scheme)?,
    };
    let sim = simulate(&cfg)?;
    save_panel(&sim.panel, &a.out)?;
    Ok(json!({
        "task": "simulate",
        "config": cfg,
        "panel": a.out,
        "shares": choice_shares(&sim.panel),
    }))
}

fn cmd_estimate(a: &EstimateArgs) -> Result<Value> {
    let panel = load_panel(&a.data)?;
    let ccp = CcpHyper::default().with_seed(a.seed);
    let (method, result) = match a.method {
        Method::TwoStep => {
            let opts = TwoStepOptions { ccp, ..TwoStepOptions::default() };
            ("two-step", to_value(&estimate_two_step(&panel, &opts)?)?)
        }
        Method::Msm => {
            let opts = MsmOptions { seed: a.seed, draws: a.draws, ..MsmOptions::default() };
            ("msm", to_value(&estimate_msm_parametric(&panel, &opts)?)?)
        }
        Method::FeLogit => ("fe-logit", to_value(&estimate_fe_logit(&panel, &Default::default())?)?),
        Method::SemiNb => {
            let opts = SemiNoBundleOptions { ccp, ..SemiNoBundleOptions::default() };
            ("semi-nb", to_value(&estimate_semi_nobundle(&panel, &opts)?)?)
        }
    };
    Ok(json!({ "task": "estimate", "method": method, "n": panel.n(), "estimate": result }))
}

fn cmd_set(a: &SetArgs) -> Result<Value> {
    let panel = load_panel(&a.data)?;
    let mut grid = parse_grid(&a.grid, panel.d_x() + panel.d_z() - 2)?;
    grid.c_hat = a.c_hat;
    let est = estimate_set(&panel, &grid, &CcpHyper::default().with_seed(a.seed))?;
    Ok(json!({
        "task": "set",
        "n": panel.n(),
        "grid": est.grid,
        "c_hat": est.c_hat,
        "a_n": est.a_n,
        "min_value": est.min_value,
        "threshold": est.threshold,
        "accepted_count": est.accepted_count(),
        "bounds": est.bounds,
        "accepted": est.accepted_thetas(),
    }))
}

fn cmd_test(a: &TestArgs) -> Result<Value> {
    let panel = load_panel(&a.data)?;
    let cell = parse_cell(&a.z_cell)?;
    let opts = TestOptions {
        alpha: a.alpha,
        bootstrap_draws: a.bootstrap,
        seed: a.seed,
        ccp: CcpHyper::default().with_seed(a.seed),
        ..TestOptions::default()
    };
    let result = match a.hypothesis {
        HypothesisArg::Comp => test_complementarity(&panel, &cell, &opts)?,
        HypothesisArg::Sub => test_substitutability(&panel, &cell, &opts)?,
    };
    Ok(json!({ "task": "test", "cell": cell, "result": result }))
}

fn cmd_bounds(a: &BoundsArgs) -> Result<Value> {
    let panel = load_panel(&a.data)?;
    let b = eta_bounds(&panel, &CcpHyper::default().with_seed(a.seed))?;
    Ok(json!({ "task": "bounds", "n": panel.n(), "bounds": b }))
}

fn cmd_montecarlo(a: &MonteCarloArgs) -> Result<Value> {
    let cfg = match &a.config {
        Some(p) => load_json::<RunConfig>(p)?,
        None => {
            let estimators =
                a.estimators.split(',').map(|s| s.parse::<EstimatorKind>()).collect::<Result<Vec<_>>>()?;
            RunConfig::montecarlo(dgp_from_flags(a.design, a.n, a.t, 0, a.scheme)?, estimators, a.b, a.seed)
        }
    };
    let report = run_monte_carlo(&cfg)?;
    if let Some(p) = &a.csv {
        save_metrics_csv(&report.rows, p)?;
    }
    Ok(json!({ "task": "montecarlo", "config": cfg, "report": report }))
}

fn cmd_rationalize(a: &RationalizeArgs) -> Result<Value> {
    let instance: RationalizeInstance = load_json(&a.instance)?;
    Ok(json!({ "task": "rationalize", "verdict": rationalize(&instance)? }))
}

fn threads(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("BUNDLECHOICE_THREADS") {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("BUNDLECHOICE_THREADS must be a positive integer, got {s:?}"))),
        _ => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let start = Instant::now();
    let (mut value, json_path) = match &cli.command {
        Command::Simulate(a) => (cmd_simulate(a)?, &a.output.json),
        Command::Estimate(a) => (cmd_estimate(a)?, &a.output.json),
        Command::Set(a) => (cmd_set(a)?, &a.output.json),
        Command::Test(a) => (cmd_test(a)?, &a.output.json),
        Command::Bounds(a) => (cmd_bounds(a)?, &a.output.json),
        Command::Montecarlo(a) => (cmd_montecarlo(a)?, &a.output.json),
        Command::Rationalize(a) => (cmd_rationalize(a)?, &a.output.json),
    };
    if cli.timing {
        if let Value::Object(m) = &mut value {
            m.insert("runtime_ms".into(), json!(start.elapsed().as_millis() as u64));
        }
    }
    match json_path {
        Some(p) => save_json(&value, p),
        None => {
            print!("{}", to_json(&value)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
