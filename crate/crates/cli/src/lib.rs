//! Command-line front end: `solve`, `sweep`, `warmstart`, `bench` and
//! `match`, each writing one CSV table.

pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RawConfig};
use csv::Field;
use wsp_core::baselines::{self, ExhaustiveMode};
use wsp_core::matching::{self, PairingEnv};
use wsp_core::model::{self, LinkPair, Metrics};
use wsp_core::newton::{self, SolveResult};
use wsp_core::sim::{self, BenchConfig, DriftConfig, MonteCarloConfig, Scenario, Scheme};
use wsp_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "wsp",
    version,
    about = "Minimum weighted-sum-power allocation experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Power grid step in dB.
    #[arg(long = "grid-dp", global = true)]
    grid_dp: Option<f64>,
    /// Time-split grid step.
    #[arg(long = "grid-dtheta", global = true)]
    grid_dtheta: Option<f64>,
    /// Comma-separated scheme names.
    #[arg(long, global = true)]
    schemes: Option<String>,
    #[arg(long, global = true)]
    runs: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Allocate one link pair.
    Solve,
    /// Monte Carlo sweep over the primary QoS target.
    Sweep,
    /// Newton iteration counts under slowly drifting channels.
    Warmstart,
    /// Wall-clock comparison of the schemes.
    Bench,
    /// Pair primary and secondary links by minimum total WSP.
    Match,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Infeasible(String),
    Solver(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Library errors from validating inputs are configuration problems;
/// anything else is a solver failure.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::InvalidScenario(_) => Failure::Config(e.to_string()),
            Error::Infeasible(_) => Failure::Infeasible(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            EXIT_INFEASIBLE
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            EXIT_SOLVER
        }
    }
}

fn load_config(c: &Common) -> Result<RawConfig, ConfigError> {
    let mut raw = match &c.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    if let Some(s) = c.seed {
        raw.set("seed", &s.to_string())?;
    }
    if let Some(x) = c.grid_dp {
        raw.set("grid_dp", &x.to_string())?;
    }
    if let Some(x) = c.grid_dtheta {
        raw.set("grid_dtheta", &x.to_string())?;
    }
    if let Some(s) = &c.schemes {
        raw.set("schemes", s)?;
    }
    if let Some(n) = c.runs {
        raw.set("runs", &n.to_string())?;
    }
    Ok(raw)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let raw = load_config(&cli.common)?;
    let table = match cli.command {
        Command::Solve => solve(&raw),
        Command::Sweep => sweep(&raw),
        Command::Warmstart => warmstart(&raw),
        Command::Bench => bench(&raw),
        Command::Match => pair_links(&raw),
    };
    // the infeasible record of `solve` is still written before exiting
    let (text, status) = match table {
        Ok(t) => (t, Ok(())),
        Err((Some(t), f)) => (t, Err(f)),
        Err((None, f)) => return Err(f),
    };
    emit(&cli.common, &text)?;
    status
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Solver(format!("cannot write output: {e}"));
    match &c.out {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(io),
    }
}

type Table = Result<String, (Option<String>, Failure)>;

fn fail<E: Into<Failure>>(e: E) -> (Option<String>, Failure) {
    (None, e.into())
}

fn link_pair(raw: &RawConfig) -> Result<LinkPair, Failure> {
    let grid = raw.grid()?;
    let qos = raw.qos()?;
    let weights = raw.weights()?;
    if let Some(gains) = raw.direct_gains()? {
        return Ok(LinkPair::new(gains, weights, qos, grid));
    }
    let [pt_pr, pt_sr, sr_pr, st_sr] = raw.distances_of_pair();
    let [pt, pr, st, sr] = sim::triangle_layout(pt_pr, pt_sr, sr_pr, st_sr)?;
    let scenario = Scenario {
        pt,
        pr,
        st,
        sr,
        path_loss: raw.path_loss()?,
        weights,
        qos,
        grid,
    };
    Ok(scenario.link_pair()?)
}

fn metric_fields(a: &model::Allocation, m: &Metrics) -> Vec<Field> {
    [a.theta, a.p_p, a.p_r, a.p_s, m.wsp, m.s_p, m.s_s, m.ee]
        .into_iter()
        .map(Field::Num)
        .collect()
}

fn solve(raw: &RawConfig) -> Table {
    let pair = link_pair(raw).map_err(|f| (None, f))?;
    let cfg = raw.newton().map_err(fail)?;
    let schemes = raw.schemes(&[Scheme::Proposed]).map_err(fail)?;
    if newton::feasible_theta_interval(&pair).is_none() {
        let text = csv::render(
            &["status", "reason"],
            &[vec![
                Field::Text("infeasible".into()),
                Field::Text("empty_theta_interval".into()),
            ]],
        );
        return Err((
            Some(text),
            Failure::Infeasible("no time split meets both QoS targets".into()),
        ));
    }

    type Row = (&'static str, String, Vec<Field>);
    let row_of = |scheme: Scheme, kind: &str, a: &model::Allocation| -> Result<Row, Failure> {
        let m = model::metrics(&pair, a)?;
        let mut row = vec![Field::Text(scheme.name().into()), Field::Text(kind.into())];
        row.extend(metric_fields(a, &m));
        row.push(Field::Int(model::is_feasible(&pair, a) as u64));
        Ok((scheme.name(), kind.to_string(), row))
    };
    let mut rows: Vec<Row> = Vec::new();
    for scheme in schemes {
        let result: Result<SolveResult, Error> = match scheme {
            Scheme::Proposed => newton::allocate(&pair, &cfg),
            Scheme::Kkt => baselines::kkt_alloc(&pair),
            Scheme::Exhaustive => baselines::exhaustive_optimal(&pair, ExhaustiveMode::Reduced),
            Scheme::EeMax => baselines::exhaustive_max_ee(&pair),
            Scheme::Random => {
                let draw = baselines::random_alloc(&pair, raw.seed());
                rows.push(row_of(scheme, "grid", &draw.allocation).map_err(|f| (None, f))?);
                continue;
            }
        };
        match result {
            Ok(r) => {
                if matches!(scheme, Scheme::Proposed | Scheme::Kkt) {
                    rows.push(row_of(scheme, "continuous", &r.continuous).map_err(|f| (None, f))?);
                }
                if let Some(a) = r.snapped {
                    rows.push(row_of(scheme, "grid", &a).map_err(|f| (None, f))?);
                }
            }
            Err(Error::Infeasible(_)) => {
                let mut row = vec![
                    Field::Text(scheme.name().into()),
                    Field::Text("infeasible".into()),
                ];
                row.extend((0..8).map(|_| Field::Num(f64::NAN)));
                row.push(Field::Int(0));
                rows.push((scheme.name(), "infeasible".into(), row));
            }
            Err(e) => return Err(fail(e)),
        }
    }
    rows.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    Ok(csv::render(
        &[
            "scheme",
            "allocation",
            "theta",
            "p_p",
            "p_r",
            "p_s",
            "wsp",
            "s_p",
            "s_s",
            "ee",
            "feasible",
        ],
        &rows.into_iter().map(|r| r.2).collect::<Vec<_>>(),
    ))
}

fn sweep(raw: &RawConfig) -> Table {
    let d = MonteCarloConfig::default();
    let cfg = MonteCarloConfig {
        runs: raw.runs(),
        radius: raw.radius(),
        q_p: raw.q_p_sweep().unwrap_or(d.q_p),
        q_s: raw.qos().map_err(fail)?.q_s,
        seed: raw.seed(),
        schemes: raw.schemes(&d.schemes).map_err(fail)?,
        path_loss: raw.path_loss().map_err(fail)?,
        weights: raw.weights().map_err(fail)?,
        grid: raw.grid().map_err(fail)?,
        newton: raw.newton().map_err(fail)?,
    };
    let report = sim::monte_carlo(&cfg).map_err(fail)?;
    let mut points = report.points.clone();
    points.sort_by(|a, b| {
        a.q_p
            .total_cmp(&b.q_p)
            .then_with(|| a.scheme.name().cmp(b.scheme.name()))
    });
    let rows: Vec<Vec<Field>> = points
        .iter()
        .map(|p| {
            vec![
                Field::Num(p.q_p),
                Field::Text(p.scheme.name().into()),
                Field::Num(p.mean_wsp),
                Field::Num(p.mean_sp),
                Field::Num(p.mean_ss),
                Field::Num(p.mean_ee),
                Field::Num(p.feasible_rate),
            ]
        })
        .collect();
    Ok(csv::render(
        &[
            "qp",
            "scheme",
            "mean_wsp",
            "mean_sp",
            "mean_ss",
            "mean_ee",
            "feasible_rate",
        ],
        &rows,
    ))
}

fn warmstart(raw: &RawConfig) -> Table {
    let d = DriftConfig::default();
    let cfg = DriftConfig {
        subframes: raw.subframes(),
        distances: raw.distances().unwrap_or(d.distances),
        sigma_db: raw.sigma_db(),
        rho: raw.rho(),
        strategies: raw.strategies(&d.strategies).map_err(fail)?,
        seed: raw.seed(),
        qos: raw.qos().map_err(fail)?,
        path_loss: raw.path_loss().map_err(fail)?,
        grid: raw.grid().map_err(fail)?,
        newton: raw.newton().map_err(fail)?,
    };
    let report = sim::warmstart_experiment(&cfg).map_err(fail)?;
    let mut rows: Vec<(f64, String, Vec<Field>)> = Vec::new();
    for &distance in &cfg.distances {
        for s in &cfg.strategies {
            let name = s.to_string();
            let (med, p90) = report
                .get(distance, &name)
                .map_or((f64::NAN, f64::NAN), |p| (p.median, p.p90));
            rows.push((
                distance,
                name.clone(),
                vec![
                    Field::Num(distance),
                    Field::Text(name),
                    Field::Num(med),
                    Field::Num(p90),
                ],
            ));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(csv::render(
        &["distance_m", "strategy", "median_iters", "p90_iters"],
        &rows.into_iter().map(|r| r.2).collect::<Vec<_>>(),
    ))
}

fn bench(raw: &RawConfig) -> Table {
    let d = BenchConfig::default();
    let cfg = BenchConfig {
        distances: raw.distances().unwrap_or(d.distances),
        repeats: raw.repeats(),
        warmup: raw.warmup(),
        schemes: raw.schemes(&d.schemes).map_err(fail)?,
        qos: raw.qos().map_err(fail)?,
        path_loss: raw.path_loss().map_err(fail)?,
        grid: raw.grid().map_err(fail)?,
        newton: raw.newton().map_err(fail)?,
        scaling_grids: d.scaling_grids,
    };
    let report = sim::bench(&cfg).map_err(fail)?;
    for s in &report.scaling {
        eprintln!(
            "exhaustive P={} Q={}: {} ms",
            s.powers,
            s.thetas,
            csv::fmt_g9(s.median_ms)
        );
    }
    if let Some(slope) = report.scaling_slope {
        eprintln!("log-log slope against P^3 Q: {}", csv::fmt_g9(slope));
    }
    let mut points = report.points.clone();
    points.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.scheme.name().cmp(b.scheme.name()))
    });
    let rows: Vec<Vec<Field>> = points
        .iter()
        .map(|p| {
            vec![
                Field::Num(p.distance),
                Field::Text(p.scheme.name().into()),
                Field::Num(p.median_ms),
                Field::Num(p.ratio_vs_proposed),
            ]
        })
        .collect();
    Ok(csv::render(
        &["distance_m", "scheme", "median_ms", "ratio_vs_proposed"],
        &rows,
    ))
}

fn pair_links(raw: &RawConfig) -> Table {
    let qos = raw.qos().map_err(fail)?;
    let (primaries, secondaries) = if raw.primaries().is_empty() && raw.secondaries().is_empty() {
        let (m, n) = raw.match_sizes();
        matching::random_links(m, n, raw.radius(), qos, raw.seed())
    } else {
        (raw.primaries().to_vec(), raw.secondaries().to_vec())
    };
    if primaries.is_empty() || secondaries.is_empty() {
        return Err(fail(ConfigError::Invalid(
            "matching needs at least one primary and one secondary link".into(),
        )));
    }
    let env = PairingEnv {
        path_loss: raw.path_loss().map_err(fail)?,
        weights: raw.weights().map_err(fail)?,
        grid: raw.grid().map_err(fail)?,
        newton: raw.newton().map_err(fail)?,
    };
    let costs = matching::pairwise_cost_matrix(&primaries, &secondaries, &env).map_err(fail)?;
    let assignment = matching::kuhn_munkres(&costs);
    let mut rows: Vec<(usize, Vec<Field>)> = assignment
        .pairs
        .iter()
        .map(|&(i, j, c)| {
            (
                i,
                vec![Field::Int(i as u64), Field::Int(j as u64), Field::Num(c)],
            )
        })
        .collect();
    for &i in &assignment.unmatched_rows {
        rows.push((
            i,
            vec![
                Field::Int(i as u64),
                Field::Text("none".into()),
                Field::Num(f64::NAN),
            ],
        ));
    }
    rows.sort_by_key(|r| r.0);
    Ok(csv::render(
        &["primary_id", "secondary_id", "cost_w"],
        &rows.into_iter().map(|r| r.1).collect::<Vec<_>>(),
    ))
}
