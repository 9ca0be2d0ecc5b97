use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::geometry::{PathLoss, Point, Scenario};
use crate::baselines::{self, ExhaustiveMode};
use crate::error::{Error, Result};
use crate::model::{self, LinkPair, Metrics, QosReq, ResourceGrid, Weights};
use crate::newton::{self, NewtonConfig, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Proposed,
    Kkt,
    Exhaustive,
    Random,
    /// Grid-exhaustive energy-efficiency maximization.
    EeMax,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::Kkt,
        Scheme::Exhaustive,
        Scheme::Random,
        Scheme::EeMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Kkt => "kkt",
            Scheme::Exhaustive => "exhaustive",
            Scheme::Random => "random",
            Scheme::EeMax => "ee_max",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub runs: usize,
    /// ST and SR are dropped uniformly in a disk of this radius; PT and PR
    /// sit at the two ends of a diameter.
    pub radius: f64,
    pub q_p: Vec<f64>,
    pub q_s: f64,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub path_loss: PathLoss,
    pub weights: Weights,
    pub grid: ResourceGrid,
    pub newton: NewtonConfig,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            runs: 1000,
            radius: 5000.0,
            q_p: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            q_s: 3.0,
            seed: 0,
            schemes: Scheme::ALL.to_vec(),
            path_loss: PathLoss::default(),
            weights: Weights::equal(),
            grid: ResourceGrid::from_dbm(-40.0, 23.0, 1.0, 0.005).expect("default grid"),
            newton: NewtonConfig::default(),
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidInput("runs must be at least 1".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.q_p.is_empty() || self.schemes.is_empty() {
            return Err(Error::InvalidInput("empty Q_p sweep or scheme list".into()));
        }
        for &q in self.q_p.iter().chain([&self.q_s]) {
            QosReq::new(q, q)?;
        }
        self.path_loss.validate()
    }
}

/// Aggregates of one scheme at one `Q_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub q_p: f64,
    pub scheme: Scheme,
    /// Share of all runs in which the scheme returned a QoS-feasible
    /// allocation.
    pub feasible_rate: f64,
    /// Runs entering the means below.
    pub samples: usize,
    pub mean_wsp: f64,
    pub median_wsp: f64,
    pub mean_sp: f64,
    pub mean_ss: f64,
    pub mean_ee: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub runs: usize,
    /// Runs in which every requested scheme except random found a feasible
    /// allocation at every `Q_p`. Means are taken over these runs only, so
    /// that points along the sweep average the same drops.
    pub common_support: usize,
    pub points: Vec<SchemeSummary>,
    /// Mean relative EE gap between the WSP-minimizing and EE-maximizing
    /// exhaustive schemes per `Q_p`, when both ran.
    pub ee_gap: Vec<(f64, f64)>,
}

impl SweepReport {
    pub fn get(&self, q_p: f64, scheme: Scheme) -> Option<&SchemeSummary> {
        self.points
            .iter()
            .find(|p| p.q_p == q_p && p.scheme == scheme)
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    metrics: Metrics,
    feasible: bool,
}

pub fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = 2.0 * PI * rng.gen::<f64>();
    Point::new(r * phi.cos(), r * phi.sin())
}

/// ST and SR uniformly on the disk; PT and PR at `(-r, 0)` and `(r, 0)`.
pub fn drop_nodes<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [Point; 4] {
    let st = uniform_in_disk(radius, rng);
    let sr = uniform_in_disk(radius, rng);
    [Point::new(-radius, 0.0), Point::new(radius, 0.0), st, sr]
}

fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn solved(pair: &LinkPair, res: Result<SolveResult>) -> Result<Option<Outcome>> {
    match res {
        Ok(r) => Ok(r
            .snapped
            .map(|a| -> Result<Outcome> {
                Ok(Outcome {
                    metrics: model::metrics(pair, &a)?,
                    feasible: model::is_feasible(pair, &a),
                })
            })
            .transpose()?
            .filter(|o| o.feasible)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Outcomes indexed `[q_p][scheme]`.
fn one_run(cfg: &MonteCarloConfig, run: usize) -> Result<Vec<Vec<Option<Outcome>>>> {
    let mut rng = run_rng(cfg.seed, run);
    let [pt, pr, st, sr] = drop_nodes(cfg.radius, &mut rng);
    let random_draw_seed: u64 = rng.gen();
    let mut out = Vec::with_capacity(cfg.q_p.len());
    for &q_p in &cfg.q_p {
        let scenario = Scenario {
            pt,
            pr,
            st,
            sr,
            path_loss: cfg.path_loss,
            weights: cfg.weights,
            qos: QosReq::new(q_p, cfg.q_s)?,
            grid: cfg.grid.clone(),
        };
        let pair = match scenario.link_pair() {
            Ok(p) => p,
            // coincident drop, probability zero
            Err(Error::InvalidScenario(_)) => {
                out.push(vec![None; cfg.schemes.len()]);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut row = Vec::with_capacity(cfg.schemes.len());
        for &scheme in &cfg.schemes {
            let o = match scheme {
                Scheme::Proposed => solved(&pair, newton::allocate(&pair, &cfg.newton))?,
                Scheme::Kkt => solved(&pair, baselines::kkt_alloc(&pair))?,
                Scheme::Exhaustive => solved(
                    &pair,
                    baselines::exhaustive_optimal(&pair, ExhaustiveMode::Reduced),
                )?,
                Scheme::EeMax => solved(&pair, baselines::exhaustive_max_ee(&pair))?,
                Scheme::Random => {
                    // same draw at every Q_p; only its verdict changes
                    let d = baselines::random_alloc(&pair, random_draw_seed);
                    Some(Outcome {
                        metrics: model::metrics(&pair, &d.allocation)?,
                        feasible: d.verdict.is_ok(),
                    })
                }
            };
            row.push(o);
        }
        out.push(row);
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated quantile; NaN for an empty slice.
pub(crate) fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Monte Carlo sweep over `Q_p` for every requested scheme.
pub fn monte_carlo(cfg: &MonteCarloConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let runs: Vec<Vec<Vec<Option<Outcome>>>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| one_run(cfg, r))
        .collect::<Result<_>>()?;

    let in_support = |run: &Vec<Vec<Option<Outcome>>>| {
        run.iter().all(|row| {
            row.iter()
                .zip(&cfg.schemes)
                .all(|(o, s)| *s == Scheme::Random || o.is_some())
                && row.iter().all(Option::is_some)
        })
    };
    let support: Vec<&Vec<Vec<Option<Outcome>>>> = runs.iter().filter(|r| in_support(r)).collect();

    let mut points = Vec::new();
    for (qi, &q_p) in cfg.q_p.iter().enumerate() {
        for (si, &scheme) in cfg.schemes.iter().enumerate() {
            let feasible = runs
                .iter()
                .filter(|r| r[qi][si].is_some_and(|o| o.feasible))
                .count();
            let ms: Vec<Metrics> = support.iter().map(|r| r[qi][si].unwrap().metrics).collect();
            let field = |f: fn(&Metrics) -> f64| ms.iter().map(f).collect::<Vec<_>>();
            let wsp = field(|m| m.wsp);
            points.push(SchemeSummary {
                q_p,
                scheme,
                feasible_rate: feasible as f64 / cfg.runs as f64,
                samples: ms.len(),
                mean_wsp: mean(&wsp),
                median_wsp: median(&wsp),
                mean_sp: mean(&field(|m| m.s_p)),
                mean_ss: mean(&field(|m| m.s_s)),
                mean_ee: mean(&field(|m| m.ee)),
            });
        }
    }

    let pos = |s: Scheme| cfg.schemes.iter().position(|&x| x == s);
    let mut ee_gap = Vec::new();
    if let (Some(a), Some(b)) = (pos(Scheme::Exhaustive), pos(Scheme::EeMax)) {
        for (qi, &q_p) in cfg.q_p.iter().enumerate() {
            let gaps: Vec<f64> = support
                .iter()
                .map(|r| {
                    let (x, y) = (r[qi][a].unwrap().metrics.ee, r[qi][b].unwrap().metrics.ee);
                    (x - y).abs() / y
                })
                .collect();
            ee_gap.push((q_p, mean(&gaps)));
        }
    }

    Ok(SweepReport {
        runs: cfg.runs,
        common_support: support.len(),
        points,
        ee_gap,
    })
}
