use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::geometry::{relay_sweep_scenario, PathLoss};
use super::monte_carlo::{median, quantile};
use crate::error::{Error, Result};
use crate::model::{ChannelGains, LinkPair, QosReq, ResourceGrid};
use crate::newton::{self, NewtonConfig, ScanCondition, Theta0Strategy};

#[derive(Debug, Clone, PartialEq)]
pub struct DriftConfig {
    /// Subframes per distance point, including the first one, which only
    /// seeds the warm start and is left out of the statistics.
    pub subframes: usize,
    /// PT–SR distances in meters.
    pub distances: Vec<f64>,
    /// Standard deviation of the per-link gain perturbation in dB.
    pub sigma_db: f64,
    /// AR(1) coefficient of the perturbation.
    pub rho: f64,
    pub strategies: Vec<Theta0Strategy>,
    pub seed: u64,
    pub qos: QosReq,
    pub path_loss: PathLoss,
    pub grid: ResourceGrid,
    pub newton: NewtonConfig,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            subframes: 200,
            distances: (0..=10).map(|k| 5_000.0 + 1_000.0 * k as f64).collect(),
            sigma_db: 1.0,
            rho: 0.99,
            strategies: vec![
                Theta0Strategy::Midpoint,
                Theta0Strategy::ConvergenceScan(ScanCondition::ObjectiveProduct),
                Theta0Strategy::WarmStart(None),
            ],
            seed: 0,
            qos: QosReq { q_p: 3.0, q_s: 3.0 },
            path_loss: PathLoss::default(),
            grid: ResourceGrid::from_dbm(-40.0, 23.0, 1.0, 0.005).expect("default grid"),
            newton: NewtonConfig::default(),
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subframes < 2 {
            return Err(Error::InvalidInput("need at least 2 subframes".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidInput(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.sigma_db.is_finite() && self.sigma_db >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma must be nonnegative, got {}",
                self.sigma_db
            )));
        }
        if self.distances.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidInput(
                "empty distance or strategy list".into(),
            ));
        }
        self.path_loss.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub distance: f64,
    pub strategy: Theta0Strategy,
    /// Newton iteration counts, one per solved subframe after the first.
    pub iterations: Vec<usize>,
    pub median: f64,
    pub p90: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationsReport {
    pub points: Vec<IterationStats>,
    /// Distances where no subframe was feasible.
    pub infeasible_distances: Vec<f64>,
    /// Infeasible subframes per distance.
    pub infeasible_subframes: Vec<(f64, usize)>,
}

impl IterationsReport {
    pub fn get(&self, distance: f64, strategy: &str) -> Option<&IterationStats> {
        self.points
            .iter()
            .find(|p| p.distance == distance && p.strategy.to_string() == strategy)
    }
}

/// Mean gains scaled by independent AR(1) log-normal factors.
pub fn drifting_gains(
    mean: &ChannelGains,
    subframes: usize,
    sigma_db: f64,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<ChannelGains> {
    let innovation = sigma_db * (1.0 - rho * rho).sqrt();
    let mut state: [f64; 4] = std::array::from_fn(|_| {
        let z: f64 = StandardNormal.sample(rng);
        sigma_db * z
    });
    let mut out = Vec::with_capacity(subframes);
    for t in 0..subframes {
        if t > 0 {
            for x in &mut state {
                let z: f64 = StandardNormal.sample(rng);
                *x = rho * *x + innovation * z;
            }
        }
        let f = |k: usize| 10f64.powf(state[k] / 10.0);
        out.push(ChannelGains {
            lambda_pp: mean.lambda_pp * f(0),
            lambda_ps: mean.lambda_ps * f(1),
            lambda_sp: mean.lambda_sp * f(2),
            lambda_ss: mean.lambda_ss * f(3),
        });
    }
    out
}

/// Newton iteration counts under each starting-point strategy while the
/// channel of the relay-sweep geometry drifts slowly.
pub fn warmstart_experiment(cfg: &DriftConfig) -> Result<IterationsReport> {
    cfg.validate()?;
    let mut report = IterationsReport {
        points: Vec::new(),
        infeasible_distances: Vec::new(),
        infeasible_subframes: Vec::new(),
    };
    for (k, &distance) in cfg.distances.iter().enumerate() {
        let base = relay_sweep_scenario(distance, cfg.path_loss, cfg.qos, cfg.grid.clone())?
            .link_pair()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let gains = drifting_gains(&base.gains, cfg.subframes, cfg.sigma_db, cfg.rho, &mut rng);
        let pairs: Vec<LinkPair> = gains
            .into_iter()
            .map(|g| LinkPair {
                gains: g,
                ..base.clone()
            })
            .collect();

        let mut infeasible = 0;
        for (s, &strategy) in cfg.strategies.iter().enumerate() {
            let mut previous: Option<f64> = None;
            let mut counts = Vec::new();
            for (t, pair) in pairs.iter().enumerate() {
                let theta0 = match strategy {
                    Theta0Strategy::WarmStart(_) => Theta0Strategy::WarmStart(previous),
                    other => other,
                };
                match newton::newton_solve(pair, &cfg.newton.with_theta0(theta0)) {
                    Ok((theta, trace)) => {
                        previous = Some(theta);
                        if t > 0 {
                            counts.push(trace.iterations());
                        }
                    }
                    Err(Error::Infeasible(_)) => {
                        if s == 0 {
                            infeasible += 1;
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            if counts.is_empty() {
                continue;
            }
            let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            report.points.push(IterationStats {
                distance,
                strategy,
                median: median(&xs),
                p90: quantile(&xs, 0.9),
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                iterations: counts,
            });
        }
        if infeasible == cfg.subframes {
            report.infeasible_distances.push(distance);
        }
        report.infeasible_subframes.push((distance, infeasible));
    }
    Ok(report)
}
