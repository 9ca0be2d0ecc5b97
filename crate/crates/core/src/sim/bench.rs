use std::hint::black_box;
use std::time::Instant;

use super::geometry::{relay_sweep_scenario, PathLoss};
use super::monte_carlo::{median, Scheme};
use crate::baselines::{self, ExhaustiveMode};
use crate::error::{Error, Result};
use crate::model::{LinkPair, QosReq, ResourceGrid};
use crate::newton::{self, NewtonConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// PT–SR distances of the relay-sweep geometry.
    pub distances: Vec<f64>,
    pub repeats: usize,
    /// Untimed runs before the timed ones.
    pub warmup: usize,
    pub schemes: Vec<Scheme>,
    pub qos: QosReq,
    pub path_loss: PathLoss,
    pub grid: ResourceGrid,
    pub newton: NewtonConfig,
    /// Grids for the exhaustive-search scaling fit, timed at the first
    /// distance. Empty to skip the fit.
    pub scaling_grids: Vec<ResourceGrid>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            distances: (0..=10).map(|k| 5_000.0 + 1_000.0 * k as f64).collect(),
            repeats: 10,
            warmup: 2,
            schemes: vec![Scheme::Proposed, Scheme::Kkt, Scheme::Exhaustive],
            qos: QosReq { q_p: 3.0, q_s: 3.0 },
            path_loss: PathLoss::default(),
            grid: ResourceGrid::from_dbm(-40.0, 23.0, 1.0, 0.005).expect("default grid"),
            newton: NewtonConfig::default(),
            scaling_grids: scaling_grids(&[(12, 20), (24, 40), (48, 80)]),
        }
    }
}

/// Grids over the default power range with exactly `P` power and `Q` time
/// levels for each `(P, Q)`.
pub fn scaling_grids(sizes: &[(usize, usize)]) -> Vec<ResourceGrid> {
    sizes
        .iter()
        .map(|&(p, q)| {
            ResourceGrid::from_dbm(-40.0, 23.0, 63.0 / (p - 1) as f64, 0.5 / (q + 1) as f64)
                .expect("valid scaling grid")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingPoint {
    pub distance: f64,
    pub scheme: Scheme,
    pub median_ms: f64,
    pub ratio_vs_proposed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub powers: usize,
    pub thetas: usize,
    pub median_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub points: Vec<TimingPoint>,
    pub scaling: Vec<ScalingPoint>,
    /// Least-squares slope of `log(time)` against `log(P^3 Q)`.
    pub scaling_slope: Option<f64>,
}

fn run_scheme(pair: &LinkPair, scheme: Scheme, newton_cfg: &NewtonConfig) -> Result<()> {
    let r = match scheme {
        Scheme::Proposed => newton::allocate(pair, newton_cfg).map(drop),
        Scheme::Kkt => baselines::kkt_alloc(pair).map(drop),
        Scheme::Exhaustive => baselines::exhaustive_optimal(pair, ExhaustiveMode::Naive).map(drop),
        Scheme::EeMax => baselines::exhaustive_max_ee(pair).map(drop),
        Scheme::Random => {
            black_box(baselines::random_alloc(pair, 0));
            Ok(())
        }
    };
    match r {
        Ok(()) | Err(Error::Infeasible(_)) => Ok(()),
        Err(e) => Err(e),
    }
}

fn time_ms(cfg: &BenchConfig, pair: &LinkPair, scheme: Scheme) -> Result<f64> {
    for _ in 0..cfg.warmup {
        run_scheme(black_box(pair), scheme, &cfg.newton)?;
    }
    let mut samples = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let start = Instant::now();
        run_scheme(black_box(pair), scheme, &cfg.newton)?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(median(&samples))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Wall-clock medians per scheme and distance, single-threaded.
pub fn bench(cfg: &BenchConfig) -> Result<TimingReport> {
    if cfg.repeats == 0 || cfg.distances.is_empty() || cfg.schemes.is_empty() {
        return Err(Error::InvalidInput(
            "bench needs repeats, distances and schemes".into(),
        ));
    }
    let mut points = Vec::new();
    for &distance in &cfg.distances {
        let pair = relay_sweep_scenario(distance, cfg.path_loss, cfg.qos, cfg.grid.clone())?
            .link_pair()?;
        let mut row = Vec::new();
        for &scheme in &cfg.schemes {
            row.push((scheme, time_ms(cfg, &pair, scheme)?));
        }
        let base = row
            .iter()
            .find(|r| r.0 == Scheme::Proposed)
            .map_or(f64::NAN, |r| r.1);
        points.extend(row.into_iter().map(|(scheme, ms)| TimingPoint {
            distance,
            scheme,
            median_ms: ms,
            ratio_vs_proposed: ms / base,
        }));
    }

    let mut scaling = Vec::new();
    for grid in &cfg.scaling_grids {
        let pair = relay_sweep_scenario(cfg.distances[0], cfg.path_loss, cfg.qos, grid.clone())?
            .link_pair()?;
        scaling.push(ScalingPoint {
            powers: grid.powers().len(),
            thetas: grid.thetas().len(),
            median_ms: time_ms(cfg, &pair, Scheme::Exhaustive)?,
        });
    }
    let scaling_slope = (scaling.len() >= 2).then(|| {
        let x: Vec<f64> = scaling
            .iter()
            .map(|s| ((s.powers.pow(3) * s.thetas) as f64).ln())
            .collect();
        let y: Vec<f64> = scaling.iter().map(|s| s.median_ms.ln()).collect();
        fit_slope(&x, &y)
    });

    Ok(TimingReport {
        points,
        scaling,
        scaling_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_grid_sizes() {
        let g = scaling_grids(&[(12, 20), (24, 40), (48, 80), (16, 25)]);
        let sizes: Vec<(usize, usize)> = g
            .iter()
            .map(|g| (g.powers().len(), g.thetas().len()))
            .collect();
        assert_eq!(sizes, vec![(12, 20), (24, 40), (48, 80), (16, 25)]);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        assert!((fit_slope(&x, &y) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn report_shape() {
        let cfg = BenchConfig {
            distances: vec![8_000.0],
            repeats: 2,
            warmup: 0,
            grid: ResourceGrid::from_dbm(-40.0, 23.0, 9.0, 0.05).unwrap(),
            scaling_grids: scaling_grids(&[(4, 4), (6, 6)]),
            ..BenchConfig::default()
        };
        let r = bench(&cfg).unwrap();
        assert_eq!(r.points.len(), 3);
        let proposed = r
            .points
            .iter()
            .find(|p| p.scheme == Scheme::Proposed)
            .unwrap();
        assert_eq!(proposed.ratio_vs_proposed, 1.0);
        assert_eq!(r.scaling.len(), 2);
        assert!(r.scaling_slope.unwrap().is_finite());
    }
}
