//! Node placement and path-loss channel gains.

use crate::error::{Error, Result};
use crate::model::{dbm_to_watt, ChannelGains, LinkPair, QosReq, ResourceGrid, Weights};

/// Intercept gain at the 1 m reference distance. Smallest value (rounded up
/// in the fourth significant digit) for which the relay-sweep geometry
/// (PT–PR 10 km, SR–PR 5 km, ST–SR 5 km, PT–SR up to 15 km) stays feasible
/// at `Q_p = Q_s = 3` bps/Hz and `p_max = 23` dBm.
pub const DEFAULT_INTERCEPT: f64 = 5433.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// `g(d) = K (d / d0)^(-gamma)` with thermal noise over one resource block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub gamma: f64,
    pub d0: f64,
    pub intercept: f64,
    pub noise_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            gamma: 3.8,
            d0: 1.0,
            intercept: DEFAULT_INTERCEPT,
            noise_dbm_per_hz: -174.0,
            bandwidth_hz: 180e3,
        }
    }
}

impl PathLoss {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma.is_finite()
            && self.gamma > 2.0
            && self.d0.is_finite()
            && self.d0 > 0.0
            && self.intercept.is_finite()
            && self.intercept > 0.0
            && self.noise_dbm_per_hz.is_finite()
            && self.bandwidth_hz.is_finite()
            && self.bandwidth_hz > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "invalid path-loss model {self:?}"
            )))
        }
    }

    /// Noise power over the bandwidth, in watts.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watt(self.noise_dbm_per_hz).expect("finite noise density") * self.bandwidth_hz
    }

    pub fn gain(&self, distance: f64) -> f64 {
        self.intercept * (distance / self.d0).powf(-self.gamma)
    }

    /// Gain-to-noise ratio at `distance`.
    pub fn lambda(&self, distance: f64) -> f64 {
        self.gain(distance) / self.noise_power()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pt: Point,
    pub pr: Point,
    pub st: Point,
    pub sr: Point,
    pub path_loss: PathLoss,
    pub weights: Weights,
    pub qos: QosReq,
    pub grid: ResourceGrid,
}

impl Scenario {
    pub fn link_pair(&self) -> Result<LinkPair> {
        Ok(LinkPair::new(
            gains_from_geometry(self)?,
            self.weights,
            self.qos,
            self.grid.clone(),
        ))
    }
}

/// Gains of the four links that enter the problem: PT→PR, PT→SR, SR→PR and
/// ST→SR.
pub fn gains_from_geometry(s: &Scenario) -> Result<ChannelGains> {
    s.path_loss.validate()?;
    let links = [
        ("PT-PR", s.pt.distance(&s.pr)),
        ("PT-SR", s.pt.distance(&s.sr)),
        ("SR-PR", s.sr.distance(&s.pr)),
        ("ST-SR", s.st.distance(&s.sr)),
    ];
    for (name, d) in links {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "{name} distance must be positive, got {d}"
            )));
        }
    }
    let l = |d: f64| s.path_loss.lambda(d);
    ChannelGains::new(l(links[0].1), l(links[1].1), l(links[2].1), l(links[3].1))
        .map_err(|e| Error::InvalidScenario(e.to_string()))
}

/// Places PT at the origin and PR on the x axis, then SR at the given
/// distances from both, then ST away from PT at `st_sr` from SR.
pub fn triangle_layout(pt_pr: f64, pt_sr: f64, sr_pr: f64, st_sr: f64) -> Result<[Point; 4]> {
    let (a, b, c) = (pt_pr, pt_sr, sr_pr);
    if !(a > 0.0 && b > 0.0 && c > 0.0 && st_sr > 0.0) {
        return Err(Error::InvalidScenario("distances must be positive".into()));
    }
    let slack = 1e-9 * (a + b + c);
    if b > a + c + slack || c > a + b + slack || a > b + c + slack {
        return Err(Error::InvalidScenario(format!(
            "no triangle with sides {a}, {b}, {c}"
        )));
    }
    let x = (a * a + b * b - c * c) / (2.0 * a);
    let y = (b * b - x * x).max(0.0).sqrt();
    let pt = Point::new(0.0, 0.0);
    let pr = Point::new(a, 0.0);
    let sr = Point::new(x, y);
    let st = Point::new(x + st_sr * x / b, y + st_sr * y / b);
    Ok([pt, pr, st, sr])
}

/// Relay-sweep scenario with the given PT–SR distance and QoS targets.
pub fn relay_sweep_scenario(
    pt_sr: f64,
    path_loss: PathLoss,
    qos: QosReq,
    grid: ResourceGrid,
) -> Result<Scenario> {
    let [pt, pr, st, sr] = triangle_layout(10_000.0, pt_sr, 5_000.0, 5_000.0)?;
    Ok(Scenario {
        pt,
        pr,
        st,
        sr,
        path_loss,
        weights: Weights::equal(),
        qos,
        grid,
    })
}

/// Smallest intercept for which every given PT–SR distance of the relay
/// sweep has a nonempty feasible θ interval, by bisection on `log K`.
pub fn minimal_intercept(
    distances: &[f64],
    base: PathLoss,
    qos: QosReq,
    grid: &ResourceGrid,
) -> Result<f64> {
    let feasible = |k: f64| -> Result<bool> {
        for &d in distances {
            let pl = PathLoss {
                intercept: k,
                ..base
            };
            let pair = relay_sweep_scenario(d, pl, qos, grid.clone())?.link_pair()?;
            if crate::newton::feasible_theta_interval(&pair).is_none() {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let (mut lo, mut hi) = (1e-30f64.ln(), 1e30f64.ln());
    if !feasible(hi.exp())? {
        return Err(Error::InvalidScenario(
            "no intercept makes the sweep feasible".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid.exp())? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}
