//! Flat `key = value` configuration with unit suffixes.
//!
//! Lines are `key = value`; `#` starts a comment. Powers accept `dBm`, `W`
//! or `mW` (bare numbers are watts), gains accept `dB` (bare numbers are
//! linear), distances accept `m` or `km`, frequencies `Hz`, `kHz` or `MHz`.
//! Lists are comma separated. `primary` and `secondary` may repeat, one link
//! per line.

use std::collections::BTreeMap;
use std::path::Path;

use wsp_core::lp2::Case5Rule;
use wsp_core::matching::{PrimaryLink, SecondaryLink};
use wsp_core::model::{dbm_to_watt, ChannelGains, QosReq, ResourceGrid, Weights};
use wsp_core::newton::{NewtonConfig, ScanCondition, Theta0Strategy};
use wsp_core::sim::{PathLoss, Point, Scheme};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key:?}: {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Power,
    Gain,
    Distance,
    Frequency,
    Decibel,
    NoiseDensity,
    Number,
    Integer,
    Text,
    NumberList,
    DistanceList,
    TextList,
    Link,
}

const KEYS: &[(&str, Kind)] = &[
    ("p_min", Kind::Power),
    ("p_max", Kind::Power),
    ("grid_dp", Kind::Decibel),
    ("grid_dtheta", Kind::Number),
    ("q_p", Kind::Number),
    ("q_s", Kind::Number),
    ("w_pt", Kind::Number),
    ("w_sr", Kind::Number),
    ("w_st", Kind::Number),
    ("lambda_pp", Kind::Gain),
    ("lambda_ps", Kind::Gain),
    ("lambda_sp", Kind::Gain),
    ("lambda_ss", Kind::Gain),
    ("d_pt_pr", Kind::Distance),
    ("d_pt_sr", Kind::Distance),
    ("d_sr_pr", Kind::Distance),
    ("d_st_sr", Kind::Distance),
    ("gamma", Kind::Number),
    ("d0", Kind::Distance),
    ("intercept", Kind::Gain),
    ("noise_density", Kind::NoiseDensity),
    ("bandwidth", Kind::Frequency),
    ("epsilon", Kind::Number),
    ("max_iter", Kind::Integer),
    ("theta0", Kind::Text),
    ("case5_rule", Kind::Text),
    ("seed", Kind::Integer),
    ("runs", Kind::Integer),
    ("radius", Kind::Distance),
    ("q_p_sweep", Kind::NumberList),
    ("schemes", Kind::TextList),
    ("subframes", Kind::Integer),
    ("distances", Kind::DistanceList),
    ("sigma", Kind::Decibel),
    ("rho", Kind::Number),
    ("strategies", Kind::TextList),
    ("repeats", Kind::Integer),
    ("warmup", Kind::Integer),
    ("primary", Kind::Link),
    ("secondary", Kind::Link),
    ("match_primaries", Kind::Integer),
    ("match_secondaries", Kind::Integer),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Int(u64),
    Text(String),
    Nums(Vec<f64>),
    Texts(Vec<String>),
}

/// Parsed key/value pairs, before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, Value>,
    primaries: Vec<PrimaryLink>,
    secondaries: Vec<SecondaryLink>,
}

fn split_unit(s: &str) -> (&str, &str) {
    let idx = s
        .char_indices()
        .find(|&(i, c)| c.is_ascii_alphabetic() && !is_exponent(s, i))
        .map_or(s.len(), |(i, _)| i);
    (s[..idx].trim(), s[idx..].trim())
}

/// `e` or `E` followed by a digit or sign inside a number.
fn is_exponent(s: &str, i: usize) -> bool {
    let b = s.as_bytes();
    matches!(b[i], b'e' | b'E')
        && i > 0
        && (b[i - 1].is_ascii_digit() || b[i - 1] == b'.')
        && b.get(i + 1)
            .is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
}

fn number(key: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::Value {
            key: key.into(),
            msg: format!("expected a number, got {s:?}"),
        })
}

fn quantity(key: &str, kind: Kind, raw: &str) -> Result<f64> {
    let (num, unit) = split_unit(raw);
    let x = number(key, num)?;
    let bad = || ConfigError::Value {
        key: key.into(),
        msg: format!("unit {unit:?} not allowed here"),
    };
    let dbm = |x: f64| {
        dbm_to_watt(x).map_err(|e| ConfigError::Value {
            key: key.into(),
            msg: e.to_string(),
        })
    };
    Ok(match (kind, unit.to_ascii_lowercase().as_str()) {
        (Kind::Power, "dbm") => dbm(x)?,
        (Kind::Power, "" | "w") => x,
        (Kind::Power, "mw") => x * 1e-3,
        (Kind::Gain, "") => x,
        (Kind::Gain, "db") => 10f64.powf(x / 10.0),
        (Kind::Distance, "" | "m") => x,
        (Kind::Distance, "km") => x * 1e3,
        (Kind::Frequency, "" | "hz") => x,
        (Kind::Frequency, "khz") => x * 1e3,
        (Kind::Frequency, "mhz") => x * 1e6,
        (Kind::Decibel, "" | "db") => x,
        (Kind::NoiseDensity, "" | "dbm/hz" | "dbm") => x,
        (Kind::Number, "") => x,
        _ => return Err(bad()),
    })
}

fn list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_link(key: &str, raw: &str) -> Result<[f64; 5]> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| quantity(key, Kind::Number, p.trim()))
        .collect::<Result<_>>()?;
    <[f64; 5]>::try_from(parts).map_err(|_| ConfigError::Value {
        key: key.into(),
        msg: "expected tx_x, tx_y, rx_x, rx_y, qos".into(),
    })
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(key.trim(), raw.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value, replacing earlier values.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let kind = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|&(_, kind)| kind)
            .ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
        let value = match kind {
            Kind::Link => {
                let [x1, y1, x2, y2, q] = parse_link(key, raw)?;
                let (a, b) = (Point::new(x1, y1), Point::new(x2, y2));
                if key == "primary" {
                    self.primaries.push(PrimaryLink {
                        pt: a,
                        pr: b,
                        q_p: q,
                    });
                } else {
                    self.secondaries.push(SecondaryLink {
                        st: a,
                        sr: b,
                        q_s: q,
                    });
                }
                return Ok(());
            }
            Kind::Integer => Value::Int(raw.parse().map_err(|_| ConfigError::Value {
                key: key.into(),
                msg: format!("expected a nonnegative integer, got {raw:?}"),
            })?),
            Kind::Text => Value::Text(raw.to_string()),
            Kind::TextList => Value::Texts(list(raw).map(String::from).collect()),
            Kind::NumberList => Value::Nums(
                list(raw)
                    .map(|s| quantity(key, Kind::Number, s))
                    .collect::<Result<_>>()?,
            ),
            Kind::DistanceList => Value::Nums(
                list(raw)
                    .map(|s| quantity(key, Kind::Distance, s))
                    .collect::<Result<_>>()?,
            ),
            _ => Value::Num(quantity(key, kind, raw)?),
        };
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    fn num(&self, key: &str) -> Option<f64> {
        match self.values.get(key) {
            Some(Value::Num(x)) => Some(*x),
            _ => None,
        }
    }

    fn num_or(&self, key: &str, default: f64) -> f64 {
        self.num(key).unwrap_or(default)
    }

    fn int_or(&self, key: &str, default: u64) -> u64 {
        match self.values.get(key) {
            Some(Value::Int(x)) => *x,
            _ => default,
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        match self.values.get(key) {
            Some(Value::Text(s)) => Some(s),
            _ => None,
        }
    }

    fn nums(&self, key: &str) -> Option<&[f64]> {
        match self.values.get(key) {
            Some(Value::Nums(v)) => Some(v),
            _ => None,
        }
    }

    fn texts(&self, key: &str) -> Option<&[String]> {
        match self.values.get(key) {
            Some(Value::Texts(v)) => Some(v),
            _ => None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.int_or("seed", 0)
    }

    pub fn runs(&self) -> usize {
        self.int_or("runs", 1000) as usize
    }

    pub fn subframes(&self) -> usize {
        self.int_or("subframes", 200) as usize
    }

    pub fn repeats(&self) -> usize {
        self.int_or("repeats", 10) as usize
    }

    pub fn warmup(&self) -> usize {
        self.int_or("warmup", 2) as usize
    }

    pub fn radius(&self) -> f64 {
        self.num_or("radius", 5000.0)
    }

    pub fn rho(&self) -> f64 {
        self.num_or("rho", 0.99)
    }

    pub fn sigma_db(&self) -> f64 {
        self.num_or("sigma", 1.0)
    }

    pub fn match_sizes(&self) -> (usize, usize) {
        (
            self.int_or("match_primaries", 4) as usize,
            self.int_or("match_secondaries", 4) as usize,
        )
    }

    pub fn primaries(&self) -> &[PrimaryLink] {
        &self.primaries
    }

    pub fn secondaries(&self) -> &[SecondaryLink] {
        &self.secondaries
    }

    fn invalid(e: wsp_core::Error) -> ConfigError {
        ConfigError::Invalid(e.to_string())
    }

    pub fn grid(&self) -> Result<ResourceGrid> {
        let p_min = self
            .num("p_min")
            .map_or_else(|| dbm_to_watt(-40.0), Ok)
            .map_err(Self::invalid)?;
        let p_max = self
            .num("p_max")
            .map_or_else(|| dbm_to_watt(23.0), Ok)
            .map_err(Self::invalid)?;
        ResourceGrid::new(
            p_min,
            p_max,
            self.num_or("grid_dp", 1.0),
            self.num_or("grid_dtheta", 0.005),
        )
        .map_err(Self::invalid)
    }

    pub fn qos(&self) -> Result<QosReq> {
        QosReq::new(self.num_or("q_p", 3.0), self.num_or("q_s", 3.0)).map_err(Self::invalid)
    }

    pub fn weights(&self) -> Result<Weights> {
        Weights::new(
            self.num_or("w_pt", 1.0),
            self.num_or("w_sr", 1.0),
            self.num_or("w_st", 1.0),
        )
        .map_err(Self::invalid)
    }

    pub fn path_loss(&self) -> Result<PathLoss> {
        let d = PathLoss::default();
        let pl = PathLoss {
            gamma: self.num_or("gamma", d.gamma),
            d0: self.num_or("d0", d.d0),
            intercept: self.num_or("intercept", d.intercept),
            noise_dbm_per_hz: self.num_or("noise_density", d.noise_dbm_per_hz),
            bandwidth_hz: self.num_or("bandwidth", d.bandwidth_hz),
        };
        pl.validate().map_err(Self::invalid)?;
        Ok(pl)
    }

    /// Direct gains when all four `lambda_*` keys are present, `None` when
    /// none are.
    pub fn direct_gains(&self) -> Result<Option<ChannelGains>> {
        let keys = ["lambda_pp", "lambda_ps", "lambda_sp", "lambda_ss"];
        let vals: Vec<Option<f64>> = keys.iter().map(|k| self.num(k)).collect();
        match vals.iter().filter(|v| v.is_some()).count() {
            0 => Ok(None),
            4 => {
                let v: Vec<f64> = vals.into_iter().flatten().collect();
                ChannelGains::new(v[0], v[1], v[2], v[3])
                    .map(Some)
                    .map_err(Self::invalid)
            }
            _ => Err(ConfigError::Invalid(
                "set all four lambda_* keys or none".into(),
            )),
        }
    }

    /// `(PT–PR, PT–SR, SR–PR, ST–SR)` distances, relay-sweep defaults for
    /// missing ones.
    pub fn distances_of_pair(&self) -> [f64; 4] {
        [
            self.num_or("d_pt_pr", 10_000.0),
            self.num_or("d_pt_sr", 10_000.0),
            self.num_or("d_sr_pr", 5_000.0),
            self.num_or("d_st_sr", 5_000.0),
        ]
    }

    pub fn newton(&self) -> Result<NewtonConfig> {
        let d = NewtonConfig::default();
        let theta0 = match self.text("theta0") {
            None => d.theta0,
            Some(s) => parse_strategy(s)?,
        };
        let case5_rule = match self.text("case5_rule") {
            None | Some("trajectory") => Case5Rule::Trajectory,
            Some("reuse_case3") => Case5Rule::ReuseCase3,
            Some(other) => {
                return Err(ConfigError::Value {
                    key: "case5_rule".into(),
                    msg: format!("expected trajectory or reuse_case3, got {other:?}"),
                })
            }
        };
        let cfg = NewtonConfig {
            epsilon: self.num_or("epsilon", d.epsilon),
            max_iter: self.int_or("max_iter", d.max_iter as u64) as usize,
            theta0,
            case5_rule,
        };
        if !(cfg.epsilon > 0.0) || cfg.max_iter == 0 {
            return Err(ConfigError::Invalid(
                "epsilon must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn schemes(&self, default: &[Scheme]) -> Result<Vec<Scheme>> {
        match self.texts("schemes") {
            None => Ok(default.to_vec()),
            Some(v) => v
                .iter()
                .map(|s| {
                    s.parse::<Scheme>().map_err(|e| ConfigError::Value {
                        key: "schemes".into(),
                        msg: e.to_string(),
                    })
                })
                .collect(),
        }
    }

    pub fn strategies(&self, default: &[Theta0Strategy]) -> Result<Vec<Theta0Strategy>> {
        match self.texts("strategies") {
            None => Ok(default.to_vec()),
            Some(v) => v.iter().map(|s| parse_strategy(s)).collect(),
        }
    }

    pub fn q_p_sweep(&self) -> Option<Vec<f64>> {
        self.nums("q_p_sweep").map(<[f64]>::to_vec)
    }

    pub fn distances(&self) -> Option<Vec<f64>> {
        self.nums("distances").map(<[f64]>::to_vec)
    }
}

fn parse_strategy(s: &str) -> Result<Theta0Strategy> {
    Ok(match s {
        "midpoint" => Theta0Strategy::Midpoint,
        "scan" => Theta0Strategy::ConvergenceScan(ScanCondition::ObjectiveProduct),
        "scan_newton" => Theta0Strategy::ConvergenceScan(ScanCondition::NewtonSufficient),
        "warm" => Theta0Strategy::WarmStart(None),
        other => {
            return Err(ConfigError::Value {
                key: "theta0".into(),
                msg: format!("unknown strategy {other:?}"),
            })
        }
    })
}
