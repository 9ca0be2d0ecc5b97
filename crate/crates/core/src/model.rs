//! Domain types and closed-form performance formulas for one matched
//! primary/secondary link pair.
//!
//! A subframe is split into three phases: the primary transmitter (PT)
//! broadcasts for a fraction `theta`, the secondary receiver (SR) relays the
//! primary data for another `theta`, and the secondary transmitter (ST) owns
//! the remaining `1 - 2 theta`. All powers are in watts; dBm only appears at
//! the I/O boundary through [`dbm_to_watt`] and [`watt_to_dbm`].

use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance used for every QoS and power-box comparison.
pub const REL_TOL: f64 = 1e-9;

pub fn dbm_to_watt(dbm: f64) -> Result<f64> {
    if !dbm.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite dBm value {dbm}")));
    }
    Ok(10f64.powf((dbm - 30.0) / 10.0))
}

pub fn watt_to_dbm(watt: f64) -> Result<f64> {
    if !watt.is_finite() || watt <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "power must be finite and positive, got {watt} W"
        )));
    }
    Ok(10.0 * watt.log10() + 30.0)
}

/// `a >= b` up to [`REL_TOL`] relative slack.
#[inline]
pub(crate) fn geq_tol(a: f64, b: f64) -> bool {
    a >= b - REL_TOL * b.abs()
}

/// `a <= b` up to [`REL_TOL`] relative slack.
#[inline]
pub(crate) fn leq_tol(a: f64, b: f64) -> bool {
    a <= b + REL_TOL * b.abs()
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be finite and strictly positive, got {value}"
        )))
    }
}

/// Per-watt SNR coefficients `gain / noise_power` of the four links.
///
/// `pp`: PT to PR, `ps`: PT to SR, `sp`: SR to PR, `ss`: ST to SR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGains {
    pub lambda_pp: f64,
    pub lambda_ps: f64,
    pub lambda_sp: f64,
    pub lambda_ss: f64,
}

impl ChannelGains {
    pub fn new(lambda_pp: f64, lambda_ps: f64, lambda_sp: f64, lambda_ss: f64) -> Result<Self> {
        check_positive("lambda_pp", lambda_pp)?;
        check_positive("lambda_ps", lambda_ps)?;
        check_positive("lambda_sp", lambda_sp)?;
        check_positive("lambda_ss", lambda_ss)?;
        Ok(Self {
            lambda_pp,
            lambda_ps,
            lambda_sp,
            lambda_ss,
        })
    }
}

/// Priority weights of the PT, SR and ST.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub w_pt: f64,
    pub w_sr: f64,
    pub w_st: f64,
}

impl Weights {
    pub fn new(w_pt: f64, w_sr: f64, w_st: f64) -> Result<Self> {
        check_positive("w_pt", w_pt)?;
        check_positive("w_sr", w_sr)?;
        check_positive("w_st", w_st)?;
        Ok(Self { w_pt, w_sr, w_st })
    }

    pub fn equal() -> Self {
        Self {
            w_pt: 1.0,
            w_sr: 1.0,
            w_st: 1.0,
        }
    }
}

/// Minimum spectral efficiencies (bps/Hz) of the primary and secondary links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosReq {
    pub q_p: f64,
    pub q_s: f64,
}

impl QosReq {
    pub fn new(q_p: f64, q_s: f64) -> Result<Self> {
        check_positive("q_p", q_p)?;
        check_positive("q_s", q_s)?;
        Ok(Self { q_p, q_s })
    }
}

/// Discrete power and time-split levels.
///
/// Power levels start at `p_min` and grow in `delta_p_db` steps up to
/// `p_max`; time-split levels are `delta_theta, 2 delta_theta, ...` strictly
/// below one half.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    p_min: f64,
    p_max: f64,
    delta_p_db: f64,
    delta_theta: f64,
    powers: Vec<f64>,
    thetas: Vec<f64>,
}

impl ResourceGrid {
    pub fn new(p_min: f64, p_max: f64, delta_p_db: f64, delta_theta: f64) -> Result<Self> {
        check_positive("p_min", p_min)?;
        check_positive("p_max", p_max)?;
        check_positive("delta_p", delta_p_db)?;
        check_positive("delta_theta", delta_theta)?;
        if p_min >= p_max {
            return Err(Error::InvalidInput(format!(
                "p_min ({p_min} W) must be below p_max ({p_max} W)"
            )));
        }
        if delta_theta >= 0.25 {
            return Err(Error::InvalidInput(format!(
                "delta_theta must be below 0.25, got {delta_theta}"
            )));
        }

        let span_db = 10.0 * (p_max / p_min).log10();
        let steps = (span_db / delta_p_db + 1e-9).floor() as usize;
        let mut powers: Vec<f64> = (0..=steps)
            .map(|k| p_min * 10f64.powf(k as f64 * delta_p_db / 10.0))
            .collect();
        powers[0] = p_min;
        if let Some(last) = powers.last_mut() {
            if (*last - p_max).abs() <= 1e-9 * p_max {
                *last = p_max;
            }
        }

        let thetas: Vec<f64> = (1..)
            .map(|k| k as f64 * delta_theta)
            .take_while(|&t| t < 0.5 - 1e-12)
            .collect();

        Ok(Self {
            p_min,
            p_max,
            delta_p_db,
            delta_theta,
            powers,
            thetas,
        })
    }

    /// Grid expressed in dBm, the way radio parameters are usually quoted.
    pub fn from_dbm(
        p_min_dbm: f64,
        p_max_dbm: f64,
        delta_p_db: f64,
        delta_theta: f64,
    ) -> Result<Self> {
        Self::new(
            dbm_to_watt(p_min_dbm)?,
            dbm_to_watt(p_max_dbm)?,
            delta_p_db,
            delta_theta,
        )
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn delta_p_db(&self) -> f64 {
        self.delta_p_db
    }

    pub fn delta_theta(&self) -> f64 {
        self.delta_theta
    }

    /// Ascending power levels (watts).
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Ascending time-split levels.
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Index of the smallest power level that is not below `p`.
    ///
    /// A level within 1e-12 relative of `p` counts as equal.
    pub fn power_index_at_or_above(&self, p: f64) -> Option<usize> {
        let idx = self.powers.partition_point(|&lvl| lvl < p * (1.0 - 1e-12));
        (idx < self.powers.len()).then_some(idx)
    }

    /// Index of the largest time-split level at or below `theta`.
    pub fn theta_index_at_or_below(&self, theta: f64) -> Option<usize> {
        let idx = self.thetas.partition_point(|&t| t <= theta);
        idx.checked_sub(1)
    }
}

/// One matched primary/secondary link pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPair {
    pub gains: ChannelGains,
    pub weights: Weights,
    pub qos: QosReq,
    pub grid: ResourceGrid,
}

impl LinkPair {
    pub fn new(gains: ChannelGains, weights: Weights, qos: QosReq, grid: ResourceGrid) -> Self {
        Self {
            gains,
            weights,
            qos,
            grid,
        }
    }

    pub fn p_min(&self) -> f64 {
        self.grid.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.grid.p_max
    }
}

/// A candidate decision: time split plus the three transmit powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub theta: f64,
    pub p_p: f64,
    pub p_r: f64,
    pub p_s: f64,
}

impl Allocation {
    pub fn new(theta: f64, p_p: f64, p_r: f64, p_s: f64) -> Self {
        Self {
            theta,
            p_p,
            p_r,
            p_s,
        }
    }
}

/// Derived performance numbers of an allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub wsp: f64,
    /// Primary-link share `w_pt theta p_p + w_sr theta p_r`.
    pub u: f64,
    /// Secondary-link share `w_st (1 - 2 theta) p_s`.
    pub v: f64,
    pub s_p: f64,
    pub s_s: f64,
    pub ee: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 && theta < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidAllocation(format!(
            "theta must lie in (0, 0.5), got {theta}"
        )))
    }
}

/// Weighted sum power split into its primary and secondary parts `(u, v)`.
pub fn wsp_split(pair: &LinkPair, alloc: &Allocation) -> Result<(f64, f64)> {
    check_theta(alloc.theta)?;
    let w = &pair.weights;
    let u = w.w_pt * alloc.theta * alloc.p_p + w.w_sr * alloc.theta * alloc.p_r;
    let v = w.w_st * (1.0 - 2.0 * alloc.theta) * alloc.p_s;
    Ok((u, v))
}

pub fn wsp(pair: &LinkPair, alloc: &Allocation) -> Result<f64> {
    let (u, v) = wsp_split(pair, alloc)?;
    Ok(u + v)
}

/// Decode-and-forward spectral efficiency of the primary link.
pub fn primary_se(pair: &LinkPair, alloc: &Allocation) -> f64 {
    let g = &pair.gains;
    let decode = g.lambda_ps * alloc.p_p;
    let combine = g.lambda_pp * alloc.p_p + g.lambda_sp * alloc.p_r;
    alloc.theta * (1.0 + decode.min(combine)).log2()
}

pub fn secondary_se(pair: &LinkPair, alloc: &Allocation) -> f64 {
    (1.0 - 2.0 * alloc.theta) * (1.0 + pair.gains.lambda_ss * alloc.p_s).log2()
}

/// SNR `2^(q / duration) - 1` needed to carry `q` bps/Hz in a phase of the
/// given duration. Overflows to `+inf` for vanishing durations.
#[inline]
pub(crate) fn required_snr(q: f64, duration: f64) -> f64 {
    (q / duration).exp2() - 1.0
}

/// Lower bounds `(p_p_low, p_s_low)` implied by the two QoS targets.
///
/// Either value may exceed `p_max` (or be `+inf` close to the θ bounds);
/// feasibility is the caller's concern.
pub fn power_floors(pair: &LinkPair, theta: f64) -> Result<(f64, f64)> {
    if !(theta.is_finite() && theta > 0.0 && theta < 0.5) {
        return Err(Error::InvalidInput(format!(
            "theta must lie in (0, 0.5), got {theta}"
        )));
    }
    Ok(power_floors_unchecked(pair, theta))
}

#[inline]
pub(crate) fn power_floors_unchecked(pair: &LinkPair, theta: f64) -> (f64, f64) {
    let p_min = pair.p_min();
    let p_p_low = (required_snr(pair.qos.q_p, theta) / pair.gains.lambda_ps).max(p_min);
    let p_s_low = (required_snr(pair.qos.q_s, 1.0 - 2.0 * theta) / pair.gains.lambda_ss).max(p_min);
    (p_p_low, p_s_low)
}

/// System energy efficiency: total spectral efficiency over unweighted
/// consumed power.
pub fn energy_efficiency(pair: &LinkPair, alloc: &Allocation) -> Result<f64> {
    let denom =
        alloc.theta * alloc.p_p + alloc.theta * alloc.p_r + (1.0 - 2.0 * alloc.theta) * alloc.p_s;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::InvalidAllocation(format!(
            "energy efficiency undefined for consumed power {denom}"
        )));
    }
    Ok((primary_se(pair, alloc) + secondary_se(pair, alloc)) / denom)
}

pub fn metrics(pair: &LinkPair, alloc: &Allocation) -> Result<Metrics> {
    let (u, v) = wsp_split(pair, alloc)?;
    Ok(Metrics {
        wsp: u + v,
        u,
        v,
        s_p: primary_se(pair, alloc),
        s_s: secondary_se(pair, alloc),
        ee: energy_efficiency(pair, alloc)?,
    })
}

/// Constraints of the WSP minimization problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    /// `0 < theta < 0.5`
    ThetaRange,
    /// `lambda_pp p_p + lambda_sp p_r >= 2^(q_p/theta) - 1`
    CombinedSnr,
    PrimaryPowerLow,
    PrimaryPowerHigh,
    RelayPowerLow,
    RelayPowerHigh,
    SecondaryPowerLow,
    SecondaryPowerHigh,
    QosPrimary,
    QosSecondary,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Constraint::ThetaRange => "theta_range",
            Constraint::CombinedSnr => "combined_snr",
            Constraint::PrimaryPowerLow => "primary_power_low",
            Constraint::PrimaryPowerHigh => "primary_power_high",
            Constraint::RelayPowerLow => "relay_power_low",
            Constraint::RelayPowerHigh => "relay_power_high",
            Constraint::SecondaryPowerLow => "secondary_power_low",
            Constraint::SecondaryPowerHigh => "secondary_power_high",
            Constraint::QosPrimary => "qos_primary",
            Constraint::QosSecondary => "qos_secondary",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeasibilityVerdict {
    pub violations: Vec<Constraint>,
}

impl FeasibilityVerdict {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, c: Constraint) -> bool {
        self.violations.contains(&c)
    }
}

/// Primary-side constraints only (θ range, combined SNR, p_p and p_r boxes,
/// primary QoS). Independent of `p_s`.
pub(crate) fn primary_feasible(pair: &LinkPair, alloc: &Allocation) -> bool {
    let theta = alloc.theta;
    if !(theta > 0.0 && theta < 0.5) {
        return false;
    }
    let g = &pair.gains;
    let (p_min, p_max) = (pair.p_min(), pair.p_max());
    let need = required_snr(pair.qos.q_p, theta);
    let p_p_low = (need / g.lambda_ps).max(p_min);
    geq_tol(g.lambda_pp * alloc.p_p + g.lambda_sp * alloc.p_r, need)
        && geq_tol(alloc.p_p, p_p_low)
        && leq_tol(alloc.p_p, p_max)
        && geq_tol(alloc.p_r, p_min)
        && leq_tol(alloc.p_r, p_max)
        && geq_tol(primary_se(pair, alloc), pair.qos.q_p)
}

/// Secondary-side constraints only (p_s box and secondary QoS).
pub(crate) fn secondary_feasible(pair: &LinkPair, alloc: &Allocation) -> bool {
    let theta = alloc.theta;
    if !(theta > 0.0 && theta < 0.5) {
        return false;
    }
    let (p_min, p_max) = (pair.p_min(), pair.p_max());
    let p_s_low = (required_snr(pair.qos.q_s, 1.0 - 2.0 * theta) / pair.gains.lambda_ss).max(p_min);
    geq_tol(alloc.p_s, p_s_low)
        && leq_tol(alloc.p_s, p_max)
        && geq_tol(secondary_se(pair, alloc), pair.qos.q_s)
}

/// Fast boolean form of [`check_feasible`].
pub fn is_feasible(pair: &LinkPair, alloc: &Allocation) -> bool {
    primary_feasible(pair, alloc) && secondary_feasible(pair, alloc)
}

/// Lists every violated constraint of the problem, each compared with
/// relative tolerance [`REL_TOL`].
pub fn check_feasible(pair: &LinkPair, alloc: &Allocation) -> FeasibilityVerdict {
    let mut violations = Vec::new();
    let theta = alloc.theta;
    if !(theta.is_finite() && theta > 0.0 && theta < 0.5) {
        violations.push(Constraint::ThetaRange);
        return FeasibilityVerdict { violations };
    }

    let g = &pair.gains;
    let (p_min, p_max) = (pair.p_min(), pair.p_max());
    let (p_p_low, p_s_low) = power_floors_unchecked(pair, theta);
    let need = required_snr(pair.qos.q_p, theta);

    let checks = [
        (
            Constraint::CombinedSnr,
            geq_tol(g.lambda_pp * alloc.p_p + g.lambda_sp * alloc.p_r, need),
        ),
        (Constraint::PrimaryPowerLow, geq_tol(alloc.p_p, p_p_low)),
        (Constraint::PrimaryPowerHigh, leq_tol(alloc.p_p, p_max)),
        (Constraint::RelayPowerLow, geq_tol(alloc.p_r, p_min)),
        (Constraint::RelayPowerHigh, leq_tol(alloc.p_r, p_max)),
        (Constraint::SecondaryPowerLow, geq_tol(alloc.p_s, p_s_low)),
        (Constraint::SecondaryPowerHigh, leq_tol(alloc.p_s, p_max)),
        (
            Constraint::QosPrimary,
            geq_tol(primary_se(pair, alloc), pair.qos.q_p),
        ),
        (
            Constraint::QosSecondary,
            geq_tol(secondary_se(pair, alloc), pair.qos.q_s),
        ),
    ];
    violations.extend(checks.iter().filter(|(_, ok)| !ok).map(|(c, _)| *c));
    FeasibilityVerdict { violations }
}

/// Eigenvalues of the (constant) Hessian of the WSP objective in the
/// variables `(p_p, p_r, p_s, theta)`: `{0, 0, r, -r}` with
/// `r = sqrt(w_pt^2 + 4 w_st^2 + w_sr^2)`. One positive and one negative
/// eigenvalue make the objective indefinite, hence nonconvex.
pub fn wsp_hessian_eigenvalues(weights: &Weights) -> [f64; 4] {
    let r = (weights.w_pt.powi(2) + 4.0 * weights.w_st.powi(2) + weights.w_sr.powi(2)).sqrt();
    [0.0, 0.0, r, -r]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> ResourceGrid {
        ResourceGrid::new(0.01, 10.0, 1.0, 0.005).unwrap()
    }

    fn pair(gains: (f64, f64, f64, f64), w: (f64, f64, f64), q: (f64, f64)) -> LinkPair {
        LinkPair::new(
            ChannelGains::new(gains.0, gains.1, gains.2, gains.3).unwrap(),
            Weights::new(w.0, w.1, w.2).unwrap(),
            QosReq::new(q.0, q.1).unwrap(),
            unit_grid(),
        )
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn dbm_conversions() {
        assert!(close(dbm_to_watt(30.0).unwrap(), 1.0, 1e-12));
        assert!(close(dbm_to_watt(0.0).unwrap(), 1e-3, 1e-12));
        assert!(close(dbm_to_watt(-40.0).unwrap(), 1e-7, 1e-12));
        for x in [-174.0, -40.0, 0.0, 23.0, 46.5] {
            let back = watt_to_dbm(dbm_to_watt(x).unwrap()).unwrap();
            assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
        assert!(matches!(dbm_to_watt(f64::NAN), Err(Error::InvalidInput(_))));
        assert!(matches!(watt_to_dbm(0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(
            watt_to_dbm(f64::INFINITY),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn wsp_examples() {
        let p = pair((1.0, 1.0, 1.0, 1.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        let a = Allocation::new(0.25, 0.1, 0.2, 0.4);
        assert!(close(wsp(&p, &a).unwrap(), 0.275, 1e-12));
        let p2 = pair((1.0, 1.0, 1.0, 1.0), (2.0, 1.0, 1.0), (1.0, 1.0));
        assert!(close(wsp(&p2, &a).unwrap(), 0.300, 1e-12));
        let a3 = Allocation::new(0.1, 1.0, 1.0, 1.0);
        assert!(close(wsp(&p, &a3).unwrap(), 1.0, 1e-12));
        let (u, v) = wsp_split(&p, &a).unwrap();
        assert!(close(u + v, 0.275, 1e-12));
        assert!(matches!(
            wsp(&p, &Allocation::new(0.5, 1.0, 1.0, 1.0)),
            Err(Error::InvalidAllocation(_))
        ));
        assert!(matches!(
            wsp(&p, &Allocation::new(0.0, 1.0, 1.0, 1.0)),
            Err(Error::InvalidAllocation(_))
        ));
    }

    #[test]
    fn spectral_efficiency_examples() {
        let p = pair((1.0, 3.0, 1.0, 1.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        let se = primary_se(&p, &Allocation::new(1.0 / 3.0, 1.0, 1.0, 1.0));
        assert!(close(se, 3f64.log2() / 3.0, 1e-12));
        assert!((se - 0.5283).abs() < 1e-4);

        let p = pair((2.0, 1.0, 2.0, 1.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        assert!(close(
            primary_se(&p, &Allocation::new(0.4, 1.0, 1.0, 1.0)),
            0.4,
            1e-12
        ));

        let p = pair((15.0, 15.0, 1.0, 1.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        assert!(close(
            primary_se(&p, &Allocation::new(0.25, 1.0, 1.0, 1.0)),
            1.0,
            1e-12
        ));

        let p = pair((1.0, 1.0, 1.0, 6.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        assert!(close(
            secondary_se(&p, &Allocation::new(0.25, 1.0, 1.0, 0.5)),
            1.0,
            1e-12
        ));
        let p = pair((1.0, 1.0, 1.0, 15.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        assert!(close(
            secondary_se(&p, &Allocation::new(0.4, 1.0, 1.0, 0.2)),
            0.4,
            1e-12
        ));
        assert!(secondary_se(&p, &Allocation::new(0.5 - 1e-12, 1.0, 1.0, 0.2)) < 1e-10);
    }

    #[test]
    fn floor_examples() {
        let p = pair((1.0, 2.0, 1.0, 15.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        let (pp, ps) = power_floors(&p, 0.25).unwrap();
        assert!(close(pp, 7.5, 1e-12));
        assert!(close(ps, 0.2, 1e-12));

        let p = pair((1.0, 100.0, 1.0, 15.0), (1.0, 1.0, 1.0), (0.1, 1.0));
        let (pp, _) = power_floors(&p, 0.45).unwrap();
        assert_eq!(pp, 0.01);

        assert!(matches!(power_floors(&p, 0.5), Err(Error::InvalidInput(_))));
        assert!(matches!(
            power_floors(&p, -0.1),
            Err(Error::InvalidInput(_))
        ));

        // tiny θ saturates instead of trapping
        let (pp, _) = power_floors(&p, 1e-6).unwrap();
        assert_eq!(pp, f64::INFINITY);
    }

    #[test]
    fn floors_hit_required_snr_exactly() {
        let p = pair((1.0, 2.0, 1.0, 15.0), (1.0, 1.0, 1.0), (2.0, 3.0));
        for theta in [0.1, 0.2, 0.3, 0.4] {
            let (pp, ps) = power_floors(&p, theta).unwrap();
            assert!(pp > p.p_min() && ps > p.p_min());
            let need_p = (p.qos.q_p / theta).exp2() - 1.0;
            let need_s = (p.qos.q_s / (1.0 - 2.0 * theta)).exp2() - 1.0;
            assert!(close(p.gains.lambda_ps * pp, need_p, 1e-10));
            assert!(close(p.gains.lambda_ss * ps, need_s, 1e-10));
        }
    }

    #[test]
    fn energy_efficiency_examples() {
        let p = pair((15.0, 15.0, 1.0, 6.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        let a = Allocation::new(0.25, 1.0, 1.0, 0.5);
        let ee = energy_efficiency(&p, &a).unwrap();
        assert!(close(ee, 2.0 / 0.75, 1e-12));

        let doubled = Allocation::new(0.25, 2.0, 2.0, 1.0);
        assert!(energy_efficiency(&p, &doubled).unwrap() <= ee);

        assert!(matches!(
            energy_efficiency(&p, &Allocation::new(0.25, 0.0, 0.0, 0.0)),
            Err(Error::InvalidAllocation(_))
        ));
    }

    #[test]
    fn feasibility_verdicts() {
        let p = pair((1.0, 2.0, 1.0, 15.0), (1.0, 1.0, 1.0), (1.0, 1.0));
        // the LP optimum at θ = 0.25 with the secondary floor
        let a = Allocation::new(0.25, 7.5, 7.5, 0.2);
        assert!(check_feasible(&p, &a).is_ok());
        assert!(is_feasible(&p, &a));

        let bad = Allocation::new(0.6, 7.5, 7.5, 0.2);
        assert_eq!(
            check_feasible(&p, &bad).violations,
            vec![Constraint::ThetaRange]
        );

        let low_s = Allocation::new(0.25, 7.5, 7.5, 0.19);
        let v = check_feasible(&p, &low_s);
        assert!(v.violates(Constraint::QosSecondary));
        assert!(v.violates(Constraint::SecondaryPowerLow));
        assert!(!is_feasible(&p, &low_s));

        let high = Allocation::new(0.25, 11.0, 7.5, 0.2);
        assert!(check_feasible(&p, &high).violates(Constraint::PrimaryPowerHigh));
    }

    #[test]
    fn grid_levels() {
        let g = ResourceGrid::from_dbm(-40.0, 23.0, 1.0, 0.005).unwrap();
        assert_eq!(g.powers().len(), 64);
        assert_eq!(g.thetas().len(), 99);
        assert_eq!(*g.powers().last().unwrap(), dbm_to_watt(23.0).unwrap());
        assert!(*g.thetas().last().unwrap() < 0.5);

        let coarse = ResourceGrid::from_dbm(-40.0, 23.0, 4.2, 0.5 / 26.0).unwrap();
        assert_eq!(coarse.powers().len(), 16);
        assert_eq!(coarse.thetas().len(), 25);

        assert_eq!(g.power_index_at_or_above(g.powers()[5]), Some(5));
        assert_eq!(g.power_index_at_or_above(g.powers()[5] * 1.01), Some(6));
        assert_eq!(g.power_index_at_or_above(1.0), None);
        assert_eq!(g.theta_index_at_or_below(0.0123), Some(1));
        assert_eq!(g.theta_index_at_or_below(0.001), None);

        assert!(ResourceGrid::new(1.0, 0.5, 1.0, 0.01).is_err());
        assert!(ResourceGrid::new(0.1, 0.5, 1.0, 0.25).is_err());
        assert!(ResourceGrid::new(0.1, 0.5, 0.0, 0.01).is_err());
    }

    #[test]
    fn invalid_domain_values_rejected() {
        assert!(ChannelGains::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ChannelGains::new(1.0, f64::INFINITY, 1.0, 1.0).is_err());
        assert!(Weights::new(1.0, -1.0, 1.0).is_err());
        assert!(QosReq::new(0.0, 1.0).is_err());
    }

    #[test]
    fn hessian_eigenvalue_examples() {
        let ev = wsp_hessian_eigenvalues(&Weights::equal());
        assert_eq!(ev[0], 0.0);
        assert_eq!(ev[1], 0.0);
        assert!((ev[2] - 6f64.sqrt()).abs() < 1e-12);
        assert!((ev[2] - 2.4495).abs() < 1e-4);
        assert_eq!(ev[3], -ev[2]);
        let ev = wsp_hessian_eigenvalues(&Weights::new(3.0, 4.0, 2.0).unwrap());
        assert!((ev[2] - 41f64.sqrt()).abs() < 1e-12);
        assert!(ev[2] * ev[3] < 0.0);
    }
}
