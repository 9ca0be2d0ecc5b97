//! Time-split search.
//!
//! Along the optimal-power trajectory the objective is
//! `W(θ) = u(θ) + v(θ)`, where `u` comes from the per-θ LP and
//! `v(θ) = w_st (1 - 2θ) p_s_low(θ)`. `W'` is increasing on the feasible
//! θ interval, so the optimal split is the root of `W'`. It is located by
//! Newton steps `θ ← θ - W'/W''` kept inside a sign-change bracket, with a
//! bisection step whenever Newton would leave the bracket or the iterate sits
//! on a kink of the piecewise-smooth `W`.

use std::fmt;

use crate::error::{Error, Result};
use crate::lp2::{self, Case5Rule, CaseId, KINK_RADIUS};
use crate::model::{self, required_snr, Allocation, LinkPair, Metrics};

/// `(v, v', v'')` of the secondary share at θ.
pub fn v_derivatives(pair: &LinkPair, theta: f64) -> Result<(f64, f64, f64)> {
    if !(theta.is_finite() && theta > 0.0 && theta < 0.5) {
        return Err(Error::InvalidInput(format!(
            "theta must lie in (0, 0.5), got {theta}"
        )));
    }
    Ok(v_terms(pair, theta))
}

fn secondary_floor_binds(pair: &LinkPair, theta: f64) -> bool {
    required_snr(pair.qos.q_s, 1.0 - 2.0 * theta) / pair.gains.lambda_ss <= pair.p_min()
}

fn v_terms(pair: &LinkPair, theta: f64) -> (f64, f64, f64) {
    let w_st = pair.weights.w_st;
    let rest = 1.0 - 2.0 * theta;
    if secondary_floor_binds(pair, theta) {
        let p_min = pair.p_min();
        return (w_st * rest * p_min, -2.0 * w_st * p_min, 0.0);
    }
    let lambda = pair.gains.lambda_ss;
    let v = w_st * rest * required_snr(pair.qos.q_s, rest) / lambda;
    // same shape as the primary term, with duration 1 - 2θ and chain factor -2
    let (d1, d2) = lp2::scaled_snr_derivatives(pair.qos.q_s, rest);
    (v, -2.0 * w_st / lambda * d1, 4.0 * w_st / lambda * d2)
}

/// Closed interval of time splits for which the feasible set is nonempty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }
}

/// Time splits where the primary link can meet its target at full power
/// and the secondary link still fits in the remaining time. `None` when no
/// such θ exists.
pub fn feasible_theta_interval(pair: &LinkPair) -> Option<ThetaInterval> {
    let g = &pair.gains;
    let p_max = pair.p_max();
    let q_p = pair.qos.q_p;
    let combined = q_p / (1.0 + (g.lambda_pp + g.lambda_sp) * p_max).log2();
    let decode = q_p / (1.0 + g.lambda_ps * p_max).log2();
    let lo = combined.max(decode);
    let hi = 0.5 * (1.0 - pair.qos.q_s / (1.0 + g.lambda_ss * p_max).log2());
    if hi <= 0.0 || lo >= 0.5 || lo >= hi {
        None
    } else {
        Some(ThetaInterval { lo, hi })
    }
}

/// `W`, `W'` and `W''` at one θ along the optimal-power trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WspDerivatives {
    pub theta: f64,
    pub w: f64,
    pub w_prime: f64,
    pub w_double_prime: f64,
    pub case: CaseId,
    /// False near a case transition of the LP or at the p_s floor kink.
    pub valid: bool,
}

pub fn wsp_derivatives(pair: &LinkPair, theta: f64, rule: Case5Rule) -> Result<WspDerivatives> {
    let lp = lp2::solve_lp_with(pair, theta, rule)?;
    if !lp.is_feasible() {
        return Err(Error::Infeasible(format!(
            "no feasible powers at theta {theta}"
        )));
    }
    let (v, dv, ddv) = v_terms(pair, theta);
    let floor_here = secondary_floor_binds(pair, theta);
    let v_smooth = [theta - KINK_RADIUS, theta + KINK_RADIUS]
        .into_iter()
        .all(|t| t > 0.0 && t < 0.5 && secondary_floor_binds(pair, t) == floor_here);
    Ok(WspDerivatives {
        theta,
        w: lp.u + v,
        w_prime: lp.u_prime + dv,
        w_double_prime: lp.u_double_prime + ddv,
        case: lp.case,
        valid: lp.derivative_valid && v_smooth,
    })
}

/// Which start-point test a convergence scan applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanCondition {
    /// `W'''(θ0) != 0` and `|W''(θ0)|^2 > |W(θ0) W'(θ0)| / 2`.
    ObjectiveProduct,
    /// `W'''(θ0) != 0` and `|W'(θ0) W'''(θ0)| < |W''(θ0)|^2`, the usual
    /// sufficient condition for Newton on `W'`.
    NewtonSufficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta0Strategy {
    Midpoint,
    ConvergenceScan(ScanCondition),
    /// Start from the optimum of the previous subframe.
    WarmStart(Option<f64>),
}

impl fmt::Display for Theta0Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta0Strategy::Midpoint => f.write_str("midpoint"),
            Theta0Strategy::ConvergenceScan(ScanCondition::ObjectiveProduct) => f.write_str("scan"),
            Theta0Strategy::ConvergenceScan(ScanCondition::NewtonSufficient) => {
                f.write_str("scan_newton")
            }
            Theta0Strategy::WarmStart(_) => f.write_str("warm"),
        }
    }
}

/// Where the starting point actually came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theta0Source {
    Midpoint,
    Scan,
    /// The scan found no grid point meeting the condition.
    ScanFallback,
    Warm,
    /// Warm start requested without a previous optimum.
    WarmFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta0 {
    pub theta: f64,
    pub source: Theta0Source,
}

/// Step used by the third-derivative difference of the scan condition.
const THIRD_DERIVATIVE_STEP: f64 = 1e-5;

pub fn select_theta0(pair: &LinkPair, strategy: Theta0Strategy) -> Result<Theta0> {
    let interval = feasible_theta_interval(pair)
        .ok_or_else(|| Error::Infeasible("empty feasible theta interval".into()))?;
    Ok(select_in(pair, strategy, &interval))
}

fn select_in(pair: &LinkPair, strategy: Theta0Strategy, interval: &ThetaInterval) -> Theta0 {
    let mid = Theta0 {
        theta: interval.midpoint(),
        source: Theta0Source::Midpoint,
    };
    match strategy {
        Theta0Strategy::Midpoint => mid,
        Theta0Strategy::WarmStart(None) => Theta0 {
            source: Theta0Source::WarmFallback,
            ..mid
        },
        Theta0Strategy::WarmStart(Some(prev)) => {
            let step = pair.grid.delta_theta();
            let theta = if prev > interval.lo && prev < interval.hi {
                prev
            } else if prev <= interval.lo {
                interval.lo + step
            } else {
                interval.hi - step
            };
            if theta > interval.lo && theta < interval.hi {
                Theta0 {
                    theta,
                    source: Theta0Source::Warm,
                }
            } else {
                Theta0 {
                    source: Theta0Source::Warm,
                    ..mid
                }
            }
        }
        Theta0Strategy::ConvergenceScan(cond) => {
            let h = THIRD_DERIVATIVE_STEP;
            let hit = pair
                .grid
                .thetas()
                .iter()
                .copied()
                .filter(|&t| t - h > interval.lo && t + h < interval.hi)
                .find(|&t| scan_condition_holds(pair, t, cond));
            match hit {
                Some(theta) => Theta0 {
                    theta,
                    source: Theta0Source::Scan,
                },
                None => Theta0 {
                    source: Theta0Source::ScanFallback,
                    ..mid
                },
            }
        }
    }
}

fn scan_condition_holds(pair: &LinkPair, theta: f64, cond: ScanCondition) -> bool {
    let h = THIRD_DERIVATIVE_STEP;
    let rule = Case5Rule::default();
    let (Ok(here), Ok(left), Ok(right)) = (
        wsp_derivatives(pair, theta, rule),
        wsp_derivatives(pair, theta - h, rule),
        wsp_derivatives(pair, theta + h, rule),
    ) else {
        return false;
    };
    let third = (right.w_double_prime - left.w_double_prime) / (2.0 * h);
    if third == 0.0 || !third.is_finite() {
        return false;
    }
    let curv2 = here.w_double_prime * here.w_double_prime;
    match cond {
        ScanCondition::ObjectiveProduct => curv2 > (here.w * here.w_prime).abs() / 2.0,
        ScanCondition::NewtonSufficient => (here.w_prime * third).abs() < curv2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stop once `|θ_k - θ_{k-1}| <= epsilon`.
    pub epsilon: f64,
    pub max_iter: usize,
    pub theta0: Theta0Strategy,
    pub case5_rule: Case5Rule,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iter: 50,
            theta0: Theta0Strategy::Midpoint,
            case5_rule: Case5Rule::Trajectory,
        }
    }
}

impl NewtonConfig {
    pub fn with_theta0(self, theta0: Theta0Strategy) -> Self {
        Self { theta0, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Newton,
    Bisection,
}

/// Which end of the feasible interval the optimum was pinned to when `W'`
/// does not change sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    /// `θ_0, θ_1, ..., θ_K`
    pub iterates: Vec<f64>,
    /// `|θ_k - θ_{k-1}|` for `k = 1..=K`.
    pub step_sizes: Vec<f64>,
    pub step_kinds: Vec<StepKind>,
    pub theta0_source: Theta0Source,
    pub endpoint: Option<Endpoint>,
    pub converged: bool,
    /// Final sign-change bracket.
    pub bracket: (f64, f64),
}

impl NewtonTrace {
    pub fn iterations(&self) -> usize {
        self.step_sizes.len()
    }
}

struct NewtonOutcome {
    theta_star: f64,
    trace: NewtonTrace,
}

/// Bracket edges are kept this far inside the feasible interval, where the
/// LP is guaranteed nonempty.
fn interior_margin(interval: &ThetaInterval) -> f64 {
    (interval.width() * 1e-6).min(1e-9)
}

fn run_newton(pair: &LinkPair, config: &NewtonConfig) -> Result<NewtonOutcome> {
    config.validate()?;
    let interval = feasible_theta_interval(pair)
        .ok_or_else(|| Error::Infeasible("empty feasible theta interval".into()))?;
    let rule = config.case5_rule;
    let margin = interior_margin(&interval);
    let (mut a, mut b) = (interval.lo + margin, interval.hi - margin);
    let start = select_in(pair, config.theta0, &interval);
    let theta0 = start.theta.clamp(a, b);

    let mut trace = NewtonTrace {
        iterates: vec![theta0],
        step_sizes: Vec::new(),
        step_kinds: Vec::new(),
        theta0_source: start.source,
        endpoint: None,
        converged: false,
        bracket: (a, b),
    };

    let at_a = wsp_derivatives(pair, a, rule)?;
    if at_a.w_prime >= 0.0 {
        trace.endpoint = Some(Endpoint::Lower);
        trace.converged = true;
        trace.iterates = vec![a];
        return Ok(NewtonOutcome {
            theta_star: a,
            trace,
        });
    }
    let at_b = wsp_derivatives(pair, b, rule)?;
    if at_b.w_prime <= 0.0 {
        trace.endpoint = Some(Endpoint::Upper);
        trace.converged = true;
        trace.iterates = vec![b];
        return Ok(NewtonOutcome {
            theta_star: b,
            trace,
        });
    }

    let mut theta = theta0;
    let mut d = wsp_derivatives(pair, theta, rule)?;
    fn shrink(theta: f64, slope: f64, a: &mut f64, b: &mut f64) {
        if slope < 0.0 {
            *a = theta;
        } else if slope > 0.0 {
            *b = theta;
        }
    }
    shrink(theta, d.w_prime, &mut a, &mut b);

    for _ in 0..config.max_iter {
        if d.w_prime == 0.0 {
            trace.converged = true;
            break;
        }
        let newton = theta - d.w_prime / d.w_double_prime;
        let (next, kind) = if d.valid && d.w_double_prime > 0.0 && newton > a && newton < b {
            (newton, StepKind::Newton)
        } else {
            (0.5 * (a + b), StepKind::Bisection)
        };
        let step = (next - theta).abs();
        theta = next;
        trace.iterates.push(theta);
        trace.step_sizes.push(step);
        trace.step_kinds.push(kind);
        d = wsp_derivatives(pair, theta, rule)?;
        shrink(theta, d.w_prime, &mut a, &mut b);
        if step <= config.epsilon {
            trace.converged = true;
            break;
        }
    }
    trace.bracket = (a, b);
    let theta_star = if trace.converged {
        theta
    } else {
        0.5 * (a + b)
    };
    Ok(NewtonOutcome { theta_star, trace })
}

/// Optimal time split and the iteration trace that produced it.
pub fn newton_solve(pair: &LinkPair, config: &NewtonConfig) -> Result<(f64, NewtonTrace)> {
    let out = run_newton(pair, config)?;
    if !out.trace.converged {
        return Err(Error::Unconverged {
            iterations: out.trace.iterations(),
            lo: out.trace.bracket.0,
            hi: out.trace.bracket.1,
        });
    }
    Ok((out.theta_star, out.trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted; the allocation uses the bracket midpoint.
    Unconverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub continuous: Allocation,
    pub continuous_metrics: Metrics,
    /// Best allocation on the resource grid, if any grid point near the
    /// continuous optimum is feasible.
    pub snapped: Option<Allocation>,
    pub snapped_metrics: Option<Metrics>,
    /// Iteration record; only the Newton-based scheme has one.
    pub trace: Option<NewtonTrace>,
    pub case: CaseId,
    pub status: SolveStatus,
}

impl SolveResult {
    /// WSP of the snapped allocation, or `None` if nothing on the grid fits.
    pub fn snapped_wsp(&self) -> Option<f64> {
        self.snapped_metrics.map(|m| m.wsp)
    }
}

/// Continuous optimal powers at a given θ: LP optimizer plus the secondary
/// floor.
pub fn powers_at(pair: &LinkPair, theta: f64) -> Result<(Allocation, CaseId)> {
    let lp = lp2::solve_lp(pair, theta)?;
    if !lp.is_feasible() {
        return Err(Error::Infeasible(format!(
            "no feasible powers at theta {theta}"
        )));
    }
    let (_, p_s_low) = model::power_floors(pair, theta)?;
    Ok((
        Allocation::new(theta, lp.p_p_star, lp.p_r_star, p_s_low),
        lp.case,
    ))
}

/// Grid allocation near a continuous optimum.
///
/// Walks the grid time splits outward from the two that bracket `theta`. At
/// each, `p_s` is the secondary floor rounded up to the next power level and
/// `(p_p, p_r)` is the cheapest pair of levels meeting both primary
/// constraints. No grid allocation at a time split costs less than the
/// continuous optimum there, and that optimum grows away from `theta`, so a
/// side is abandoned once it reaches the best cost found.
pub fn snap_to_grid(pair: &LinkPair, theta: f64) -> Option<Allocation> {
    let thetas = pair.grid.thetas();
    let n = thetas.len() as isize;
    let below = pair
        .grid
        .theta_index_at_or_below(theta)
        .map_or(-1, |i| i as isize);

    let mut best: Option<(f64, Allocation)> = None;
    for (start, step) in [(below, -1), (below + 1, 1)] {
        let mut idx = start;
        while (0..n).contains(&idx) {
            let t = thetas[idx as usize];
            idx += step;
            let Some(bound) = powers_at(pair, t)
                .ok()
                .and_then(|(a, _)| model::wsp(pair, &a).ok())
            else {
                // left the feasible interval, which only widens the gap
                break;
            };
            if best.is_some_and(|(w, _)| bound >= w) {
                break;
            }
            let Some(cand) = cheapest_at(pair, t) else {
                continue;
            };
            let Ok(w) = model::wsp(pair, &cand) else {
                continue;
            };
            if best.map_or(true, |(bw, ba)| {
                w < bw || (w == bw && cand.theta < ba.theta)
            }) {
                best = Some((w, cand));
            }
        }
    }
    best.map(|(_, a)| a)
}

/// Plain rounding near a continuous optimum: at the two grid time splits
/// around `theta` (then two more on each side if neither works), the LP
/// powers and the secondary floor are rounded up to the next power level and
/// re-checked. Returns the cheapest feasible candidate.
pub fn snap_round_up(pair: &LinkPair, theta: f64) -> Option<Allocation> {
    let thetas = pair.grid.thetas();
    let n = thetas.len() as isize;
    let below = pair
        .grid
        .theta_index_at_or_below(theta)
        .map_or(-1, |i| i as isize);
    let near = [below, below + 1];
    let wider = [below - 2, below - 1, below + 2, below + 3];

    let mut best: Option<(f64, Allocation)> = None;
    for ring in [&near[..], &wider[..]] {
        for &idx in ring {
            if idx < 0 || idx >= n {
                continue;
            }
            let Some(cand) = round_up_at(pair, thetas[idx as usize]) else {
                continue;
            };
            let Ok(w) = model::wsp(pair, &cand) else {
                continue;
            };
            if best.map_or(true, |(bw, ba)| {
                w < bw || (w == bw && cand.theta < ba.theta)
            }) {
                best = Some((w, cand));
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|(_, a)| a)
}

fn round_up_at(pair: &LinkPair, theta: f64) -> Option<Allocation> {
    let (cont, _) = powers_at(pair, theta).ok()?;
    let levels = pair.grid.powers();
    let up = |p: f64| pair.grid.power_index_at_or_above(p).map(|i| levels[i]);
    let cand = Allocation::new(theta, up(cont.p_p)?, up(cont.p_r)?, up(cont.p_s)?);
    model::is_feasible(pair, &cand).then_some(cand)
}

fn cheapest_at(pair: &LinkPair, theta: f64) -> Option<Allocation> {
    let grid = &pair.grid;
    let levels = grid.powers();
    let (p_p_low, p_s_low) = model::power_floors(pair, theta).ok()?;
    let p_s = levels[grid.power_index_at_or_above(p_s_low)?];
    let need = required_snr(pair.qos.q_p, theta);
    let g = &pair.gains;
    let w = &pair.weights;

    let mut best: Option<(f64, Allocation)> = None;
    for &p_p in &levels[grid.power_index_at_or_above(p_p_low)?..] {
        let p_r_low = ((need - g.lambda_pp * p_p) / g.lambda_sp).max(pair.p_min());
        let Some(first) = grid.power_index_at_or_above(p_r_low) else {
            continue;
        };
        // the tolerant index lookup may land a hair short of the line
        let found = levels[first..]
            .iter()
            .take(2)
            .map(|&p_r| Allocation::new(theta, p_p, p_r, p_s))
            .find(|a| model::is_feasible(pair, a));
        if let Some(cand) = found {
            let cost = w.w_pt * cand.p_p + w.w_sr * cand.p_r;
            if best.map_or(true, |(c, _)| cost < c) {
                best = Some((cost, cand));
            }
            if cand.p_r == levels[0] {
                // larger p_p only adds cost from here on
                break;
            }
        }
    }
    best.map(|(_, a)| a)
}

/// Full scheme: optimal time split, continuous powers, grid allocation.
pub fn allocate(pair: &LinkPair, config: &NewtonConfig) -> Result<SolveResult> {
    let out = run_newton(pair, config)?;
    let status = if out.trace.converged {
        SolveStatus::Converged
    } else {
        SolveStatus::Unconverged
    };
    let (continuous, case) = powers_at(pair, out.theta_star)?;
    let snapped = snap_to_grid(pair, out.theta_star);
    Ok(SolveResult {
        continuous_metrics: model::metrics(pair, &continuous)?,
        continuous,
        snapped_metrics: snapped.map(|a| model::metrics(pair, &a)).transpose()?,
        snapped,
        trace: Some(out.trace),
        case,
        status,
    })
}
