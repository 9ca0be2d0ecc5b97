//! Active-set enumeration of the KKT conditions.
//!
//! The problem has nine inequality constraints, written as `g_i(x) <= 0`
//! over `x = (p_p, p_r, p_s, θ)`:
//!
//! | bit | constraint |
//! |-----|------------|
//! | 0 | `θ > 0` |
//! | 1 | `θ < 0.5` |
//! | 2 | `2^(q_p/θ) - 1 - lambda_pp p_p - lambda_sp p_r <= 0` |
//! | 3 | `p_p_low(θ) - p_p <= 0` |
//! | 4 | `p_p - p_max <= 0` |
//! | 5 | `p_min - p_r <= 0` |
//! | 6 | `p_r - p_max <= 0` |
//! | 7 | `p_s_low(θ) - p_s <= 0` |
//! | 8 | `p_s - p_max <= 0` |
//!
//! Each of the `2^9` patterns fixes its active constraints as equalities.
//! Patterns that cannot hold (open θ bounds, a power with no active
//! constraint, more equalities than unknowns) are discarded up front. The
//! remaining ones leave one free variable θ: two active power constraints
//! pin `(p_p, p_r)` as functions of θ, `p_s` follows its floor, and either
//! the θ-row of the stationarity system or one extra active constraint gives
//! a scalar equation `F(θ) = 0`. Its roots are bracketed by a scan and
//! refined, then multipliers are recovered from the stationarity system and
//! checked for sign.

use std::f64::consts::LN_2;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::lp2;
use crate::model::{self, required_snr, Allocation, LinkPair};
use crate::newton::{self, SolveResult, SolveStatus};

pub const CONSTRAINT_COUNT: usize = 9;

const COMBINED: usize = 2;
const PRIMARY_LOW: usize = 3;
const PRIMARY_HIGH: usize = 4;
const RELAY_LOW: usize = 5;
const RELAY_HIGH: usize = 6;
const SECONDARY_LOW: usize = 7;
const SECONDARY_HIGH: usize = 8;

/// Largest accepted stationarity residual, relative to `max(1, |∇W|)`.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// Samples used to bracket roots of `F(θ)`.
const SCAN_POINTS: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct KktCandidate {
    pub allocation: Allocation,
    pub wsp: f64,
    /// Bit `i` set when constraint `i` is active.
    pub active_set: u16,
    /// `(constraint index, multiplier)` for each active constraint.
    pub multipliers: Vec<(usize, f64)>,
    /// Sup-norm of the Lagrangian gradient over `max(1, |∇W|)`.
    pub residual: f64,
    pub multipliers_valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSearch {
    /// Candidates that are primal feasible, stationary and have
    /// nonnegative multipliers.
    pub candidates: Vec<KktCandidate>,
    pub patterns_total: usize,
    /// Patterns rejected without solving anything.
    pub patterns_pruned: usize,
    /// Patterns that needed a numerical search for `F(θ) = 0`.
    pub root_searches: usize,
}

impl KktSearch {
    pub fn best(&self) -> Option<&KktCandidate> {
        self.candidates
            .iter()
            .fold(None, |acc: Option<&KktCandidate>, c| match acc {
                Some(b) if b.wsp <= c.wsp => Some(b),
                _ => Some(c),
            })
    }
}

/// Linear constraint on `(p_p, p_r)` at θ: `coeffs · (p_p, p_r) = rhs` when
/// active.
fn power_row(pair: &LinkPair, idx: usize, theta: f64) -> ([f64; 2], f64) {
    let g = &pair.gains;
    match idx {
        COMBINED => (
            [g.lambda_pp, g.lambda_sp],
            required_snr(pair.qos.q_p, theta),
        ),
        PRIMARY_LOW => ([1.0, 0.0], p_p_low(pair, theta)),
        PRIMARY_HIGH => ([1.0, 0.0], pair.p_max()),
        RELAY_LOW => ([0.0, 1.0], pair.p_min()),
        RELAY_HIGH => ([0.0, 1.0], pair.p_max()),
        _ => unreachable!("constraint {idx} does not bound (p_p, p_r)"),
    }
}

fn p_p_low(pair: &LinkPair, theta: f64) -> f64 {
    (required_snr(pair.qos.q_p, theta) / pair.gains.lambda_ps).max(pair.p_min())
}

fn p_s_low(pair: &LinkPair, theta: f64) -> f64 {
    (required_snr(pair.qos.q_s, 1.0 - 2.0 * theta) / pair.gains.lambda_ss).max(pair.p_min())
}

/// `d/dθ (2^(q_p/θ) - 1)`
fn snr_slope(pair: &LinkPair, theta: f64) -> f64 {
    let q = pair.qos.q_p;
    -(q * LN_2 / (theta * theta)) * (q / theta).exp2()
}

fn p_p_low_slope(pair: &LinkPair, theta: f64) -> f64 {
    if required_snr(pair.qos.q_p, theta) / pair.gains.lambda_ps > pair.p_min() {
        snr_slope(pair, theta) / pair.gains.lambda_ps
    } else {
        0.0
    }
}

fn p_s_low_slope(pair: &LinkPair, theta: f64) -> f64 {
    let q = pair.qos.q_s;
    let rest = 1.0 - 2.0 * theta;
    if required_snr(q, rest) / pair.gains.lambda_ss > pair.p_min() {
        2.0 * q * LN_2 / (rest * rest) * (q / rest).exp2() / pair.gains.lambda_ss
    } else {
        0.0
    }
}

/// `∇g_idx` over `(p_p, p_r, p_s, θ)`.
fn gradient(pair: &LinkPair, idx: usize, theta: f64) -> [f64; 4] {
    let g = &pair.gains;
    match idx {
        COMBINED => [-g.lambda_pp, -g.lambda_sp, 0.0, snr_slope(pair, theta)],
        PRIMARY_LOW => [-1.0, 0.0, 0.0, p_p_low_slope(pair, theta)],
        PRIMARY_HIGH => [1.0, 0.0, 0.0, 0.0],
        RELAY_LOW => [0.0, -1.0, 0.0, 0.0],
        RELAY_HIGH => [0.0, 1.0, 0.0, 0.0],
        SECONDARY_LOW => [0.0, 0.0, -1.0, p_s_low_slope(pair, theta)],
        SECONDARY_HIGH => [0.0, 0.0, 1.0, 0.0],
        _ => unreachable!("open θ bounds are never active"),
    }
}

fn objective_gradient(pair: &LinkPair, x: &Allocation) -> [f64; 4] {
    let w = &pair.weights;
    [
        w.w_pt * x.theta,
        w.w_sr * x.theta,
        w.w_st * (1.0 - 2.0 * x.theta),
        w.w_pt * x.p_p + w.w_sr * x.p_r - 2.0 * w.w_st * x.p_s,
    ]
}

/// Shape of a surviving pattern.
#[derive(Debug, Clone)]
struct Pattern {
    mask: u16,
    /// Two active constraints that determine `(p_p, p_r)`.
    pin: (usize, usize),
    /// Extra scalar equation in θ, if any.
    extra: Option<Extra>,
    active: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Extra {
    /// A third active constraint on `(p_p, p_r)`.
    PowerRow(usize),
    /// `p_s_low(θ) = p_max`
    SecondaryCeiling,
}

fn classify_pattern(mask: u16) -> Option<Pattern> {
    let on = |i: usize| mask & (1 << i) != 0;
    if on(0) || on(1) || !on(SECONDARY_LOW) {
        return None;
    }
    let p_side = [COMBINED, PRIMARY_LOW, PRIMARY_HIGH].iter().any(|&i| on(i));
    let r_side = [COMBINED, RELAY_LOW, RELAY_HIGH].iter().any(|&i| on(i));
    if !p_side || !r_side {
        return None;
    }
    let rows: Vec<usize> = (COMBINED..=RELAY_HIGH).filter(|&i| on(i)).collect();
    let p_only = |i: usize| i == PRIMARY_LOW || i == PRIMARY_HIGH;
    let r_only = |i: usize| i == RELAY_LOW || i == RELAY_HIGH;
    let independent = |a: usize, b: usize| !(p_only(a) && p_only(b)) && !(r_only(a) && r_only(b));

    let mut pin = None;
    'outer: for (k, &a) in rows.iter().enumerate() {
        for &b in &rows[k + 1..] {
            if independent(a, b) {
                pin = Some((a, b));
                break 'outer;
            }
        }
    }
    let pin = pin?;
    let mut extras: Vec<Extra> = rows
        .iter()
        .copied()
        .filter(|&i| i != pin.0 && i != pin.1)
        .map(Extra::PowerRow)
        .collect();
    if on(SECONDARY_HIGH) {
        extras.push(Extra::SecondaryCeiling);
    }
    if extras.len() > 1 {
        return None;
    }
    let active = (COMBINED..CONSTRAINT_COUNT).filter(|&i| on(i)).collect();
    Some(Pattern {
        mask,
        pin,
        extra: extras.pop(),
        active,
    })
}

/// `(p_p, p_r, p_s)` on the pattern's pinned lines at θ.
fn point(pair: &LinkPair, pat: &Pattern, theta: f64) -> Option<Allocation> {
    let (a, ra) = power_row(pair, pat.pin.0, theta);
    let (b, rb) = power_row(pair, pat.pin.1, theta);
    let det = a[0] * b[1] - a[1] * b[0];
    if det == 0.0 || !ra.is_finite() || !rb.is_finite() {
        return None;
    }
    let p_p = (ra * b[1] - a[1] * rb) / det;
    let p_r = (a[0] * rb - ra * b[0]) / det;
    Some(Allocation::new(theta, p_p, p_r, p_s_low(pair, theta)))
}

/// Multipliers of the first three active constraints from the `p_p`, `p_r`
/// and `p_s` rows, plus the signed θ-row residual.
fn reduced_stationarity(
    pair: &LinkPair,
    pat: &Pattern,
    x: &Allocation,
) -> Option<(Vector3<f64>, f64)> {
    let grads: Vec<[f64; 4]> = pat
        .active
        .iter()
        .map(|&i| gradient(pair, i, x.theta))
        .collect();
    let gw = objective_gradient(pair, x);
    let m = Matrix3::from_fn(|r, c| grads[c][r]);
    let rhs = Vector3::new(-gw[0], -gw[1], -gw[2]);
    let mu = m.lu().solve(&rhs)?;
    let theta_row = gw[3] + (0..3).map(|c| grads[c][3] * mu[c]).sum::<f64>();
    Some((mu, theta_row))
}

fn full_stationarity(pair: &LinkPair, pat: &Pattern, x: &Allocation) -> Option<Vec<f64>> {
    let grads: Vec<[f64; 4]> = pat
        .active
        .iter()
        .map(|&i| gradient(pair, i, x.theta))
        .collect();
    let gw = objective_gradient(pair, x);
    match grads.len() {
        3 => reduced_stationarity(pair, pat, x).map(|(mu, _)| mu.iter().copied().collect()),
        4 => {
            let m = Matrix4::from_fn(|r, c| grads[c][r]);
            let rhs = Vector4::new(-gw[0], -gw[1], -gw[2], -gw[3]);
            m.lu().solve(&rhs).map(|mu| mu.iter().copied().collect())
        }
        _ => None,
    }
}

fn scalar_equation(pair: &LinkPair, pat: &Pattern, theta: f64) -> Option<f64> {
    let x = point(pair, pat, theta)?;
    let value = match pat.extra {
        None => reduced_stationarity(pair, pat, &x)?.1,
        Some(Extra::PowerRow(i)) => {
            let (c, rhs) = power_row(pair, i, theta);
            (c[0] * x.p_p + c[1] * x.p_r - rhs) / rhs.abs()
        }
        Some(Extra::SecondaryCeiling) => p_s_low(pair, theta) / pair.p_max() - 1.0,
    };
    value.is_finite().then_some(value)
}

/// Roots of `f` on `[lo, hi]`: samples with `|f| <= zero_tol` and sign
/// changes over a uniform scan, each refined by safeguarded Newton with a
/// difference slope when the samples are monotone and by bisection
/// otherwise.
fn roots<F: Fn(f64) -> Option<f64>>(f: F, lo: f64, hi: f64, zero_tol: f64) -> Vec<f64> {
    let n = SCAN_POINTS;
    let samples: Vec<(f64, Option<f64>)> = (0..n)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            (t, f(t))
        })
        .collect();
    let values: Vec<f64> = samples.iter().filter_map(|s| s.1).collect();
    let monotone =
        values.windows(2).all(|w| w[1] >= w[0]) || values.windows(2).all(|w| w[1] <= w[0]);

    let mut out = Vec::new();
    for (k, &(t, v)) in samples.iter().enumerate() {
        let Some(v) = v else { continue };
        if v.abs() <= zero_tol {
            out.push(t);
            continue;
        }
        let Some(&(t2, Some(v2))) = samples.get(k + 1) else {
            continue;
        };
        if v * v2 < 0.0 && v2.abs() > zero_tol {
            if let Some(r) = refine(&f, t, t2, v, monotone) {
                out.push(r);
            }
        }
    }
    out
}

fn refine<F: Fn(f64) -> Option<f64>>(
    f: &F,
    mut a: f64,
    mut b: f64,
    fa: f64,
    newton: bool,
) -> Option<f64> {
    let left_negative = fa < 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = f(x)?;
        if fx == 0.0 {
            return Some(x);
        }
        if (fx < 0.0) == left_negative {
            a = x;
        } else {
            b = x;
        }
        if b - a <= 4.0 * f64::EPSILON * x.abs() {
            break;
        }
        let mut next = 0.5 * (a + b);
        if newton {
            let h = 1e-7 * (b - a).max(1e-12);
            if let (Some(fp), Some(fm)) = (f(x + h), f(x - h)) {
                let slope = (fp - fm) / (2.0 * h);
                let step = x - fx / slope;
                if slope != 0.0 && step > a && step < b {
                    next = step;
                }
            }
        }
        if (next - x).abs() <= 1e-15 {
            x = next;
            break;
        }
        x = next;
    }
    Some(x)
}

fn evaluate_candidate(pair: &LinkPair, pat: &Pattern, theta: f64) -> Option<KktCandidate> {
    let x = point(pair, pat, theta)?;
    let x = if matches!(pat.extra, Some(Extra::SecondaryCeiling)) {
        Allocation {
            p_s: pair.p_max(),
            ..x
        }
    } else {
        x
    };
    if !model::is_feasible(pair, &x) {
        return None;
    }
    let mu = full_stationarity(pair, pat, &x)?;
    let gw = objective_gradient(pair, &x);
    let scale = gw.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    let mut grad = gw;
    for (&i, &m) in pat.active.iter().zip(&mu) {
        let gi = gradient(pair, i, theta);
        for r in 0..4 {
            grad[r] += m * gi[r];
        }
    }
    let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) / scale;
    let mu_scale = mu.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let multipliers_valid = mu.iter().all(|&m| m >= -1e-9 * mu_scale);
    Some(KktCandidate {
        allocation: x,
        wsp: model::wsp(pair, &x).ok()?,
        active_set: pat.mask,
        multipliers: pat.active.iter().copied().zip(mu).collect(),
        residual,
        multipliers_valid,
    })
}

/// Enumerates all `2^9` active-set patterns and keeps the valid KKT points.
pub fn kkt_search(pair: &LinkPair) -> Result<KktSearch> {
    let interval = newton::feasible_theta_interval(pair)
        .ok_or_else(|| Error::Infeasible("empty feasible theta interval".into()))?;
    let (lo, hi) = (interval.lo, interval.hi);

    let total = 1usize << CONSTRAINT_COUNT;
    let mut search = KktSearch {
        candidates: Vec::new(),
        patterns_total: total,
        patterns_pruned: 0,
        root_searches: 0,
    };
    for mask in 0..total as u16 {
        let Some(pat) = classify_pattern(mask) else {
            search.patterns_pruned += 1;
            continue;
        };
        search.root_searches += 1;
        // Pinned patterns carry a relative residual and often hold exactly
        // at an end of the interval.
        let zero_tol = if pat.extra.is_some() { 1e-9 } else { 0.0 };
        for theta in roots(|t| scalar_equation(pair, &pat, t), lo, hi, zero_tol) {
            if let Some(c) = evaluate_candidate(pair, &pat, theta) {
                if c.multipliers_valid && c.residual <= STATIONARITY_TOL {
                    search.candidates.push(c);
                }
            }
        }
    }
    Ok(search)
}

/// KKT-based scheme: the cheapest valid KKT point, with its powers rounded up
/// to the grid near the KKT time split.
pub fn kkt_alloc(pair: &LinkPair) -> Result<SolveResult> {
    let search = kkt_search(pair)?;
    let best = search
        .best()
        .ok_or_else(|| Error::Infeasible("no valid KKT point".into()))?
        .allocation;
    let snapped = newton::snap_round_up(pair, best.theta);
    Ok(SolveResult {
        continuous: best,
        continuous_metrics: model::metrics(pair, &best)?,
        snapped,
        snapped_metrics: snapped.map(|a| model::metrics(pair, &a)).transpose()?,
        trace: None,
        case: lp2::solve_lp(pair, best.theta)?.case,
        status: SolveStatus::Converged,
    })
}
