//! Per-θ two-variable LP over the primary powers `(p_p, p_r)`.
//!
//! For a fixed time split the primary share of the objective is
//! `u(θ) = θ (w_pt p_p + w_sr p_r)`, minimized subject to the combined-SNR
//! line `lambda_pp p_p + lambda_sp p_r >= 2^(q_p/θ) - 1` and the power boxes.
//! The feasible polygon is the box `A B C D` with
//! `A = (p_max, p_max)`, `B = (p_p_low, p_max)`, `C = (p_p_low, p_min)`,
//! `D = (p_max, p_min)`, cut by that line. The optimizer is read off by
//! comparing the objective slope `k_l = w_pt / w_sr` with the constraint
//! slope `k_m = lambda_pp / lambda_sp` and locating the line relative to the
//! corners.

use std::f64::consts::LN_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{required_snr, LinkPair};

/// Which edge or corner of the feasible polygon holds the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// On `AB`: relay at `p_max`, `p_p = g(p_max)`.
    Case1AB,
    /// On `BC` with `p_p_low = p_min`.
    Case2BCFloor,
    /// On `BC` with `p_p_low` set by the relay decoding constraint.
    Case2BCDecode,
    /// On `CD`: relay at `p_min`, `p_p = g(p_min)`.
    Case3CD,
    /// On `DA`: `p_p = p_max`, `p_r = h(p_max)`.
    Case4DA,
    /// Corner `C`: the combined-SNR line does not bind.
    Case5CornerC,
    Infeasible,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseId::Case1AB => "case1_ab",
            CaseId::Case2BCFloor => "case2_bc_floor",
            CaseId::Case2BCDecode => "case2_bc_decode",
            CaseId::Case3CD => "case3_cd",
            CaseId::Case4DA => "case4_da",
            CaseId::Case5CornerC => "case5_corner_c",
            CaseId::Infeasible => "infeasible",
        };
        f.write_str(s)
    }
}

/// Derivative rule used for [`CaseId::Case5CornerC`].
///
/// `Trajectory` differentiates the realized optimizer path
/// `θ (w_pt p_p_low(θ) + w_sr p_min)`. `ReuseCase3` evaluates the `CD`-edge
/// formulas instead; they do not match the path actually taken and are kept
/// for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Case5Rule {
    #[default]
    Trajectory,
    ReuseCase3,
}

/// Slopes, corner values and the auxiliary line evaluators at one θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseGeometry {
    pub theta: f64,
    pub k_l: f64,
    pub k_m: f64,
    /// `2^(q_p/θ) - 1`.
    pub required_snr: f64,
    pub p_p_low: f64,
    pub p_s_low: f64,
    pub f_low_min: f64,
    pub f_low_max: f64,
    pub f_max_min: f64,
    pub f_max_max: f64,
    /// `f(p_max, p_max) >= q_p`, `p_p_low <= p_max` and `p_s_low <= p_max`.
    pub feasible: bool,
    lambda_pp: f64,
    lambda_sp: f64,
}

impl CaseGeometry {
    /// `θ log2(1 + lambda_pp x + lambda_sp y)`
    pub fn f(&self, x: f64, y: f64) -> f64 {
        self.theta * (1.0 + self.lambda_pp * x + self.lambda_sp * y).log2()
    }

    /// `p_p` on the combined-SNR line for relay power `y`.
    pub fn g(&self, y: f64) -> f64 {
        (self.required_snr - self.lambda_sp * y) / self.lambda_pp
    }

    /// `p_r` on the combined-SNR line for primary power `x`.
    pub fn h(&self, x: f64) -> f64 {
        (self.required_snr - self.lambda_pp * x) / self.lambda_sp
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 && theta < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "theta must lie in (0, 0.5), got {theta}"
        )))
    }
}

pub fn case_geometry(pair: &LinkPair, theta: f64) -> Result<CaseGeometry> {
    check_theta(theta)?;
    Ok(geometry_unchecked(pair, theta))
}

fn geometry_unchecked(pair: &LinkPair, theta: f64) -> CaseGeometry {
    let g = &pair.gains;
    let w = &pair.weights;
    let (p_min, p_max) = (pair.p_min(), pair.p_max());
    let need = required_snr(pair.qos.q_p, theta);
    let p_p_low = (need / g.lambda_ps).max(p_min);
    let p_s_low = (required_snr(pair.qos.q_s, 1.0 - 2.0 * theta) / g.lambda_ss).max(p_min);
    let f = |x: f64, y: f64| theta * (1.0 + g.lambda_pp * x + g.lambda_sp * y).log2();
    let feasible =
        g.lambda_pp * p_max + g.lambda_sp * p_max >= need && p_p_low <= p_max && p_s_low <= p_max;
    CaseGeometry {
        theta,
        k_l: w.w_pt / w.w_sr,
        k_m: g.lambda_pp / g.lambda_sp,
        required_snr: need,
        p_p_low,
        p_s_low,
        f_low_min: f(p_p_low, p_min),
        f_low_max: f(p_p_low, p_max),
        f_max_min: f(p_max, p_min),
        f_max_max: f(p_max, p_max),
        feasible,
        lambda_pp: g.lambda_pp,
        lambda_sp: g.lambda_sp,
    }
}

/// Classifies θ into one of the cases. The corner inequalities
/// `f(x, y) ⋚ q_p` are evaluated in the equivalent SNR form
/// `lambda_pp x + lambda_sp y ⋚ 2^(q_p/θ) - 1`.
fn classify(pair: &LinkPair, geo: &CaseGeometry) -> CaseId {
    if !geo.feasible {
        return CaseId::Infeasible;
    }
    let g = &pair.gains;
    let (p_min, p_max) = (pair.p_min(), pair.p_max());
    let need = geo.required_snr;
    let snr = |x: f64, y: f64| g.lambda_pp * x + g.lambda_sp * y;

    if snr(geo.p_p_low, p_min) >= need {
        CaseId::Case5CornerC
    } else if geo.k_l >= geo.k_m {
        if snr(geo.p_p_low, p_max) < need {
            CaseId::Case1AB
        } else if p_min >= need / g.lambda_ps {
            CaseId::Case2BCFloor
        } else {
            CaseId::Case2BCDecode
        }
    } else if need < snr(p_max, p_min) {
        CaseId::Case3CD
    } else {
        // also takes q_p == f(p_max, p_max), where the polygon shrinks to A
        CaseId::Case4DA
    }
}

/// Case plus the sub-branch of the corner-C trajectory; two θ values with
/// the same branch lie on the same smooth piece of `u(θ)`.
fn branch(pair: &LinkPair, theta: f64) -> (CaseId, bool) {
    let geo = geometry_unchecked(pair, theta);
    let case = classify(pair, &geo);
    let floor =
        case == CaseId::Case5CornerC && pair.p_min() >= geo.required_snr / pair.gains.lambda_ps;
    (case, floor)
}

/// Half-width of the neighborhood checked for case changes.
pub const KINK_RADIUS: f64 = 1e-6;

/// Result of the per-θ LP.
///
/// For [`CaseId::Infeasible`] every numeric field is NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSolution {
    pub theta: f64,
    pub p_p_star: f64,
    pub p_r_star: f64,
    pub case: CaseId,
    pub u: f64,
    pub u_prime: f64,
    pub u_double_prime: f64,
    /// False when the case changes within `±KINK_RADIUS` of θ.
    pub derivative_valid: bool,
}

impl LpSolution {
    pub fn is_feasible(&self) -> bool {
        self.case != CaseId::Infeasible
    }
}

fn optimizer(pair: &LinkPair, geo: &CaseGeometry, case: CaseId) -> (f64, f64) {
    let (p_min, p_max) = (pair.p_min(), pair.p_max());
    match case {
        CaseId::Case1AB => (geo.g(p_max), p_max),
        CaseId::Case2BCFloor | CaseId::Case2BCDecode => (geo.p_p_low, geo.h(geo.p_p_low)),
        CaseId::Case3CD => (geo.g(p_min), p_min),
        CaseId::Case4DA => (p_max, geo.h(p_max)),
        CaseId::Case5CornerC => (geo.p_p_low, p_min),
        CaseId::Infeasible => (f64::NAN, f64::NAN),
    }
}

pub fn solve_lp(pair: &LinkPair, theta: f64) -> Result<LpSolution> {
    solve_lp_with(pair, theta, Case5Rule::default())
}

pub fn solve_lp_with(pair: &LinkPair, theta: f64, rule: Case5Rule) -> Result<LpSolution> {
    check_theta(theta)?;
    let geo = geometry_unchecked(pair, theta);
    let case = classify(pair, &geo);
    if case == CaseId::Infeasible {
        return Ok(LpSolution {
            theta,
            p_p_star: f64::NAN,
            p_r_star: f64::NAN,
            case,
            u: f64::NAN,
            u_prime: f64::NAN,
            u_double_prime: f64::NAN,
            derivative_valid: false,
        });
    }
    let (p_p_star, p_r_star) = optimizer(pair, &geo, case);
    let (u, u_prime, u_double_prime) = derivatives(pair, &geo, case, p_p_star, p_r_star, rule);
    Ok(LpSolution {
        theta,
        p_p_star,
        p_r_star,
        case,
        u,
        u_prime,
        u_double_prime,
        derivative_valid: derivative_valid(pair, theta),
    })
}

fn derivative_valid(pair: &LinkPair, theta: f64) -> bool {
    let here = branch(pair, theta);
    [theta - KINK_RADIUS, theta + KINK_RADIUS]
        .into_iter()
        .all(|t| t > 0.0 && t < 0.5 && branch(pair, t) == here)
}

/// `d/dθ [θ (2^(q/θ) - 1)]` and its second derivative.
#[inline]
pub(crate) fn scaled_snr_derivatives(q: f64, theta: f64) -> (f64, f64) {
    let pow = (q / theta).exp2();
    let a = q * LN_2;
    let first = (1.0 - a / theta) * pow - 1.0;
    let second = a * a / theta.powi(3) * pow;
    (first, second)
}

fn derivatives(
    pair: &LinkPair,
    geo: &CaseGeometry,
    case: CaseId,
    p_p: f64,
    p_r: f64,
    rule: Case5Rule,
) -> (f64, f64, f64) {
    let g = &pair.gains;
    let w = &pair.weights;
    let (p_min, p_max) = (pair.p_min(), pair.p_max());
    let theta = geo.theta;
    let u = theta * (w.w_pt * p_p + w.w_sr * p_r);
    let (d1, d2) = scaled_snr_derivatives(pair.qos.q_p, theta);

    let (du, ddu) = match case {
        CaseId::Case1AB => (
            w.w_pt / g.lambda_pp * (d1 - g.lambda_sp * p_max) + w.w_sr * p_max,
            w.w_pt / g.lambda_pp * d2,
        ),
        CaseId::Case2BCFloor => (
            w.w_pt * p_min + w.w_sr / g.lambda_sp * (d1 - g.lambda_pp * p_min),
            w.w_sr / g.lambda_sp * d2,
        ),
        CaseId::Case2BCDecode => {
            let coeff = w.w_sr / g.lambda_ps * (geo.k_l - geo.k_m + g.lambda_ps / g.lambda_sp);
            (coeff * d1, coeff * d2)
        }
        CaseId::Case3CD => (
            w.w_pt / g.lambda_pp * (d1 - g.lambda_sp * p_min) + w.w_sr * p_min,
            w.w_pt / g.lambda_pp * d2,
        ),
        CaseId::Case4DA => (
            w.w_pt * p_max + w.w_sr / g.lambda_sp * (d1 - g.lambda_pp * p_max),
            w.w_sr / g.lambda_sp * d2,
        ),
        CaseId::Case5CornerC => match rule {
            Case5Rule::ReuseCase3 => (
                w.w_pt / g.lambda_pp * (d1 - g.lambda_sp * p_min) + w.w_sr * p_min,
                w.w_pt / g.lambda_pp * d2,
            ),
            Case5Rule::Trajectory => {
                if p_min >= geo.required_snr / g.lambda_ps {
                    ((w.w_pt + w.w_sr) * p_min, 0.0)
                } else {
                    (
                        w.w_pt / g.lambda_ps * d1 + w.w_sr * p_min,
                        w.w_pt / g.lambda_ps * d2,
                    )
                }
            }
        },
        CaseId::Infeasible => (f64::NAN, f64::NAN),
    };
    (u, du, ddu)
}

/// `(u, u', u'')` at θ for the given case.
///
/// Fails with [`Error::InternalInconsistency`] when `case` is not the case
/// that holds at θ.
pub fn u_derivatives(pair: &LinkPair, theta: f64, case: CaseId) -> Result<(f64, f64, f64)> {
    u_derivatives_with(pair, theta, case, Case5Rule::default())
}

pub fn u_derivatives_with(
    pair: &LinkPair,
    theta: f64,
    case: CaseId,
    rule: Case5Rule,
) -> Result<(f64, f64, f64)> {
    check_theta(theta)?;
    let geo = geometry_unchecked(pair, theta);
    let actual = classify(pair, &geo);
    if case == CaseId::Infeasible || actual != case {
        return Err(Error::InternalInconsistency(format!(
            "case {case} requested at theta {theta}, but {actual} holds there"
        )));
    }
    let (p_p, p_r) = optimizer(pair, &geo, case);
    Ok(derivatives(pair, &geo, case, p_p, p_r, rule))
}
