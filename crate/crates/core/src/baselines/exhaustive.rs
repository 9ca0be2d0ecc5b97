//! Grid-optimal reference schemes.

use crate::error::{Error, Result};
use crate::lp2;
use crate::model::{self, Allocation, LinkPair};
use crate::newton::{SolveResult, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustiveMode {
    /// Every `(θ, p_p, p_r, p_s)` tuple: `O(P^3 Q)`.
    Naive,
    /// `p_s` fixed at its smallest feasible level per θ and `p_p` at its
    /// smallest feasible level per `(θ, p_r)`. The objective is strictly
    /// increasing in both, so the argmin is the same as in `Naive`.
    Reduced,
}

/// Lexicographic `(wsp, θ, p_p, p_r, p_s)` comparison used for ties.
fn better(w: f64, a: &Allocation, best: &Option<(f64, Allocation)>) -> bool {
    match best {
        None => true,
        Some((bw, b)) => {
            (w, a.theta, a.p_p, a.p_r, a.p_s).partial_cmp(&(*bw, b.theta, b.p_p, b.p_r, b.p_s))
                == Some(std::cmp::Ordering::Less)
        }
    }
}

/// Minimum-WSP allocation over the whole resource grid.
pub fn exhaustive_optimal(pair: &LinkPair, mode: ExhaustiveMode) -> Result<SolveResult> {
    let best = match mode {
        ExhaustiveMode::Naive => search_naive(pair),
        ExhaustiveMode::Reduced => search_reduced(pair),
    };
    let (_, alloc) = best.ok_or_else(|| Error::Infeasible("no feasible grid point".into()))?;
    grid_result(pair, alloc)
}

pub(crate) fn grid_result(pair: &LinkPair, alloc: Allocation) -> Result<SolveResult> {
    let metrics = model::metrics(pair, &alloc)?;
    let case = lp2::solve_lp(pair, alloc.theta)?.case;
    Ok(SolveResult {
        continuous: alloc,
        continuous_metrics: metrics,
        snapped: Some(alloc),
        snapped_metrics: Some(metrics),
        trace: None,
        case,
        status: SolveStatus::Converged,
    })
}

fn search_naive(pair: &LinkPair) -> Option<(f64, Allocation)> {
    let powers = pair.grid.powers();
    let mut best = None;
    for &theta in pair.grid.thetas() {
        for &p_p in powers {
            for &p_r in powers {
                for &p_s in powers {
                    let a = Allocation::new(theta, p_p, p_r, p_s);
                    // full verdict per tuple, no shortcuts across the loops
                    if !model::check_feasible(pair, &a).is_ok() {
                        continue;
                    }
                    let Ok(w) = model::wsp(pair, &a) else {
                        continue;
                    };
                    if better(w, &a, &best) {
                        best = Some((w, a));
                    }
                }
            }
        }
    }
    best
}

fn search_reduced(pair: &LinkPair) -> Option<(f64, Allocation)> {
    let powers = pair.grid.powers();
    let mut best = None;
    for &theta in pair.grid.thetas() {
        let s_idx = powers.partition_point(|&p_s| {
            !model::secondary_feasible(pair, &Allocation::new(theta, 0.0, 0.0, p_s))
        });
        let Some(&p_s) = powers.get(s_idx) else {
            continue;
        };
        for &p_r in powers {
            let p_idx = powers.partition_point(|&p_p| {
                !model::primary_feasible(pair, &Allocation::new(theta, p_p, p_r, p_s))
            });
            let Some(&p_p) = powers.get(p_idx) else {
                continue;
            };
            let a = Allocation::new(theta, p_p, p_r, p_s);
            let Ok(w) = model::wsp(pair, &a) else {
                continue;
            };
            if better(w, &a, &best) {
                best = Some((w, a));
            }
        }
    }
    best
}

/// Maximum energy-efficiency allocation over the resource grid.
///
/// Dinkelbach iteration on the grid: for a trial ratio `eta`, maximize
/// `S_p + S_s - eta * (θ p_p + θ p_r + (1 - 2θ) p_s)` over feasible grid
/// points, which splits into a primary and a secondary part per θ; the
/// ratio of the maximizer becomes the next `eta`. On a finite set this
/// terminates at the exact maximum ratio.
pub fn exhaustive_max_ee(pair: &LinkPair) -> Result<SolveResult> {
    struct Slice {
        theta: f64,
        // (spectral efficiency, consumed power, p_p, p_r)
        primary: Vec<(f64, f64, f64, f64)>,
        // (spectral efficiency, consumed power, p_s)
        secondary: Vec<(f64, f64, f64)>,
    }

    let powers = pair.grid.powers();
    let slices: Vec<Slice> = pair
        .grid
        .thetas()
        .iter()
        .filter_map(|&theta| {
            let secondary: Vec<_> = powers
                .iter()
                .filter_map(|&p_s| {
                    let a = Allocation::new(theta, 0.0, 0.0, p_s);
                    model::secondary_feasible(pair, &a).then(|| {
                        (
                            model::secondary_se(pair, &a),
                            (1.0 - 2.0 * theta) * p_s,
                            p_s,
                        )
                    })
                })
                .collect();
            if secondary.is_empty() {
                return None;
            }
            let mut primary = Vec::new();
            for &p_p in powers {
                for &p_r in powers {
                    let a = Allocation::new(theta, p_p, p_r, 0.0);
                    if model::primary_feasible(pair, &a) {
                        primary.push((model::primary_se(pair, &a), theta * (p_p + p_r), p_p, p_r));
                    }
                }
            }
            (!primary.is_empty()).then_some(Slice {
                theta,
                primary,
                secondary,
            })
        })
        .collect();

    if slices.is_empty() {
        return Err(Error::Infeasible("no feasible grid point".into()));
    }

    let argmax = |eta: f64| -> (f64, Allocation, f64) {
        let mut best: Option<(f64, Allocation, f64)> = None;
        for s in &slices {
            let p = s
                .primary
                .iter()
                .map(|&(se, e, p_p, p_r)| (se - eta * e, p_p, p_r))
                .fold(None, |acc: Option<(f64, f64, f64)>, x| match acc {
                    Some(a) if a.0 >= x.0 => Some(a),
                    _ => Some(x),
                })
                .expect("nonempty primary slice");
            let q = s
                .secondary
                .iter()
                .map(|&(se, e, p_s)| (se - eta * e, p_s))
                .fold(None, |acc: Option<(f64, f64)>, x| match acc {
                    Some(a) if a.0 >= x.0 => Some(a),
                    _ => Some(x),
                })
                .expect("nonempty secondary slice");
            let value = p.0 + q.0;
            if best.as_ref().map_or(true, |b| value > b.0) {
                let a = Allocation::new(s.theta, p.1, p.2, q.1);
                let ratio = model::energy_efficiency(pair, &a).unwrap_or(f64::NEG_INFINITY);
                best = Some((value, a, ratio));
            }
        }
        best.expect("nonempty slices")
    };

    let mut eta = 0.0;
    let mut chosen = argmax(eta);
    for _ in 0..200 {
        let next_eta = chosen.2;
        if next_eta <= eta * (1.0 + 1e-14) {
            break;
        }
        eta = next_eta;
        let cand = argmax(eta);
        if cand.0 <= 1e-12 * eta.abs().max(1.0) {
            break;
        }
        chosen = cand;
    }
    grid_result(pair, chosen.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelGains, QosReq, ResourceGrid, Weights};

    fn worked(grid: ResourceGrid) -> LinkPair {
        LinkPair::new(
            ChannelGains::new(1.0, 2.0, 1.0, 15.0).unwrap(),
            Weights::equal(),
            QosReq::new(1.0, 1.0).unwrap(),
            grid,
        )
    }

    /// Custom three-level grid {0.01, 0.1, 1} W and θ ∈ {0.1, 0.2, 0.3, 0.4}.
    fn tiny_grid() -> ResourceGrid {
        ResourceGrid::new(0.01, 1.0, 10.0, 0.1).unwrap()
    }

    #[test]
    fn tiny_grid_shape() {
        let g = tiny_grid();
        assert_eq!(g.powers().len(), 3);
        assert!((g.powers()[1] - 0.1).abs() < 1e-15);
        assert_eq!(g.thetas().len(), 4);
    }

    #[test]
    fn naive_and_reduced_agree_on_small_grid() {
        // a stronger pair so that the 108-tuple grid has feasible points
        let mut p = worked(tiny_grid());
        p.gains = ChannelGains::new(30.0, 60.0, 30.0, 60.0).unwrap();
        let mut by_hand: Option<(f64, Allocation)> = None;
        let mut count = 0;
        for &t in p.grid.thetas() {
            for &a in p.grid.powers() {
                for &b in p.grid.powers() {
                    for &c in p.grid.powers() {
                        count += 1;
                        let al = Allocation::new(t, a, b, c);
                        if model::check_feasible(&p, &al).is_ok() {
                            let w = model::wsp(&p, &al).unwrap();
                            if by_hand.map_or(true, |(bw, _)| w < bw) {
                                by_hand = Some((w, al));
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(count, 108);
        let (_, expect) = by_hand.expect("feasible tuple exists");
        let naive = exhaustive_optimal(&p, ExhaustiveMode::Naive).unwrap();
        let reduced = exhaustive_optimal(&p, ExhaustiveMode::Reduced).unwrap();
        assert_eq!(naive.snapped, Some(expect));
        assert_eq!(reduced.snapped, naive.snapped);
    }

    #[test]
    fn infeasible_grid() {
        let mut p = worked(tiny_grid());
        p.qos.q_p = 50.0;
        assert!(matches!(
            exhaustive_optimal(&p, ExhaustiveMode::Naive),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            exhaustive_optimal(&p, ExhaustiveMode::Reduced),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(exhaustive_max_ee(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn max_ee_matches_enumeration() {
        let p = worked(ResourceGrid::new(0.01, 10.0, 2.0, 0.02).unwrap());
        let mut best = f64::NEG_INFINITY;
        for &t in p.grid.thetas() {
            for &a in p.grid.powers() {
                for &b in p.grid.powers() {
                    for &c in p.grid.powers() {
                        let al = Allocation::new(t, a, b, c);
                        if model::is_feasible(&p, &al) {
                            best = best.max(model::energy_efficiency(&p, &al).unwrap());
                        }
                    }
                }
            }
        }
        let ee = exhaustive_max_ee(&p).unwrap();
        let got = ee.snapped_metrics.unwrap().ee;
        assert!((got - best).abs() <= 1e-12 * best);
    }
}
