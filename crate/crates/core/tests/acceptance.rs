//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::time::Instant;

use nalgebra::{Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsp_core::baselines::{self, ExhaustiveMode};
use wsp_core::lp2::{self, Case5Rule, CaseId};
use wsp_core::matching::{self, CostMatrix, PairingEnv};
use wsp_core::model::{self, Allocation, ChannelGains, LinkPair, QosReq, ResourceGrid, Weights};
use wsp_core::newton::{self, NewtonConfig};
use wsp_core::sim::{self, BenchConfig, DriftConfig, MonteCarloConfig, PathLoss, Scenario, Scheme};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("acceptance {id:>2} {verdict} {name}: {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn note(text: &str) {
    let _ = std::io::stderr()
        .lock()
        .write_all(format!("    {text}\n").as_bytes());
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo..hi))
}

/// Pair with independent log-uniform gains, used by the LP and derivative
/// checks.
fn random_pair<R: Rng>(rng: &mut R) -> LinkPair {
    let gains = ChannelGains::new(
        log_uniform(rng, -2.0, 2.0),
        log_uniform(rng, -1.0, 3.5),
        log_uniform(rng, -2.0, 2.0),
        log_uniform(rng, -0.5, 3.0),
    )
    .unwrap();
    let weights = Weights::new(
        log_uniform(rng, -1.0, 1.0),
        log_uniform(rng, -1.0, 1.0),
        log_uniform(rng, -1.0, 1.0),
    )
    .unwrap();
    let qos = QosReq::new(rng.gen_range(0.05..3.0), rng.gen_range(0.1..2.0)).unwrap();
    LinkPair::new(
        gains,
        weights,
        qos,
        ResourceGrid::new(0.01, 10.0, 1.0, 0.005).unwrap(),
    )
}

/// Random drop of the Monte Carlo geometry with a random primary target.
fn geometry_pair<R: Rng>(rng: &mut R, grid: &ResourceGrid, q_p: f64) -> Option<LinkPair> {
    let [pt, pr, st, sr] = sim::drop_nodes(5000.0, rng);
    Scenario {
        pt,
        pr,
        st,
        sr,
        path_loss: PathLoss::default(),
        weights: Weights::equal(),
        qos: QosReq::new(q_p, 3.0).unwrap(),
        grid: grid.clone(),
    }
    .link_pair()
    .ok()
}

/// Minimum of `θ (w_pt x + w_sr y)` over an `n × n` grid of the power box,
/// subject to the decode and combined-SNR constraints. `None` also when the
/// secondary target cannot be met at full power in the remaining time.
fn brute_force_lp(pair: &LinkPair, theta: f64, n: usize) -> Option<f64> {
    let (lo, hi) = (pair.p_min(), pair.p_max());
    let g = &pair.gains;
    if (1.0 - 2.0 * theta) * (1.0 + g.lambda_ss * hi).log2() < pair.qos.q_s {
        return None;
    }
    let need = (pair.qos.q_p / theta).exp2() - 1.0;
    let level = |i: usize| {
        if i == n - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut best = f64::INFINITY;
    for i in 0..n {
        let x = level(i);
        if g.lambda_ps * x < need {
            continue;
        }
        for j in 0..n {
            let y = level(j);
            if g.lambda_pp * x + g.lambda_sp * y >= need {
                best = best.min(pair.weights.w_pt * x + pair.weights.w_sr * y);
            }
        }
    }
    best.is_finite().then_some(theta * best)
}

fn case_group(c: CaseId) -> usize {
    match c {
        CaseId::Case1AB => 0,
        CaseId::Case2BCFloor | CaseId::Case2BCDecode => 1,
        CaseId::Case3CD => 2,
        CaseId::Case4DA => 3,
        CaseId::Case5CornerC => 4,
        CaseId::Infeasible => unreachable!(),
    }
}

#[test]
fn c01_lp_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut cases = [0usize; 5];
    let mut worst_excess = 0.0f64;
    let mut failures = Vec::new();
    let mut instances = 0;
    while instances < 200 {
        let pair = random_pair(&mut rng);
        let theta = rng.gen_range(0.02..0.48);
        let sol = lp2::solve_lp(&pair, theta).unwrap();
        let oracle = brute_force_lp(&pair, theta, 400);
        if !sol.is_feasible() {
            if oracle.is_some() {
                failures.push(format!("LP infeasible but grid point exists at θ={theta}"));
            }
            continue;
        }
        instances += 1;
        cases[case_group(sol.case)] += 1;
        let Some(best) = oracle else {
            failures.push(format!(
                "no grid point although LP is feasible at θ={theta}"
            ));
            continue;
        };
        let step = (pair.p_max() - pair.p_min()) / 399.0;
        let slack = theta * (pair.weights.w_pt + pair.weights.w_sr) * step;
        let excess = best - sol.u;
        worst_excess = worst_excess.max(excess / slack);
        if best < sol.u - 1e-9 * sol.u.abs().max(1.0) || excess > slack {
            failures.push(format!(
                "θ={theta} {}: lp {} grid {} slack {slack}",
                sol.case, sol.u, best
            ));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let covered = cases.iter().all(|&k| k > 0);
    let pass = failures.is_empty() && covered && elapsed < 60.0;
    report(
        1,
        "LP oracle equivalence",
        pass,
        &format!(
            "200 instances, case counts 1..5 = {cases:?}, worst gap {worst_excess:.3} grid steps, \
             {} mismatches, {elapsed:.1} s",
            failures.len()
        ),
    );
    for f in failures.iter().take(5) {
        note(f);
    }
    assert!(pass);
}

/// Points inside the feasible interval where the five-point stencil of
/// half-width `2h` stays on one smooth piece of `u` and of `v`.
fn smooth_points<R: Rng>(pair: &LinkPair, rng: &mut R, count: usize, h: f64) -> Vec<f64> {
    let Some(iv) = newton::feasible_theta_interval(pair) else {
        return Vec::new();
    };
    let branch = |t: f64| {
        let lp = lp2::solve_lp(pair, t).unwrap();
        let (_, p_s_low) = model::power_floors(pair, t).unwrap();
        let corner_floor = lp.case == CaseId::Case5CornerC && lp.p_p_star <= pair.p_min();
        (lp.case, corner_floor, p_s_low <= pair.p_min())
    };
    let mut out = Vec::new();
    for _ in 0..1000 {
        if out.len() == count {
            break;
        }
        let t = rng.gen_range(iv.lo + 3.0 * h..iv.hi - 3.0 * h);
        let here = branch(t);
        if here.0 == CaseId::Infeasible {
            continue;
        }
        if [-2.0, -1.0, 1.0, 2.0]
            .iter()
            .all(|k| branch(t + k * h) == here)
        {
            out.push(t);
        }
    }
    out
}

/// Central differences; the bound adds the rounding error of the stencil to
/// the relative tolerance, which matters only where the derivative vanishes.
fn fd_check(
    f: impl Fn(f64) -> f64,
    t: f64,
    d1: f64,
    d2: f64,
    h1: f64,
    h2: f64,
) -> (f64, f64, bool) {
    let eps = f64::EPSILON;
    let scale = f(t).abs().max(f(t + h2).abs()).max(f(t - h2).abs());
    let fd1 = (f(t - 2.0 * h1) - 8.0 * f(t - h1) + 8.0 * f(t + h1) - f(t + 2.0 * h1)) / (12.0 * h1);
    let fd2 = (-f(t - 2.0 * h2) + 16.0 * f(t - h2) - 30.0 * f(t) + 16.0 * f(t + h2)
        - f(t + 2.0 * h2))
        / (12.0 * h2 * h2);
    let e1 = (fd1 - d1).abs();
    let e2 = (fd2 - d2).abs();
    let ok1 = e1 <= 1e-4 * d1.abs() + 64.0 * eps * scale / h1;
    let ok2 = e2 <= 1e-4 * d2.abs() + 64.0 * eps * scale / (h2 * h2);
    let r1 = if d1 != 0.0 { e1 / d1.abs() } else { 0.0 };
    let r2 = if d2 != 0.0 { e2 / d2.abs() } else { 0.0 };
    (r1, r2, ok1 && ok2)
}

fn derivative_instances() -> Vec<(LinkPair, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut out = Vec::new();
    while out.len() < 100 {
        let pair = random_pair(&mut rng);
        let pts = smooth_points(&pair, &mut rng, 20, 1e-5);
        if pts.len() == 20 {
            out.push((pair, pts));
        }
    }
    out
}

#[test]
fn c02_derivatives_match_finite_differences() {
    let mut u_cases = std::collections::BTreeMap::<String, usize>::new();
    let (mut v_floor, mut v_curved) = (0usize, 0usize);
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for (pair, pts) in derivative_instances() {
        for t in pts {
            let lp = lp2::solve_lp(&pair, t).unwrap();
            *u_cases.entry(lp.case.to_string()).or_default() += 1;
            let u = |s: f64| lp2::solve_lp(&pair, s).unwrap().u;
            let (r1, r2, ok) = fd_check(u, t, lp.u_prime, lp.u_double_prime, 1e-6, 1e-5);
            worst1 = worst1.max(r1);
            worst2 = worst2.max(r2);
            if !ok {
                failures.push(format!("u at θ={t} {}: rel {r1:.2e} {r2:.2e}", lp.case));
            }

            let (_, dv, ddv) = newton::v_derivatives(&pair, t).unwrap();
            if ddv == 0.0 {
                v_floor += 1;
            } else {
                v_curved += 1;
            }
            let v = |s: f64| newton::v_derivatives(&pair, s).unwrap().0;
            let (r1, r2, ok) = fd_check(v, t, dv, ddv, 1e-6, 1e-5);
            worst1 = worst1.max(r1);
            worst2 = worst2.max(r2);
            if !ok {
                failures.push(format!("v at θ={t}: rel {r1:.2e} {r2:.2e}"));
            }
        }
    }
    let all_u = [
        "case1_ab",
        "case2_bc_floor",
        "case2_bc_decode",
        "case3_cd",
        "case4_da",
        "case5_corner_c",
    ]
    .iter()
    .all(|c| u_cases.get(*c).copied().unwrap_or(0) > 0);
    let pass = failures.is_empty() && all_u && v_floor > 0 && v_curved > 0;
    report(
        2,
        "derivative correctness",
        pass,
        &format!(
            "100 instances x 20 points, worst relative error {worst1:.1e} (first) \
             {worst2:.1e} (second), {} mismatches",
            failures.len()
        ),
    );
    note(&format!(
        "u pieces {u_cases:?}; v floor/curved {v_floor}/{v_curved}"
    ));
    for f in failures.iter().take(5) {
        note(f);
    }
    assert!(pass);
}

#[test]
fn c03_objective_convex_along_trajectory() {
    let mut positive_checks = 0usize;
    let mut order_checks = 0usize;
    let mut failures = Vec::new();
    for (pair, _) in derivative_instances() {
        let iv = newton::feasible_theta_interval(&pair).unwrap();
        let n = 200;
        let mut prev: Option<newton::WspDerivatives> = None;
        let mut prev_floor = false;
        for k in 1..n {
            let t = iv.lo + iv.width() * k as f64 / n as f64;
            let d = newton::wsp_derivatives(&pair, t, Case5Rule::Trajectory).unwrap();
            let (_, p_s_low) = model::power_floors(&pair, t).unwrap();
            let floor = p_s_low <= pair.p_min();
            // W is affine where both the secondary floor and the corner-C
            // floor bind, so curvature and strict growth are checked off it
            if d.valid && !floor {
                positive_checks += 1;
                if !(d.w_double_prime > 0.0) {
                    failures.push(format!("W''={} at θ={t}", d.w_double_prime));
                }
            }
            if let Some(p) = prev {
                if p.valid && d.valid && p.case == d.case && !prev_floor && !floor {
                    order_checks += 1;
                    if !(d.w_prime > p.w_prime) {
                        failures.push(format!(
                            "W' not increasing between θ={} and θ={t}: {} then {}",
                            p.theta, p.w_prime, d.w_prime
                        ));
                    }
                }
                if d.w_prime < p.w_prime - 1e-9 * p.w_prime.abs().max(d.w_prime.abs()) {
                    failures.push(format!(
                        "W' decreases between θ={} and θ={t}: {} then {}",
                        p.theta, p.w_prime, d.w_prime
                    ));
                }
            }
            prev = Some(d);
            prev_floor = floor;
        }
    }
    let pass = failures.is_empty() && positive_checks > 0 && order_checks > 0;
    report(
        3,
        "convexity and monotone W'",
        pass,
        &format!(
            "{positive_checks} curvature and {order_checks} ordering checks, {} violations",
            failures.len()
        ),
    );
    for f in failures.iter().take(5) {
        note(f);
    }
    assert!(pass);
}

#[test]
fn c04_near_optimal_on_coarse_grid() {
    let start = Instant::now();
    let grid = sim::scaling_grids(&[(16, 25)]).remove(0);
    assert_eq!((grid.powers().len(), grid.thetas().len()), (16, 25));
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut ratios = Vec::new();
    let mut below = 0usize;
    let mut unsnapped = 0usize;
    while ratios.len() < 100 {
        let q_p = rng.gen_range(1..=5) as f64;
        let Some(pair) = geometry_pair(&mut rng, &grid, q_p) else {
            continue;
        };
        let Ok(best) = baselines::exhaustive_optimal(&pair, ExhaustiveMode::Reduced) else {
            continue;
        };
        let Some(best_wsp) = best.snapped_wsp() else {
            continue;
        };
        let ratio = match newton::allocate(&pair, &NewtonConfig::default())
            .ok()
            .and_then(|r| r.snapped_wsp())
        {
            Some(w) => w / best_wsp,
            None => {
                unsnapped += 1;
                f64::INFINITY
            }
        };
        if ratio < 1.0 - 1e-12 {
            below += 1;
        }
        ratios.push(ratio);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within = ratios.iter().filter(|&&r| r <= 1.05).count();
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    let pass = within >= 95 && below == 0 && elapsed < 120.0;
    report(
        4,
        "near-optimality on a 16 x 25 grid",
        pass,
        &format!(
            "{within}/100 within 1.05x, {below} below optimum, {unsnapped} without grid point, \
             {elapsed:.1} s"
        ),
    );
    note(&format!(
        "ratio quantiles: median {:.4}, p90 {:.4}, p95 {:.4}, max {:.4}",
        q(0.5),
        q(0.9),
        q(0.95),
        q(1.0)
    ));
    assert!(pass);
}

fn se_primary(pair: &LinkPair, a: &Allocation) -> f64 {
    let g = &pair.gains;
    let snr = (g.lambda_ps * a.p_p).min(g.lambda_pp * a.p_p + g.lambda_sp * a.p_r);
    a.theta * (1.0 + snr).log2()
}

fn se_secondary(pair: &LinkPair, a: &Allocation) -> f64 {
    (1.0 - 2.0 * a.theta) * (1.0 + pair.gains.lambda_ss * a.p_s).log2()
}

#[test]
fn c05_qos_guarantee() {
    let grid = ResourceGrid::from_dbm(-40.0, 23.0, 1.0, 0.005).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut checked = 0usize;
    let mut failures = Vec::new();
    let mut drops = 0;
    while drops < 200 {
        let [pt, pr, st, sr] = sim::drop_nodes(5000.0, &mut rng);
        drops += 1;
        for q_p in [1.0, 2.0, 3.0, 4.0, 5.0] {
            let Ok(pair) = (Scenario {
                pt,
                pr,
                st,
                sr,
                path_loss: PathLoss::default(),
                weights: Weights::equal(),
                qos: QosReq::new(q_p, 3.0).unwrap(),
                grid: grid.clone(),
            })
            .link_pair() else {
                continue;
            };
            let results = [
                (
                    "proposed",
                    newton::allocate(&pair, &NewtonConfig::default()),
                ),
                ("kkt", baselines::kkt_alloc(&pair)),
                (
                    "exhaustive",
                    baselines::exhaustive_optimal(&pair, ExhaustiveMode::Reduced),
                ),
            ];
            for (name, r) in results {
                let Ok(r) = r else { continue };
                let mut allocs = vec![r.continuous];
                allocs.extend(r.snapped);
                for a in allocs {
                    checked += 1;
                    let (sp, ss) = (se_primary(&pair, &a), se_secondary(&pair, &a));
                    if sp < q_p - 1e-9 || ss < 3.0 - 1e-9 {
                        failures.push(format!("{name} at Q_p={q_p}: S_p={sp} S_s={ss}"));
                    }
                }
            }
        }
    }

    let mut violations = 0usize;
    for k in 0..1000 {
        let q_p = (k % 5 + 1) as f64;
        let pair = loop {
            if let Some(p) = geometry_pair(&mut rng, &grid, q_p) {
                break p;
            }
        };
        let draw = baselines::random_alloc(&pair, rng.gen());
        let a = draw.allocation;
        if se_primary(&pair, &a) < q_p - 1e-9 || se_secondary(&pair, &a) < 3.0 - 1e-9 {
            violations += 1;
        }
    }
    let pass = failures.is_empty() && checked > 0 && violations >= 10;
    report(
        5,
        "QoS guarantee",
        pass,
        &format!(
            "{checked} allocations checked, {} below target; random violates in {violations}/1000",
            failures.len()
        ),
    );
    for f in failures.iter().take(5) {
        note(f);
    }
    assert!(pass);
}

fn sweep_report() -> &'static sim::SweepReport {
    static REPORT: std::sync::OnceLock<sim::SweepReport> = std::sync::OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = MonteCarloConfig {
            runs: 200,
            seed: 606,
            ..MonteCarloConfig::default()
        };
        sim::monte_carlo(&cfg).unwrap()
    })
}

#[test]
fn c06_scheme_ordering() {
    let rep = sweep_report();
    let mean = |q: f64, s: Scheme| rep.get(q, s).unwrap().mean_wsp;
    let qs = [1.0, 2.0, 3.0, 4.0, 5.0];
    let mut failures = Vec::new();
    for q in qs {
        let [r, k, p, e] = [
            Scheme::Random,
            Scheme::Kkt,
            Scheme::Proposed,
            Scheme::Exhaustive,
        ]
        .map(|s| mean(q, s));
        note(&format!(
            "Q_p={q}: random {r:.4e} kkt {k:.4e} proposed {p:.4e} exhaustive {e:.4e} W"
        ));
        for (a, b, what) in [
            (r, k, "random >= kkt"),
            (k, p, "kkt >= proposed"),
            (p, e, "proposed >= exhaustive"),
        ] {
            if !(a >= b) {
                failures.push(format!("Q_p={q}: {what} fails ({a:.4e} < {b:.4e})"));
            }
        }
    }
    for s in [Scheme::Proposed, Scheme::Exhaustive] {
        for w in qs.windows(2) {
            if mean(w[1], s) < mean(w[0], s) {
                failures.push(format!("{s} decreases from Q_p={} to {}", w[0], w[1]));
            }
        }
    }
    let pass = failures.is_empty() && rep.common_support > 0;
    report(
        6,
        "scheme ordering",
        pass,
        &format!(
            "{} runs, {} on the common support, {} violations",
            rep.runs,
            rep.common_support,
            failures.len()
        ),
    );
    for f in &failures {
        note(f);
    }
    assert!(pass);
}

#[test]
fn c07_energy_efficiency_gap() {
    let rep = sweep_report();
    let worst = rep.ee_gap.iter().map(|&(_, g)| g).fold(0.0f64, f64::max);
    let pass = rep.ee_gap.len() == 5 && worst <= 0.05;
    let per_q: Vec<String> = rep
        .ee_gap
        .iter()
        .map(|(q, g)| format!("{q}: {:.3}%", 100.0 * g))
        .collect();
    report(
        7,
        "EE of WSP-optimal vs EE-optimal",
        pass,
        &format!("mean relative gap per Q_p {}", per_q.join(", ")),
    );
    assert!(pass);
}

#[test]
fn c08_warm_start_iterations() {
    let cfg = DriftConfig::default();
    let rep = sim::warmstart_experiment(&cfg).unwrap();
    let mut failures = Vec::new();
    let mut feasible_points = 0;
    for &d in &cfg.distances {
        let (Some(warm), Some(cold)) = (rep.get(d, "warm"), rep.get(d, "midpoint")) else {
            continue;
        };
        if warm.iterations.is_empty() {
            continue;
        }
        feasible_points += 1;
        let scan = rep.get(d, "scan").map_or(f64::NAN, |s| s.median);
        note(&format!(
            "{d} m: warm median {} p90 {}, cold median {} p90 {}, scan median {scan}",
            warm.median, warm.p90, cold.median, cold.p90
        ));
        if !(warm.median <= 2.0 && warm.median < cold.median) {
            failures.push(d);
        }
    }
    let pass = failures.is_empty() && feasible_points > 0;
    report(
        8,
        "warm start",
        pass,
        &format!(
            "{feasible_points} feasible distances, warm median <= 2 and below cold fails at {failures:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn c09_timing_ordering_and_scaling() {
    let cfg = BenchConfig {
        repeats: 5,
        warmup: 1,
        grid: ResourceGrid::from_dbm(-40.0, 23.0, 2.0, 0.01).unwrap(),
        ..BenchConfig::default()
    };
    let rep = sim::bench(&cfg).unwrap();
    let mut failures = Vec::new();
    for &d in &cfg.distances {
        let t = |s: Scheme| {
            rep.points
                .iter()
                .find(|p| p.distance == d && p.scheme == s)
                .unwrap()
                .median_ms
        };
        let (p, k, e) = (t(Scheme::Proposed), t(Scheme::Kkt), t(Scheme::Exhaustive));
        if !(p < k && k < e) {
            failures.push(format!("{d} m: proposed {p} kkt {k} exhaustive {e} ms"));
        }
    }
    let slope = rep.scaling_slope.unwrap_or(f64::NAN);
    let pass = failures.is_empty() && (slope - 1.0).abs() <= 0.15;
    report(
        9,
        "timing ordering and exhaustive scaling",
        pass,
        &format!(
            "{} distances, {} out of order, log-log slope vs P^3 Q {slope:.3}",
            cfg.distances.len(),
            failures.len()
        ),
    );
    for s in &rep.scaling {
        note(&format!(
            "exhaustive P={} Q={}: {:.2} ms",
            s.powers, s.thetas, s.median_ms
        ));
    }
    for f in &failures {
        note(f);
    }
    assert!(pass);
}

/// Minimum over injective maps from the smaller side into the larger one.
fn brute_force_assignment(c: &[Vec<f64>]) -> f64 {
    let (m, n) = (c.len(), c[0].len());
    let get = |i: usize, j: usize| if m <= n { c[i][j] } else { c[j][i] };
    let (small, large) = (m.min(n), m.max(n));
    fn go(k: usize, small: usize, used: &mut Vec<bool>, get: &dyn Fn(usize, usize) -> f64) -> f64 {
        if k == small {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(get(k, j) + go(k + 1, small, used, get));
                used[j] = false;
            }
        }
        best
    }
    go(0, small, &mut vec![false; large], &get)
}

#[test]
fn c10_hungarian_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let (m, n) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(0.0..100.0)).collect())
            .collect();
        let a = matching::kuhn_munkres(&CostMatrix::from_rows(&rows).unwrap());
        let oracle = brute_force_assignment(&rows);
        let sum: f64 = a.pairs.iter().map(|&(i, j, _)| rows[i][j]).sum();
        let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
        cols.sort_unstable();
        cols.dedup();
        let ok = (a.total - oracle).abs() <= 1e-9 * oracle.max(1.0)
            && (sum - oracle).abs() <= 1e-9 * oracle.max(1.0)
            && a.pairs.len() == m.min(n)
            && cols.len() == a.pairs.len();
        if !ok {
            failures.push(format!(
                "{m}x{n}: hungarian {} brute force {oracle}",
                a.total
            ));
        }
    }
    let pass = failures.is_empty();
    report(
        10,
        "Hungarian vs brute force",
        pass,
        &format!("100 matrices up to 6x6, {} mismatches", failures.len()),
    );
    for f in &failures {
        note(f);
    }
    assert!(pass);
}

#[test]
fn c11_hessian_is_indefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let w = Weights::new(
            rng.gen_range(0.01..10.0),
            rng.gen_range(0.01..10.0),
            rng.gen_range(0.01..10.0),
        )
        .unwrap();
        let pair = LinkPair::new(
            ChannelGains::new(1.0, 1.0, 1.0, 1.0).unwrap(),
            w,
            QosReq::new(1.0, 1.0).unwrap(),
            ResourceGrid::new(0.01, 10.0, 1.0, 0.005).unwrap(),
        );
        // the objective is bilinear, so second differences recover the
        // Hessian up to rounding
        let x0 = [1.0, 1.0, 1.0, 0.2];
        let h = 0.05;
        let f = |x: [f64; 4]| model::wsp(&pair, &Allocation::new(x[3], x[0], x[1], x[2])).unwrap();
        let shifted = |i: usize, j: usize| {
            let mut x = x0;
            x[i] += h;
            x[j] += h;
            x
        };
        let one = |i: usize| {
            let mut x = x0;
            x[i] += h;
            x
        };
        let hess =
            Matrix4::from_fn(|i, j| (f(shifted(i, j)) - f(one(i)) - f(one(j)) + f(x0)) / (h * h));
        let hess = 0.5 * (hess + hess.transpose());
        let mut eig: Vec<f64> = SymmetricEigen::new(hess)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        let r = (w.w_pt.powi(2) + 4.0 * w.w_st.powi(2) + w.w_sr.powi(2)).sqrt();
        let expect = [-r, 0.0, 0.0, r];
        let mut lib = model::wsp_hessian_eigenvalues(&w);
        lib.sort_by(f64::total_cmp);
        for k in 0..4 {
            worst = worst
                .max((eig[k] - expect[k]).abs())
                .max((lib[k] - expect[k]).abs());
        }
    }
    let pass = worst <= 1e-9;
    report(
        11,
        "nonconvexity certificate",
        pass,
        &format!("50 weight triples, worst eigenvalue error {worst:.1e}"),
    );
    assert!(pass);
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn c12_experiments_are_deterministic() {
    let mut failures = Vec::new();

    let mc = MonteCarloConfig {
        runs: 50,
        seed: 7,
        ..MonteCarloConfig::default()
    };
    let a = format!("{:?}", in_pool(1, || sim::monte_carlo(&mc).unwrap()));
    let b = format!("{:?}", in_pool(4, || sim::monte_carlo(&mc).unwrap()));
    if a != b {
        failures.push("sweep");
    }

    let drift = DriftConfig {
        subframes: 40,
        distances: vec![6000.0, 9000.0, 12000.0],
        seed: 7,
        ..DriftConfig::default()
    };
    let a = format!("{:?}", sim::warmstart_experiment(&drift).unwrap());
    let b = format!("{:?}", sim::warmstart_experiment(&drift).unwrap());
    if a != b {
        failures.push("warmstart");
    }

    let env = PairingEnv {
        path_loss: PathLoss::default(),
        weights: Weights::equal(),
        grid: ResourceGrid::from_dbm(-40.0, 23.0, 1.0, 0.005).unwrap(),
        newton: NewtonConfig::default(),
    };
    let run_match = || {
        let (p, s) = matching::random_links(5, 4, 5000.0, QosReq::new(3.0, 3.0).unwrap(), 7);
        let costs = matching::pairwise_cost_matrix(&p, &s, &env).unwrap();
        format!("{:?}", matching::kuhn_munkres(&costs))
    };
    if in_pool(1, run_match) != in_pool(4, run_match) {
        failures.push("match");
    }

    let pair = sim::relay_sweep_scenario(
        8000.0,
        PathLoss::default(),
        QosReq::new(3.0, 3.0).unwrap(),
        env.grid.clone(),
    )
    .and_then(|s| s.link_pair())
    .unwrap();
    let solve = || {
        format!(
            "{:?}",
            newton::allocate(&pair, &NewtonConfig::default()).unwrap()
        )
    };
    if solve() != solve() {
        failures.push("solve");
    }

    let pass = failures.is_empty();
    report(
        12,
        "determinism",
        pass,
        &format!(
            "solve, sweep, warmstart and match reports identical across reruns and thread \
             counts; differing: {failures:?}"
        ),
    );
    assert!(pass);
}
