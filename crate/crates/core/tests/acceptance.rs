//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are implemented as stated and
//! are expected to fail; the run exits non-zero if any other criterion
//! fails or if a known failure unexpectedly passes.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::props;
use edgedim::channel::{self, ChannelParams};
use edgedim::dimensioning::{
    min_bandwidth, min_compute, oracle_search, solve, DimensioningSolution, OracleGrid, Scenario,
};
use edgedim::queueing::{
    certify_error_bound, mdone_wait_ccdf, standard_rho_grid, CertifyOptions, QueueModel,
};
use edgedim::simulator::{
    ergodic_rate_monte_carlo, simulate_end_to_end, simulate_queue, SimConfig, UplinkMode,
};
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_UNATTAINABLE: &[usize] = &[5];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn error_bound() -> Outcome {
    let grid = standard_rho_grid();
    let mut maxima = Vec::new();
    let mut worst_rho = f64::NAN;
    for ts in [0.01, 1.0, 100.0] {
        let cert = certify_error_bound(
            &grid,
            &CertifyOptions {
                service_time: ts,
                ..Default::default()
            },
        )
        .unwrap();
        maxima.push(cert.max_error);
        worst_rho = cert.worst_rho;
    }
    let e = maxima[1];
    let spread = maxima.iter().map(|m| (m - e).abs()).fold(0.0, f64::max);
    outcome(
        (0.015..=0.017).contains(&e) && spread <= 1e-9,
        format!("max e* = {e:.6} at rho = {worst_rho}; spread across T_s = {spread:.1e}"),
    )
}

fn queue_simulation() -> Outcome {
    let t_points = [0.0, 0.5, 1.0, 2.0, 5.0];
    let mut worst = 0.0f64;
    let mut widest = 0.0f64;
    for (i, rho) in [0.3, 0.5, 0.9].into_iter().enumerate() {
        let q = QueueModel::new(rho, 1.0).unwrap();
        let cfg = SimConfig {
            n_arrivals: 1_000_000,
            seed: 100 + i as u64,
            ..Default::default()
        };
        let rep = simulate_queue(&q, &t_points, &cfg).unwrap();
        for p in &rep.empirical_ccdf {
            worst = worst.max((p.ccdf - mdone_wait_ccdf(&q, p.t_seconds).unwrap()).abs());
            widest = widest.max(p.ci_halfwidth);
        }
    }
    let spot = mdone_wait_ccdf(&QueueModel::new(0.5, 1.0).unwrap(), 1.0).unwrap();
    outcome(
        worst <= 0.01 && (spot - 0.17564).abs() < 5e-6,
        format!("max |sim - exact| = {worst:.5} (widest CI {widest:.5}); P(W > T_s | rho=0.5) = {spot:.5}"),
    )
}

fn ergodic_capacity() -> Outcome {
    let params = ChannelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let b = 10f64.powf(rng.random_range(4.0..7.5));
        let r = 10f64.powf(rng.random_range(-1.0..0.7));
        let exact = channel::ergodic_rate(b, r, &params).unwrap();
        let cfg = SimConfig {
            n_trials: 1_000_000,
            seed: i,
            ..Default::default()
        };
        let mc = ergodic_rate_monte_carlo(b, r, &params, &cfg).unwrap();
        worst = worst.max((mc.value / exact - 1.0).abs());
    }
    outcome(
        worst <= 5e-3,
        format!("max relative deviation = {worst:.2e} over 10 (B, r) pairs"),
    )
}

fn solver_soundness() -> Outcome {
    let (mut gap, mut kkt, mut rechecks) = (0.0f64, 0.0f64, 0);
    let scenarios = common::random_scenarios(10, 11);
    for sc in &scenarios {
        let s = solve(sc).unwrap();
        let o = oracle_search(sc, &OracleGrid::default()).unwrap();
        gap = gap.max((s.objective - o.objective).abs() / o.objective);
        kkt = kkt.max(s.kkt.as_ref().map_or(f64::INFINITY, |k| k.max_residual()));
        rechecks += s.feasible_for_original as usize;
    }
    outcome(
        gap <= 5e-3 && kkt <= 1e-6 && rechecks == scenarios.len(),
        format!("max oracle gap = {gap:.2e}, max KKT residual = {kkt:.2e}, rechecks passed {rechecks}/{}", scenarios.len()),
    )
}

fn floor_cross_checks() -> Outcome {
    let (mut h_worst, mut b_worst, mut b_below) = (0.0f64, 0.0f64, false);
    let (mut h_alt, mut b_alt) = (0.0f64, 0.0f64);
    for r in common::radius_grid(0.25, 4.0, 9) {
        let sc = Scenario {
            radius_km: r,
            traffic_density: 10.0,
            ..Default::default()
        };
        let b_min = min_bandwidth(&sc).unwrap().binding;
        let h_min = min_compute(&sc).unwrap();
        let hi = solve(&Scenario {
            beta1: 0.999,
            ..sc.clone()
        })
        .unwrap();
        let lo = solve(&Scenario {
            beta1: 0.001,
            ..sc.clone()
        })
        .unwrap();
        h_worst = h_worst.max((hi.compute_tflops / h_min - 1.0).abs());
        b_below |= b_min > lo.bandwidth_hz;
        b_worst = b_worst.max(lo.bandwidth_hz / b_min - 1.0);
        h_alt = h_alt.max(lo.compute_tflops / h_min - 1.0);
        b_alt = b_alt.max(hi.bandwidth_hz / b_min - 1.0);
    }
    println!(
        "      info: swapped weights give B*(0.999)/B|min - 1 <= {b_alt:.3} and H*(0.001)/H|min - 1 <= {h_alt:.3}"
    );
    outcome(
        h_worst <= 0.05 && !b_below && b_worst <= 0.15,
        format!("|H*(0.999)/H|min - 1| <= {h_worst:.3}; B*(0.001)/B|min - 1 <= {b_worst:.3}; B|min above B*: {b_below}"),
    )
}

fn radius_trends() -> Outcome {
    let radii = common::radius_grid(0.1, 5.0, 25);
    let sweep = |lam: f64| -> Vec<DimensioningSolution> {
        radii
            .iter()
            .map(|&r| {
                solve(&Scenario {
                    radius_km: r,
                    traffic_density: lam,
                    ..Default::default()
                })
                .unwrap()
            })
            .collect()
    };
    let sweeps = [sweep(1.0), sweep(10.0), sweep(50.0)];
    let mut failures = Vec::new();

    let b: Vec<f64> = sweeps[0].iter().map(|s| s.bandwidth_hz).collect();
    let i_min = (0..b.len()).min_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap();
    let non_monotone = i_min > 0 && i_min < b.len() - 1;
    let per_frame_falls = (0..radii.len()).all(|i| {
        sweeps.windows(2).all(|w| {
            w[1][i].bandwidth_hz < w[0][i].bandwidth_hz
                && w[1][i].compute_per_frame < w[0][i].compute_per_frame
        })
    });
    if !(non_monotone && per_frame_falls) {
        failures.push("a");
    }

    let small: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] <= 0.5).collect();
    if !small
        .iter()
        .all(|&i| sweeps[0][i].objective > sweeps[1][i].objective)
    {
        failures.push("b");
    }

    if !sweeps
        .iter()
        .all(|s| s.windows(2).all(|w| w[1].load > w[0].load))
    {
        failures.push("c");
    }

    let floors_match = radii.iter().all(|&r| {
        let f = |lam: f64| {
            min_bandwidth(&Scenario {
                radius_km: r,
                traffic_density: lam,
                ..Default::default()
            })
            .unwrap()
            .binding
        };
        f(1.0) == f(10.0) && f(10.0) == f(50.0)
    });
    if !floors_match {
        failures.push("d");
    }

    outcome(
        failures.is_empty(),
        format!(
            "B* minimum at r = {:.3} km (lambda = 1); J(r={}, lambda=1)/J(lambda=10) = {:.2}; failed parts: {failures:?}",
            radii[i_min],
            radii[0],
            sweeps[0][0].objective / sweeps[1][0].objective
        ),
    )
}

fn end_to_end() -> Outcome {
    let sc = Scenario::default();
    let sol = solve(&sc).unwrap();
    let cfg = SimConfig {
        n_arrivals: 100_000,
        ..Default::default()
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for mode in [UplinkMode::Deterministic, UplinkMode::Fading] {
        let p = simulate_end_to_end(&sol, &sc, &cfg, mode)
            .unwrap()
            .success_probability;
        passed &= p.value >= sc.omega_min - p.ci_halfwidth;
        parts.push(format!(
            "{mode:?}: {:.4} +/- {:.4}",
            p.value, p.ci_halfwidth
        ));
    }
    outcome(
        passed,
        format!("omega_min = {}; {}", sc.omega_min, parts.join(", ")),
    )
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn s<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn property_suites() -> Outcome {
    let mut failed = Vec::new();
    let mut check = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failed.push(format!("{name}: {e}"));
        }
    };

    check(
        "lambert_round_trip",
        s(runner(512).run(&(-50.0f64..=-1.0), props::w_round_trip)),
    );
    check(
        "e1_derivative",
        s(runner(512).run(
            &((1e-8f64).ln()..(50.0f64).ln()).prop_map(f64::exp),
            props::e1_derivative,
        )),
    );
    check(
        "phi_concave",
        s(runner(512).run(&(3.0f64..9.0, -17.0f64..-9.0), |(lb, lk)| {
            props::phi_increasing_concave(10f64.powf(lb), 10f64.powf(lk))
        })),
    );
    check(
        "phi_asymptote",
        s(runner(256).run(&(-17.0f64..-9.0), |lk| props::phi_asymptote(10f64.powf(lk)))),
    );
    check(
        "accuracy_inverse",
        s(runner(512).run(&(-0.57f64..0.9999), props::accuracy_inverse)),
    );
    check(
        "objective_monotone",
        s(runner(24).run(
            &(
                props::base_scenario(),
                (0.25f64..1.0, 0.25f64..1.0),
                (0.6f64..0.95, 0.6f64..0.95),
                (0.5f64..0.95, 0.5f64..0.95),
            ),
            |(base, d, w, a)| props::objective_monotone(&base, d, w, a),
        )),
    );
    let n = failed.len();
    outcome(
        n == 0,
        if n == 0 {
            "6 suites, no counterexample".into()
        } else {
            failed.join("; ")
        },
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "Henk error bound", error_bound),
        (2, "exact M/D/1 CCDF vs simulation", queue_simulation),
        (3, "ergodic capacity vs Monte Carlo", ergodic_capacity),
        (4, "solver soundness", solver_soundness),
        (5, "resource floors vs extreme weights", floor_cross_checks),
        (6, "radius sweep trends", radius_trends),
        (7, "end-to-end validation", end_to_end),
        (8, "property suites", property_suites),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        let known = KNOWN_UNATTAINABLE.contains(&id);
        let note = if known {
            " (known unattainable as stated)"
        } else {
            ""
        };
        println!(
            "{tag} criterion {id}: {name}{note} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if o.passed == known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!(
            "acceptance: all outcomes as expected; known unattainable: {KNOWN_UNATTAINABLE:?}"
        );
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
