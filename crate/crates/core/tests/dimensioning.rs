mod common;

use edgedim::dimensioning::*;
use edgedim::InfeasibilityKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn solver_agrees_with_grid_oracle() {
    for sc in common::random_scenarios(10, 11) {
        let s = solve(&sc).unwrap();
        let o = oracle_search(&sc, &OracleGrid::default()).unwrap();
        let rel = (s.objective - o.objective).abs() / o.objective;
        assert!(
            rel < 5e-3,
            "{sc:?}: solve {} oracle {}",
            s.objective,
            o.objective
        );
        assert!(s.kkt.as_ref().unwrap().max_residual() <= 1e-6);
    }
}

#[test]
fn every_solution_passes_exact_recheck() {
    let mut scenarios = common::random_scenarios(20, 5);
    for &lam in &[1.0, 10.0, 50.0] {
        for r in common::radius_grid(0.1, 5.0, 8) {
            scenarios.push(Scenario {
                radius_km: r,
                traffic_density: lam,
                ..Default::default()
            });
        }
    }
    for sc in &scenarios {
        let s = solve(sc).unwrap();
        assert!(s.feasible_for_original, "{sc:?}: {:?}", s.recheck);
        assert!(s.load <= sc.rho_max);
        assert!(s.resolution_px >= s.kappas.kappa4);
        assert!(s.slack_t >= 0.0 && s.bandwidth_hz > 0.0 && s.compute_tflops > 0.0);
    }
}

#[test]
fn delay_constraint_is_tight_and_resolution_at_floor() {
    for sc in common::random_scenarios(10, 3) {
        let s = solve(&sc).unwrap();
        let slack = sc.deadline_s - s.recheck.total_delay_s;
        assert!(
            slack >= 0.0 && slack <= 1e-6 * sc.deadline_s,
            "slack {slack}"
        );
        let k4 = s.kappas.kappa4;
        assert!(
            (s.resolution_px - k4) / k4 < 1e-6,
            "s* = {} vs kappa4 = {k4}",
            s.resolution_px
        );
    }
}

#[test]
fn deadline_below_uplink_floor_certified() {
    let sc = Scenario {
        deadline_s: 1e-10,
        ..Default::default()
    };
    let cert = solve(&sc).unwrap_err();
    let cert = cert.certificate().unwrap();
    assert_eq!(cert.kind, InfeasibilityKind::Deadline);
    assert!(cert.omega1.unwrap() >= 1.0);

    // Ω1 < 1 here, but the box corner already misses the deadline
    let sc = Scenario {
        deadline_s: 1e-6,
        ..Default::default()
    };
    let err = solve(&sc).unwrap_err();
    let cert = err.certificate().unwrap();
    assert_eq!(cert.kind, InfeasibilityKind::Deadline);
    assert!(cert.omega1.unwrap() < 1.0);
}

#[test]
fn other_infeasibility_kinds() {
    let sc = Scenario {
        a_min: 1.0,
        ..Default::default()
    };
    assert_eq!(
        solve(&sc).unwrap_err().certificate().unwrap().kind,
        InfeasibilityKind::Accuracy
    );

    let sc = Scenario {
        traffic_density: 1e6,
        radius_km: 5.0,
        ..Default::default()
    };
    assert_eq!(
        solve(&sc).unwrap_err().certificate().unwrap().kind,
        InfeasibilityKind::Load
    );

    let opts = SolverOptions {
        s_max: 300.0,
        ..Default::default()
    };
    let e = solve_with(&Scenario::default(), &opts).unwrap_err();
    assert_eq!(e.certificate().unwrap().kind, InfeasibilityKind::Bounds);
}

#[test]
fn relaxed_feasible_set_is_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for &(r, lam) in &[(0.5, 10.0), (0.1, 1.0), (2.0, 50.0), (1.0, 1.0)] {
        let sc = Scenario {
            radius_km: r,
            traffic_density: lam,
            ..Default::default()
        };
        let k = compute_kappas(&sc).unwrap();
        let feasible = |x: &DecisionVector| {
            relaxed_constraints(&sc, &k, x).is_some_and(|c| c.iter().all(|v| *v <= 0.0))
        };
        let mut pts = Vec::new();
        while pts.len() < 300 {
            let x = DecisionVector {
                bandwidth_hz: rng.random_range(1e5f64.ln()..1e7f64.ln()).exp(),
                compute_tflops: rng.random_range(0.1f64.ln()..1e3f64.ln()).exp(),
                slack_t: rng.random_range(0.0..0.5),
                resolution_px: k.kappa4 * rng.random_range(0.0f64..0.15).exp(),
            };
            if feasible(&x) {
                pts.push(x);
            }
        }
        for _ in 0..250 {
            let a = pts[rng.random_range(0..pts.len())];
            let b = pts[rng.random_range(0..pts.len())];
            let mid = DecisionVector {
                bandwidth_hz: 0.5 * (a.bandwidth_hz + b.bandwidth_hz),
                compute_tflops: 0.5 * (a.compute_tflops + b.compute_tflops),
                slack_t: 0.5 * (a.slack_t + b.slack_t),
                resolution_px: 0.5 * (a.resolution_px + b.resolution_px),
            };
            assert!(feasible(&mid), "midpoint of {a:?} and {b:?} infeasible");
            let ja = objective(a.bandwidth_hz, a.compute_tflops, &sc);
            let jb = objective(b.bandwidth_hz, b.compute_tflops, &sc);
            let jm = objective(mid.bandwidth_hz, mid.compute_tflops, &sc);
            assert!((jm - 0.5 * (ja + jb)).abs() <= 1e-9 * jm);
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn objective_monotone_in_requirements() {
    let j = |sc: Scenario| solve(&sc).unwrap().objective;
    let base = Scenario::default();
    let mut prev = f64::INFINITY;
    for &d in &[0.2, 0.3, 0.5, 0.8, 1.2] {
        let v = j(Scenario {
            deadline_s: d,
            ..base.clone()
        });
        assert!(v <= prev * (1.0 + 1e-9), "D={d}");
        prev = v;
    }
    let mut prev = 0.0;
    for &w in &[0.5, 0.7, 0.8, 0.9, 0.95] {
        let v = j(Scenario {
            omega_min: w,
            ..base.clone()
        });
        assert!(v >= prev * (1.0 - 1e-9), "omega={w}");
        prev = v;
    }
    let mut prev = 0.0;
    for &a in &[0.5, 0.8, 0.9, 0.93, 0.95] {
        let v = j(Scenario {
            a_min: a,
            ..base.clone()
        });
        assert!(v >= prev * (1.0 - 1e-9), "a_min={a}");
        prev = v;
    }
}

#[test]
fn radius_and_traffic_trends() {
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
    let low = sweep(1.0);
    let mid = sweep(10.0);
    let high = sweep(50.0);

    // bandwidth falls, then rises again with the cell radius at low traffic
    let b: Vec<f64> = low.iter().map(|s| s.bandwidth_hz).collect();
    let i_min = (0..b.len()).min_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap();
    assert!(i_min > 0 && i_min < b.len() - 1, "B* monotone in r: {b:?}");

    for i in 0..radii.len() {
        assert!(low[i].compute_per_frame > mid[i].compute_per_frame);
        assert!(mid[i].compute_per_frame > high[i].compute_per_frame);
        assert!(
            low[i].bandwidth_hz > mid[i].bandwidth_hz && mid[i].bandwidth_hz > high[i].bandwidth_hz
        );
    }
    for s in [&low, &mid, &high] {
        for w in s.windows(2) {
            assert!(w[1].load > w[0].load);
        }
    }
}

#[test]
fn beta1_trades_bandwidth_for_compute() {
    let betas = [
        0.001, 0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99, 0.999,
    ];
    let sols: Vec<DimensioningSolution> = betas
        .iter()
        .map(|&b| {
            solve(&Scenario {
                beta1: b,
                ..Default::default()
            })
            .unwrap()
        })
        .collect();
    for w in sols.windows(2) {
        assert!(w[1].bandwidth_hz < w[0].bandwidth_hz);
        assert!(w[1].compute_per_frame > w[0].compute_per_frame);
    }
    // rough mirror image about 0.5 once β2 equalizes the two magnitudes
    let beta2 = Scenario::default().beta2;
    for i in 0..betas.len() {
        let j = betas.len() - 1 - i;
        let ratio = sols[i].bandwidth_hz / (beta2 * sols[j].compute_per_frame);
        assert!((0.8..1.25).contains(&ratio), "beta1={}: {ratio}", betas[i]);
    }
}

#[test]
fn resource_floors_against_extreme_weights() {
    for &lam in &[1.0, 10.0, 50.0] {
        for r in common::radius_grid(0.25, 4.0, 5) {
            let sc = Scenario {
                radius_km: r,
                traffic_density: lam,
                ..Default::default()
            };
            let b_min = min_bandwidth(&sc).unwrap().binding;
            let h_min = min_compute(&sc).unwrap();

            // bandwidth expensive: B* approaches its floor
            let b_costly = solve(&Scenario {
                beta1: 0.999,
                ..sc.clone()
            })
            .unwrap();
            assert!(b_min <= b_costly.bandwidth_hz);
            assert!(
                b_costly.bandwidth_hz <= 1.15 * b_min,
                "lam={lam} r={r}: {} vs {b_min}",
                b_costly.bandwidth_hz
            );

            // compute expensive: H* approaches its floor
            let h_costly = solve(&Scenario {
                beta1: 0.001,
                ..sc.clone()
            })
            .unwrap();
            assert!(h_min <= h_costly.compute_tflops);
        }
    }
    // in the load-cap regime the compute floor is within 5%
    for &r in &[1.0, 2.0, 4.0] {
        let sc = Scenario {
            radius_km: r,
            traffic_density: 50.0,
            beta1: 0.001,
            ..Default::default()
        };
        let h = solve(&sc).unwrap().compute_tflops;
        let h_min = min_compute(&sc).unwrap();
        assert!(h <= 1.05 * h_min, "r={r}: {h} vs {h_min}");
    }
}

#[test]
fn no_compensation_mode_relaxes_the_target() {
    let sc = Scenario::default();
    let raw = Scenario {
        error_margin: 0.0,
        ..sc.clone()
    };
    let a = solve(&sc).unwrap();
    let b = solve(&raw).unwrap();
    assert!(b.objective < a.objective);
}

#[test]
fn solution_record_field_names() {
    let s = solve(&Scenario::default()).unwrap();
    let v = serde_json::to_value(s.record()).unwrap();
    for key in [
        "b_hz",
        "h_tflops",
        "t_slack_s",
        "s_px",
        "objective",
        "h_f",
        "load",
        "feasible_original",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn solve_is_deterministic() {
    let a = solve(&Scenario::default()).unwrap();
    let b = solve(&Scenario::default()).unwrap();
    assert_eq!(a, b);
}
