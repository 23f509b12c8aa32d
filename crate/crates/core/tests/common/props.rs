//! Property bodies shared by the proptest suites and the acceptance run.

use edgedim::channel::{self, ChannelParams, FrameFormat, PowerRegime};
use edgedim::detector::{accuracy, min_resolution, DetectorCoefficients};
use edgedim::dimensioning::{solve, Scenario};
use edgedim::queueing::{henk_wait_ccdf, mdone_wait_ccdf, tau, QueueModel, HENK_ERROR_BOUND};
use edgedim::specfun::{exp_integral_e1, lambert_w_m1};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type PropResult = Result<(), TestCaseError>;

/// Relative slack allowed between two barrier solves (relative gap 1e-8 each).
pub const SOLVER_REL_TOL: f64 = 2e-8;

pub fn w_round_trip(w: f64) -> PropResult {
    let back = lambert_w_m1(w * w.exp()).unwrap();
    prop_assert!((back - w).abs() <= 1e-9, "w = {w}: {back}");
    Ok(())
}

pub fn e1_derivative(x: f64) -> PropResult {
    let h = 1e-5 * x;
    let fd = (exp_integral_e1(x + h).unwrap() - exp_integral_e1(x - h).unwrap()) / (2.0 * h);
    let exact = -(-x).exp() / x;
    prop_assert!((fd / exact - 1.0).abs() < 1e-6, "x = {x}: {fd} vs {exact}");
    Ok(())
}

pub fn phi_increasing_concave(b: f64, kappa2: f64) -> PropResult {
    let h = 0.01 * b;
    let (lo, mid, hi) = (
        channel::phi(b - h, kappa2).unwrap(),
        channel::phi(b, kappa2).unwrap(),
        channel::phi(b + h, kappa2).unwrap(),
    );
    prop_assert!(lo < mid && mid < hi);
    prop_assert!(
        lo - 2.0 * mid + hi <= 1e-9 * mid,
        "second difference {}",
        lo - 2.0 * mid + hi
    );
    Ok(())
}

pub fn phi_asymptote(kappa2: f64) -> PropResult {
    let cap = 1.0 / kappa2;
    let far = channel::phi(1e8 * cap, kappa2).unwrap();
    prop_assert!(
        far < cap && (far / cap - 1.0).abs() < 1e-7,
        "{far} vs {cap}"
    );
    Ok(())
}

pub fn uplink_epigraph_and_monotone(b: f64, r: f64) -> PropResult {
    let (p, f) = (ChannelParams::default(), FrameFormat::default());
    let s = 424.4;
    let t = channel::uplink_time(b, r, s, &f, &p).unwrap();
    let low = channel::uplink_time_regime(b, r, s, &f, &p, PowerRegime::Fractional).unwrap();
    let peak = channel::uplink_time_regime(b, r, s, &f, &p, PowerRegime::Peak).unwrap();
    prop_assert!((t / low.max(peak) - 1.0).abs() <= 1e-12);
    prop_assert!(channel::uplink_time(1.1 * b, r, s, &f, &p).unwrap() < t);
    prop_assert!(channel::uplink_time(b, 1.1 * r, s, &f, &p).unwrap() >= t);
    Ok(())
}

pub fn accuracy_inverse(a: f64) -> PropResult {
    let c = DetectorCoefficients::default();
    let s = min_resolution(a, &c).unwrap();
    prop_assert!((accuracy(s, &c) - a).abs() <= 1e-12);
    Ok(())
}

pub fn tau_identity(rho: f64) -> PropResult {
    let t = tau(rho).unwrap();
    let x = rho * t;
    prop_assert!(t > 1.0);
    prop_assert!((x * (-x).exp() - rho * (-rho).exp()).abs() <= 1e-12);
    Ok(())
}

pub fn ccdf_monotone_and_compensated(rho: f64, t1: f64, t2: f64) -> PropResult {
    let q = QueueModel::new(rho, 1.0).unwrap();
    let (a, b) = (t1.min(t2), t1.max(t2));
    let (pa, pb) = (
        mdone_wait_ccdf(&q, a).unwrap(),
        mdone_wait_ccdf(&q, b).unwrap(),
    );
    // deep-tail values are accurate in absolute terms only
    prop_assert!(
        pb <= pa + 1e-15 && (0.0..=1.0).contains(&pb),
        "{pa} -> {pb}"
    );
    prop_assert!(pa <= henk_wait_ccdf(&q, a).unwrap() + HENK_ERROR_BOUND);
    Ok(())
}

fn objective(sc: Scenario) -> f64 {
    solve(&sc).unwrap().objective
}

/// J non-increasing in D and non-decreasing in ω_min and a_min.
pub fn objective_monotone(
    base: &Scenario,
    d: (f64, f64),
    omega: (f64, f64),
    a: (f64, f64),
) -> PropResult {
    let up = |x: (f64, f64)| (x.0.min(x.1), x.0.max(x.1));
    let (d0, d1) = up(d);
    let j0 = objective(Scenario {
        deadline_s: d0,
        ..base.clone()
    });
    let j1 = objective(Scenario {
        deadline_s: d1,
        ..base.clone()
    });
    prop_assert!(
        j1 <= j0 * (1.0 + SOLVER_REL_TOL),
        "D {d0} -> {d1}: {j0} -> {j1}"
    );
    let (w0, w1) = up(omega);
    let j0 = objective(Scenario {
        omega_min: w0,
        ..base.clone()
    });
    let j1 = objective(Scenario {
        omega_min: w1,
        ..base.clone()
    });
    prop_assert!(
        j1 >= j0 * (1.0 - SOLVER_REL_TOL),
        "omega {w0} -> {w1}: {j0} -> {j1}"
    );
    let (a0, a1) = up(a);
    let j0 = objective(Scenario {
        a_min: a0,
        ..base.clone()
    });
    let j1 = objective(Scenario {
        a_min: a1,
        ..base.clone()
    });
    prop_assert!(
        j1 >= j0 * (1.0 - SOLVER_REL_TOL),
        "a_min {a0} -> {a1}: {j0} -> {j1}"
    );
    Ok(())
}

pub fn base_scenario() -> impl Strategy<Value = Scenario> {
    (0.25f64..2.0, 2.0f64..30.0, 0.3f64..0.7).prop_map(|(r, lam, b1)| Scenario {
        radius_km: r,
        traffic_density: lam,
        beta1: b1,
        ..Default::default()
    })
}
