//! Joint dimensioning of uplink bandwidth per frame and edge compute.
//!
//! Decision variables are the bandwidth B (Hz), the server capacity H
//! (TFLOPS), the waiting-time budget T (s) and the frame resolution s
//! (px). The objective β1·B + (1−β1)·β2·H/(λπr²) is minimized subject to
//! a Henk delay-violation constraint, two uplink-delay constraints (one per
//! side of the transmit-power `min()`), the load cap and the accuracy
//! floor s ≥ κ4.

mod barrier;
mod bounds;
mod oracle;

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, FrameFormat, PowerRegime};
use crate::detector::{self, DetectorCoefficients};
use crate::error::{Error, InfeasibilityKind, Result};
use crate::queueing::{self, QueueModel, HENK_ERROR_BOUND, RHO_FLOOR};
use crate::specfun::lambert_w_m1;

pub use barrier::{solve, solve_with, ConstraintDual, KktDiagnostics, SolverOptions};
pub use bounds::{min_bandwidth, min_compute, MinBandwidth};
pub use oracle::{oracle_search, OracleGrid};

/// One problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub radius_km: f64,
    /// λ, frames per second per km².
    pub traffic_density: f64,
    pub channel: ChannelParams,
    pub frame: FrameFormat,
    pub detector: DetectorCoefficients,
    /// D, seconds.
    pub deadline_s: f64,
    pub omega_min: f64,
    pub a_min: f64,
    pub rho_max: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Amount by which the Henk success target is tightened; 0 disables
    /// the compensation.
    pub error_margin: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            radius_km: 0.5,
            traffic_density: 10.0,
            channel: ChannelParams::default(),
            frame: FrameFormat::default(),
            detector: DetectorCoefficients::default(),
            deadline_s: 0.5,
            omega_min: 0.8,
            a_min: 0.9,
            rho_max: 0.99,
            beta1: 0.5,
            beta2: 1e6,
            error_margin: HENK_ERROR_BOUND,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if !(self.radius_km > 0.0 && self.radius_km.is_finite()) {
            return bad(format!("radius_km = {} must be positive", self.radius_km));
        }
        if !(self.traffic_density > 0.0 && self.traffic_density.is_finite()) {
            return bad(format!(
                "traffic_density = {} must be positive",
                self.traffic_density
            ));
        }
        if !(self.deadline_s > 0.0 && self.deadline_s.is_finite()) {
            return bad(format!("deadline_s = {} must be positive", self.deadline_s));
        }
        if !(self.error_margin >= 0.0 && self.error_margin < 1.0) {
            return bad(format!(
                "error_margin = {} must lie in [0, 1)",
                self.error_margin
            ));
        }
        if !(self.omega_min > 0.0 && self.omega_min + self.error_margin < 1.0) {
            return bad(format!(
                "omega_min = {} must lie in (0, 1 - error_margin) = (0, {})",
                self.omega_min,
                1.0 - self.error_margin
            ));
        }
        if !(self.rho_max > 0.0 && self.rho_max < 1.0) {
            return bad(format!("rho_max = {} must lie in (0, 1)", self.rho_max));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return bad(format!("beta1 = {} must lie in (0, 1)", self.beta1));
        }
        if !(self.beta2 > 0.0 && self.beta2.is_finite()) {
            return bad(format!("beta2 = {} must be positive", self.beta2));
        }
        self.channel.validate()?;
        self.frame.validate()?;
        self.detector.validate()
    }

    /// Cell area πr², km².
    pub fn area_km2(&self) -> f64 {
        PI * self.radius_km * self.radius_km
    }

    /// Aggregate frame arrival rate λπr² at the server, frames/s.
    pub fn arrival_rate(&self) -> f64 {
        self.traffic_density * self.area_km2()
    }

    /// 1 − (ω_min + margin), the bound imposed on Henk's CCDF.
    pub fn henk_target(&self) -> f64 {
        1.0 - self.omega_min - self.error_margin
    }
}

/// Scenario constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Kappas {
    /// (θ/ξ)·ln 2
    pub kappa1: f64,
    /// κ2 with ℓ = P·r^{αε}
    pub kappa2_low: f64,
    /// κ2 with ℓ = P̄
    pub kappa2_peak: f64,
    /// λπr²/ρ_max
    pub kappa3: f64,
    /// Minimum resolution, px.
    pub kappa4: f64,
}

impl Kappas {
    /// The larger κ2, i.e. the one built with the true min() power.
    pub fn kappa2_binding(&self) -> f64 {
        self.kappa2_low.max(self.kappa2_peak)
    }

    /// Ω1 = κ2·κ1·κ4²/D with the binding κ2.
    pub fn omega1(&self, deadline_s: f64) -> f64 {
        self.kappa2_binding() * self.kappa1 * self.kappa4 * self.kappa4 / deadline_s
    }

    /// Ω2 = c1·κ4³ + c2.
    pub fn omega2(&self, coeffs: &DetectorCoefficients) -> f64 {
        coeffs.work(self.kappa4)
    }
}

pub fn compute_kappas(sc: &Scenario) -> Result<Kappas> {
    sc.validate()?;
    let r = sc.radius_km;
    Ok(Kappas {
        kappa1: sc.frame.bits_per_pixel / sc.frame.compression * LN_2,
        kappa2_low: channel::kappa2(r, &sc.channel, PowerRegime::Fractional)?,
        kappa2_peak: channel::kappa2(r, &sc.channel, PowerRegime::Peak)?,
        kappa3: sc.arrival_rate() / sc.rho_max,
        kappa4: detector::min_resolution(sc.a_min, &sc.detector)?,
    })
}

/// β1·B + (1−β1)·β2·H/(λπr²).
pub fn objective(bandwidth_hz: f64, compute_tflops: f64, sc: &Scenario) -> f64 {
    sc.beta1 * bandwidth_hz + (1.0 - sc.beta1) * sc.beta2 * compute_tflops / sc.arrival_rate()
}

/// A candidate (B, H, T, s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub bandwidth_hz: f64,
    pub compute_tflops: f64,
    pub slack_t: f64,
    pub resolution_px: f64,
}

/// Re-check of a candidate against the original problem: exact M/D/1
/// waiting CCDF at the uncompensated target and the uplink time with the
/// true min() transmit power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OriginalRecheck {
    pub exact_wait_ccdf: f64,
    pub wait_target: f64,
    pub total_delay_s: f64,
    pub deadline_s: f64,
    pub load: f64,
    pub rho_max: f64,
    pub accuracy: f64,
    pub a_min: f64,
    pub passed: bool,
}

const RECHECK_TOL: f64 = 1e-9;

pub fn recheck_original(sc: &Scenario, x: &DecisionVector) -> Result<OriginalRecheck> {
    let lam_a = sc.arrival_rate();
    let ts = detector::service_time(x.resolution_px, x.compute_tflops, &sc.detector)?;
    let load = lam_a * ts;
    let exact = if load < 1.0 {
        queueing::mdone_wait_ccdf(&QueueModel::from_rates(lam_a, ts)?, x.slack_t.max(0.0))?
    } else {
        1.0
    };
    let t_ul = channel::uplink_time(
        x.bandwidth_hz,
        sc.radius_km,
        x.resolution_px,
        &sc.frame,
        &sc.channel,
    )?;
    let total = t_ul + x.slack_t + ts;
    let accuracy = detector::accuracy(x.resolution_px, &sc.detector);
    let wait_target = 1.0 - sc.omega_min;
    let passed = exact <= wait_target + RECHECK_TOL
        && total <= sc.deadline_s * (1.0 + RECHECK_TOL)
        && load <= sc.rho_max * (1.0 + RECHECK_TOL)
        && accuracy >= sc.a_min - RECHECK_TOL
        && x.slack_t >= -RECHECK_TOL * sc.deadline_s;
    Ok(OriginalRecheck {
        exact_wait_ccdf: exact,
        wait_target,
        total_delay_s: total,
        deadline_s: sc.deadline_s,
        load,
        rho_max: sc.rho_max,
        accuracy,
        a_min: sc.a_min,
        passed,
    })
}

/// Values of the convex program's constraints at `x` (feasible iff all
/// are ≤ 0), in the order henk, uplink_low, uplink_peak, load_cap,
/// min_resolution. `None` when `x` lies outside the constraint domain
/// (B, H ≤ 0 or an unstable queue), which is infeasible as well.
pub fn relaxed_constraints(sc: &Scenario, k: &Kappas, x: &DecisionVector) -> Option<[f64; 5]> {
    if !(x.bandwidth_hz > 0.0
        && x.compute_tflops > 0.0
        && x.slack_t >= 0.0
        && x.resolution_px >= 0.0)
    {
        return None;
    }
    let work = sc.detector.work(x.resolution_px);
    let rho = sc.arrival_rate() * work / x.compute_tflops;
    if !(rho < 1.0) {
        return None;
    }
    let henk = henk_ccdf_unguarded(rho, sc.arrival_rate(), x.slack_t)?;
    let base = x.slack_t + work / x.compute_tflops - sc.deadline_s;
    let s2k1 = x.resolution_px * x.resolution_px * k.kappa1;
    let low = s2k1 / channel::phi(x.bandwidth_hz, k.kappa2_low).ok()? + base;
    let peak = s2k1 / channel::phi(x.bandwidth_hz, k.kappa2_peak).ok()? + base;
    Some([
        henk - sc.henk_target(),
        low,
        peak,
        k.kappa3 * work - x.compute_tflops,
        k.kappa4 - x.resolution_px,
    ])
}

/// Henk's CCDF without the public load floor; used inside the solver
/// where very small loads are legitimate iterates.
pub(crate) fn henk_ccdf_unguarded(rho: f64, lam_a: f64, wait: f64) -> Option<f64> {
    let tau = tau_unguarded(rho)?;
    Some(queueing::henk_prefactor(rho, tau) * (-lam_a * (tau - 1.0) * wait).exp())
}

pub(crate) fn tau_unguarded(rho: f64) -> Option<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return None;
    }
    let w = lambert_w_m1(-rho * (-rho).exp()).ok()?;
    Some(-w / rho)
}

/// Smallest waiting budget meeting Henk's target at load ρ (0 when the
/// prefactor alone meets it).
pub(crate) fn henk_required_wait(rho: f64, lam_a: f64, target: f64) -> Option<f64> {
    if rho < RHO_FLOOR {
        // P(wait > 0) = ρ, negligible against any sensible target
        return if rho <= target { Some(0.0) } else { None };
    }
    let tau = tau_unguarded(rho)?;
    let pre = queueing::henk_prefactor(rho, tau);
    if pre <= target {
        Some(0.0)
    } else {
        Some((pre / target).ln() / (lam_a * (tau - 1.0)))
    }
}

/// Output of [`solve`] and [`oracle_search`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensioningSolution {
    pub bandwidth_hz: f64,
    pub compute_tflops: f64,
    pub slack_t: f64,
    pub resolution_px: f64,
    pub objective: f64,
    /// H_f = H/(λπr²), TFLOPS per frame/s.
    pub compute_per_frame: f64,
    pub load: f64,
    pub kkt: Option<KktDiagnostics>,
    pub feasible_for_original: bool,
    pub recheck: OriginalRecheck,
    pub kappas: Kappas,
    pub omega1: f64,
    pub omega2: f64,
    pub rounding: detector::RoundingReport,
}

impl DimensioningSolution {
    pub(crate) fn assemble(
        sc: &Scenario,
        k: &Kappas,
        x: DecisionVector,
        kkt: Option<KktDiagnostics>,
    ) -> Result<Self> {
        let recheck = recheck_original(sc, &x)?;
        let lam_a = sc.arrival_rate();
        Ok(DimensioningSolution {
            bandwidth_hz: x.bandwidth_hz,
            compute_tflops: x.compute_tflops,
            slack_t: x.slack_t,
            resolution_px: x.resolution_px,
            objective: objective(x.bandwidth_hz, x.compute_tflops, sc),
            compute_per_frame: x.compute_tflops / lam_a,
            load: lam_a * sc.detector.work(x.resolution_px) / x.compute_tflops,
            kkt,
            feasible_for_original: recheck.passed,
            recheck,
            kappas: *k,
            omega1: k.omega1(sc.deadline_s),
            omega2: k.omega2(&sc.detector),
            rounding: detector::rounding_report(x.resolution_px, &sc.detector),
        })
    }

    pub fn decision(&self) -> DecisionVector {
        DecisionVector {
            bandwidth_hz: self.bandwidth_hz,
            compute_tflops: self.compute_tflops,
            slack_t: self.slack_t,
            resolution_px: self.resolution_px,
        }
    }

    pub fn record(&self) -> SolutionRecord {
        SolutionRecord {
            b_hz: self.bandwidth_hz,
            h_tflops: self.compute_tflops,
            t_slack_s: self.slack_t,
            s_px: self.resolution_px,
            objective: self.objective,
            h_f: self.compute_per_frame,
            load: self.load,
            feasible_original: self.feasible_for_original,
            omega1: self.omega1,
            omega2: self.omega2,
            kkt: self.kkt.clone(),
        }
    }
}

/// Export form of a solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionRecord {
    pub b_hz: f64,
    pub h_tflops: f64,
    pub t_slack_s: f64,
    pub s_px: f64,
    pub objective: f64,
    pub h_f: f64,
    pub load: f64,
    pub feasible_original: bool,
    pub omega1: f64,
    pub omega2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktDiagnostics>,
}

/// Classifies a scenario that has no strictly feasible point.
pub(crate) fn diagnose_infeasible(sc: &Scenario, k: &Kappas, opts: &SolverOptions) -> Error {
    let omega1 = k.omega1(sc.deadline_s);
    if k.kappa4 > opts.s_max {
        return Error::infeasible(
            InfeasibilityKind::Bounds,
            "resolution_box",
            format!("kappa4 = {:.3} px exceeds s_max = {}", k.kappa4, opts.s_max),
            Some(omega1),
        );
    }
    if omega1 >= 1.0 {
        return Error::infeasible(
            InfeasibilityKind::Deadline,
            "uplink_delay",
            format!(
                "omega1 = {omega1:.6e} >= 1: the uplink floor s^2*kappa1*kappa2 = {:.6e} s alone exceeds D = {} s at any bandwidth",
                k.kappa1 * k.kappa4 * k.kappa4 * k.kappa2_binding(),
                sc.deadline_s
            ),
            Some(omega1),
        );
    }
    let work = sc.detector.work(k.kappa4);
    if k.kappa3 * work > opts.h_max {
        return Error::infeasible(
            InfeasibilityKind::Load,
            "load_cap",
            format!(
                "kappa3*(c1*kappa4^3 + c2) = {:.6e} TFLOPS exceeds H_max = {}",
                k.kappa3 * work,
                opts.h_max
            ),
            Some(omega1),
        );
    }
    let s2k1 = k.kappa4 * k.kappa4 * k.kappa1;
    let corner_ul = channel::phi(opts.b_max, k.kappa2_binding())
        .map(|p| s2k1 / p)
        .unwrap_or(f64::INFINITY);
    let corner = corner_ul + work / opts.h_max;
    if corner >= sc.deadline_s {
        return Error::infeasible(
            InfeasibilityKind::Deadline,
            "uplink_delay",
            format!(
                "even at B_max = {:.1e} Hz, H_max = {:.1e} TFLOPS, T = 0 the delay is {corner:.6e} s >= D = {} s",
                opts.b_max, opts.h_max, sc.deadline_s
            ),
            Some(omega1),
        );
    }
    Error::infeasible(
        InfeasibilityKind::Load,
        "henk_delay_violation",
        format!(
            "no load in (0, rho_max = {}] meets P_henk(T_w > T) <= {:.4} within the deadline D = {} s",
            sc.rho_max,
            sc.henk_target(),
            sc.deadline_s
        ),
        Some(omega1),
    )
}
