//! Closed-form minimum resources when the other resource is free.

use serde::Serialize;

use super::{compute_kappas, Scenario};
use crate::error::{Error, InfeasibilityKind, Result};
use crate::specfun::lambert_w_m1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinBandwidth {
    /// With κ2 for ℓ = P·r^{αε}; `None` when that variant alone has Ω1 ≥ 1.
    pub low: Option<f64>,
    /// With κ2 for ℓ = P̄.
    pub peak: Option<f64>,
    /// With the larger κ2.
    pub binding: f64,
    pub binding_kappa2: f64,
    pub omega1: f64,
}

// (−Ω1/κ2)/(Ω1 + W_{−1}(−Ω1·e^{−Ω1}))
fn b_min(kappa2: f64, burden: f64, deadline: f64) -> Option<f64> {
    let omega1 = kappa2 * burden / deadline;
    if !(omega1 < 1.0) {
        return None;
    }
    let w = lambert_w_m1(-omega1 * (-omega1).exp()).ok()?;
    let denom = omega1 + w;
    if !(denom < 0.0) {
        return None;
    }
    Some((-omega1 / kappa2) / denom)
}

fn deadline_certificate(omega1: f64) -> Error {
    Error::infeasible(
        InfeasibilityKind::Deadline,
        "uplink_delay",
        format!("omega1 = {omega1:.6e} >= 1: no finite bandwidth meets the deadline"),
        Some(omega1),
    )
}

/// Smallest bandwidth per frame meeting the deadline with unlimited
/// compute, from Jensen's bound on the ergodic capacity.
pub fn min_bandwidth(sc: &Scenario) -> Result<MinBandwidth> {
    let k = compute_kappas(sc)?;
    let burden = k.kappa1 * k.kappa4 * k.kappa4;
    let d = sc.deadline_s;
    let binding_kappa2 = k.kappa2_binding();
    let omega1 = k.omega1(d);
    let binding = b_min(binding_kappa2, burden, d).ok_or_else(|| deadline_certificate(omega1))?;
    Ok(MinBandwidth {
        low: b_min(k.kappa2_low, burden, d),
        peak: b_min(k.kappa2_peak, burden, d),
        binding,
        binding_kappa2,
        omega1,
    })
}

/// Smallest server capacity meeting the deadline and the load cap with
/// unlimited bandwidth: Ω2·max{κ3, 1/(D(1−Ω1))}.
pub fn min_compute(sc: &Scenario) -> Result<f64> {
    let k = compute_kappas(sc)?;
    let d = sc.deadline_s;
    let omega1 = k.omega1(d);
    if !(omega1 < 1.0) {
        return Err(deadline_certificate(omega1));
    }
    Ok(k.omega2(&sc.detector) * k.kappa3.max(1.0 / (d * (1.0 - omega1))))
}
