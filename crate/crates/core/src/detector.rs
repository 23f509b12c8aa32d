//! Parametric inference-time and accuracy models of the object detector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, InfeasibilityKind, Result};

/// Fitted constants of the detector models.
///
/// Work per frame is `c1·s³ + c2` TFLOP for an s×s frame; accuracy (mAP)
/// is `c3 − c4·e^{−c5·s}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Default for DetectorCoefficients {
    fn default() -> Self {
        DetectorCoefficients {
            c1: 7e-10,
            c2: 0.083,
            c3: 1.0,
            c4: 1.578,
            c5: 6.5e-3,
        }
    }
}

impl DetectorCoefficients {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.c1, self.c2, self.c3, self.c4, self.c5]
            .iter()
            .all(|c| *c > 0.0 && c.is_finite());
        if !all_positive {
            return Err(Error::Scenario(
                "detector coefficients must be positive".into(),
            ));
        }
        if self.c3 > 1.0 {
            return Err(Error::Scenario("detector: c3 must not exceed 1".into()));
        }
        Ok(())
    }

    /// Work per frame, TFLOP.
    pub fn work(&self, resolution_px: f64) -> f64 {
        self.c1 * resolution_px.powi(3) + self.c2
    }

    pub fn work_derivative(&self, resolution_px: f64) -> f64 {
        3.0 * self.c1 * resolution_px * resolution_px
    }
}

/// Service time (c1·s³ + c2)/H in seconds on an H-TFLOPS server.
pub fn service_time(
    resolution_px: f64,
    compute_tflops: f64,
    coeffs: &DetectorCoefficients,
) -> Result<f64> {
    if !(compute_tflops > 0.0) {
        return Err(Error::domain(
            "service_time",
            "H",
            compute_tflops,
            "compute must be positive",
        ));
    }
    if !(resolution_px >= 0.0) {
        return Err(Error::domain(
            "service_time",
            "s",
            resolution_px,
            "resolution must be non-negative",
        ));
    }
    Ok(coeffs.work(resolution_px) / compute_tflops)
}

/// Mean average precision at resolution s. Not clamped: small s yields
/// the model's own (possibly negative) extrapolation.
pub fn accuracy(resolution_px: f64, coeffs: &DetectorCoefficients) -> f64 {
    coeffs.c3 - coeffs.c4 * (-coeffs.c5 * resolution_px).exp()
}

/// Smallest resolution reaching accuracy `a_min`.
pub fn min_resolution(a_min: f64, coeffs: &DetectorCoefficients) -> Result<f64> {
    if !(a_min < coeffs.c3) {
        return Err(Error::infeasible(
            InfeasibilityKind::Accuracy,
            "accuracy",
            format!(
                "a_min = {a_min} is not below the detector asymptote c3 = {}",
                coeffs.c3
            ),
            None,
        ));
    }
    if a_min <= coeffs.c3 - coeffs.c4 {
        log::warn!(
            "a_min = {a_min} is at or below c3 - c4 = {}; minimum resolution clamps to 0",
            coeffs.c3 - coeffs.c4
        );
        return Ok(0.0);
    }
    Ok((coeffs.c4 / (coeffs.c3 - a_min)).ln() / coeffs.c5)
}

/// Integer view of a continuous resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundingReport {
    pub continuous_px: f64,
    /// Smallest integer resolution not below the continuous one.
    pub rounded_px: u32,
    pub accuracy_rounded: f64,
}

pub fn rounding_report(resolution_px: f64, coeffs: &DetectorCoefficients) -> RoundingReport {
    let rounded = resolution_px.max(0.0).ceil() as u32;
    RoundingReport {
        continuous_px: resolution_px,
        rounded_px: rounded,
        accuracy_rounded: accuracy(rounded as f64, coeffs),
    }
}
