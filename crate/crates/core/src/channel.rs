//! Uplink channel model: fractional power control with a peak clamp,
//! ergodic capacity under exponential (Rayleigh power) fading, and the
//! deterministic uplink-time approximation for frames spanning many
//! coherence blocks.
//!
//! Units: bandwidth in Hz, power in mW, noise density in mW/Hz, distance
//! in km with the reference power `P` quoted at 1 km. The propagation
//! constant γ = λc²/(16π²) takes the carrier wavelength in multiples of
//! [`ChannelParams::wavelength_unit_m`] (1 m by default).

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::exp_scaled_e1;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent α (> 2).
    pub path_loss_exponent: f64,
    /// Fractional power-control coefficient ε ∈ [0, 1].
    pub power_control: f64,
    /// Reference transmit power P at 1 km, mW.
    pub ref_power_mw: f64,
    /// Peak transmit power P̄, mW.
    pub peak_power_mw: f64,
    /// Noise power spectral density N0, mW/Hz.
    pub noise_psd_mw_per_hz: f64,
    pub carrier_hz: f64,
    /// Length unit, in meters, in which the carrier wavelength enters γ.
    pub wavelength_unit_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            path_loss_exponent: 4.0,
            power_control: 0.5,
            ref_power_mw: 10.0,
            peak_power_mw: 200.0,
            noise_psd_mw_per_hz: 10f64.powf(-174.0 / 10.0),
            carrier_hz: 2.4e9,
            wavelength_unit_m: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Scenario(format!("channel: {what}")));
        if !(self.path_loss_exponent > 2.0) {
            return bad("path_loss_exponent must exceed 2");
        }
        if !(0.0..=1.0).contains(&self.power_control) {
            return bad("power_control must lie in [0, 1]");
        }
        if !(self.ref_power_mw > 0.0) || !(self.peak_power_mw > 0.0) {
            return bad("transmit powers must be positive");
        }
        if !(self.noise_psd_mw_per_hz > 0.0) {
            return bad("noise PSD must be positive");
        }
        if !(self.carrier_hz > 0.0) || !(self.wavelength_unit_m > 0.0) {
            return bad("carrier frequency and wavelength unit must be positive");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz / self.wavelength_unit_m
    }

    /// γ = λc²/(16π²), always derived from the carrier frequency.
    pub fn gamma(&self) -> f64 {
        let lc = self.wavelength();
        lc * lc / (16.0 * PI * PI)
    }

    /// Distance at which fractional control reaches the peak power.
    pub fn peak_crossover_km(&self) -> f64 {
        let ae = self.path_loss_exponent * self.power_control;
        if ae == 0.0 {
            return if self.ref_power_mw <= self.peak_power_mw {
                f64::INFINITY
            } else {
                0.0
            };
        }
        (self.peak_power_mw / self.ref_power_mw).powf(1.0 / ae)
    }
}

/// Frame encoding: θ bits per pixel and ξ:1 compression of an s×s image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameFormat {
    pub bits_per_pixel: f64,
    pub compression: f64,
}

impl Default for FrameFormat {
    fn default() -> Self {
        FrameFormat {
            bits_per_pixel: 24.0,
            compression: 2.0,
        }
    }
}

impl FrameFormat {
    pub fn validate(&self) -> Result<()> {
        if !(self.bits_per_pixel > 0.0) || !(self.compression >= 1.0) {
            return Err(Error::Scenario(
                "frame: bits_per_pixel must be positive and compression at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn frame_bits(&self, resolution_px: f64) -> f64 {
        self.bits_per_pixel * resolution_px * resolution_px / self.compression
    }
}

/// Which argument of the power `min()` a quantity is built with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerRegime {
    /// ℓ = P·r^{αε}
    Fractional,
    /// ℓ = P̄
    Peak,
    /// ℓ = min(P·r^{αε}, P̄)
    Effective,
}

fn check_distance(func: &'static str, r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(func, "r", r, "distance must be positive"))
    }
}

/// ℓ(r) = min(P·r^{αε}, P̄).
pub fn effective_tx_power(r: f64, params: &ChannelParams) -> Result<f64> {
    tx_power(r, params, PowerRegime::Effective)
}

pub fn tx_power(r: f64, params: &ChannelParams, regime: PowerRegime) -> Result<f64> {
    check_distance("tx_power", r)?;
    let fractional = params.ref_power_mw * r.powf(params.path_loss_exponent * params.power_control);
    Ok(match regime {
        PowerRegime::Fractional => fractional,
        PowerRegime::Peak => params.peak_power_mw,
        PowerRegime::Effective => fractional.min(params.peak_power_mw),
    })
}

/// κ2 = N0·r^α / (γ·ℓ), the per-hertz inverse mean SNR at distance r.
pub fn kappa2(r: f64, params: &ChannelParams, regime: PowerRegime) -> Result<f64> {
    let ell = tx_power(r, params, regime)?;
    Ok(params.noise_psd_mw_per_hz * r.powf(params.path_loss_exponent) / (params.gamma() * ell))
}

/// φ(B, κ2) = B·e^{Bκ2}·E1(Bκ2); the ergodic rate is φ/ln 2.
pub fn phi(bandwidth_hz: f64, kappa2: f64) -> Result<f64> {
    check_phi_args(bandwidth_hz, kappa2)?;
    Ok(bandwidth_hz * exp_scaled_e1(bandwidth_hz * kappa2)?)
}

fn check_phi_args(b: f64, k: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain("phi", "B", b, "bandwidth must be positive"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain("phi", "kappa2", k, "must be positive"));
    }
    Ok(())
}

/// φ and its first two derivatives in B.
///
/// With g(x) = e^x E1(x) and g' = g − 1/x:
/// φ' = (1 + x)g − 1 and φ'' = κ2·[(2 + x)g − (1 + x)/x], x = Bκ2.
pub fn phi_with_derivatives(bandwidth_hz: f64, kappa2: f64) -> Result<(f64, f64, f64)> {
    check_phi_args(bandwidth_hz, kappa2)?;
    let x = bandwidth_hz * kappa2;
    let g = exp_scaled_e1(x)?;
    let value = bandwidth_hz * g;
    let d1 = (1.0 + x) * g - 1.0;
    let d2 = kappa2 * ((2.0 + x) * g - (1.0 + x) / x);
    Ok((value, d1, d2))
}

/// φ built with the fractional-power κ2.
pub fn phi_low(bandwidth_hz: f64, r: f64, params: &ChannelParams) -> Result<f64> {
    phi(bandwidth_hz, kappa2(r, params, PowerRegime::Fractional)?)
}

/// φ built with the peak-power κ2.
pub fn phi_peak(bandwidth_hz: f64, r: f64, params: &ChannelParams) -> Result<f64> {
    phi(bandwidth_hz, kappa2(r, params, PowerRegime::Peak)?)
}

/// Ergodic Shannon rate E[B·log2(1 + SNR)] in bit/s for a user at r km.
pub fn ergodic_rate(bandwidth_hz: f64, r: f64, params: &ChannelParams) -> Result<f64> {
    Ok(phi(bandwidth_hz, kappa2(r, params, PowerRegime::Effective)?)? / LN_2)
}

/// Rate obtained by moving the expectation inside the logarithm; an upper
/// bound on [`ergodic_rate`].
pub fn jensen_rate_bound(bandwidth_hz: f64, r: f64, params: &ChannelParams) -> Result<f64> {
    let k2 = kappa2(r, params, PowerRegime::Effective)?;
    check_phi_args(bandwidth_hz, k2)?;
    Ok(bandwidth_hz * (1.0 / (bandwidth_hz * k2)).ln_1p() / LN_2)
}

/// Deterministic uplink time θs²/(ξ·R̄) of an s-pixel frame.
pub fn uplink_time(
    bandwidth_hz: f64,
    r: f64,
    resolution_px: f64,
    frame: &FrameFormat,
    params: &ChannelParams,
) -> Result<f64> {
    Ok(frame.frame_bits(resolution_px) / ergodic_rate(bandwidth_hz, r, params)?)
}

/// Uplink time with the power fixed to one side of the `min()`.
pub fn uplink_time_regime(
    bandwidth_hz: f64,
    r: f64,
    resolution_px: f64,
    frame: &FrameFormat,
    params: &ChannelParams,
    regime: PowerRegime,
) -> Result<f64> {
    let rate = phi(bandwidth_hz, kappa2(r, params, regime)?)? / LN_2;
    Ok(frame.frame_bits(resolution_px) / rate)
}
