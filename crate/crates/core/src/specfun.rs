//! Scalar special functions: the exponential integral E1 and the lower
//! real branch of the Lambert W function.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument E1 uses its power series, above it the continued
/// fraction. Both need at most a few dozen terms at x = 1.
pub const E1_SERIES_CUTOFF: f64 = 1.0;

/// Distance from -1/e within which `lambert_w_m1` returns -1 directly.
pub const BRANCH_POINT_TOL: f64 = 1e-12;

const LAMBERT_MAX_ITER: usize = 20;

/// Exponential integral E1(x) = ∫_x^∞ e^{-t}/t dt for x > 0.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_positive(x)?;
    if x <= E1_SERIES_CUTOFF {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * e1_cf_scaled(x))
    }
}

/// e^x·E1(x) for x > 0, finite for every positive x.
///
/// Above the series cutoff the continued fraction yields this product
/// directly, so no e^x is ever formed and large arguments cannot overflow.
/// For large x the value tends to 1/x.
pub fn exp_scaled_e1(x: f64) -> Result<f64> {
    check_positive(x)?;
    if x <= E1_SERIES_CUTOFF {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_cf_scaled(x))
    }
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else if x == f64::INFINITY {
        Err(Error::domain(
            "exp_integral_e1",
            "x",
            x,
            "argument must be finite",
        ))
    } else {
        Err(Error::domain(
            "exp_integral_e1",
            "x",
            x,
            "argument must be positive",
        ))
    }
}

// E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0; // (-x)^k / k!
    for k in 1..200 {
        term *= -x / k as f64;
        let contrib = term / k as f64;
        sum += contrib;
        if contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// Modified Lentz evaluation of the continued fraction for e^x E1(x).
fn e1_cf_scaled(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Lower real branch W_{-1}(x) of the Lambert function on [-1/e, 0).
///
/// Returns w ≤ -1 with w·e^w = x. Seeded from the Barry et al. closed-form
/// approximation for the lower branch, then refined with Halley steps.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if !x.is_finite() || x >= 0.0 {
        return Err(Error::domain(
            "lambert_w_m1",
            "x",
            x,
            "must lie in [-1/e, 0)",
        ));
    }
    if (x - branch).abs() <= BRANCH_POINT_TOL {
        return Ok(-1.0);
    }
    if x < branch {
        return Err(Error::domain(
            "lambert_w_m1",
            "x",
            x,
            "must lie in [-1/e, 0)",
        ));
    }

    let mut w = barry_seed(x);
    for _ in 0..LAMBERT_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= 1e-15 * x.abs() {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = w - step;
        // Halley can overshoot past the branch point when the seed sits
        // very close to it; stay on the lower branch.
        w = if next > -1.0 { 0.5 * (w - 1.0) } else { next };
        if step.abs() <= 1e-16 * w.abs() {
            break;
        }
    }
    Ok(w)
}

fn barry_seed(x: f64) -> f64 {
    const M1: f64 = 0.3361;
    const M2: f64 = -0.0042;
    const M3: f64 = -0.0201;
    let sigma = -1.0 - (-x).ln();
    let rs = sigma.max(0.0).sqrt();
    let inner = 1.0 + M1 * (0.5 * sigma.max(0.0)).sqrt() / (1.0 + M2 * sigma * (M3 * rs).exp());
    -1.0 - sigma - (2.0 / M1) * (1.0 - 1.0 / inner)
}
