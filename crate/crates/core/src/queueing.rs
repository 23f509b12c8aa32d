//! Waiting-time distribution of the M/D/1 server queue: the exact
//! distribution, Henk's single-exponential approximation, and the
//! certification of the largest amount by which the approximation
//! undershoots the exact tail.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::specfun::lambert_w_m1;

/// Loads below this are rejected by Henk's formula (τ diverges as ρ → 0).
pub const RHO_FLOOR: f64 = 1e-6;

/// Worst-case excess of the exact waiting CCDF over Henk's approximation,
/// taken over all loads. Tightening the success target by this much makes
/// the approximate constraint conservative.
pub const HENK_ERROR_BOUND: f64 = 0.017;

/// Largest term magnitude tolerated in the alternating sum before the
/// evaluation switches to the positive-term representation.
const ALTERNATING_MAGNITUDE_LIMIT: f64 = 1e3;

/// Below this the alternating sum is mostly cancellation error (1 − Σ with
/// Σ ≈ 1), so the deep tail comes from the positive-term form instead.
const ALTERNATING_TAIL_FLOOR: f64 = 1e-8;

/// Stationary M/D/1 queue: Poisson arrivals at `arrival_rate`, constant
/// service time, load `rho = arrival_rate · service_time`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QueueModel {
    pub rho: f64,
    pub service_time: f64,
    pub arrival_rate: f64,
}

impl QueueModel {
    pub fn new(rho: f64, service_time: f64) -> Result<Self> {
        if !(service_time > 0.0 && service_time.is_finite()) {
            return Err(Error::domain(
                "QueueModel::new",
                "service_time",
                service_time,
                "must be positive",
            ));
        }
        check_stable("QueueModel::new", rho)?;
        Ok(QueueModel {
            rho,
            service_time,
            arrival_rate: rho / service_time,
        })
    }

    pub fn from_rates(arrival_rate: f64, service_time: f64) -> Result<Self> {
        if !(arrival_rate > 0.0) {
            return Err(Error::domain(
                "QueueModel::from_rates",
                "arrival_rate",
                arrival_rate,
                "must be positive",
            ));
        }
        if !(service_time > 0.0) {
            return Err(Error::domain(
                "QueueModel::from_rates",
                "service_time",
                service_time,
                "must be positive",
            ));
        }
        let rho = arrival_rate * service_time;
        check_stable("QueueModel::from_rates", rho)?;
        Ok(QueueModel {
            rho,
            service_time,
            arrival_rate,
        })
    }

    /// τ of this queue's load.
    pub fn tau(&self) -> Result<f64> {
        tau(self.rho)
    }
}

fn check_stable(func: &'static str, rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(
            func,
            "rho",
            rho,
            "queue must be stable (0 < rho < 1)",
        ))
    }
}

/// Root τ > 1 of ρτ·e^{−ρτ} = ρ·e^{−ρ}, i.e. τ = −W_{−1}(−ρe^{−ρ})/ρ.
pub fn tau(rho: f64) -> Result<f64> {
    check_stable("tau", rho)?;
    let w = lambert_w_m1(-rho * (-rho).exp())?;
    Ok(-w / rho)
}

/// d(ρτ)/dρ, from implicit differentiation of u·e^{−u} = ρ·e^{−ρ}.
pub(crate) fn rho_tau_derivative(rho: f64, rho_tau: f64) -> f64 {
    (1.0 - rho) * rho_tau / ((1.0 - rho_tau) * rho)
}

/// Exact P(T_w > T) for the M/D/1 queue.
///
/// Uses the finite alternating sum over ν = 0..⌊T/T_s⌋ with compensated
/// summation while its terms stay small; beyond that the cancellation
/// would cost more than 1e-12 absolute, and the equivalent positive-term
/// form of [`MdOneWaitTail`] is used instead. The same form handles
/// values below 1e-8, where the alternating sum has no relative accuracy.
pub fn mdone_wait_ccdf(q: &QueueModel, wait: f64) -> Result<f64> {
    check_wait(wait)?;
    check_stable("mdone_wait_ccdf", q.rho)?;
    let t = wait / q.service_time;
    match alternating_ccdf(q.rho, t) {
        Some(v) if v >= ALTERNATING_TAIL_FLOOR => Ok(v),
        _ => Ok(MdOneWaitTail::new(q.rho)?.ccdf_scaled(t)),
    }
}

/// The alternating sum alone, or `None` when its largest term exceeds the
/// magnitude guard.
pub fn mdone_wait_ccdf_alternating(q: &QueueModel, wait: f64) -> Result<Option<f64>> {
    check_wait(wait)?;
    check_stable("mdone_wait_ccdf", q.rho)?;
    Ok(alternating_ccdf(q.rho, wait / q.service_time))
}

fn check_wait(wait: f64) -> Result<()> {
    if wait >= 0.0 && wait.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            "mdone_wait_ccdf",
            "T",
            wait,
            "waiting threshold must be finite and >= 0",
        ))
    }
}

// 1 − (1−ρ)·Σ_{ν=0}^{⌊t⌋} [ρ(ν−t)]^ν/ν! · e^{−ρ(ν−t)}, t in service times
fn alternating_ccdf(rho: f64, t: f64) -> Option<f64> {
    let top = t.floor() as usize;
    // Peak |term| is bounded by e^{ρt}·max_ν (ρ(t−ν))^ν/ν!; bail out
    // cheaply before the loop when even e^{ρt} is over the limit.
    if rho * t > ALTERNATING_MAGNITUDE_LIMIT.ln() + 1.0 && top > 0 {
        let mut peak = 0.0f64;
        for nu in 0..=top {
            let x = rho * (t - nu as f64);
            let lmag = nu as f64 * x.max(f64::MIN_POSITIVE).ln() - ln_factorial(nu) + x;
            peak = peak.max(lmag);
        }
        if peak > ALTERNATING_MAGNITUDE_LIMIT.ln() {
            return None;
        }
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut fact = 1.0f64;
    let mut largest = 0.0f64;
    for nu in 0..=top {
        if nu > 0 {
            fact *= nu as f64;
        }
        let d = nu as f64 - t; // ≤ 0
        let term = (rho * d).powi(nu as i32) / fact * (-rho * d).exp();
        largest = largest.max(term.abs());
        // Neumaier summation
        let s = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - s) + term;
        } else {
            comp += (term - s) + sum;
        }
        sum = s;
    }
    if largest > ALTERNATING_MAGNITUDE_LIMIT {
        return None;
    }
    Some(clamp_probability(1.0 - (1.0 - rho) * (sum + comp)))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn clamp_probability(p: f64) -> f64 {
    if p < 0.0 && p > -1e-12 {
        0.0
    } else if p > 1.0 && p < 1.0 + 1e-12 {
        1.0
    } else {
        p
    }
}

/// Stationary number-in-system tail of the M/D/1 queue, enabling a
/// cancellation-free evaluation of the waiting CCDF at any horizon.
///
/// With service time 1, t = k + u (k integer, 0 ≤ u < 1) and
/// μ = ρ(1 − u):
///
/// P(W > t) = Σ_{j=0}^{k} P(N > k+1−j)·Pois(μ; j) + P(Pois(μ) > k)
///
/// where N is the number in system at an arbitrary epoch. The stationary
/// probabilities come from Ramaswami's recursion, whose terms are all
/// non-negative.
#[derive(Clone, Debug)]
pub struct MdOneWaitTail {
    rho: f64,
    /// tails[n] = P(N > n)
    tails: Vec<f64>,
}

impl MdOneWaitTail {
    pub fn new(rho: f64) -> Result<Self> {
        check_stable("MdOneWaitTail::new", rho)?;

        // arrivals per service: a_j = e^{−ρ}ρ^j/j!, and upper tails ā_j
        let mut a = vec![(-rho).exp()];
        while *a.last().unwrap() > 1e-300 && a.len() < 400 {
            let j = a.len() as f64;
            let next = a.last().unwrap() * rho / j;
            a.push(next);
        }
        let mut abar = vec![0.0; a.len() + 1];
        for j in (0..a.len()).rev() {
            abar[j] = abar[j + 1] + a[j];
        }
        abar[0] = 1.0;
        abar[1] = -(-rho).exp_m1();
        let abar_at = |j: usize| if j < abar.len() { abar[j] } else { 0.0 };

        let a0 = a[0];
        let mut p = vec![1.0 - rho];
        let max_states = 2_000_000;
        loop {
            let n = p.len();
            let mut acc = p[0] * abar_at(n);
            let lo = if n + 1 > abar.len() {
                n + 1 - abar.len()
            } else {
                1
            };
            for (k, pk) in p.iter().enumerate().take(n).skip(lo.max(1)) {
                acc += pk * abar_at(n + 1 - k);
            }
            let pn = acc / a0;
            p.push(pn);
            let decaying = n >= 2 && pn <= p[n - 1];
            if (decaying && pn < 1e-22) || p.len() >= max_states {
                break;
            }
        }

        let mut tails = vec![0.0; p.len()];
        let mut acc = 0.0;
        for n in (0..p.len()).rev() {
            tails[n] = acc;
            acc += p[n];
        }
        Ok(MdOneWaitTail { rho, tails })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// P(N > n) at an arbitrary epoch.
    pub fn number_tail(&self, n: usize) -> f64 {
        self.tails.get(n).copied().unwrap_or(0.0)
    }

    /// Sum of the computed stationary probabilities (1 up to truncation).
    pub fn total_mass(&self) -> f64 {
        (1.0 - self.rho) + self.tails[0]
    }

    /// P(W > t·T_s), with t in units of the service time.
    pub fn ccdf_scaled(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.rho;
        }
        let k = t.floor();
        let u = t - k;
        let k = k as usize;
        let mu = self.rho * (1.0 - u);

        let mut pois = (-mu).exp(); // Pois(μ; 0)
        let mut cdf = 0.0;
        let mut acc = 0.0;
        let mut underflow = false;
        for j in 0..=k {
            if j > 0 {
                pois *= mu / j as f64;
            }
            cdf += pois;
            acc += self.number_tail(k + 1 - j) * pois;
            if pois < 1e-300 && j < k {
                underflow = true;
                break;
            }
        }
        // P(Pois(μ) > k), summed upward to avoid 1 − cdf cancellation
        let mut upper = 0.0;
        let mut term = pois;
        let mut j = k;
        if underflow {
            // P(Pois(μ) > k) is below the weight that already underflowed
        } else if cdf < 1.0 - 1e-3 {
            upper = 1.0 - cdf;
        } else {
            loop {
                j += 1;
                term *= mu / j as f64;
                upper += term;
                if term < 1e-300 || term < 1e-20 * upper {
                    break;
                }
            }
        }
        clamp_probability(acc + upper)
    }
}

/// Henk's approximation (1−ρ)/(ρτ−1)·e^{−λ(τ−1)T}.
pub fn henk_wait_ccdf(q: &QueueModel, wait: f64) -> Result<f64> {
    check_wait(wait)?;
    check_henk_load(q.rho)?;
    let tau = tau(q.rho)?;
    Ok(henk_prefactor(q.rho, tau) * (-q.arrival_rate * (tau - 1.0) * wait).exp())
}

fn check_henk_load(rho: f64) -> Result<()> {
    if !(RHO_FLOOR..1.0).contains(&rho) {
        Err(Error::domain(
            "henk_wait_ccdf",
            "rho",
            rho,
            "load outside [1e-6, 1)",
        ))
    } else {
        Ok(())
    }
}

pub(crate) fn henk_prefactor(rho: f64, tau: f64) -> f64 {
    (1.0 - rho) / (rho * tau - 1.0)
}

/// Smallest T ≥ 0 with Henk's P(T_w > T) ≤ `target`.
pub fn henk_min_wait(q: &QueueModel, target: f64) -> Result<f64> {
    check_henk_load(q.rho)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::domain(
            "henk_min_wait",
            "target",
            target,
            "must lie in (0, 1)",
        ));
    }
    let tau = tau(q.rho)?;
    let pre = henk_prefactor(q.rho, tau);
    if pre <= target {
        Ok(0.0)
    } else {
        Ok((pre / target).ln() / (q.arrival_rate * (tau - 1.0)))
    }
}

/// Threshold T at which exact − Henk is largest:
/// −(T_s/(ρτ))·ln((ρτ−1)/(τ−1)).
pub fn max_error_argument(q: &QueueModel) -> Result<f64> {
    check_henk_load(q.rho)?;
    let tau = tau(q.rho)?;
    let rt = q.rho * tau;
    Ok(-(q.service_time / rt) * ((rt - 1.0) / (tau - 1.0)).ln())
}

/// Settings for [`certify_error_bound`].
#[derive(Clone, Copy, Debug)]
pub struct CertifyOptions {
    /// Service time used for every load; the error does not depend on it.
    pub service_time: f64,
    /// Dense scan covers [0, scan_horizon·T_s].
    pub scan_horizon: f64,
    /// Scan step in units of T_s.
    pub scan_step: f64,
    pub bound: f64,
    pub exec: Exec,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            service_time: 1.0,
            scan_horizon: 20.0,
            scan_step: 1e-3,
            bound: HENK_ERROR_BOUND,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorBoundPoint {
    pub rho: f64,
    pub tau: f64,
    /// Closed-form maximizer, seconds.
    pub t_max_error: f64,
    /// exact − Henk at `t_max_error`.
    pub error_closed_form: f64,
    /// Largest exact − Henk found by the dense scan.
    pub error_scan: f64,
    /// Where the scan found it, seconds.
    pub t_scan_argmax: f64,
    /// e*(ρ), the larger of the two.
    pub max_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorCertificate {
    pub points: Vec<ErrorBoundPoint>,
    pub max_error: f64,
    pub worst_rho: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Largest undershoot of Henk's approximation below the exact tail.
pub fn max_henk_error(rho: f64, opts: &CertifyOptions) -> Result<ErrorBoundPoint> {
    let q = QueueModel::new(rho, opts.service_time)?;
    let tau = q.tau()?;
    let tail = MdOneWaitTail::new(rho)?;
    let err_at = |wait: f64| -> Result<f64> {
        let t = wait / q.service_time;
        let exact = alternating_ccdf(rho, t).unwrap_or_else(|| tail.ccdf_scaled(t));
        Ok(exact - henk_wait_ccdf(&q, wait)?)
    };

    let t_max = max_error_argument(&q)?;
    let e_closed = err_at(t_max)?;

    let steps = (opts.scan_horizon / opts.scan_step).round() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=steps {
        let wait = i as f64 * opts.scan_step * q.service_time;
        let e = err_at(wait)?;
        if e > best.0 {
            best = (e, wait);
        }
    }
    Ok(ErrorBoundPoint {
        rho,
        tau,
        t_max_error: t_max,
        error_closed_form: e_closed,
        error_scan: best.0,
        t_scan_argmax: best.1,
        max_error: e_closed.max(best.0),
    })
}

/// Evaluates e*(ρ) on every load of `rho_grid` and checks the maximum
/// against `opts.bound`.
pub fn certify_error_bound(rho_grid: &[f64], opts: &CertifyOptions) -> Result<ErrorCertificate> {
    for &rho in rho_grid {
        if !(rho > 0.0 && rho <= 0.99) {
            return Err(Error::domain(
                "certify_error_bound",
                "rho",
                rho,
                "grid must lie in (0, 0.99]",
            ));
        }
    }
    let points = opts
        .exec
        .map(rho_grid, |&rho| max_henk_error(rho, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (max_error, worst_rho) =
        points
            .iter()
            .map(|p| (p.max_error, p.rho))
            .fold(
                (f64::NEG_INFINITY, f64::NAN),
                |a, b| if b.0 > a.0 { b } else { a },
            );
    Ok(ErrorCertificate {
        holds: max_error <= opts.bound,
        points,
        max_error,
        worst_rho,
        bound: opts.bound,
    })
}

/// {0.01, 0.02, ..., 0.99}
pub fn standard_rho_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}
