//! Self-check of the analytic models against their simulators.

use serde::Serialize;

use crate::channel;
use crate::dimensioning::{solve, Scenario};
use crate::error::Result;
use crate::exec::Exec;
use crate::queueing::{
    certify_error_bound, mdone_wait_ccdf, standard_rho_grid, CertifyOptions, QueueModel,
};
use crate::simulator::{
    ergodic_rate_monte_carlo, simulate_end_to_end, simulate_queue, simulate_uplink, SimConfig,
    UplinkMode,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Solve with the scenario's error margin; `false` forces it to zero.
    pub compensation: bool,
    pub queue_arrivals: usize,
    pub end_to_end_frames: usize,
    pub fading_draws: usize,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 1,
            compensation: true,
            queue_arrivals: 1_000_000,
            end_to_end_frames: 100_000,
            fading_draws: 1_000_000,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub compensation: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const QUEUE_LOADS: [f64; 3] = [0.3, 0.5, 0.9];
const QUEUE_POINTS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];

/// Runs every check on `sc`. Errors only when a check cannot run at all;
/// an infeasible scenario is one failed check.
pub fn run_verify(sc: &Scenario, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        })
    };

    let cert = certify_error_bound(
        &standard_rho_grid(),
        &CertifyOptions {
            exec: opts.exec,
            ..Default::default()
        },
    )?;
    push(
        "henk_error_bound",
        cert.holds,
        format!(
            "max e* = {:.5} at rho = {:.2}, bound {}",
            cert.max_error, cert.worst_rho, cert.bound
        ),
    );

    let sim = SimConfig {
        n_arrivals: opts.queue_arrivals,
        seed: opts.seed,
        exec: opts.exec,
        ..Default::default()
    };
    for rho in QUEUE_LOADS {
        let q = QueueModel::new(rho, 1.0)?;
        let rep = simulate_queue(&q, &QUEUE_POINTS, &sim)?;
        let mut worst = 0.0f64;
        for p in &rep.empirical_ccdf {
            worst = worst.max((p.ccdf - mdone_wait_ccdf(&q, p.t_seconds)?).abs());
        }
        push(
            &format!("queue_simulation_rho_{rho}"),
            worst <= 0.01,
            format!("max |sim - exact| = {worst:.5} (limit 0.01)"),
        );
    }

    let mut sc = sc.clone();
    if !opts.compensation {
        sc.error_margin = 0.0;
    }
    let sol = match solve(&sc) {
        Ok(s) => s,
        Err(e) => {
            push("solve", false, e.to_string());
            return Ok(VerifyReport {
                seed: opts.seed,
                compensation: opts.compensation,
                checks,
            });
        }
    };
    let (b, r, s) = (sol.bandwidth_hz, sc.radius_km, sol.resolution_px);

    let mc_cfg = SimConfig {
        n_trials: opts.fading_draws,
        ..sim
    };
    let mc = ergodic_rate_monte_carlo(b, r, &sc.channel, &mc_cfg)?;
    let exact = channel::ergodic_rate(b, r, &sc.channel)?;
    let rel = (mc.value / exact - 1.0).abs();
    push(
        "ergodic_rate",
        rel <= 5e-3,
        format!("relative gap {rel:.2e} at B = {b:.4e} Hz (limit 5e-3)"),
    );

    let ul = simulate_uplink(
        b,
        r,
        s,
        &sc.frame,
        &sc.channel,
        &SimConfig {
            n_trials: 10_000,
            ..sim
        },
    )?;
    let rel = (ul.mean_s.value / ul.deterministic_s - 1.0).abs();
    push(
        "uplink_time",
        rel <= 1e-2 && ul.coefficient_of_variation < 0.05,
        format!(
            "mean/deterministic - 1 = {rel:.2e}, cv = {:.4} over {:.0} blocks",
            ul.coefficient_of_variation, ul.blocks_per_frame
        ),
    );

    push(
        "original_recheck",
        sol.feasible_for_original,
        format!(
            "exact P(T_w > T) = {:.5} vs {:.5}",
            sol.recheck.exact_wait_ccdf, sol.recheck.wait_target
        ),
    );

    let e2e = SimConfig {
        n_arrivals: opts.end_to_end_frames,
        replications: 20.min(opts.end_to_end_frames),
        ..sim
    };
    for (name, mode) in [
        ("end_to_end_deterministic", UplinkMode::Deterministic),
        ("end_to_end_fading", UplinkMode::Fading),
    ] {
        let rep = simulate_end_to_end(&sol, &sc, &e2e, mode)?;
        let p = rep.success_probability;
        push(
            name,
            p.value >= sc.omega_min - p.ci_halfwidth,
            format!(
                "success {:.4} ± {:.4} vs omega_min {}, load {:.3}",
                p.value, p.ci_halfwidth, sc.omega_min, rep.load
            ),
        );
        push(
            &format!("{name}_arrivals_poisson"),
            rep.arrival_test.passed,
            format!(
                "KS D = {:.2e}, p = {:.3}",
                rep.arrival_test.statistic, rep.arrival_test.p_value
            ),
        );
    }

    Ok(VerifyReport {
        seed: opts.seed,
        compensation: opts.compensation,
        checks,
    })
}
