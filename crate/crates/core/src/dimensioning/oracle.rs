//! Grid-refinement search used to cross-check the barrier solver.
//!
//! For fixed (s, H) the load is known, T is set to the smallest budget
//! meeting Henk's target, and B to the smallest bandwidth closing the
//! delay budget; what is left is a search over (s, H) on nested grids.

use super::{
    compute_kappas, henk_required_wait, DecisionVector, DimensioningSolution, Kappas, Scenario,
    SolverOptions,
};
use crate::channel;
use crate::error::{Error, InfeasibilityKind, Result};
use crate::exec::Exec;
use crate::queueing::{mdone_wait_ccdf, QueueModel};

#[derive(Clone, Copy, Debug)]
pub struct OracleGrid {
    pub s_points: usize,
    /// Resolutions searched: [κ4, κ4·(1 + s_span)].
    pub s_span: f64,
    pub h_points: usize,
    /// Nested refinements around the incumbent.
    pub zoom_levels: usize,
    pub bounds: SolverOptions,
    pub exec: Exec,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            s_points: 6,
            s_span: 0.05,
            h_points: 40,
            zoom_levels: 6,
            bounds: SolverOptions::default(),
            exec: Exec::default(),
        }
    }
}

impl OracleGrid {
    /// Same search with twice the points per axis.
    pub fn refined(&self) -> Self {
        OracleGrid {
            s_points: 2 * self.s_points,
            h_points: 2 * self.h_points,
            ..*self
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    j: f64,
    x: DecisionVector,
}

struct Ctx<'a> {
    sc: &'a Scenario,
    k: Kappas,
    lam_a: f64,
    henk_target: f64,
    grid: &'a OracleGrid,
}

impl Ctx<'_> {
    fn eval(&self, s: f64, h: f64) -> Option<Candidate> {
        let sc = self.sc;
        let work = sc.detector.work(s);
        let rho = self.lam_a * work / h;
        if rho > sc.rho_max || h > self.grid.bounds.h_max {
            return None;
        }
        let t = henk_required_wait(rho, self.lam_a, self.henk_target)?;
        let budget = sc.deadline_s - work / h - t;
        let s2k1 = s * s * self.k.kappa1;
        let k2 = self.k.kappa2_binding();
        let ul = |b: f64| {
            channel::phi(b, k2)
                .map(|p| s2k1 / p)
                .unwrap_or(f64::INFINITY)
        };
        let b_max = self.grid.bounds.b_max;
        if !(budget > 0.0) || ul(b_max) > budget {
            return None;
        }
        let (mut lo, mut hi) = (1e-3f64.ln(), b_max.ln());
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ul(mid.exp()) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = hi.exp();
        let q = QueueModel::from_rates(self.lam_a, work / h).ok()?;
        if mdone_wait_ccdf(&q, t).ok()? > 1.0 - sc.omega_min + 1e-12 {
            return None;
        }
        let x = DecisionVector {
            bandwidth_hz: b,
            compute_tflops: h,
            slack_t: t,
            resolution_px: s,
        };
        Some(Candidate {
            j: super::objective(b, h, sc),
            x,
        })
    }

    fn best_h(&self, s: f64) -> Option<Candidate> {
        let work = self.sc.detector.work(s);
        let mut lo = (self.k.kappa3 * work).ln();
        let mut hi = self.grid.bounds.h_max.ln();
        if lo >= hi {
            return None;
        }
        let n = self.grid.h_points.max(3);
        let mut best: Option<Candidate> = None;
        for _ in 0..=self.grid.zoom_levels {
            let step = (hi - lo) / (n - 1) as f64;
            let mut arg = None;
            for i in 0..n {
                let h = (lo + step * i as f64).exp();
                if let Some(c) = self.eval(s, h) {
                    if best.is_none_or(|b| c.j < b.j) {
                        best = Some(c);
                        arg = Some(i);
                    }
                }
            }
            let centre = match (arg, best) {
                (Some(i), _) => lo + step * i as f64,
                (None, Some(b)) => b.x.compute_tflops.ln(),
                (None, None) => return None,
            };
            lo = (centre - step).max(lo);
            hi = (centre + step).min(hi);
        }
        best
    }
}

/// Best point of the nested grid search, filtered by the exact M/D/1
/// waiting CCDF at the uncompensated target. An ACCURACY, or a LOAD
/// verdict when no grid point is feasible, comes back as an error.
pub fn oracle_search(sc: &Scenario, grid: &OracleGrid) -> Result<DimensioningSolution> {
    let k = compute_kappas(sc)?;
    let ctx = Ctx {
        sc,
        k,
        lam_a: sc.arrival_rate(),
        henk_target: sc.henk_target(),
        grid,
    };
    let base = k.kappa4;
    let span = grid.s_span * k.kappa4.max(1.0);
    let (mut lo, mut hi) = (base, (base + span).min(grid.bounds.s_max));
    let n = grid.s_points.max(2);
    let mut best: Option<Candidate> = None;
    for _ in 0..=grid.zoom_levels {
        let step = (hi - lo) / (n - 1) as f64;
        let results = grid.exec.map_range(n, |i| ctx.best_h(lo + step * i as f64));
        let mut arg = None;
        for (i, c) in results.into_iter().enumerate() {
            if let Some(c) = c {
                if best.is_none_or(|b| c.j < b.j) {
                    best = Some(c);
                    arg = Some(i);
                }
            }
        }
        let centre = match (arg, best) {
            (Some(i), _) => lo + step * i as f64,
            (None, Some(b)) => b.x.resolution_px,
            (None, None) => break,
        };
        lo = (centre - step).max(base);
        hi = centre + step;
    }
    match best {
        Some(c) => DimensioningSolution::assemble(sc, &k, c.x, None),
        None => Err(Error::infeasible(
            InfeasibilityKind::Load,
            "grid_search",
            "no grid point satisfies the load cap, the waiting target and the deadline",
            Some(k.omega1(sc.deadline_s)),
        )),
    }
}
