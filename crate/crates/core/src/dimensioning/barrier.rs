//! Log-barrier interior-point solver for the dimensioning program.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use super::{
    compute_kappas, diagnose_infeasible, henk_required_wait, tau_unguarded, DecisionVector,
    DimensioningSolution, Kappas, Scenario,
};
use crate::channel;
use crate::error::{Error, Result};
use crate::queueing::rho_tau_derivative;

/// Solver settings, including the box that makes the barrier well posed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub b_max: f64,
    pub h_max: f64,
    pub s_max: f64,
    /// Stop once m/(t·|J|) falls below this.
    pub gap_tol: f64,
    /// Factor applied to t after each centering.
    pub barrier_growth: f64,
    pub initial_t: f64,
    /// Total Newton steps before giving up.
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            b_max: 1e9,
            h_max: 1e4,
            s_max: 1e4,
            gap_tol: 1e-8,
            barrier_growth: 10.0,
            initial_t: 1.0,
            max_newton: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintDual {
    pub name: String,
    pub dual: f64,
    /// −f_i ≥ 0 in scaled units.
    pub slack: f64,
}

/// First-order optimality measures at the returned point, in scaled
/// units (variables divided by their reference magnitudes, objective by
/// its value at the starting point).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktDiagnostics {
    /// ‖∇J + Σ λ_i ∇f_i‖_∞
    pub stationarity: f64,
    /// max λ_i·(−f_i)
    pub complementarity: f64,
    /// max(0, max f_i)
    pub primal_violation: f64,
    pub min_dual: f64,
    /// m/(t·|J|)
    pub duality_gap: f64,
    pub barrier_t: f64,
    pub newton_iterations: usize,
    pub outer_iterations: usize,
    pub constraints: Vec<ConstraintDual>,
}

impl KktDiagnostics {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.complementarity)
            .max(self.primal_violation)
            .max(-self.min_dual)
    }
}

const M: usize = 12;

const NAMES: [&str; M] = [
    "henk_delay_violation",
    "uplink_delay_low",
    "uplink_delay_peak",
    "load_cap",
    "min_resolution",
    "max_resolution",
    "slack_nonneg",
    "slack_max",
    "bandwidth_pos",
    "bandwidth_max",
    "compute_pos",
    "compute_max",
];

type V = Vector4<f64>;
type Mat = Matrix4<f64>;

struct Problem<'a> {
    sc: &'a Scenario,
    k: Kappas,
    lam_a: f64,
    ln_target: f64,
    opts: SolverOptions,
    /// x = origin + scale ⊙ y; the resolution axis starts at κ4 so the
    /// accuracy slack is exact.
    origin: V,
    scale: V,
    j_ref: f64,
}

impl Problem<'_> {
    fn to_x(&self, y: &V) -> V {
        self.origin + y.component_mul(&self.scale)
    }

    fn to_y(&self, x: &V) -> V {
        (x - self.origin).component_div(&self.scale)
    }

    fn objective(&self, y: &V) -> f64 {
        let x = self.to_x(y);
        super::objective(x[0], x[1], self.sc) / self.j_ref
    }

    fn objective_grad(&self) -> V {
        let sc = self.sc;
        V::new(
            sc.beta1 * self.scale[0],
            (1.0 - sc.beta1) * sc.beta2 / self.lam_a * self.scale[1],
            0.0,
            0.0,
        ) / self.j_ref
    }

    fn rho(&self, x: &V) -> f64 {
        self.lam_a * self.sc.detector.work(x[3]) / x[1]
    }

    /// Constraint values, or `None` outside the domain.
    fn values(&self, y: &V) -> Option<[f64; M]> {
        let x = self.to_x(y);
        let (b, h, t, s) = (x[0], x[1], x[2], x[3]);
        if !(b > 0.0 && h > 0.0 && s >= 0.0 && b.is_finite() && h.is_finite()) {
            return None;
        }
        let rho = self.rho(&x);
        let tau = tau_unguarded(rho)?;
        let d = self.sc.deadline_s;
        let ln_henk = (1.0 - rho).ln() - (rho * tau - 1.0).ln() - self.lam_a * (tau - 1.0) * t;
        let work = self.sc.detector.work(s);
        let base = t + work / h - d;
        let s2k1 = s * s * self.k.kappa1;
        let low = s2k1 / channel::phi(b, self.k.kappa2_low).ok()? + base;
        let peak = s2k1 / channel::phi(b, self.k.kappa2_peak).ok()? + base;
        let o = &self.opts;
        Some([
            ln_henk - self.ln_target,
            low / d,
            peak / d,
            (self.k.kappa3 * work - h) / self.scale[1],
            -y[3],
            y[3] - (o.s_max - self.origin[3]) / self.scale[3],
            -y[2],
            (t - d) / self.scale[2],
            -y[0],
            (b - o.b_max) / self.scale[0],
            -y[1],
            (h - o.h_max) / self.scale[1],
        ])
    }

    fn henk_grad(&self, y: &V) -> V {
        let x = self.to_x(y);
        let (h, t, s) = (x[1], x[2], x[3]);
        let rho = self.rho(&x);
        let tau = tau_unguarded(rho).unwrap_or(f64::NAN);
        let u = rho * tau;
        let du = rho_tau_derivative(rho, u);
        let dtau = (du - tau) / rho;
        let d_rho = -1.0 / (1.0 - rho) - du / (u - 1.0) - self.lam_a * t * dtau;
        let d_t = -self.lam_a * (tau - 1.0);
        let det = &self.sc.detector;
        let gx = V::new(
            0.0,
            d_rho * (-rho / h),
            d_t,
            d_rho * rho * det.work_derivative(s) / det.work(s),
        );
        gx.component_mul(&self.scale)
    }

    fn delay_grad_hess(&self, y: &V, kappa2: f64) -> (V, Mat) {
        let x = self.to_x(y);
        let (b, h, s) = (x[0], x[1], x[3]);
        let det = &self.sc.detector;
        let k1 = self.k.kappa1;
        let (phi, d1, d2) =
            channel::phi_with_derivatives(b, kappa2).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        let w = det.work(s);
        let w1 = det.work_derivative(s);
        let w2 = 6.0 * det.c1 * s;
        let gx = V::new(
            -s * s * k1 * d1 / (phi * phi),
            -w / (h * h),
            1.0,
            2.0 * s * k1 / phi + w1 / h,
        );
        let mut hx = Mat::zeros();
        hx[(0, 0)] = s * s * k1 * (2.0 * d1 * d1 / (phi * phi * phi) - d2 / (phi * phi));
        hx[(0, 3)] = -2.0 * s * k1 * d1 / (phi * phi);
        hx[(3, 0)] = hx[(0, 3)];
        hx[(1, 1)] = 2.0 * w / (h * h * h);
        hx[(1, 3)] = -w1 / (h * h);
        hx[(3, 1)] = hx[(1, 3)];
        hx[(3, 3)] = 2.0 * k1 / phi + w2 / h;
        let d = self.sc.deadline_s;
        let sd = Mat::from_diagonal(&self.scale);
        (gx.component_mul(&self.scale) / d, sd * hx * sd / d)
    }

    fn grads_hessians(&self, y: &V) -> ([V; M], [Mat; M]) {
        let mut g = [V::zeros(); M];
        let mut hs = [Mat::zeros(); M];

        g[0] = self.henk_grad(y);
        let step = 1e-6;
        for j in 0..4 {
            let h = step * y[j].abs().max(1.0);
            let mut yp = *y;
            let mut ym = *y;
            yp[j] += h;
            ym[j] -= h;
            let col = (self.henk_grad(&yp) - self.henk_grad(&ym)) / (2.0 * h);
            hs[0].set_column(j, &col);
        }
        hs[0] = 0.5 * (hs[0] + hs[0].transpose());

        (g[1], hs[1]) = self.delay_grad_hess(y, self.k.kappa2_low);
        (g[2], hs[2]) = self.delay_grad_hess(y, self.k.kappa2_peak);

        let det = &self.sc.detector;
        let s = self.to_x(y)[3];
        let sh = self.scale[3] / self.scale[1];
        g[3] = V::new(0.0, -1.0, 0.0, self.k.kappa3 * det.work_derivative(s) * sh);
        hs[3][(3, 3)] = self.k.kappa3 * 6.0 * det.c1 * s * self.scale[3] * sh;

        g[4] = V::new(0.0, 0.0, 0.0, -1.0);
        g[5] = V::new(0.0, 0.0, 0.0, 1.0);
        g[6] = V::new(0.0, 0.0, -1.0, 0.0);
        g[7] = V::new(0.0, 0.0, 1.0, 0.0);
        g[8] = V::new(-1.0, 0.0, 0.0, 0.0);
        g[9] = V::new(1.0, 0.0, 0.0, 0.0);
        g[10] = V::new(0.0, -1.0, 0.0, 0.0);
        g[11] = V::new(0.0, 1.0, 0.0, 0.0);
        (g, hs)
    }

    fn barrier_value(&self, y: &V, t: f64) -> Option<f64> {
        let f = self.values(y)?;
        if f.iter().any(|v| !(*v < 0.0)) {
            return None;
        }
        Some(t * self.objective(y) - f.iter().map(|v| (-v).ln()).sum::<f64>())
    }
}

/// Minimizes the dimensioning objective with default solver options.
pub fn solve(sc: &Scenario) -> Result<DimensioningSolution> {
    solve_with(sc, &SolverOptions::default())
}

pub fn solve_with(sc: &Scenario, opts: &SolverOptions) -> Result<DimensioningSolution> {
    let k = compute_kappas(sc)?;
    let x0 = initial_point(sc, &k, opts)?;

    let origin = V::new(0.0, 0.0, 0.0, k.kappa4);
    let scale = V::new(
        x0.bandwidth_hz,
        x0.compute_tflops,
        sc.deadline_s,
        x0.resolution_px - k.kappa4,
    );
    let mut p = Problem {
        sc,
        k,
        lam_a: sc.arrival_rate(),
        ln_target: sc.henk_target().ln(),
        opts: *opts,
        origin,
        scale,
        j_ref: super::objective(x0.bandwidth_hz, x0.compute_tflops, sc),
    };
    let mut y = p.to_y(&V::new(
        x0.bandwidth_hz,
        x0.compute_tflops,
        x0.slack_t,
        x0.resolution_px,
    ));

    let m = M as f64;
    let mut t = opts.initial_t;
    let mut newton = 0usize;
    let mut outer = 0usize;
    loop {
        outer += 1;
        // keep B and H near unit scale; Newton steps are invariant to this
        let x = p.to_x(&y);
        p.scale[0] = x[0];
        p.scale[1] = x[1];
        y = p.to_y(&x);
        let gj = p.objective_grad();
        center(&p, &mut y, t, &gj, &mut newton, opts.max_newton)?;
        let j = p.objective(&y).abs();
        if m / (t * j) <= opts.gap_tol * (1.0 + 1e-9) {
            break;
        }
        // land on the target gap rather than overshoot it
        t = (t * opts.barrier_growth).min(m / (opts.gap_tol * j));
    }

    let kkt = diagnostics(&p, &y, t, &p.objective_grad(), newton, outer);
    let x = p.to_x(&y);
    let dv = DecisionVector {
        bandwidth_hz: x[0],
        compute_tflops: x[1],
        slack_t: x[2],
        resolution_px: x[3],
    };
    log::debug!("barrier solve: {newton} Newton steps, {outer} centerings, t = {t:.3e}");
    DimensioningSolution::assemble(sc, &k, dv, Some(kkt))
}

fn center(p: &Problem, y: &mut V, t: f64, gj: &V, newton: &mut usize, cap: usize) -> Result<()> {
    let mut best_dec2 = f64::INFINITY;
    let mut stagnant = 0;
    loop {
        if *newton >= cap {
            return Err(Error::SolverStall {
                iterations: *newton,
                barrier_t: t,
                gap: M as f64 / (t * p.objective(y).abs()),
                detail: "Newton step cap reached while centering".into(),
            });
        }
        *newton += 1;
        let f = p.values(y).expect("iterate left the constraint domain");
        let (grads, hessians) = p.grads_hessians(y);
        let mut g = t * gj;
        let mut hm = Mat::zeros();
        for i in 0..M {
            let inv = 1.0 / -f[i];
            g += grads[i] * inv;
            hm += grads[i] * grads[i].transpose() * (inv * inv) + hessians[i] * inv;
        }
        let dx = newton_direction(&hm, &g);
        let dec2 = -g.dot(&dx);
        if dec2 <= 1e-16 {
            return Ok(());
        }
        // Once rounding dominates, the decrement stops shrinking.
        if dec2 < 1e-8 {
            if dec2 < 0.5 * best_dec2 {
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant >= 3 {
                    return Ok(());
                }
            }
        }
        best_dec2 = best_dec2.min(dec2);

        let phi0 = p
            .barrier_value(y, t)
            .expect("current iterate is strictly feasible");
        let mut alpha = 1.0;
        loop {
            let cand = *y + alpha * dx;
            if let Some(phi) = p.barrier_value(&cand, t) {
                // In the quadratic region rounding in Φ ~ t swamps the
                // Armijo decrease, so a feasible full step is accepted.
                if dec2 < 1e-6 || phi <= phi0 - 0.01 * alpha * dec2 {
                    if cand == *y {
                        return Ok(());
                    }
                    *y = cand;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                return Ok(());
            }
        }
    }
}

fn newton_direction(hm: &Mat, g: &V) -> V {
    if let Some(ch) = hm.cholesky() {
        return -ch.solve(g);
    }
    let mut delta = 1e-12 * hm.diagonal().amax().max(1e-300);
    loop {
        let reg = hm + Mat::identity() * delta;
        if let Some(ch) = reg.cholesky() {
            return -ch.solve(g);
        }
        delta *= 100.0;
    }
}

/// KKT measures at the final iterate. Multipliers come from the barrier
/// (λ_i = 1/(t·(−f_i))) and, on the near-active set, from a least-squares
/// fit of the stationarity equation; the set with the smaller worst
/// residual is reported.
fn diagnostics(p: &Problem, y: &V, t: f64, gj: &V, newton: usize, outer: usize) -> KktDiagnostics {
    let f = p.values(y).expect("final iterate is strictly feasible");
    let (grads, _) = p.grads_hessians(y);
    let barrier_duals: Vec<f64> = f.iter().map(|fi| 1.0 / (t * -fi)).collect();

    let measure = |duals: &[f64]| -> (f64, f64, f64) {
        let mut r = *gj;
        let mut comp = 0.0f64;
        let mut min_dual = f64::INFINITY;
        for i in 0..M {
            r += grads[i] * duals[i];
            comp = comp.max((duals[i] * -f[i]).abs());
            min_dual = min_dual.min(duals[i]);
        }
        (r.amax(), comp, min_dual)
    };

    let mut duals = barrier_duals.clone();
    let mut best = measure(&duals);
    if let Some(refined) = refine_duals(&f, &grads, gj, &barrier_duals) {
        let m = measure(&refined);
        let worst = |m: (f64, f64, f64)| m.0.max(m.1).max(-m.2);
        if worst(m) < worst(best) {
            duals = refined;
            best = m;
        }
    }
    let (stationarity, complementarity, min_dual) = best;
    let constraints = (0..M)
        .map(|i| ConstraintDual {
            name: NAMES[i].to_string(),
            dual: duals[i],
            slack: -f[i],
        })
        .collect();
    KktDiagnostics {
        stationarity,
        complementarity,
        primal_violation: f.iter().fold(0.0f64, |a, v| a.max(*v)),
        min_dual,
        duality_gap: M as f64 / (t * p.objective(y).abs()),
        barrier_t: t,
        newton_iterations: newton,
        outer_iterations: outer,
        constraints,
    }
}

fn refine_duals(f: &[f64; M], grads: &[V; M], gj: &V, barrier: &[f64]) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..M).filter(|&i| -f[i] < 1e-5).collect();
    if active.is_empty() || active.len() > 4 {
        return None;
    }
    let mut rhs = -gj;
    for i in (0..M).filter(|i| !active.contains(i)) {
        rhs -= grads[i] * barrier[i];
    }
    let a = nalgebra::DMatrix::from_fn(4, active.len(), |r, c| grads[active[c]][r]);
    let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    if sol.iter().any(|v| *v < 0.0) {
        return None;
    }
    let mut duals = barrier.to_vec();
    for (c, &i) in active.iter().enumerate() {
        duals[i] = sol[c];
    }
    Some(duals)
}

/// Strictly feasible start: a resolution just above κ4, the load that
/// leaves the most delay budget, and B, T splitting that leftover.
fn initial_point(sc: &Scenario, k: &Kappas, opts: &SolverOptions) -> Result<DecisionVector> {
    let mut s0 = if k.kappa4 > 0.0 {
        k.kappa4 * 1.001
    } else {
        1.0
    };
    if s0 >= opts.s_max {
        s0 = 0.5 * (k.kappa4 + opts.s_max);
    }
    if !(k.kappa4 < opts.s_max) {
        return Err(diagnose_infeasible(sc, k, opts));
    }
    let lam_a = sc.arrival_rate();
    let work = sc.detector.work(s0);
    let target = 0.9 * sc.henk_target();
    let s2k1 = s0 * s0 * k.kappa1;
    let k2 = k.kappa2_binding();
    let ul_at = |b: f64| channel::phi(b, k2).map(|p| s2k1 / p);
    let ul_floor = ul_at(0.5 * opts.b_max)?;

    let rho_lo = (lam_a * work / (0.999 * opts.h_max)).max(1e-12);
    let rho_hi = sc.rho_max * (1.0 - 1e-6);
    if rho_lo >= rho_hi {
        return Err(diagnose_infeasible(sc, k, opts));
    }
    let bandwidth_for = |ul_target: f64| -> Result<f64> {
        let (mut lo, mut hi) = ((0.5 * opts.b_max).ln() - 60.0, (0.5 * opts.b_max).ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ul_at(mid.exp())? > ul_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi.exp())
    };

    // Among loads leaving positive budget, start from the cheapest one
    // after splitting the leftover between B and T.
    let n = 400;
    let mut best: Option<(f64, DecisionVector)> = None;
    for i in 0..=n {
        let rho = rho_lo * (rho_hi / rho_lo).powf(i as f64 / n as f64);
        let h = lam_a * work / rho;
        let Some(treq) = henk_required_wait(rho, lam_a, target) else {
            continue;
        };
        let leftover = sc.deadline_s - work / h - treq - ul_floor;
        if !(leftover > 0.0) {
            continue;
        }
        let b = bandwidth_for(ul_floor + 0.5 * leftover)?;
        let j = super::objective(b, h, sc);
        if best.as_ref().is_none_or(|(bj, _)| j < *bj) {
            let x = DecisionVector {
                bandwidth_hz: b,
                compute_tflops: h,
                slack_t: treq + 0.25 * leftover,
                resolution_px: s0,
            };
            best = Some((j, x));
        }
    }
    best.map(|(_, x)| x)
        .ok_or_else(|| diagnose_infeasible(sc, k, opts))
}
