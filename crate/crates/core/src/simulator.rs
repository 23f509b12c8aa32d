//! Monte Carlo and discrete-event checks of the analytic models.
//!
//! All randomness comes from ChaCha8. The seed fixes the key and every
//! (component, replication or chunk) pair reads its own stream, so a
//! report depends on the seed and the config only, never on the
//! execution strategy.
//!
//! Confidence intervals are 95% normal-approximation intervals. Queue
//! statistics are serially correlated, so their intervals come from the
//! spread of independent replication means; with a single replication
//! the i.i.d. formula is used instead.

use std::f64::consts::LN_2;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, FrameFormat, PowerRegime};
use crate::dimensioning::{DecisionVector, DimensioningSolution, Scenario};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::queueing::{mdone_wait_ccdf, QueueModel};

const Z95: f64 = 1.959_963_984_540_054;
const CHUNK: usize = 1 << 14;
/// Fading blocks spanned by a frame under the default coherence time.
pub const DEFAULT_BLOCKS_PER_FRAME: f64 = 400.0;

#[derive(Clone, Copy)]
enum Component {
    Ergodic = 1,
    Uplink = 2,
    QueueArrivals = 3,
    Arrivals = 4,
    Fading = 5,
}

fn stream(seed: u64, c: Component, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((c as u64) << 48) | index as u64);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    /// Frames (or customers) per queue or end-to-end run, over all replications.
    pub n_arrivals: usize,
    /// Independent draws for the uplink and ergodic-rate estimators.
    pub n_trials: usize,
    pub replications: usize,
    pub seed: u64,
    /// Fading block length; `None` picks T_ul/400 at the simulated bandwidth.
    pub coherence_time_s: Option<f64>,
    /// Leading share of each replication discarded before counting.
    pub warmup_fraction: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_arrivals: 1_000_000,
            n_trials: 100_000,
            replications: 20,
            seed: 1,
            coherence_time_s: None,
            warmup_fraction: 0.1,
            exec: Exec::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Scenario(format!("simulation: {m}")));
        if self.n_arrivals == 0 || self.n_trials == 0 || self.replications == 0 {
            return bad("counts must be at least 1");
        }
        if !(0.0..=0.5).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 0.5]");
        }
        if let Some(tc) = self.coherence_time_s {
            if !(tc > 0.0 && tc.is_finite()) {
                return bad("coherence_time_s must be positive");
            }
        }
        Ok(())
    }

    fn validate_arrivals(&self) -> Result<()> {
        self.validate()?;
        if self.replications > self.n_arrivals {
            return Err(Error::Scenario(
                "simulation: more replications than arrivals".into(),
            ));
        }
        Ok(())
    }

    fn replication_len(&self, j: usize) -> usize {
        let r = self.replications;
        self.n_arrivals / r + usize::from(j < self.n_arrivals % r)
    }

    fn warmup(&self, len: usize) -> usize {
        (len as f64 * self.warmup_fraction) as usize
    }
}

/// Point estimate with its 95% half-width and the sample count behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_halfwidth: f64,
    pub n: usize,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.ci_halfwidth
    }
}

/// Running sums of one statistic.
#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    n: usize,
    sum: f64,
    sumsq: f64,
}

impl Sums {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn merge(parts: &[Sums]) -> Sums {
        parts.iter().fold(Sums::default(), |a, b| Sums {
            n: a.n + b.n,
            sum: a.sum + b.sum,
            sumsq: a.sumsq + b.sumsq,
        })
    }

    /// i.i.d. estimate.
    fn iid(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sumsq / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
        Estimate {
            value: mean,
            ci_halfwidth: Z95 * (var / n).sqrt(),
            n: self.n,
        }
    }

    /// Pooled mean with a batch-means interval over replications.
    fn batched(parts: &[Sums]) -> Estimate {
        let all = Sums::merge(parts);
        let live: Vec<&Sums> = parts.iter().filter(|p| p.n > 0).collect();
        if live.len() < 2 {
            return all.iid();
        }
        let r = live.len() as f64;
        let mean = all.mean();
        let ss: f64 = live.iter().map(|p| (p.mean() - mean).powi(2)).sum();
        Estimate {
            value: mean,
            ci_halfwidth: Z95 * (ss / (r * (r - 1.0))).sqrt(),
            n: all.n,
        }
    }
}

/// One row of an empirical CCDF.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub t_seconds: f64,
    pub ccdf: f64,
    pub ci_halfwidth: f64,
}

/// Writes `t_seconds,ccdf,ci_halfwidth` rows.
pub fn write_ccdf_csv<W: Write>(points: &[CcdfPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

fn sorted_points(t_points: &[f64]) -> Result<Vec<f64>> {
    let mut t = t_points.to_vec();
    if let Some(bad) = t.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::domain(
            "simulator",
            "t",
            *bad,
            "CCDF points must be finite and non-negative",
        ));
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// Exceedance counts of `x` over the sorted points.
fn count_exceedances(x: f64, t: &[f64], counts: &mut [Sums]) {
    for (c, &ti) in counts.iter_mut().zip(t) {
        c.push(if x > ti { 1.0 } else { 0.0 });
    }
}

fn ccdf_points(t: &[f64], per_rep: &[Vec<Sums>]) -> Vec<CcdfPoint> {
    (0..t.len())
        .map(|i| {
            let parts: Vec<Sums> = per_rep.iter().map(|r| r[i]).collect();
            let e = Sums::batched(&parts);
            CcdfPoint {
                t_seconds: t[i],
                ccdf: e.value,
                ci_halfwidth: e.ci_halfwidth,
            }
        })
        .collect()
}

fn check_bandwidth(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            "simulator",
            "B",
            b,
            "bandwidth must be positive",
        ))
    }
}

/// Monte Carlo estimate of E[B·log2(1 + SNR)] over `cfg.n_trials`
/// exponential fading draws for a user at r km.
pub fn ergodic_rate_monte_carlo(
    bandwidth_hz: f64,
    r: f64,
    params: &ChannelParams,
    cfg: &SimConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    check_bandwidth(bandwidth_hz)?;
    let x = bandwidth_hz * channel::kappa2(r, params, PowerRegime::Effective)?;
    let n = cfg.n_trials;
    let parts = cfg.exec.map_range(n.div_ceil(CHUNK), |c| {
        let mut rng = stream(cfg.seed, Component::Ergodic, c);
        let mut s = Sums::default();
        for _ in 0..CHUNK.min(n - c * CHUNK) {
            let h: f64 = Exp1.sample(&mut rng);
            s.push(bandwidth_hz * (h / x).ln_1p() / LN_2);
        }
        s
    });
    Ok(Sums::merge(&parts).iid())
}

/// Time to push `bits` through i.i.d. fading blocks of length `tc`.
fn fading_frame_time(rng: &mut ChaCha8Rng, bits: f64, b: f64, x: f64, tc: f64) -> f64 {
    let mut left = bits;
    let mut t = 0.0;
    loop {
        let h: f64 = Exp1.sample(rng);
        let rate = b * (h / x).ln_1p() / LN_2;
        let cap = rate * tc;
        if cap >= left {
            return t + left / rate;
        }
        left -= cap;
        t += tc;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UplinkSamples {
    pub times_s: Vec<f64>,
    pub coherence_time_s: f64,
    /// θs²/(ξ·R̄), the deterministic uplink time.
    pub deterministic_s: f64,
    /// Blocks a frame spans at the ergodic rate.
    pub blocks_per_frame: f64,
    pub mean_s: Estimate,
    pub coefficient_of_variation: f64,
}

/// Completion times of `cfg.n_trials` frames of `resolution_px` pixels,
/// each sent across successive coherence blocks with fresh exponential
/// fading per block.
pub fn simulate_uplink(
    bandwidth_hz: f64,
    r: f64,
    resolution_px: f64,
    frame: &FrameFormat,
    params: &ChannelParams,
    cfg: &SimConfig,
) -> Result<UplinkSamples> {
    cfg.validate()?;
    check_bandwidth(bandwidth_hz)?;
    let x = bandwidth_hz * channel::kappa2(r, params, PowerRegime::Effective)?;
    let bits = frame.frame_bits(resolution_px);
    let det = channel::uplink_time(bandwidth_hz, r, resolution_px, frame, params)?;
    let tc = cfg
        .coherence_time_s
        .unwrap_or(det / DEFAULT_BLOCKS_PER_FRAME);
    let n = cfg.n_trials;
    let chunks = cfg.exec.map_range(n.div_ceil(CHUNK), |c| {
        let mut rng = stream(cfg.seed, Component::Uplink, c);
        (0..CHUNK.min(n - c * CHUNK))
            .map(|_| fading_frame_time(&mut rng, bits, bandwidth_hz, x, tc))
            .collect::<Vec<f64>>()
    });
    let times_s: Vec<f64> = chunks.into_iter().flatten().collect();
    let mut s = Sums::default();
    times_s.iter().for_each(|t| s.push(*t));
    let mean_s = s.iid();
    let var = (s.sumsq / n as f64 - mean_s.value.powi(2)).max(0.0);
    Ok(UplinkSamples {
        times_s,
        coherence_time_s: tc,
        deterministic_s: det,
        blocks_per_frame: det / tc,
        coefficient_of_variation: var.sqrt() / mean_s.value,
        mean_s,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueueSimReport {
    pub seed: u64,
    pub rho: f64,
    pub service_time: f64,
    pub replications: usize,
    /// Waiting-time CCDF at the requested points, ascending in t.
    pub empirical_ccdf: Vec<CcdfPoint>,
    pub mean_wait_s: Estimate,
}

impl QueueSimReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_ccdf_csv(&self.empirical_ccdf, w)
    }
}

/// FCFS M/D/1 queue by the Lindley recursion W' = max(0, W + T_s − A).
/// Each replication starts empty and drops its warmup share.
pub fn simulate_queue(q: &QueueModel, t_points: &[f64], cfg: &SimConfig) -> Result<QueueSimReport> {
    cfg.validate_arrivals()?;
    if !(q.rho < 1.0) {
        return Err(Error::domain(
            "simulate_queue",
            "rho",
            q.rho,
            "queue must be stable",
        ));
    }
    let t = sorted_points(t_points)?;
    let inter = Exp::new(q.arrival_rate).map_err(|_| {
        Error::domain(
            "simulate_queue",
            "arrival_rate",
            q.arrival_rate,
            "must be positive",
        )
    })?;
    let ts = q.service_time;
    let reps = cfg.exec.map_range(cfg.replications, |j| {
        let mut rng = stream(cfg.seed, Component::QueueArrivals, j);
        let len = cfg.replication_len(j);
        let warm = cfg.warmup(len);
        let mut counts = vec![Sums::default(); t.len()];
        let mut waits = Sums::default();
        let mut w = 0.0f64;
        for i in 0..len {
            if i > 0 {
                w = (w + ts - inter.sample(&mut rng)).max(0.0);
            }
            if i >= warm {
                count_exceedances(w, &t, &mut counts);
                waits.push(w);
            }
        }
        (counts, waits)
    });
    let (counts, waits): (Vec<Vec<Sums>>, Vec<Sums>) = reps.into_iter().unzip();
    Ok(QueueSimReport {
        seed: cfg.seed,
        rho: q.rho,
        service_time: ts,
        replications: cfg.replications,
        empirical_ccdf: ccdf_points(&t, &counts),
        mean_wait_s: Sums::batched(&waits),
    })
}

/// How each frame's uplink time is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UplinkMode {
    /// θs²/(ξ·R̄) for every frame.
    Deterministic,
    /// Block-fading transmission as in [`simulate_uplink`].
    Fading,
}

/// Kolmogorov–Smirnov test of samples against an exponential law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    /// p ≥ 0.01.
    pub passed: bool,
}

/// Asymptotic Kolmogorov survival function with Stephens' correction.
fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let l = (sn + 0.12 + 0.11 / sn) * d;
    if l < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * l * l).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn ks_exponential(mut samples: Vec<f64>, rate: f64) -> KsTest {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let nf = n as f64;
    let d = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = -(-rate * x).exp_m1();
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let p_value = kolmogorov_pvalue(d, n);
    KsTest {
        statistic: d,
        p_value,
        n,
        passed: p_value >= 0.01,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanValues {
    pub uplink_s: Estimate,
    pub wait_s: Estimate,
    pub service_s: f64,
    pub total_s: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub mode: UplinkMode,
    pub replications: usize,
    pub load: f64,
    pub deadline_s: f64,
    pub omega_min: f64,
    /// Set in fading mode.
    pub coherence_time_s: Option<f64>,
    pub blocks_per_frame: Option<f64>,
    /// P(T_ul + T_w + T_s ≤ D).
    pub success_probability: Estimate,
    /// 1 − exact M/D/1 waiting CCDF at D − T_ul − T_s with the deterministic
    /// uplink time; `None` when the load is 1 or more.
    pub analytic_success: Option<f64>,
    /// Waiting-time CCDF at multiples of T_s/4 and at the waiting budget.
    pub empirical_ccdf: Vec<CcdfPoint>,
    pub mean_values: MeanValues,
    /// Server inter-arrival times against Exponential(λπr²).
    pub arrival_test: KsTest,
}

impl SimulationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_ccdf_csv(&self.empirical_ccdf, w)
    }
}

/// End-to-end run of a solver output at the cell edge.
pub fn simulate_end_to_end(
    sol: &DimensioningSolution,
    sc: &Scenario,
    cfg: &SimConfig,
    mode: UplinkMode,
) -> Result<SimulationReport> {
    simulate_decision(&sol.decision(), sc, cfg, mode)
}

/// End-to-end run of any resource choice; the load may exceed one, in
/// which case the queue simply grows over the run.
///
/// Frames are generated as a Poisson stream at λπr², all from the cell
/// edge, reach the server after their uplink time, and are served FCFS
/// in arrival order with deterministic service (c1·s³ + c2)/H.
pub fn simulate_decision(
    x: &DecisionVector,
    sc: &Scenario,
    cfg: &SimConfig,
    mode: UplinkMode,
) -> Result<SimulationReport> {
    cfg.validate_arrivals()?;
    sc.validate()?;
    check_bandwidth(x.bandwidth_hz)?;
    let r = sc.radius_km;
    let lam_a = sc.arrival_rate();
    let ts = crate::detector::service_time(x.resolution_px, x.compute_tflops, &sc.detector)?;
    let det = channel::uplink_time(x.bandwidth_hz, r, x.resolution_px, &sc.frame, &sc.channel)?;
    let kx = x.bandwidth_hz * channel::kappa2(r, &sc.channel, PowerRegime::Effective)?;
    let bits = sc.frame.frame_bits(x.resolution_px);
    let tc = cfg
        .coherence_time_s
        .unwrap_or(det / DEFAULT_BLOCKS_PER_FRAME);
    let budget = sc.deadline_s - det - ts;
    let inter = Exp::new(lam_a).map_err(|_| {
        Error::domain(
            "simulate_decision",
            "arrival_rate",
            lam_a,
            "must be positive",
        )
    })?;

    let mut t = vec![budget.max(0.0)];
    t.extend((0..=20).map(|k| k as f64 * ts / 4.0));
    let t = sorted_points(&t)?;

    struct Rep {
        success: Sums,
        uplink: Sums,
        wait: Sums,
        total: Sums,
        counts: Vec<Sums>,
        gaps: Vec<f64>,
    }

    let reps = cfg.exec.map_range(cfg.replications, |j| {
        let mut arrivals = stream(cfg.seed, Component::Arrivals, j);
        let mut fading = stream(cfg.seed, Component::Fading, j);
        let len = cfg.replication_len(j);
        let warm = cfg.warmup(len);
        let mut gen = 0.0;
        let mut frames: Vec<(f64, f64)> = (0..len)
            .map(|_| {
                gen += inter.sample(&mut arrivals);
                let ul = match mode {
                    UplinkMode::Deterministic => det,
                    UplinkMode::Fading => {
                        fading_frame_time(&mut fading, bits, x.bandwidth_hz, kx, tc)
                    }
                };
                (gen + ul, ul)
            })
            .collect();
        frames.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut rep = Rep {
            success: Sums::default(),
            uplink: Sums::default(),
            wait: Sums::default(),
            total: Sums::default(),
            counts: vec![Sums::default(); t.len()],
            gaps: Vec::with_capacity(len - warm),
        };
        let mut w = 0.0f64;
        for i in 0..len {
            let (arr, ul) = frames[i];
            if i > 0 {
                let gap = arr - frames[i - 1].0;
                w = (w + ts - gap).max(0.0);
                if i > warm {
                    rep.gaps.push(gap);
                }
            }
            if i >= warm {
                let total = ul + w + ts;
                rep.success
                    .push(if total <= sc.deadline_s { 1.0 } else { 0.0 });
                rep.uplink.push(ul);
                rep.wait.push(w);
                rep.total.push(total);
                count_exceedances(w, &t, &mut rep.counts);
            }
        }
        rep
    });

    let pick = |f: fn(&Rep) -> Sums| reps.iter().map(f).collect::<Vec<Sums>>();
    let counts: Vec<Vec<Sums>> = reps.iter().map(|r| r.counts.clone()).collect();
    let gaps: Vec<f64> = reps.iter().flat_map(|r| r.gaps.iter().copied()).collect();

    let load = lam_a * ts;
    let analytic_success = if load < 1.0 {
        let q = QueueModel::from_rates(lam_a, ts)?;
        Some(if budget < 0.0 {
            0.0
        } else {
            1.0 - mdone_wait_ccdf(&q, budget)?
        })
    } else {
        None
    };
    let fading = mode == UplinkMode::Fading;
    Ok(SimulationReport {
        seed: cfg.seed,
        mode,
        replications: cfg.replications,
        load,
        deadline_s: sc.deadline_s,
        omega_min: sc.omega_min,
        coherence_time_s: fading.then_some(tc),
        blocks_per_frame: fading.then_some(det / tc),
        success_probability: Sums::batched(&pick(|r| r.success)),
        analytic_success,
        empirical_ccdf: ccdf_points(&t, &counts),
        mean_values: MeanValues {
            uplink_s: Sums::batched(&pick(|r| r.uplink)),
            wait_s: Sums::batched(&pick(|r| r.wait)),
            service_s: ts,
            total_s: Sums::batched(&pick(|r| r.total)),
        },
        arrival_test: ks_exponential(gaps, lam_a),
    })
}
