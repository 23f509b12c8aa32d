//! One-parameter sweeps of the dimensioning problem.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::dimensioning::{min_bandwidth, min_compute, solve_with, Scenario, SolverOptions};
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    RadiusKm,
    TrafficDensity,
    Beta1,
    Deadline,
    OmegaMin,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::RadiusKm => "radius_km",
            SweepAxis::TrafficDensity => "traffic_density",
            SweepAxis::Beta1 => "beta1",
            SweepAxis::Deadline => "deadline_s",
            SweepAxis::OmegaMin => "omega_min",
        }
    }

    pub fn apply(self, sc: &mut Scenario, v: f64) {
        match self {
            SweepAxis::RadiusKm => sc.radius_km = v,
            SweepAxis::TrafficDensity => sc.traffic_density = v,
            SweepAxis::Beta1 => sc.beta1 = v,
            SweepAxis::Deadline => sc.deadline_s = v,
            SweepAxis::OmegaMin => sc.omega_min = v,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "radius_km" | "radius" | "r" => SweepAxis::RadiusKm,
            "traffic_density" | "lambda" => SweepAxis::TrafficDensity,
            "beta1" => SweepAxis::Beta1,
            "deadline" | "deadline_s" => SweepAxis::Deadline,
            "omega_min" => SweepAxis::OmegaMin,
            _ => {
                return Err(Error::Config {
                    key: "axis".into(),
                    message: format!("unknown sweep axis `{s}` (radius_km, traffic_density, beta1, deadline, omega_min)"),
                })
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepValues {
    List(Vec<f64>),
    Linear { start: f64, stop: f64, count: usize },
    Geometric { start: f64, stop: f64, count: usize },
}

impl SweepValues {
    pub fn expand(&self) -> Vec<f64> {
        let ramp = |count: usize, f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            if count == 1 {
                return vec![f(0.0)];
            }
            (0..count)
                .map(|i| f(i as f64 / (count - 1) as f64))
                .collect()
        };
        match *self {
            SweepValues::List(ref v) => v.clone(),
            SweepValues::Linear { start, stop, count } => {
                ramp(count, &|u| start + (stop - start) * u)
            }
            SweepValues::Geometric { start, stop, count } => {
                ramp(count, &|u| start * (stop / start).powf(u))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: SweepValues,
    /// Scenario every point starts from.
    pub fixed: Scenario,
}

impl SweepSpec {
    /// Expanded values, checked to be finite, non-empty and strictly monotone.
    pub fn points(&self) -> Result<Vec<f64>> {
        let bad = |m: String| {
            Err(Error::Config {
                key: "values".into(),
                message: m,
            })
        };
        if let SweepValues::Geometric { start, stop, .. } = self.values {
            if !(start > 0.0 && stop > 0.0) {
                return bad("geometric sweep needs positive end points".into());
            }
        }
        let v = self.values.expand();
        if v.is_empty() {
            return bad("no sweep values".into());
        }
        if v.iter().any(|x| !x.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        let up = v.windows(2).all(|w| w[1] > w[0]);
        let down = v.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return bad("sweep values must be strictly monotone".into());
        }
        Ok(v)
    }
}

/// One sweep point; numeric fields are `None` when not available.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub b_hz: Option<f64>,
    pub h_tflops: Option<f64>,
    pub h_f: Option<f64>,
    pub s_px: Option<f64>,
    pub load: Option<f64>,
    pub objective: Option<f64>,
    pub b_min: Option<f64>,
    pub h_min: Option<f64>,
    pub feasible_original: Option<bool>,
    /// Empty when solved; the certificate or error text otherwise.
    pub reason: String,
}

fn sweep_point(axis: SweepAxis, base: &Scenario, v: f64, opts: &SolverOptions) -> SweepRow {
    let mut sc = base.clone();
    axis.apply(&mut sc, v);
    let b_min = min_bandwidth(&sc).ok().map(|m| m.binding);
    let h_min = min_compute(&sc).ok();
    let mut row = SweepRow {
        value: v,
        b_hz: None,
        h_tflops: None,
        h_f: None,
        s_px: None,
        load: None,
        objective: None,
        b_min,
        h_min,
        feasible_original: None,
        reason: String::new(),
    };
    match solve_with(&sc, opts) {
        Ok(s) => {
            row.b_hz = Some(s.bandwidth_hz);
            row.h_tflops = Some(s.compute_tflops);
            row.h_f = Some(s.compute_per_frame);
            row.s_px = Some(s.resolution_px);
            row.load = Some(s.load);
            row.objective = Some(s.objective);
            row.feasible_original = Some(s.feasible_for_original);
        }
        Err(Error::Infeasible(c)) => row.reason = c.to_string(),
        Err(e) => row.reason = format!("error: {e}"),
    }
    row
}

/// Solves every point; rows come back in ascending axis order.
pub fn run_sweep(spec: &SweepSpec, opts: &SolverOptions, exec: Exec) -> Result<Vec<SweepRow>> {
    let mut values = spec.points()?;
    values.sort_by(f64::total_cmp);
    Ok(exec.map(&values, |&v| sweep_point(spec.axis, &spec.fixed, v, opts)))
}

/// Writes rows with the axis name as the first column header.
pub fn write_sweep_csv<W: Write>(axis: SweepAxis, rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        axis.name(),
        "b_hz",
        "h_tflops",
        "h_f",
        "s_px",
        "load",
        "objective",
        "b_min",
        "h_min",
        "feasible_original",
        "reason",
    ])?;
    let num = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    for r in rows {
        out.write_record([
            format!("{:?}", r.value),
            num(r.b_hz),
            num(r.h_tflops),
            num(r.h_f),
            num(r.s_px),
            num(r.load),
            num(r.objective),
            num(r.b_min),
            num(r.h_min),
            r.feasible_original
                .map(|b| b.to_string())
                .unwrap_or_default(),
            r.reason.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
