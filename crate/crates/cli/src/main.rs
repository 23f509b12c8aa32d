use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use edgedim::config::{load_scenario, scenario_to_config};
use edgedim::dimensioning::{
    compute_kappas, min_bandwidth, min_compute, solve_with, Scenario, SolverOptions,
};
use edgedim::simulator::{simulate_end_to_end, SimConfig, SimulationReport, UplinkMode};
use edgedim::sweep::{run_sweep, write_sweep_csv, SweepAxis, SweepSpec, SweepValues};
use edgedim::verify::{run_verify, VerifyOptions};
use edgedim::{Error, Exec};

/// Joint bandwidth and edge-compute dimensioning for cellular video analytics.
#[derive(Parser)]
#[command(name = "edgedim", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (flat TOML); flags below override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every Monte Carlo stream
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long = "radius-km", global = true)]
    radius_km: Option<f64>,
    /// Traffic density, frames/s/km²
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    beta1: Option<f64>,
    /// Deadline D in seconds
    #[arg(long, global = true)]
    deadline: Option<f64>,
    #[arg(long = "omega-min", global = true)]
    omega_min: Option<f64>,
    #[arg(long = "a-min", global = true)]
    a_min: Option<f64>,
    /// Machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,
    /// Write the effective scenario as a config file
    #[arg(long = "echo-config", global = true)]
    echo_config: Option<PathBuf>,
    /// Run batch work on one thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario and print the solution record
    Solve,
    /// Solve along one scenario axis and write CSV rows
    Sweep(SweepArgs),
    /// Simulate the solved scenario end to end
    Simulate(SimulateArgs),
    /// Check the analytic models against their simulators
    Verify(VerifyArgs),
    /// Minimum bandwidth and compute with the other resource unlimited
    Bounds,
}

#[derive(Args)]
struct SweepArgs {
    /// radius_km, traffic_density (lambda), beta1, deadline, omega_min
    #[arg(long)]
    axis: SweepAxis,
    /// Explicit values, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with = "range")]
    values: Option<Vec<f64>>,
    /// start:stop:count
    #[arg(long, required_unless_present = "values")]
    range: Option<String>,
    #[arg(long, value_enum, default_value_t = Spacing::Geometric)]
    spacing: Spacing,
}

#[derive(Clone, Copy, ValueEnum)]
enum Spacing {
    Linear,
    Geometric,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    /// Frames simulated, over all replications
    #[arg(long, default_value_t = 100_000)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    /// Fading block length in seconds; defaults to T_ul/400
    #[arg(long)]
    coherence_time: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Deterministic,
    Fading,
    Both,
}

#[derive(Args)]
struct VerifyArgs {
    /// Solve with an uncompensated Henk target
    #[arg(long)]
    no_compensation: bool,
}

impl Common {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn scenario(&self) -> Result<Scenario, Error> {
        let mut sc = match &self.config {
            Some(p) => load_scenario(p)?,
            None => Scenario::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut sc.radius_km, self.radius_km);
        set(&mut sc.traffic_density, self.lambda);
        set(&mut sc.beta1, self.beta1);
        set(&mut sc.deadline_s, self.deadline);
        set(&mut sc.omega_min, self.omega_min);
        set(&mut sc.a_min, self.a_min);
        sc.validate()?;
        if let Some(p) = &self.echo_config {
            std::fs::write(p, scenario_to_config(&sc))?;
        }
        Ok(sc)
    }

    fn output(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cmd_solve(c: &Common) -> Result<ExitCode, Error> {
    let sc = c.scenario()?;
    let sol = solve_with(&sc, &SolverOptions::default())?;
    let mut out = c.output()?;
    writeln!(out, "{}", serde_json::to_string_pretty(&sol.record())?)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_range(s: &str, spacing: Spacing) -> Result<SweepValues, Error> {
    let bad = || Error::Config {
        key: "range".into(),
        message: format!("expected start:stop:count, got `{s}`"),
    };
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(bad());
    };
    let (start, stop) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    let count: usize = n.trim().parse().map_err(|_| bad())?;
    Ok(match spacing {
        Spacing::Linear => SweepValues::Linear { start, stop, count },
        Spacing::Geometric => SweepValues::Geometric { start, stop, count },
    })
}

fn cmd_sweep(c: &Common, a: &SweepArgs) -> Result<ExitCode, Error> {
    let values = match (&a.values, &a.range) {
        (Some(v), _) => SweepValues::List(v.clone()),
        (None, Some(r)) => parse_range(r, a.spacing)?,
        (None, None) => unreachable!("clap requires one of --values/--range"),
    };
    let spec = SweepSpec {
        axis: a.axis,
        values,
        fixed: c.scenario()?,
    };
    let rows = run_sweep(&spec, &SolverOptions::default(), c.exec())?;
    let mut out = c.output()?;
    if c.json {
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&json!({ "axis": spec.axis, "rows": rows }))?
        )?;
    } else {
        write_sweep_csv(spec.axis, &rows, out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("ccdf");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn mode_name(m: UplinkMode) -> &'static str {
    match m {
        UplinkMode::Deterministic => "deterministic",
        UplinkMode::Fading => "fading",
    }
}

fn print_report(r: &SimulationReport) {
    let p = r.success_probability;
    println!(
        "mode {}: load {:.4}, frames {}",
        mode_name(r.mode),
        r.load,
        p.n
    );
    println!(
        "  P(total <= D) = {:.4} ± {:.4} (omega_min {})",
        p.value, p.ci_halfwidth, r.omega_min
    );
    if let Some(a) = r.analytic_success {
        println!("  analytic      = {a:.4}");
    }
    let m = &r.mean_values;
    println!(
        "  means: T_ul {:.4e} s, T_w {:.4e} s, T_s {:.4e} s, total {:.4e} s",
        m.uplink_s.value, m.wait_s.value, m.service_s, m.total_s.value
    );
    if let (Some(tc), Some(b)) = (r.coherence_time_s, r.blocks_per_frame) {
        println!("  coherence time {tc:.4e} s ({b:.0} blocks per frame)");
    }
    println!(
        "  server inter-arrivals: KS D = {:.3e}, p = {:.3}",
        r.arrival_test.statistic, r.arrival_test.p_value
    );
}

fn cmd_simulate(c: &Common, a: &SimulateArgs) -> Result<ExitCode, Error> {
    let sc = c.scenario()?;
    let sol = solve_with(&sc, &SolverOptions::default())?;
    let cfg = SimConfig {
        n_arrivals: a.frames,
        replications: a.replications,
        seed: c.seed,
        coherence_time_s: a.coherence_time,
        exec: c.exec(),
        ..Default::default()
    };
    let modes: &[UplinkMode] = match a.mode {
        Mode::Deterministic => &[UplinkMode::Deterministic],
        Mode::Fading => &[UplinkMode::Fading],
        Mode::Both => &[UplinkMode::Deterministic, UplinkMode::Fading],
    };
    let reports = modes
        .iter()
        .map(|&m| simulate_end_to_end(&sol, &sc, &cfg, m))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &c.out {
        for r in &reports {
            let p = if reports.len() > 1 {
                with_suffix(path, mode_name(r.mode))
            } else {
                path.clone()
            };
            r.write_csv(BufWriter::new(File::create(&p)?))?;
        }
    }
    if c.json {
        print_json(&json!({ "solution": sol.record(), "reports": reports }))?;
    } else {
        for r in &reports {
            print_report(r);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(c: &Common, a: &VerifyArgs) -> Result<ExitCode, Error> {
    let sc = c.scenario()?;
    let opts = VerifyOptions {
        seed: c.seed,
        compensation: !a.no_compensation,
        exec: c.exec(),
        ..Default::default()
    };
    let report = run_verify(&sc, &opts)?;
    if c.json {
        print_json(&report)?;
    } else {
        for ch in &report.checks {
            println!(
                "{} {}: {}",
                if ch.passed { "PASS" } else { "FAIL" },
                ch.name,
                ch.detail
            );
        }
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_bounds(c: &Common) -> Result<ExitCode, Error> {
    let sc = c.scenario()?;
    let k = compute_kappas(&sc)?;
    let b = min_bandwidth(&sc)?;
    let h = min_compute(&sc)?;
    let omega2 = k.omega2(&sc.detector);
    if c.json {
        print_json(&json!({
            "b_min": b,
            "h_min": h,
            "h_f_min": h / sc.arrival_rate(),
            "omega1": b.omega1,
            "omega2": omega2,
            "kappas": k,
        }))?;
    } else {
        println!(
            "B|min = {:.6e} Hz (binding kappa2 = {:.6e})",
            b.binding, b.binding_kappa2
        );
        println!(
            "H|min = {:.6e} TFLOPS ({:.6e} per frame/s)",
            h,
            h / sc.arrival_rate()
        );
        println!("omega1 = {:.6e}, omega2 = {:.6e}", b.omega1, omega2);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match &cli.command {
        Command::Solve => cmd_solve(c),
        Command::Sweep(a) => cmd_sweep(c, a),
        Command::Simulate(a) => cmd_simulate(c, a),
        Command::Verify(a) => cmd_verify(c, a),
        Command::Bounds => cmd_bounds(c),
    };
    match result {
        Ok(code) => code,
        // reader went away, e.g. `edgedim solve | head`
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Error::Infeasible(cert)) => {
            eprintln!("infeasible: {cert}");
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({ "infeasible": cert })).unwrap_or_default()
            );
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
