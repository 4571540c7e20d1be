//! `stats` and `limit`: Monte Carlo estimates in tabular or JSON form.

use std::fmt::Write as _;
use std::time::Instant;

use baxlab::coal::{cocc_limit_estimate, sigma_linear, trajectory_law_check};
use baxlab::continuum::{
    alpha_expectation, default_bandwidth, ks_one_sample, local_time_estimate, normal_cdf, phi_estimate,
    sample_correlated_bm, sde_ks, solve_flow_at, MeanEstimate,
};
use baxlab::perm::consecutive_occurrence_density;
use baxlab::permuton::{baxter_permuton_estimate, IntensityEstimate};
use baxlab::rng::{par_map, stream};
use baxlab::walk::sample_uniform_tandem_with;
use baxlab::Permutation;
use clap::{Args, ValueEnum};
use rand::Rng as _;
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifact::PermutonJson;
use crate::{deadline, to_json, CliError, CliResult, Envelope, OutputArg, TableFormat};

pub const STATS_SCHEMA: &str = "baxlab.stats/1";
pub const LIMIT_SCHEMA: &str = "baxlab.limit/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum StatKind {
    /// Consecutive-occurrence density of a pattern in sampled permutations and in the limit.
    Cocc,
    /// Increment law of coalescent trajectories.
    TrajectoryLaw,
    /// Mean coarse-grained permuton of sampled permutations.
    PermutonIntensity,
    /// Kolmogorov-Smirnov test of the flow endpoint against the standard normal law.
    SdeKs,
    /// Monte Carlo mean of the alpha functional.
    AlphaExpectation,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[arg(value_enum)]
    pub kind: StatKind,
    /// Pattern for `cocc`, as values separated by spaces or commas.
    #[arg(long, default_value = "1 2")]
    pub pattern: String,
    /// Sizes sampled by `cocc`.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub sizes: Vec<usize>,
    /// Samples per size (`cocc`, `permuton_intensity`) or trajectories (`trajectory_law`).
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Window samples for the limiting `cocc` density.
    #[arg(long, default_value_t = 100_000)]
    pub limit_samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub window: f64,
    /// Trajectory length for `trajectory_law`.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Permutation size for `permuton_intensity`.
    #[arg(long, default_value_t = 200)]
    pub size: usize,
    /// Grid resolution for `permuton_intensity`.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Give up after this many seconds; `cocc` reports the samples it finished.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArg,
}

/// Rows of named columns; `null` cells print empty in CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub kind: StatKind,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permuton: Option<PermutonJson>,
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv<C: Serialize>(schema: &str, seed: u64, config: &C, t: &Table) -> CliResult<String> {
    let config = serde_json::to_string(config).map_err(|e| CliError::Input(e.to_string()))?;
    let mut s = String::new();
    let _ = writeln!(s, "# schema: {schema}");
    let _ = writeln!(s, "# seed: {seed}");
    let _ = writeln!(s, "# config: {config}");
    let _ = writeln!(s, "{}", t.columns.join(","));
    for r in &t.rows {
        let _ = writeln!(s, "{}", r.iter().map(cell).collect::<Vec<_>>().join(","));
    }
    Ok(s)
}

pub fn parse_pattern(s: &str) -> CliResult<Permutation> {
    let values = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| CliError::Usage(format!("bad pattern entry {t:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    Permutation::new(values).map_err(|e| CliError::Usage(format!("pattern: {e}")))
}

fn positive(name: &str, x: f64) -> CliResult<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive and finite")))
    }
}

fn check_rho(rho: f64) -> CliResult<()> {
    if (-1.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("rho {rho} outside [-1, 1]")))
    }
}

fn mean_se(xs: &[f64]) -> (Value, Value) {
    match xs.len() {
        0 => (Value::Null, Value::Null),
        1 => (num(xs[0]), Value::Null),
        _ => {
            let m = MeanEstimate::from_samples(xs);
            (num(m.mean), num(m.std_err))
        }
    }
}

fn cocc(a: &StatsArgs, stop: Option<Instant>) -> CliResult<Table> {
    let pi = parse_pattern(&a.pattern)?;
    if a.sizes.is_empty() || a.sizes.iter().any(|&n| n < pi.len()) {
        return Err(CliError::Usage("every size must be at least the pattern length".into()));
    }
    if a.limit_samples == 0 {
        return Err(CliError::Usage("limit-samples must be positive".into()));
    }
    let lim = cocc_limit_estimate(&pi, a.limit_samples, a.seed);
    let p = lim.as_f64();
    let p_se = (p * (1.0 - p) / a.limit_samples as f64).sqrt();
    let mut rows = Vec::new();
    for (j, &n) in a.sizes.iter().enumerate() {
        let dens = par_map(a.samples, |i| {
            let mut rng = stream(a.seed, ((j as u64 + 1) << 32) | i as u64);
            let s = sample_uniform_tandem_with(n, a.window, &mut rng, |_| match stop {
                Some(d) if Instant::now() > d => std::ops::ControlFlow::Break(()),
                _ => std::ops::ControlFlow::Continue(()),
            })?;
            let sigma = sigma_linear(&s.walk.to_lattice());
            Some(consecutive_occurrence_density(&pi, &sigma).expect("size checked").as_f64())
        });
        let done: Vec<f64> = dens.into_iter().flatten().collect();
        let (mean, se) = mean_se(&done);
        let z = match (mean.as_f64(), se.as_f64()) {
            (Some(m), Some(s)) if s > 0.0 || p_se > 0.0 => num((m - p) / (s * s + p_se * p_se).sqrt()),
            _ => Value::Null,
        };
        rows.push(vec![json!("sampled"), json!(n), json!(done.len()), mean, se, z, json!(done.len() == a.samples)]);
    }
    rows.push(vec![json!("limit"), Value::Null, json!(a.limit_samples), num(p), num(p_se), Value::Null, json!(true)]);
    Ok(Table {
        kind: a.kind,
        columns: vec!["source", "size", "samples", "estimate", "std_err", "z_vs_limit", "complete"],
        rows,
        permuton: None,
    })
}

fn trajectory_law(a: &StatsArgs) -> CliResult<Table> {
    if a.k == 0 || a.samples < 2 {
        return Err(CliError::Usage("k must be positive and samples at least 2".into()));
    }
    let r = trajectory_law_check(a.k, a.samples, &mut stream(a.seed, 0));
    let rows = vec![
        vec![json!("mass_minus_one"), num(r.mass_minus_one)],
        vec![json!("mass_zero"), num(r.mass_zero)],
        vec![json!("marginal_chi2"), num(r.marginal_chi2)],
        vec![json!("marginal_df"), json!(r.marginal_df)],
        vec![json!("marginal_p"), num(r.marginal_p)],
        vec![json!("joint_chi2"), num(r.joint_chi2)],
        vec![json!("joint_df"), json!(r.joint_df)],
        vec![json!("joint_p"), num(r.joint_p)],
        vec![json!("passed_at_0.01"), json!(r.passed(0.01))],
    ];
    Ok(Table { kind: a.kind, columns: vec!["statistic", "value"], rows, permuton: None })
}

fn permuton_intensity(a: &StatsArgs, stop: Option<Instant>) -> CliResult<Table> {
    if a.size == 0 || a.grid == 0 || a.samples == 0 {
        return Err(CliError::Usage("size, grid and samples must be positive".into()));
    }
    let parts = par_map(a.samples, |i| {
        baxter_permuton_estimate(a.size, 1, a.grid, a.window, &mut stream(a.seed, i as u64), stop).map(|p| p.0)
    });
    let mut est = IntensityEstimate::new(a.grid);
    for p in parts {
        let p = p.ok_or_else(|| CliError::Timeout(format!("fewer than {} samples of size {}", a.samples, a.size)))?;
        est.merge(&p);
    }
    let mean = est.mean();
    let se = est.std_err();
    let k = a.grid;
    let rows = (0..k)
        .flat_map(|x| (0..k).map(move |y| (x, y)))
        .map(|(x, y)| vec![json!(x), json!(y), num(mean.mass(x, y)), num(se[x * k + y])])
        .collect();
    Ok(Table {
        kind: a.kind,
        columns: vec!["x", "y", "mean", "std_err"],
        rows,
        permuton: Some(PermutonJson::from_grid(&mean)),
    })
}

fn continuum_checks(a: &StatsArgs) -> CliResult<()> {
    positive("dt", a.dt)?;
    check_rho(a.rho)?;
    if a.paths < 2 {
        return Err(CliError::Usage("paths must be at least 2".into()));
    }
    Ok(())
}

pub fn stats_table(a: &StatsArgs) -> CliResult<Table> {
    if !(a.window.is_finite() && a.window >= 0.0) {
        return Err(CliError::Usage("window must be finite and non-negative".into()));
    }
    let stop = deadline(a.timeout)?;
    match a.kind {
        StatKind::Cocc => cocc(a, stop),
        StatKind::TrajectoryLaw => trajectory_law(a),
        StatKind::PermutonIntensity => permuton_intensity(a, stop),
        StatKind::SdeKs => {
            continuum_checks(a)?;
            let r = sde_ks(a.paths, a.dt, a.rho, a.seed)?;
            Ok(Table {
                kind: a.kind,
                columns: vec!["statistic", "p_value", "n"],
                rows: vec![vec![num(r.statistic), num(r.p_value), json!(r.n)]],
                permuton: None,
            })
        }
        StatKind::AlphaExpectation => {
            continuum_checks(a)?;
            if !(a.eps > 0.0 && a.eps < 0.5) {
                return Err(CliError::Usage("eps must lie in (0, 1/2)".into()));
            }
            let m = alpha_expectation(a.eps, a.paths, a.dt, a.rho, a.seed)?;
            Ok(Table {
                kind: a.kind,
                columns: vec!["mean", "std_err", "n"],
                rows: vec![vec![num(m.mean), num(m.std_err), json!(m.n)]],
                permuton: None,
            })
        }
    }
}

pub fn run_stats(a: &StatsArgs) -> CliResult<String> {
    let t = stats_table(a)?;
    match a.format {
        TableFormat::Csv => csv(STATS_SCHEMA, a.seed, a, &t),
        TableFormat::Json => to_json(&Envelope { schema: STATS_SCHEMA, seed: a.seed, config: a, body: t }),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LimitArgs {
    /// Simulate the flow driven by correlated Brownian motion (the only mode).
    #[arg(long)]
    pub sde: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Also estimate the flow order of a uniform time on this many grid times (horizon 1 only).
    #[arg(long)]
    pub phi_grid: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ks {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitBody {
    pub mode: &'static str,
    pub paths: usize,
    /// `Z(horizon)` of the flow started at 0: sample moments and a test against `N(0, horizon)`.
    pub endpoint_mean: f64,
    pub endpoint_variance: f64,
    pub endpoint_ks: Ks,
    /// Occupation-time estimate of the local time at 0 up to the horizon, with its Brownian value.
    pub local_time_mean: f64,
    pub local_time_std_err: f64,
    pub local_time_expected: f64,
    pub bandwidth: f64,
    /// Flow order of a uniform time, tested against the uniform law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_ks: Option<Ks>,
}

pub fn limit_body(a: &LimitArgs) -> CliResult<LimitBody> {
    if !a.sde {
        return Err(CliError::Usage("limit needs --sde".into()));
    }
    positive("dt", a.dt)?;
    positive("horizon", a.horizon)?;
    check_rho(a.rho)?;
    if a.dt > a.horizon {
        return Err(CliError::Usage("dt must not exceed the horizon".into()));
    }
    if a.paths < 2 {
        return Err(CliError::Usage("paths must be at least 2".into()));
    }
    if let Some(m) = a.phi_grid {
        if m == 0 || (a.horizon - 1.0).abs() > 1e-12 {
            return Err(CliError::Usage("phi-grid needs a positive grid and horizon 1".into()));
        }
    }
    let bw = default_bandwidth(a.dt);
    let per_path = par_map(a.paths, |p| -> baxlab::Result<(f64, f64, Option<f64>)> {
        let mut rng = stream(a.seed, p as u64);
        let w = sample_correlated_bm(a.rho, a.dt, a.horizon, &mut rng)?;
        let z = solve_flow_at(&w, 0);
        let end = *z.values.last().unwrap();
        let lt = *local_time_estimate(&z, bw)?.last().unwrap();
        let phi = match a.phi_grid {
            Some(m) => {
                let steps = w.len() - 1;
                let u = rng.gen_range(0..=steps) as f64 * w.dt;
                Some(phi_estimate(&w, u.min(w.horizon()), m)?)
            }
            None => None,
        };
        Ok((end, lt, phi))
    });
    let per_path = per_path.into_iter().collect::<baxlab::Result<Vec<_>>>()?;
    let ends: Vec<f64> = per_path.iter().map(|r| r.0).collect();
    let lts: Vec<f64> = per_path.iter().map(|r| r.1).collect();
    let e = MeanEstimate::from_samples(&ends);
    let var = ends.iter().map(|x| (x - e.mean).powi(2)).sum::<f64>() / (ends.len() - 1) as f64;
    let sd = a.horizon.sqrt();
    let ks = ks_one_sample(&ends, |x| normal_cdf(x / sd));
    let lt = MeanEstimate::from_samples(&lts);
    let phi_ks = a.phi_grid.map(|_| {
        let phis: Vec<f64> = per_path.iter().filter_map(|r| r.2).collect();
        let r = ks_one_sample(&phis, |x| x.clamp(0.0, 1.0));
        Ks { statistic: r.statistic, p_value: r.p_value, n: r.n }
    });
    Ok(LimitBody {
        mode: "sde",
        paths: a.paths,
        endpoint_mean: e.mean,
        endpoint_variance: var,
        endpoint_ks: Ks { statistic: ks.statistic, p_value: ks.p_value, n: ks.n },
        local_time_mean: lt.mean,
        local_time_std_err: lt.std_err,
        local_time_expected: (2.0 * a.horizon / std::f64::consts::PI).sqrt(),
        bandwidth: bw,
        phi_ks,
    })
}

pub fn run_limit(a: &LimitArgs) -> CliResult<String> {
    let body = limit_body(a)?;
    to_json(&Envelope { schema: LIMIT_SCHEMA, seed: a.seed, config: a, body })
}
