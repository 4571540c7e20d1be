//! Continuum side: correlated Brownian paths, the Euler scheme for the flow
//! `dZ = 1{Z>0} dY − 1{Z≤0} dX`, local times, the ordering function φ, and the densities
//! `g` and `α_ε`.

use std::ops::ControlFlow;
use std::time::Instant;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{par_map, stream};
use crate::walk::sample_uniform_tandem_with;

/// Box truncation radius for the quadratures.
pub const TRUNCATION: f64 = 12.0;

const GRID_TOL: f64 = 1e-9;

/// Planar path sampled on a uniform time grid starting at time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath2D {
    pub dt: f64,
    pub values: Vec<(f64, f64)>,
}

impl SampledPath2D {
    pub fn new(dt: f64, values: Vec<(f64, f64)>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::BadParameter("dt must be positive".into()));
        }
        if values.len() < 2 {
            return Err(Error::BadParameter("a path needs at least two grid points".into()));
        }
        if values.iter().any(|v| !v.0.is_finite() || !v.1.is_finite()) {
            return Err(Error::BadParameter("path values must be finite".into()));
        }
        Ok(Self { dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Componentwise infimum over the grid.
    pub fn inf(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::INFINITY), |m, v| (m.0.min(v.0), m.1.min(v.1)))
    }

    pub fn end(&self) -> (f64, f64) {
        *self.values.last().unwrap()
    }

    /// Index of time `u`, which must lie on the grid.
    pub fn grid_index(&self, u: f64) -> Result<usize> {
        let k = u / self.dt;
        let r = k.round();
        if !(r >= 0.0) || (k - r).abs() > GRID_TOL * k.abs().max(1.0) || r as usize >= self.values.len() {
            return Err(Error::OffGridStart);
        }
        Ok(r as usize)
    }
}

/// Brownian motion with `Var = t` per coordinate and correlation `rho`, on `[0, horizon]`.
pub fn sample_correlated_bm<R: RngCore + ?Sized>(rho: f64, dt: f64, horizon: f64, rng: &mut R) -> Result<SampledPath2D> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::BadParameter(format!("correlation {rho} outside [-1, 1]")));
    }
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::BadParameter("dt and horizon must be positive".into()));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let sd = dt.sqrt();
    let perp = (1.0 - rho * rho).max(0.0).sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let (mut x, mut y) = (0.0, 0.0);
    values.push((x, y));
    for _ in 0..steps {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        x += sd * a;
        y += sd * (rho * a + perp * b);
        values.push((x, y));
    }
    SampledPath2D::new(dt, values)
}

/// Diffusive rescaling `W(⌊nt⌋)/√(2n)` of an integer walk, time grid `1/n`.
pub fn rescale_walk(values: &[(i64, i64)], n: usize) -> SampledPath2D {
    let c = 1.0 / (2.0 * n as f64).sqrt();
    let v = values.iter().map(|&(x, y)| (x as f64 * c, y as f64 * c)).collect();
    SampledPath2D::new(1.0 / n as f64, v).expect("rescaled walk is a valid path")
}

/// Rescaled uniform tandem walk of size about `n`, padded with its origin end points.
/// Returns `None` if `deadline` passes before the sampler accepts.
pub fn excursion_proxy<R: RngCore + ?Sized>(n: usize, window: f64, rng: &mut R, deadline: Option<Instant>) -> Option<SampledPath2D> {
    let s = sample_uniform_tandem_with(n, window, rng, |_| match deadline {
        Some(d) if Instant::now() > d => ControlFlow::Break(()),
        _ => ControlFlow::Continue(()),
    })?;
    let mut v = Vec::with_capacity(s.size + 2);
    v.push((0, 0));
    v.extend_from_slice(s.walk.values());
    v.push((0, 0));
    Some(rescale_walk(&v, s.size + 1))
}

/// Euler solution of the flow started at zero at grid index `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub start: usize,
    pub dt: f64,
    /// `values[k]` is the value at grid index `start + k`.
    pub values: Vec<f64>,
}

impl FlowSolution {
    pub fn at(&self, index: usize) -> Option<f64> {
        index.checked_sub(self.start).and_then(|k| self.values.get(k)).copied()
    }
}

/// Flow started at time `u`.
pub fn solve_flow(w: &SampledPath2D, u: f64) -> Result<FlowSolution> {
    Ok(solve_flow_at(w, w.grid_index(u)?))
}

/// Flow started at grid index `start`.
pub fn solve_flow_at(w: &SampledPath2D, start: usize) -> FlowSolution {
    let mut values = Vec::with_capacity(w.values.len().saturating_sub(start));
    let mut z = 0.0;
    values.push(z);
    for win in w.values[start..].windows(2) {
        let (dx, dy) = (win[1].0 - win[0].0, win[1].1 - win[0].1);
        z = if z > 0.0 { z + dy } else { z - dx };
        values.push(z);
    }
    FlowSolution { start, dt: w.dt, values }
}

/// Occupation-time estimate `(1/2ε)·Leb{s ≤ t : |Z(s)| < ε}` along the grid.
pub fn local_time_estimate(z: &FlowSolution, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::BadParameter("bandwidth must be positive".into()));
    }
    let c = z.dt / (2.0 * eps);
    let mut acc = 0.0;
    Ok(z
        .values
        .iter()
        .map(|&v| {
            if v.abs() < eps {
                acc += c;
            }
            acc
        })
        .collect())
}

/// Default bandwidth `√dt`.
pub fn default_bandwidth(dt: f64) -> f64 {
    dt.sqrt()
}

/// Fraction of `m_grid` equispaced times in `[0,1)` that precede `u` in the flow order,
/// `u` itself included. Times are compared at grid resolution.
pub fn phi_estimate(w: &SampledPath2D, u: f64, m_grid: usize) -> Result<f64> {
    if m_grid == 0 {
        return Err(Error::BadParameter("m_grid must be positive".into()));
    }
    let ku = w.grid_index(u)?;
    let last = w.values.len() - 1;
    let zu = solve_flow_at(w, ku);
    let mut below = 0usize;
    for r in 0..m_grid {
        let t = r as f64 / m_grid as f64;
        let kt = ((t / w.dt).round() as usize).min(last);
        let le = if kt == ku {
            true
        } else if kt < ku {
            solve_flow_at(w, kt).at(ku).unwrap() < 0.0
        } else {
            zu.at(kt).unwrap() >= 0.0
        };
        below += le as usize;
    }
    Ok(below as f64 / m_grid as f64)
}

/// Endpoint density in the quadrant.
pub fn g_density(x1: f64, x2: f64) -> f64 {
    x1 * x2 * (x1 + x2) * (-(x1 * x1 + x2 * x2 + x1 * x2) / 3.0).exp() / (3.0 * std::f64::consts::PI).sqrt()
}

/// Numerical integral with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Quadrature {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Quadrature { value: k * h, error: ((k - g) * h).abs() }
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature on `[a, b]`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    let mut parts = vec![(a, b, gk15(&mut f, a, b))];
    for _ in 0..2000 {
        let err: f64 = parts.iter().map(|p| p.2.error).sum();
        if err <= tol {
            break;
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        parts.push((lo, mid, left));
        parts.push((mid, hi, right));
    }
    parts.iter().fold(Quadrature { value: 0.0, error: 0.0 }, |acc, p| Quadrature {
        value: acc.value + p.2.value,
        error: acc.error + p.2.error,
    })
}

/// Iterated adaptive quadrature on a rectangle; the inner error is accumulated into the outer.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, x: (f64, f64), y: (f64, f64), tol: f64) -> Quadrature {
    let mut inner_err = 0.0f64;
    let width = (x.1 - x.0).abs().max(1e-300);
    let outer = integrate_1d(
        |s| {
            let q = integrate_1d(|t| f(s, t), y.0, y.1, tol / (2.0 * width));
            inner_err = inner_err.max(q.error);
            q.value
        },
        x.0,
        x.1,
        tol / 2.0,
    );
    Quadrature { value: outer.value, error: outer.error + inner_err * width }
}

/// Upper bound for `∫ g` over the part of the quadrant outside `[0, r]^2`.
///
/// On the quadrant `g(x) ≤ |x|^3 e^{−|x|^2/3} / √(6π)`, and the complement of the box lies
/// outside the disc of radius `r`.
pub fn g_tail_bound(r: f64) -> f64 {
    let q = integrate_1d(|s| s.powi(4) * (-s * s / 3.0).exp(), r, r + 40.0, 1e-300_f64.max(1e-30));
    std::f64::consts::FRAC_PI_2 * q.value / (6.0 * std::f64::consts::PI).sqrt()
}

/// Total mass of `g` on the quadrant, truncated to `[0, TRUNCATION]^2`.
pub fn g_total_mass() -> Quadrature {
    integrate_2d(g_density, (0.0, TRUNCATION), (0.0, TRUNCATION), 1e-12)
}

/// Value of `α_ε` with quadrature error and truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaValue {
    pub value: f64,
    pub error: f64,
    pub tail_bound: f64,
}

/// `α_ε(a, b) = √3/(8ε^5) ∫_{x + a ∈ R²₊} g(x) g(x + b) dx`, with `g` restricted to the quadrant.
pub fn alpha_eps(eps: f64, a: (f64, f64), b: (f64, f64)) -> Result<AlphaValue> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::BadEpsilon);
    }
    let pre = 3f64.sqrt() / (8.0 * eps.powi(5));
    let c1 = 0f64.max(-a.0).max(-b.0);
    let c2 = 0f64.max(-a.1).max(-b.1);
    let g_max = 0.6;
    let tail_bound = pre * g_max * g_tail_bound(TRUNCATION);
    if c1 >= TRUNCATION || c2 >= TRUNCATION {
        return Ok(AlphaValue { value: 0.0, error: 0.0, tail_bound });
    }
    let q = integrate_2d(
        |x1, x2| g_density(x1, x2) * g_density(x1 + b.0, x2 + b.1),
        (c1, TRUNCATION),
        (c2, TRUNCATION),
        1e-10,
    );
    Ok(AlphaValue { value: pre * q.value, error: pre * q.error, tail_bound })
}

/// Result of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample test of `samples` against the continuous distribution function `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    KsResult { statistic: d, p_value: ks_p(d, n), n: s.len() }
}

/// Two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    KsResult { statistic: d, p_value: ks_p(d, n * m / (n + m)), n: x.len() + y.len() }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { mean, std_err: (var / n).sqrt(), n: xs.len() }
    }
}

/// Values `Z^(0)(horizon)` over independent driving paths; path `p` uses stream `p` of `seed`.
pub fn flow_endpoints(paths: usize, dt: f64, rho: f64, horizon: f64, seed: u64) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::BadParameter(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(par_map(paths, |p| {
        let mut rng = stream(seed, p as u64);
        let w = sample_correlated_bm(rho, dt, horizon, &mut rng).expect("parameters checked");
        *solve_flow_at(&w, 0).values.last().unwrap()
    }))
}

/// Kolmogorov–Smirnov test of `Z^(0)(1)` against the standard normal law.
pub fn sde_ks(paths: usize, dt: f64, rho: f64, seed: u64) -> Result<KsResult> {
    let ends = flow_endpoints(paths, dt, rho, 1.0, seed)?;
    Ok(ks_one_sample(&ends, normal_cdf))
}

/// Monte Carlo mean of `α_ε(inf W, W(1−2ε))` over Brownian paths on `[0, 1−2ε]`.
pub fn alpha_expectation(eps: f64, paths: usize, dt: f64, rho: f64, seed: u64) -> Result<MeanEstimate> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::BadEpsilon);
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::BadParameter(format!("correlation {rho} outside [-1, 1]")));
    }
    let vals = par_map(paths, |p| {
        let mut rng = stream(seed, p as u64);
        let w = sample_correlated_bm(rho, dt, 1.0 - 2.0 * eps, &mut rng).expect("parameters checked");
        alpha_eps(eps, w.inf(), w.end()).expect("eps checked").value
    });
    Ok(MeanEstimate::from_samples(&vals))
}
