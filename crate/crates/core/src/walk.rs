//! Lattice walks with steps in `A = {(1,-1)} ∪ {(-i,j) : i,j >= 0}`, the step law ν,
//! the quadrant rejection sampler and enumeration of tandem walks.

use std::ops::ControlFlow;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::geometric_half;

/// Largest size accepted by [`enumerate_tandem`].
pub const ENUM_LIMIT: usize = 7;

/// A step of the walk. Valid steps are `(1,-1)` and `(-i,j)` with `i,j >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub dx: i64,
    pub dy: i64,
}

impl Step {
    pub const UP: Step = Step { dx: 1, dy: -1 };

    pub fn new(dx: i64, dy: i64) -> Self {
        Self { dx, dy }
    }

    /// The face step `(-i, j)`.
    pub fn face(i: i64, j: i64) -> Self {
        Self { dx: -i, dy: j }
    }

    pub fn is_valid(&self) -> bool {
        (self.dx == 1 && self.dy == -1) || (self.dx <= 0 && self.dy >= 0)
    }

    pub fn is_up(&self) -> bool {
        self.dx == 1 && self.dy == -1
    }

    /// Exact mass under ν.
    pub fn nu_mass(&self) -> f64 {
        if self.is_up() {
            0.5
        } else if self.is_valid() {
            (2f64).powi(-(-self.dx + self.dy + 3) as i32)
        } else {
            0.0
        }
    }
}

/// A walk with steps in `A` over the integer time interval `[start_time, start_time + steps]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeWalk {
    pub start_time: i64,
    pub start: (i64, i64),
    pub steps: Vec<Step>,
}

impl LatticeWalk {
    pub fn from_steps(steps: Vec<Step>) -> Result<Self> {
        Self::with_origin(1, (0, 0), steps)
    }

    pub fn with_origin(start_time: i64, start: (i64, i64), steps: Vec<Step>) -> Result<Self> {
        for (k, s) in steps.iter().enumerate() {
            if !s.is_valid() {
                return Err(Error::BadIncrement { index: k + 1, dx: s.dx, dy: s.dy });
            }
        }
        Ok(Self { start_time, start, steps })
    }

    /// Walk through the given points; increments must lie in `A`.
    pub fn from_values(start_time: i64, values: &[(i64, i64)]) -> Result<Self> {
        let first = *values.first().ok_or(Error::EmptyWalk)?;
        let steps = values.windows(2).map(|w| Step::new(w[1].0 - w[0].0, w[1].1 - w[0].1)).collect();
        Self::with_origin(start_time, first, steps)
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end_time(&self) -> i64 {
        self.start_time + self.steps.len() as i64
    }

    pub fn values(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.start;
        out.push(cur);
        for s in &self.steps {
            cur = (cur.0 + s.dx, cur.1 + s.dy);
            out.push(cur);
        }
        out
    }

    /// Restriction to the time interval `[lo, hi]`, keeping absolute positions.
    pub fn restrict(&self, lo: i64, hi: i64) -> Result<Self> {
        if lo > hi || lo < self.start_time || hi > self.end_time() {
            return Err(Error::BadInterval { lo, hi });
        }
        let vals = self.values();
        let a = (lo - self.start_time) as usize;
        let b = (hi - self.start_time) as usize;
        Self::from_values(lo, &vals[a..=b])
    }
}

/// A walk in the quadrant starting on the y-axis and ending on the x-axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TandemWalk {
    values: Vec<(i64, i64)>,
}

impl TandemWalk {
    pub fn values(&self) -> &[(i64, i64)] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps(&self) -> Vec<Step> {
        self.values.windows(2).map(|w| Step::new(w[1].0 - w[0].0, w[1].1 - w[0].1)).collect()
    }

    pub fn to_lattice(&self) -> LatticeWalk {
        LatticeWalk { start_time: 1, start: self.values[0], steps: self.steps() }
    }

    pub fn xs(&self) -> Vec<i64> {
        self.values.iter().map(|v| v.0).collect()
    }

    pub fn ys(&self) -> Vec<i64> {
        self.values.iter().map(|v| v.1).collect()
    }
}

/// Checks the tandem-walk invariants and reports the first violation.
pub fn validate_tandem(values: Vec<(i64, i64)>) -> Result<TandemWalk> {
    if values.is_empty() {
        return Err(Error::EmptyWalk);
    }
    for (k, w) in values.windows(2).enumerate() {
        let s = Step::new(w[1].0 - w[0].0, w[1].1 - w[0].1);
        if !s.is_valid() {
            return Err(Error::BadIncrement { index: k + 2, dx: s.dx, dy: s.dy });
        }
    }
    if let Some(k) = values.iter().position(|v| v.0 < 0 || v.1 < 0) {
        return Err(Error::LeftQuadrant { index: k + 1 });
    }
    if values[0].0 != 0 || values[values.len() - 1].1 != 0 {
        return Err(Error::BadEndpoints);
    }
    Ok(TandemWalk { values })
}

/// Exact draw from ν.
pub fn sample_step<R: RngCore + ?Sized>(rng: &mut R) -> Step {
    if rng.next_u32() & 1 == 0 {
        Step::UP
    } else {
        let i = geometric_half(rng) as i64;
        let j = geometric_half(rng) as i64;
        Step::face(i, j)
    }
}

/// Mean, covariance and the truncation bound of the series used to compute them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub tail_bound: f64,
}

impl Moments {
    pub fn correlation(&self) -> f64 {
        self.cov[0][1] / (self.cov[0][0] * self.cov[1][1]).sqrt()
    }
}

/// Moments of ν by a truncated double series over `(i, j)`.
pub fn nu_moments() -> Moments {
    // terms with i + j >= K are dropped; `tail_bound` bounds their second-moment weight
    const K: i64 = 80;
    let mut m = [0.0f64; 2];
    let mut s = [[0.0f64; 2]; 2];
    let mut mass = 0.5;
    m[0] += 0.5;
    m[1] -= 0.5;
    s[0][0] += 0.5;
    s[1][1] += 0.5;
    s[0][1] -= 0.5;
    // smallest terms first to limit rounding
    for tot in (0..K).rev() {
        for i in 0..=tot {
            let j = tot - i;
            let p = (2f64).powi(-(tot as i32) - 3);
            let (x, y) = (-(i as f64), j as f64);
            mass += p;
            m[0] += p * x;
            m[1] += p * y;
            s[0][0] += p * x * x;
            s[1][1] += p * y * y;
            s[0][1] += p * x * y;
        }
    }
    let tail_bound: f64 = (K..K + 200).map(|t| (t + 1) as f64 * (t * t) as f64 * (2f64).powi(-(t as i32) - 3)).sum();
    debug_assert!((mass - 1.0).abs() < 1e-14);
    let cov = [
        [s[0][0] - m[0] * m[0], s[0][1] - m[0] * m[1]],
        [s[0][1] - m[0] * m[1], s[1][1] - m[1] * m[1]],
    ];
    Moments { mean: m, cov, tail_bound }
}

/// Progress information passed to sampler callbacks.
#[derive(Debug, Clone, Copy)]
pub struct SamplerProgress {
    pub attempts: u64,
    pub steps: u64,
}

/// Outcome of one rejection-sampler run.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub walk: TandemWalk,
    pub size: usize,
    pub attempts: u64,
}

/// Runs ν-walks from the origin until one has its last quadrant point at the origin and
/// `m + 2` quadrant points with `m ∈ [n, ⌈(1+δ)n⌉]`; returns the stripped walk.
pub fn sample_uniform_tandem<R: RngCore + ?Sized>(n: usize, window: f64, rng: &mut R) -> Sampled {
    sample_uniform_tandem_with(n, window, rng, |_| ControlFlow::Continue(()))
        .expect("sampler without budget always returns")
}

/// As [`sample_uniform_tandem`], calling `progress` every 2^16 attempts; the callback may stop the run.
pub fn sample_uniform_tandem_with<R, F>(n: usize, window: f64, rng: &mut R, mut progress: F) -> Option<Sampled>
where
    R: RngCore + ?Sized,
    F: FnMut(SamplerProgress) -> ControlFlow<()>,
{
    assert!(n >= 1, "size must be positive");
    let hi = ((1.0 + window.max(0.0)) * n as f64).ceil() as usize;
    let hi = hi.max(n);
    let mut attempts = 0u64;
    let mut total_steps = 0u64;
    let mut path: Vec<(i64, i64)> = Vec::new();
    loop {
        attempts += 1;
        if attempts & 0xffff == 0 {
            if let ControlFlow::Break(()) = progress(SamplerProgress { attempts, steps: total_steps }) {
                return None;
            }
        }
        path.clear();
        let (mut x, mut y) = (0i64, 0i64);
        path.push((0, 0));
        let mut too_long = false;
        loop {
            let s = sample_step(rng);
            total_steps += 1;
            let (nx, ny) = (x + s.dx, y + s.dy);
            if nx < 0 || ny < 0 {
                break;
            }
            x = nx;
            y = ny;
            if path.len() == hi + 2 {
                too_long = true;
                break;
            }
            path.push((x, y));
        }
        if too_long || (x, y) != (0, 0) {
            continue;
        }
        if path.len() < n + 2 {
            continue;
        }
        let m = path.len() - 2;
        let inner = path[1..path.len() - 1].to_vec();
        let walk = validate_tandem(inner).expect("accepted excursion is a tandem walk");
        return Some(Sampled { walk, size: m, attempts });
    }
}

/// All tandem walks of size `n`; each appears once.
pub fn enumerate_tandem(n: usize) -> Result<Vec<TandemWalk>> {
    if n > ENUM_LIMIT {
        return Err(Error::SizeTooLarge { size: n, limit: ENUM_LIMIT });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    // coordinates of a tandem walk of size n never exceed n - 1
    let bound = n as i64 - 1;
    for h in 0..=bound {
        cur.push((0, h));
        extend(n, bound, &mut cur, &mut out);
        cur.pop();
    }
    Ok(out)
}

fn extend(n: usize, bound: i64, cur: &mut Vec<(i64, i64)>, out: &mut Vec<TandemWalk>) {
    let (x, y) = *cur.last().unwrap();
    let left = (n - cur.len()) as i64;
    if left == 0 {
        if y == 0 {
            out.push(TandemWalk { values: cur.clone() });
        }
        return;
    }
    // y must be able to reach 0 using at most `left` up-steps
    if y > left {
        return;
    }
    if y >= 1 {
        cur.push((x + 1, y - 1));
        extend(n, bound, cur, out);
        cur.pop();
    }
    for i in 0..=x {
        for j in 0..=(bound - y) {
            cur.push((x - i, y + j));
            extend(n, bound, cur, out);
            cur.pop();
        }
    }
}

/// Time reversal with swapped coordinates: `result_t = (Y_{n+1-t}, X_{n+1-t})`.
pub fn reverse_swap(w: &TandemWalk) -> TandemWalk {
    TandemWalk { values: w.values.iter().rev().map(|&(x, y)| (y, x)).collect() }
}

/// A random tandem walk of size `n` built from ν-steps restricted to moves that keep the walk
/// in the quadrant and able to reach the x-axis in time. Valid but not uniform on `W_n`;
/// intended for exercising exact identities at sizes where the rejection sampler is too slow.
pub fn random_tandem_walk<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> TandemWalk {
    assert!(n >= 1);
    let h = (geometric_half(rng) as i64).min(n as i64 - 1);
    let mut values = Vec::with_capacity(n);
    let (mut x, mut y) = (0i64, h);
    values.push((x, y));
    for t in 1..n {
        let left_after = (n - 1 - t) as i64;
        loop {
            let s = sample_step(rng);
            let (nx, ny) = (x + s.dx, y + s.dy);
            if nx >= 0 && ny >= 0 && ny <= left_after {
                x = nx;
                y = ny;
                break;
            }
        }
        values.push((x, y));
    }
    validate_tandem(values).expect("constrained walk is a tandem walk")
}

/// Two-sided ν-walk on `[-h, h]` pinned at `(0,0)` at time 0.
pub fn sample_window<R: RngCore + ?Sized>(h: usize, rng: &mut R) -> LatticeWalk {
    let steps: Vec<Step> = (0..2 * h).map(|_| sample_step(rng)).collect();
    // steps[0..h] lead from time -h to 0; shift so the value at time 0 is the origin
    let (mut sx, mut sy) = (0i64, 0i64);
    for s in &steps[..h] {
        sx -= s.dx;
        sy -= s.dy;
    }
    LatticeWalk { start_time: -(h as i64), start: (sx, sy), steps }
}
