//! Permutons discretised on square grids: permutation measures, the rectangle distance,
//! sampled sub-permutations and intensity estimates for random Baxter permutations.

use std::ops::ControlFlow;
use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use crate::coal::sigma_linear;
use crate::error::{Error, Result};
use crate::perm::{std, Permutation};
use crate::walk::sample_uniform_tandem_with;

const MASS_TOL: f64 = 1e-12;
const MARGINAL_TOL: f64 = 1e-9;

/// Measure on `[0,1]^2` with constant density on each cell of a `k × k` grid.
/// `mass[x * k + y]` is the mass of column `x`, row `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPermuton {
    k: usize,
    mass: Vec<f64>,
}

impl GridPermuton {
    pub fn new(k: usize, mass: Vec<f64>) -> Result<Self> {
        if k == 0 || mass.len() != k * k {
            return Err(Error::BadParameter(format!("mass must have {k}×{k} entries")));
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::BadParameter("masses must be finite and non-negative".into()));
        }
        let g = Self { k, mass };
        g.check_marginals()?;
        Ok(g)
    }

    /// Lebesgue measure on the unit square.
    pub fn uniform(k: usize) -> Self {
        let c = 1.0 / (k * k) as f64;
        Self { k, mass: vec![c; k * k] }
    }

    pub fn resolution(&self) -> usize {
        self.k
    }

    pub fn mass(&self, x: usize, y: usize) -> f64 {
        self.mass[x * self.k + y]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Rows of the mass matrix, indexed by column `x`.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.mass.chunks(self.k).map(|c| c.to_vec()).collect()
    }

    pub fn check_marginals(&self) -> Result<()> {
        let k = self.k;
        let total: f64 = self.mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL * (k * k).max(1) as f64 {
            return Err(Error::BadParameter(format!("total mass {total}")));
        }
        let target = 1.0 / k as f64;
        for a in 0..k {
            let col: f64 = (0..k).map(|b| self.mass(a, b)).sum();
            let row: f64 = (0..k).map(|b| self.mass(b, a)).sum();
            if (col - target).abs() > MARGINAL_TOL || (row - target).abs() > MARGINAL_TOL {
                return Err(Error::BadParameter(format!("marginal at {a}")));
            }
        }
        Ok(())
    }

    /// Rotation by a quarter turn clockwise; maps the measure of `σ` to that of `rotate_star(σ)`.
    pub fn rotate(&self) -> Self {
        let k = self.k;
        let mut mass = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                mass[a * k + b] = self.mass(k - 1 - b, a);
            }
        }
        Self { k, mass }
    }

    /// Redistributes mass onto a `k2 × k2` grid assuming constant density on each cell.
    pub fn resample(&self, k2: usize) -> Self {
        let k = self.k;
        let ov = overlaps(k, k2);
        let mut mass = vec![0.0; k2 * k2];
        for x in 0..k {
            for &(a, ox) in &ov[x] {
                for y in 0..k {
                    let m = self.mass(x, y);
                    if m == 0.0 {
                        continue;
                    }
                    for &(b, oy) in &ov[y] {
                        mass[a * k2 + b] += m * (ox * oy) as f64 / (k2 * k2) as f64;
                    }
                }
            }
        }
        Self { k: k2, mass }
    }
}

/// For each cell of a `k`-grid, the cells of a `k2`-grid it meets and the overlap length in
/// units of `1/(k·k2)`.
fn overlaps(k: usize, k2: usize) -> Vec<Vec<(usize, u64)>> {
    (0..k)
        .map(|x| {
            let (lo, hi) = ((x * k2) as u64, ((x + 1) * k2) as u64);
            let first = lo / k as u64;
            let last = (hi - 1) / k as u64;
            (first..=last)
                .map(|a| {
                    let (alo, ahi) = (a * k as u64, (a + 1) * k as u64);
                    (a as usize, hi.min(ahi) - lo.max(alo))
                })
                .collect()
        })
        .collect()
}

/// The measure of `σ`: mass `1/n` spread uniformly on each cell `(i, σ(i))`.
pub fn mu_sigma(sigma: &Permutation) -> GridPermuton {
    let n = sigma.len();
    let mut mass = vec![0.0; n * n];
    let c = 1.0 / n as f64;
    for (i, &v) in sigma.values().iter().enumerate() {
        mass[i * n + v - 1] = c;
    }
    GridPermuton { k: n, mass }
}

/// The measure of `σ` coarsened exactly onto a `k × k` grid, in `O(n + k^2)` memory.
pub fn mu_sigma_on_grid(sigma: &Permutation, k: usize) -> GridPermuton {
    let n = sigma.len();
    let ov = overlaps(n, k);
    let mut mass = vec![0.0; k * k];
    let denom = (n * k * k) as f64;
    for (i, &v) in sigma.values().iter().enumerate() {
        for &(a, ox) in &ov[i] {
            for &(b, oy) in &ov[v - 1] {
                mass[a * k + b] += (ox * oy) as f64 / denom;
            }
        }
    }
    GridPermuton { k, mass }
}

/// Supremum over grid rectangles of `|μ(R) − μ'(R)|`, by a maximum-subrectangle scan in `O(k^3)`.
pub fn d_square(mu: &GridPermuton, nu: &GridPermuton) -> Result<f64> {
    if mu.k != nu.k {
        return Err(Error::ResolutionMismatch(mu.k, nu.k));
    }
    let k = mu.k;
    let diff: Vec<f64> = mu.mass.iter().zip(&nu.mass).map(|(a, b)| a - b).collect();
    let mut best = 0.0f64;
    let mut acc = vec![0.0; k];
    for x0 in 0..k {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for x1 in x0..k {
            let row = &diff[x1 * k..(x1 + 1) * k];
            let (mut hi, mut lo) = (0.0f64, 0.0f64);
            for (a, &d) in acc.iter_mut().zip(row) {
                *a += d;
                hi = (hi + *a).max(0.0);
                lo = (lo + *a).min(0.0);
                best = best.max(hi).max(-lo);
            }
        }
    }
    Ok(best)
}

/// `k` i.i.d. points drawn from `μ`: a cell by mass, then uniform inside it.
pub fn sample_points<R: RngCore + ?Sized>(mu: &GridPermuton, k: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let g = mu.k;
    let cells = WeightedIndex::new(&mu.mass).expect("grid permuton has positive total mass");
    (0..k)
        .map(|_| {
            let c = cells.sample(rng);
            let (a, b) = (c / g, c % g);
            ((a as f64 + rng.gen::<f64>()) / g as f64, (b as f64 + rng.gen::<f64>()) / g as f64)
        })
        .collect()
}

/// Permutation induced by `k` i.i.d. points drawn from `μ`.
pub fn perm_k<R: RngCore + ?Sized>(mu: &GridPermuton, k: usize, rng: &mut R) -> Permutation {
    induced(sample_points(mu, k, rng))
}

/// `perm_k` for the measure of `σ` without materialising its `n × n` grid.
pub fn perm_k_of_perm<R: RngCore + ?Sized>(sigma: &Permutation, k: usize, rng: &mut R) -> Permutation {
    let n = sigma.len();
    let pts = (0..k)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let v = sigma.values()[i] - 1;
            ((i as f64 + rng.gen::<f64>()) / n as f64, (v as f64 + rng.gen::<f64>()) / n as f64)
        })
        .collect();
    induced(pts)
}

/// Pattern of a point set: sort by x, standardise the y-values.
pub fn induced(mut pts: Vec<(f64, f64)>) -> Permutation {
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    std(&ys).expect("points are in general position almost surely")
}

/// Cellwise running mean and variance of random grid permutons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityEstimate {
    pub k: usize,
    pub samples: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl IntensityEstimate {
    pub fn new(k: usize) -> Self {
        Self { k, samples: 0, sum: vec![0.0; k * k], sum_sq: vec![0.0; k * k] }
    }

    pub fn add(&mut self, g: &GridPermuton) {
        assert_eq!(g.k, self.k, "resolution mismatch");
        self.samples += 1;
        for ((s, q), &m) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(&g.mass) {
            *s += m;
            *q += m * m;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(other.k, self.k, "resolution mismatch");
        self.samples += other.samples;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.sum_sq.iter_mut().zip(&other.sum_sq).for_each(|(a, b)| *a += b);
    }

    pub fn mean(&self) -> GridPermuton {
        let n = self.samples.max(1) as f64;
        GridPermuton { k: self.k, mass: self.sum.iter().map(|s| s / n).collect() }
    }

    /// Standard error of each cell mean.
    pub fn std_err(&self) -> Vec<f64> {
        let n = self.samples as f64;
        if self.samples < 2 {
            return vec![f64::INFINITY; self.sum.len()];
        }
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &q)| {
                let mean = s / n;
                let var = ((q - n * mean * mean) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    }

    /// Same estimate for the rotated measures.
    pub fn rotate(&self) -> Self {
        let rot = |v: &Vec<f64>| GridPermuton { k: self.k, mass: v.clone() }.rotate().mass;
        Self { k: self.k, samples: self.samples, sum: rot(&self.sum), sum_sq: rot(&self.sum_sq) }
    }

    /// Cellwise z-scores of the difference of two independent estimates.
    pub fn z_scores(&self, other: &Self) -> Vec<f64> {
        let (m1, m2) = (self.mean(), other.mean());
        let (s1, s2) = (self.std_err(), other.std_err());
        (0..self.sum.len())
            .map(|c| {
                let d = (m1.mass[c] - m2.mass[c]).abs();
                let s = (s1[c] * s1[c] + s2[c] * s2[c]).sqrt();
                if s == 0.0 {
                    if d == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    d / s
                }
            })
            .collect()
    }
}

/// Average of the coarsened measures of uniform Baxter permutations of size about `n`, drawn by
/// the walk rejection sampler. Returns `None` if `deadline` passes first.
pub fn baxter_permuton_estimate<R: RngCore + ?Sized>(
    n: usize,
    samples: usize,
    k: usize,
    window: f64,
    rng: &mut R,
    deadline: Option<Instant>,
) -> Option<(IntensityEstimate, Vec<GridPermuton>)> {
    let mut est = IntensityEstimate::new(k);
    let mut grids = Vec::with_capacity(samples);
    for _ in 0..samples {
        let s = sample_uniform_tandem_with(n, window, rng, |_| match deadline {
            Some(d) if Instant::now() > d => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        })?;
        let sigma = sigma_linear(&s.walk.to_lattice());
        let g = mu_sigma_on_grid(&sigma, k);
        est.add(&g);
        grids.push(g);
    }
    Some((est, grids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{all_permutations, enumerate_baxter};
    use crate::rng::stream;
    use rand::seq::SliceRandom;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn random_perm(n: usize, rng: &mut crate::rng::Rng) -> Permutation {
        let mut v: Vec<usize> = (1..=n).collect();
        v.shuffle(rng);
        Permutation::new(v).unwrap()
    }

    /// Rectangle mass of `σ`'s measure by direct geometry, for grid rectangles.
    fn rect_mass(sigma: &Permutation, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let n = sigma.len() as f64;
        sigma
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ox = ((i + 1) as f64 / n).min(x1) - (i as f64 / n).max(x0);
                let oy = (v as f64 / n).min(y1) - ((v - 1) as f64 / n).max(y0);
                ox.max(0.0) * oy.max(0.0) * n
            })
            .sum()
    }

    #[test]
    fn single_point() {
        let g = mu_sigma(&Permutation::identity(1));
        assert_eq!(g.rows(), vec![vec![1.0]]);
        let mut rng = stream(60, 0);
        assert_eq!(perm_k(&g, 1, &mut rng).values(), &[1]);
    }

    #[test]
    fn identity_is_diagonal() {
        let g = mu_sigma(&Permutation::identity(4));
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(g.mass(a, b), if a == b { 0.25 } else { 0.0 });
            }
        }
        // points sharing a diagonal cell may swap, so the induced permutation is a direct sum
        // of blocks, one per occupied cell
        let mut rng = stream(61, 0);
        for k in [1, 5, 40, 200] {
            let mut pts = sample_points(&g, k, &mut rng);
            pts.sort_by(|p, q| p.0.total_cmp(&q.0));
            let cell: Vec<usize> = pts.iter().map(|p| (p.0 * 4.0) as usize).collect();
            assert!(pts.iter().all(|p| (p.1 * 4.0) as usize == (p.0 * 4.0) as usize));
            let sigma = induced(pts);
            let mut max = 0;
            for j in 0..k {
                max = max.max(sigma.values()[j]);
                if j + 1 == k || cell[j] != cell[j + 1] {
                    assert_eq!(max, j + 1);
                }
            }
        }
    }

    #[test]
    fn marginals_hold() {
        let mut rng = stream(62, 0);
        for _ in 0..100 {
            let s = random_perm(rng.gen_range(1..30), &mut rng);
            mu_sigma(&s).check_marginals().unwrap();
            mu_sigma_on_grid(&s, 7).check_marginals().unwrap();
        }
        assert!(GridPermuton::new(2, vec![0.5, 0.0, 0.5, 0.0]).is_err());
        assert!(GridPermuton::new(2, vec![0.5, 0.0, 0.0]).is_err());
        assert!(GridPermuton::new(2, vec![0.5, 0.0, 0.0, 0.5]).is_ok());
    }

    #[test]
    fn distance_examples() {
        let id = mu_sigma(&Permutation::identity(2));
        let rev = mu_sigma(&Permutation::new(vec![2, 1]).unwrap());
        assert_eq!(d_square(&id, &id).unwrap(), 0.0);
        assert!((d_square(&id, &rev).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(d_square(&id, &GridPermuton::uniform(3)), Err(Error::ResolutionMismatch(2, 3))));
    }

    #[test]
    fn distance_matches_brute_force() {
        let mut rng = stream(63, 0);
        for _ in 0..30 {
            let n = rng.gen_range(1..7);
            let (s, t) = (random_perm(n, &mut rng), random_perm(n, &mut rng));
            let mut best = 0.0f64;
            let g = |i: usize| i as f64 / n as f64;
            for x0 in 0..=n {
                for x1 in x0..=n {
                    for y0 in 0..=n {
                        for y1 in y0..=n {
                            let d = rect_mass(&s, g(x0), g(x1), g(y0), g(y1)) - rect_mass(&t, g(x0), g(x1), g(y0), g(y1));
                            best = best.max(d.abs());
                        }
                    }
                }
            }
            assert!((d_square(&mu_sigma(&s), &mu_sigma(&t)).unwrap() - best).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_axioms() {
        let mut rng = stream(64, 0);
        for _ in 0..50 {
            let n = rng.gen_range(1..12);
            let g: Vec<_> = (0..3).map(|_| mu_sigma(&random_perm(n, &mut rng))).collect();
            let d = |a: usize, b: usize| d_square(&g[a], &g[b]).unwrap();
            assert!((d(0, 1) - d(1, 0)).abs() < 1e-15);
            assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
            assert!((0.0..=1.0).contains(&d(0, 1)));
        }
    }

    #[test]
    fn rotation_commutes_with_measure() {
        let mut rng = stream(65, 0);
        for _ in 0..50 {
            let s = random_perm(rng.gen_range(1..20), &mut rng);
            let r = mu_sigma(&s).rotate();
            assert_eq!(d_square(&r, &mu_sigma(&s.rotate_star())).unwrap(), 0.0);
            assert!(d_square(&mu_sigma_on_grid(&s, 5).rotate(), &mu_sigma_on_grid(&s.rotate_star(), 5)).unwrap() < 1e-12);
        }
        let g = mu_sigma(&random_perm(9, &mut rng));
        assert_eq!(g.rotate().rotate().rotate().rotate(), g);
    }

    #[test]
    fn baxter_set_rotation_invariant() {
        for n in 1..=6 {
            let mut a: Vec<_> = enumerate_baxter(n).unwrap().collect();
            let mut b: Vec<_> = a.iter().map(|s| s.rotate_star()).collect();
            a.sort_by(|x, y| x.values().cmp(y.values()));
            b.sort_by(|x, y| x.values().cmp(y.values()));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn coarsening_is_exact() {
        let mut rng = stream(66, 0);
        for _ in 0..20 {
            let n = rng.gen_range(1..25);
            let k = rng.gen_range(1..9);
            let s = random_perm(n, &mut rng);
            let g = mu_sigma_on_grid(&s, k);
            for a in 0..k {
                for b in 0..k {
                    let (x0, x1) = (a as f64 / k as f64, (a + 1) as f64 / k as f64);
                    let (y0, y1) = (b as f64 / k as f64, (b + 1) as f64 / k as f64);
                    assert!((g.mass(a, b) - rect_mass(&s, x0, x1, y0, y1)).abs() < 1e-12);
                }
            }
            let direct = mu_sigma(&s).resample(k);
            assert!(d_square(&direct, &g).unwrap() < 1e-12);
            // refining then coarsening back is the identity
            let back = mu_sigma(&s).resample(2 * n).resample(n);
            assert!(d_square(&back, &mu_sigma(&s)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn perm_k_uniform_on_uniform_grid() {
        let mut rng = stream(67, 0);
        let g = GridPermuton::uniform(4);
        let perms: Vec<_> = all_permutations(3).collect();
        let mut obs = vec![0u64; 6];
        let total = 60_000;
        for _ in 0..total {
            let p = perm_k(&g, 3, &mut rng);
            obs[perms.iter().position(|q| *q == p).unwrap()] += 1;
        }
        let e = total as f64 / 6.0;
        let chi2: f64 = obs.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        let p = 1.0 - ChiSquared::new(5.0).unwrap().cdf(chi2);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn perm_k_concentrates() {
        let mut rng = stream(68, 0);
        let s = random_perm(300, &mut rng);
        let mu = mu_sigma_on_grid(&s, 50);
        let k = 2000;
        let d = d_square(&mu_sigma_on_grid(&perm_k(&mu_sigma(&s), k, &mut rng), 50), &mu).unwrap();
        assert!(d <= 16.0 * (k as f64).powf(-0.25));
        assert!(d < 0.1, "d = {d}");
    }

    #[test]
    fn intensity_estimate_statistics() {
        let mut est = IntensityEstimate::new(2);
        est.add(&mu_sigma(&Permutation::identity(2)));
        est.add(&mu_sigma(&Permutation::new(vec![2, 1]).unwrap()));
        assert_eq!(est.mean().rows(), vec![vec![0.25, 0.25], vec![0.25, 0.25]]);
        let se = est.std_err();
        assert!(se.iter().all(|&s| (s - 0.25).abs() < 1e-12));
        let rot = est.rotate();
        assert_eq!(est.z_scores(&rot), vec![0.0; 4]);
        let mut e2 = IntensityEstimate::new(2);
        e2.merge(&est);
        assert_eq!(e2.samples, 2);
    }

    #[test]
    fn small_baxter_intensity() {
        let mut rng = stream(69, 0);
        let (est, grids) = baxter_permuton_estimate(8, 40, 4, 0.1, &mut rng, None).unwrap();
        assert_eq!(grids.len(), 40);
        for g in &grids {
            g.check_marginals().unwrap();
        }
        est.mean().check_marginals().unwrap();
        let past = Instant::now() - std::time::Duration::from_secs(1);
        assert!(baxter_permuton_estimate(400, 1, 4, 0.1, &mut rng, Some(past)).is_none());
    }

    #[test]
    fn perm_k_without_grid_matches_grid_version_in_law() {
        let s = Permutation::new(vec![3, 1, 4, 2]).unwrap();
        let perms: Vec<_> = all_permutations(3).collect();
        let count = |f: &mut dyn FnMut() -> Permutation| {
            let mut c = vec![0u64; 6];
            for _ in 0..30_000 {
                let p = f();
                c[perms.iter().position(|q| *q == p).unwrap()] += 1;
            }
            c
        };
        let mut r1 = stream(80, 0);
        let mut r2 = stream(80, 1);
        let g = mu_sigma(&s);
        let a = count(&mut || perm_k(&g, 3, &mut r1));
        let b = count(&mut || perm_k_of_perm(&s, 3, &mut r2));
        // two-sample chi-square on 6 cells
        let chi2: f64 = a.iter().zip(&b).filter(|(x, y)| **x + **y > 0).map(|(&x, &y)| {
            let (x, y) = (x as f64, y as f64);
            (x - y).powi(2) / (x + y)
        }).sum();
        let p = 1.0 - ChiSquared::new(5.0).unwrap().cdf(chi2);
        assert!(p > 0.001, "{a:?} {b:?}");
        let mut rng = stream(81, 0);
        assert_eq!(perm_k_of_perm(&random_perm(10_000, &mut rng), 1, &mut rng).values(), &[1]);
    }
}
