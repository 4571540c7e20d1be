//! Coalescent-walk processes: the construction from walks, the induced total order and
//! permutation, local times, planted forests and the two anti-involutions.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{Density, Permutation};
use crate::rng::{par_map, stream};
use crate::walk::{reverse_swap, sample_step, validate_tandem, LatticeWalk, Step, TandemWalk};

/// Dense triangular storage is refused above this size.
pub const DENSE_LIMIT: usize = 20_000;

/// One step of the coalescent rule applied to a trajectory currently at `z`.
#[inline]
pub fn wc_step(z: i64, s: Step) -> i64 {
    if s.is_up() {
        z - 1
    } else {
        let (i, j) = (-s.dx, s.dy);
        if z >= 0 {
            z + j
        } else if z < -i {
            z + i
        } else {
            j
        }
    }
}

/// Trajectories `Z^(t)_s` for `t <= s` in a finite interval, stored densely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalescentProcess {
    start_time: i64,
    /// `traj[t][s - t]` for 0-based `t`.
    traj: Vec<Vec<i64>>,
}

impl CoalescentProcess {
    pub fn len(&self) -> usize {
        self.traj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traj.is_empty()
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn end_time(&self) -> i64 {
        self.start_time + self.traj.len() as i64 - 1
    }

    fn offset(&self, t: i64) -> Result<usize> {
        if t < self.start_time || t > self.end_time() {
            return Err(Error::IndexOutOfRange { index: t.max(0) as usize, size: self.len() });
        }
        Ok((t - self.start_time) as usize)
    }

    /// `Z^(t)_s`, or `None` before the trajectory starts.
    pub fn value(&self, t: i64, s: i64) -> Result<Option<i64>> {
        let a = self.offset(t)?;
        let b = self.offset(s)?;
        Ok(if b < a { None } else { Some(self.traj[a][b - a]) })
    }

    /// Trajectory started at `t`, from time `t` to the end.
    pub fn trajectory(&self, t: i64) -> Result<&[i64]> {
        Ok(&self.traj[self.offset(t)?])
    }

    /// `i <=_Z j`.
    pub fn leq_z(&self, i: i64, j: i64) -> Result<bool> {
        let (a, b) = (self.offset(i)?, self.offset(j)?);
        Ok(self.leq_offsets(a, b))
    }

    fn leq_offsets(&self, a: usize, b: usize) -> bool {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Equal => true,
            Less => self.traj[a][b - a] < 0,
            Greater => self.traj[b][a - b] >= 0,
        }
    }

    /// The permutation with `σ(i) <= σ(j) ⇔ i <=_Z j`, positions taken relative to the interval.
    pub fn cp(&self) -> Result<Permutation> {
        let n = self.len();
        let mut rank = vec![0usize; n];
        for b in 0..n {
            for a in 0..b {
                if self.traj[a][b - a] < 0 {
                    rank[b] += 1;
                } else {
                    rank[a] += 1;
                }
            }
        }
        let values: Vec<usize> = rank.into_iter().map(|r| r + 1).collect();
        Permutation::new(values).map_err(|_| Error::NotTotalOrder)
    }

    /// `#{k in [i, j] : Z^(i)_k = 0}`.
    pub fn local_time(&self, i: i64, j: i64) -> Result<usize> {
        let (a, b) = (self.offset(i)?, self.offset(j)?);
        if b < a {
            return Err(Error::BadInterval { lo: i, hi: j });
        }
        Ok(self.traj[a][..=b - a].iter().filter(|&&z| z == 0).count())
    }

    /// Non-crossing, absorbing coalescence and non-negative meeting heights.
    pub fn check_invariants(&self) -> bool {
        let n = self.len();
        for a in 0..n {
            if self.traj[a][0] != 0 {
                return false;
            }
            for b in a + 1..n {
                let za = &self.traj[a][b - a..];
                let zb = &self.traj[b];
                for k in 0..zb.len() - 1 {
                    let d0 = za[k] - zb[k];
                    let d1 = za[k + 1] - zb[k + 1];
                    if (d0 >= 0 && d1 < 0) || (d0 <= 0 && d1 > 0) {
                        return false;
                    }
                    if d0 != 0 && d1 == 0 && za[k + 1] < 0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Forest read from the trajectories: `i` is a child of the first `j > i` with `Z^(i)_j = 0`.
    pub fn fortree(&self) -> PlantedForest {
        let n = self.len();
        let sigma = self.cp().expect("coalescent order is total");
        let rank = sigma.values();
        let mut children = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for a in 0..n {
            match self.traj[a].iter().skip(1).position(|&z| z == 0) {
                Some(p) => children[a + 1 + p].push(a),
                None => roots.push(a),
            }
        }
        for c in &mut children {
            c.sort_by_key(|&e| rank[e]);
        }
        roots.sort_by_key(|&e| rank[e]);
        let root_index = roots.iter().map(|&r| *self.traj[r].last().unwrap()).collect();
        let f = PlantedForest { start_time: self.start_time, roots, root_index, children };
        debug_assert_eq!(f.exploration_permutation(), sigma);
        f
    }
}

/// The coalescent-walk process of a walk with steps in `A`.
pub fn wc(w: &LatticeWalk) -> Result<CoalescentProcess> {
    let n = w.len();
    if n > DENSE_LIMIT {
        return Err(Error::SizeTooLarge { size: n, limit: DENSE_LIMIT });
    }
    for (k, s) in w.steps.iter().enumerate() {
        if !s.is_valid() {
            return Err(Error::BadIncrement { index: k + 1, dx: s.dx, dy: s.dy });
        }
    }
    let mut traj = Vec::with_capacity(n);
    for t in 0..n {
        let mut z = 0i64;
        let mut v = Vec::with_capacity(n - t);
        v.push(0);
        for &s in &w.steps[t..] {
            z = wc_step(z, s);
            v.push(z);
        }
        traj.push(v);
    }
    Ok(CoalescentProcess { start_time: w.start_time, traj })
}

/// `cp(wc(w))` in quadratic time and linear memory, without storing trajectories.
pub fn cp_streaming(w: &LatticeWalk) -> Permutation {
    let n = w.len();
    let mut z: Vec<i64> = Vec::with_capacity(n);
    let mut rank = vec![1usize; n];
    z.push(0);
    for (t, &s) in w.steps.iter().enumerate() {
        for v in z.iter_mut() {
            *v = wc_step(*v, s);
        }
        let new = t + 1;
        let mut below = 0;
        for (a, &v) in z.iter().enumerate() {
            if v < 0 {
                below += 1;
            } else {
                rank[a] += 1;
            }
        }
        rank[new] += below;
        z.push(0);
    }
    Permutation::from_vec_unchecked(rank)
}

/// A sequence of plane trees on labelled edges, each planted at an integer index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedForest {
    /// Label of edge 0.
    pub start_time: i64,
    pub roots: Vec<usize>,
    pub root_index: Vec<i64>,
    /// Ordered children of each edge.
    pub children: Vec<Vec<usize>>,
}

impl PlantedForest {
    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn label(&self, e: usize) -> i64 {
        self.start_time + e as i64
    }

    /// Edges in exploration order: trees in sequence, each in preorder.
    pub fn exploration(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack: Vec<usize> = Vec::new();
        for &r in &self.roots {
            stack.push(r);
            while let Some(e) = stack.pop() {
                out.push(e);
                stack.extend(self.children[e].iter().rev());
            }
        }
        out
    }

    /// Position of each edge in the exploration.
    pub fn exploration_permutation(&self) -> Permutation {
        let mut pos = vec![0usize; self.len()];
        for (k, e) in self.exploration().into_iter().enumerate() {
            pos[e] = k + 1;
        }
        Permutation::from_vec_unchecked(pos)
    }

    /// Parent of each edge, `None` for roots.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.len()];
        for (e, ch) in self.children.iter().enumerate() {
            for &c in ch {
                p[c] = Some(e);
            }
        }
        p
    }

    /// Number of edges on the path from `e` down to its root, `e` included.
    pub fn depths(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.len()];
        let mut stack: Vec<(usize, usize)> = self.roots.iter().map(|&r| (r, 1)).collect();
        while let Some((e, h)) = stack.pop() {
            d[e] = h;
            stack.extend(self.children[e].iter().map(|&c| (c, h + 1)));
        }
        d
    }

    pub fn indices_weakly_increasing(&self) -> bool {
        self.root_index.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Linear-time forest of `wc(w)`, maintained step by step.
///
/// Parent-less edges sit on two stacks ordered by `<=_Z`: indices `<= 0` (top = largest) and
/// indices `> 0` (top = smallest). Each stack stores raw values shifted by a global offset.
pub fn fortree_linear(w: &LatticeWalk) -> PlantedForest {
    let n = w.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut neg: Vec<(usize, i64)> = vec![(0, 0)];
    let mut pos: Vec<(usize, i64)> = Vec::new();
    let (mut off_neg, mut off_pos) = (0i64, 0i64);
    let mut popped: Vec<usize> = Vec::new();
    for (k, &s) in w.steps.iter().enumerate() {
        let new = k + 1;
        if s.is_up() {
            off_neg -= 1;
            off_pos -= 1;
            while let Some(&(e, r)) = pos.last() {
                if r + off_pos != 0 {
                    break;
                }
                children[new].push(e);
                pos.pop();
            }
        } else {
            let (i, j) = (-s.dx, s.dy);
            off_pos += j;
            popped.clear();
            while let Some(&(e, r)) = neg.last() {
                if r + off_neg < -i {
                    break;
                }
                popped.push(e);
                neg.pop();
            }
            off_neg += i;
            if j == 0 {
                children[new].extend(popped.iter().rev());
            } else {
                for &e in &popped {
                    pos.push((e, j - off_pos));
                }
            }
        }
        neg.push((new, -off_neg));
    }
    let mut roots = Vec::with_capacity(neg.len() + pos.len());
    let mut root_index = Vec::with_capacity(neg.len() + pos.len());
    for &(e, r) in &neg {
        roots.push(e);
        root_index.push(r + off_neg);
    }
    for &(e, r) in pos.iter().rev() {
        roots.push(e);
        root_index.push(r + off_pos);
    }
    PlantedForest { start_time: w.start_time, roots, root_index, children }
}

/// `cp(wc(w))` through the linear-time forest.
pub fn sigma_linear(w: &LatticeWalk) -> Permutation {
    fortree_linear(w).exploration_permutation()
}

/// Pattern of the limiting infinite permutation on `k` consecutive positions, read from
/// `k − 1` independent ν-steps.
pub fn window_pattern<R: RngCore + ?Sized>(k: usize, rng: &mut R) -> Permutation {
    assert!(k >= 1);
    let steps = (1..k).map(|_| sample_step(rng)).collect();
    sigma_linear(&LatticeWalk::from_steps(steps).expect("ν-steps lie in A"))
}

/// Monte Carlo count of windows with pattern `pi`; sample `s` uses stream `s` of `seed`.
pub fn cocc_limit_estimate(pi: &Permutation, samples: usize, seed: u64) -> Density {
    let k = pi.len();
    let hits = par_map(samples, |s| window_pattern(k, &mut stream(seed, s as u64)) == *pi);
    Density { count: hits.into_iter().filter(|&h| h).count(), windows: samples }
}

/// `(wc(W), wc(reverse_swap(W)))`.
pub fn wpc(w: &TandemWalk) -> Result<(CoalescentProcess, CoalescentProcess)> {
    Ok((wc(&w.to_lattice())?, wc(&reverse_swap(w).to_lattice())?))
}

/// Walk with `X*_i = L_Z^(σ⁻¹(i))(n) - 1` and `Y*_i = L_Zrev^(σ*(i))(n) - 1`, `σ = cp(Z)`.
pub fn pcw(z: &CoalescentProcess, zrev: &CoalescentProcess) -> Result<TandemWalk> {
    let n = z.len();
    if zrev.len() != n || n == 0 {
        return Err(Error::NotInImage);
    }
    let sigma = z.cp()?;
    let inv = sigma.inverse();
    let star = sigma.rotate_star();
    let (a, b) = (z.start_time, zrev.start_time);
    let mut values = Vec::with_capacity(n);
    for i in 1..=n {
        let x = z.local_time(a + inv.at(i) as i64 - 1, z.end_time())? as i64 - 1;
        let y = zrev.local_time(b + star.at(i) as i64 - 1, zrev.end_time())? as i64 - 1;
        values.push((x, y));
    }
    validate_tandem(values).map_err(|_| Error::NotInImage)
}

/// Outcome of the trajectory-law test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryLawReport {
    pub k: usize,
    pub samples: usize,
    pub mass_minus_one: f64,
    pub mass_zero: f64,
    pub marginal_chi2: f64,
    pub marginal_df: usize,
    pub marginal_p: f64,
    pub joint_chi2: f64,
    pub joint_df: usize,
    pub joint_p: f64,
}

impl TrajectoryLawReport {
    pub fn passed(&self, alpha: f64) -> bool {
        self.marginal_p > alpha && self.joint_p > alpha
    }
}

/// Law of one increment of the second coordinate: `-1` w.p. 1/2, `v >= 0` w.p. `2^(-v-2)`.
pub fn y_increment_mass(v: i64) -> f64 {
    match v {
        -1 => 0.5,
        v if v >= 0 => (2f64).powi(-(v as i32) - 2),
        _ => 0.0,
    }
}

/// Runs `samples` trajectories started at time 0 over `k` ν-steps and compares their
/// increments with the increment law of the second coordinate.
pub fn trajectory_law_check<R: RngCore + ?Sized>(k: usize, samples: usize, rng: &mut R) -> TrajectoryLawReport {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    assert!(k >= 1);
    // bins -1, 0, ..., 28 and a tail bucket
    const TOP: i64 = 28;
    let nb = (TOP + 3) as usize;
    let bin = |v: i64| -> usize { (v.min(TOP + 1) + 1) as usize };
    let mut counts = vec![0u64; nb];
    // pairs of consecutive increments on bins -1, 0, 1, 2, >=3
    const JB: usize = 5;
    let jbin = |v: i64| -> usize { (v.min(3) + 1) as usize };
    let mut joint = vec![0u64; JB * JB];
    let mut pairs = 0u64;
    let mut incs = Vec::with_capacity(k);
    for _ in 0..samples {
        incs.clear();
        let mut z = 0i64;
        for _ in 0..k {
            let nz = wc_step(z, sample_step(rng));
            incs.push(nz - z);
            z = nz;
        }
        for &d in &incs {
            counts[bin(d)] += 1;
        }
        for p in incs.chunks_exact(2) {
            joint[jbin(p[0]) * JB + jbin(p[1])] += 1;
            pairs += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let mut probs: Vec<f64> = (-1..=TOP).map(y_increment_mass).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let (marginal_chi2, marginal_df) = chi2_pooled(&counts, &probs, total as f64);
    let mut jp = vec![0.0; JB];
    for v in -1..3 {
        jp[jbin(v)] = y_increment_mass(v);
    }
    jp[JB - 1] = 1.0 - jp[..JB - 1].iter().sum::<f64>();
    let jprobs: Vec<f64> = (0..JB * JB).map(|c| jp[c / JB] * jp[c % JB]).collect();
    let (joint_chi2, joint_df) = chi2_pooled(&joint, &jprobs, pairs as f64);
    let pval = |c: f64, df: usize| 1.0 - ChiSquared::new(df as f64).unwrap().cdf(c);
    TrajectoryLawReport {
        k,
        samples,
        mass_minus_one: counts[0] as f64 / total as f64,
        mass_zero: counts[1] as f64 / total as f64,
        marginal_chi2,
        marginal_df,
        marginal_p: pval(marginal_chi2, marginal_df),
        joint_chi2,
        joint_df,
        joint_p: pval(joint_chi2, joint_df),
    }
}

/// Pearson statistic after merging trailing cells whose expected count is below 5.
pub(crate) fn chi2_pooled(obs: &[u64], probs: &[f64], total: f64) -> (f64, usize) {
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ro, mut re) = (0.0, 0.0);
    for (&o, &p) in obs.iter().zip(probs) {
        let e = p * total;
        if e >= 5.0 {
            cells.push((o as f64, e));
        } else {
            ro += o as f64;
            re += e;
        }
    }
    if re > 0.0 {
        if re >= 5.0 || cells.is_empty() {
            cells.push((ro, re));
        } else {
            let last = cells.last_mut().unwrap();
            last.0 += ro;
            last.1 += re;
        }
    }
    let chi2 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    (chi2, cells.len().saturating_sub(1).max(1))
}

/// Sign of an internal vertex of a signed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Rooted plane tree whose internal vertices carry a sign. Vertex 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedTree {
    pub children: Vec<Vec<usize>>,
    pub signs: Vec<Option<Sign>>,
}

impl SignedTree {
    pub fn leaf() -> Self {
        Self { children: vec![Vec::new()], signs: vec![None] }
    }

    fn validate(&self) -> Result<()> {
        let n = self.children.len();
        if n == 0 || self.signs.len() != n {
            return Err(Error::MalformedTree("size mismatch".into()));
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        let mut count = 1;
        while let Some(v) = stack.pop() {
            let internal = !self.children[v].is_empty();
            if internal != self.signs[v].is_some() {
                return Err(Error::MalformedTree(format!("vertex {v}: sign iff internal")));
            }
            for &c in &self.children[v] {
                if c >= n || seen[c] {
                    return Err(Error::MalformedTree(format!("vertex {c} repeated or out of range")));
                }
                seen[c] = true;
                count += 1;
                stack.push(c);
            }
        }
        if count != n {
            return Err(Error::MalformedTree("unreachable vertices".into()));
        }
        Ok(())
    }

    /// Leaves in preorder.
    fn leaves_in_order(&self, flip: bool) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            let ch = &self.children[v];
            if ch.is_empty() {
                out.push(v);
                continue;
            }
            let rev = flip && self.signs[v] == Some(Sign::Minus);
            if rev {
                stack.extend(ch.iter());
            } else {
                stack.extend(ch.iter().rev());
            }
        }
        out
    }

    /// `σ(i)` = position in the sign-reordered tree of the `i`-th leaf.
    pub fn perm(&self) -> Result<Permutation> {
        self.validate()?;
        let orig = self.leaves_in_order(false);
        let flipped = self.leaves_in_order(true);
        let mut pos = vec![0usize; self.children.len()];
        for (k, &v) in flipped.iter().enumerate() {
            pos[v] = k + 1;
        }
        Ok(Permutation::from_vec_unchecked(orig.iter().map(|&v| pos[v]).collect()))
    }

    /// Contour function and the vertex visited at each contour time.
    fn contour(&self) -> (Vec<i64>, Vec<usize>) {
        let mut c = vec![0i64];
        let mut at = vec![0usize];
        // (vertex, next child slot)
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
        while let Some(top) = stack.last_mut() {
            let (v, slot) = *top;
            if slot < self.children[v].len() {
                let ch = self.children[v][slot];
                top.1 += 1;
                c.push(stack.len() as i64);
                at.push(ch);
                stack.push((ch, 0));
            } else {
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    c.push(stack.len() as i64 - 1);
                    at.push(p);
                }
            }
        }
        (c, at)
    }
}

/// Trajectories driven by the contour of a signed tree, one per leaf visit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparableCoalescent {
    /// Contour times of leaf visits, increasing.
    pub leaf_times: Vec<usize>,
    /// `trajectories[a][s]` = value at contour time `s` of the walk started at `leaf_times[a]`
    /// (`None` before its start).
    pub trajectories: Vec<Vec<Option<i64>>>,
    pub perm: Permutation,
}

/// Builds the contour-driven coalescent family and reads its permutation; fails if the
/// ordering disagrees with the sign-reversal construction.
pub fn separable_coalescent(t: &SignedTree) -> Result<SeparableCoalescent> {
    t.validate()?;
    let (c, at) = t.contour();
    let len = c.len();
    let is_min = |j: usize| j >= 1 && j + 1 < len && c[j - 1] > c[j] && c[j + 1] > c[j];
    let leaf_times: Vec<usize> = (0..len)
        .filter(|&j| t.children[at[j]].is_empty())
        .collect();
    let mut trajectories = Vec::with_capacity(leaf_times.len());
    for &i in &leaf_times {
        let mut z = vec![None; len];
        z[i] = Some(0i64);
        let mut cur = 0i64;
        let mut started = false;
        for j in i..len - 1 {
            if !started && is_min(j) {
                started = true;
            }
            if started {
                let d = c[j + 1] - c[j];
                cur += if cur > 0 {
                    d
                } else if cur < 0 {
                    -d
                } else if is_min(j) {
                    match t.signs[at[j]] {
                        Some(Sign::Plus) => -1,
                        Some(Sign::Minus) => 1,
                        None => return Err(Error::MalformedTree("leaf at a local minimum".into())),
                    }
                } else {
                    0
                };
            }
            z[j + 1] = Some(cur);
        }
        trajectories.push(z);
    }
    let k = leaf_times.len();
    let mut rank = vec![1usize; k];
    for b in 0..k {
        for a in 0..b {
            if trajectories[a][leaf_times[b]].unwrap() < 0 {
                rank[b] += 1;
            } else {
                rank[a] += 1;
            }
        }
    }
    let perm = Permutation::new(rank).map_err(|_| Error::NotTotalOrder)?;
    if perm != t.perm()? {
        return Err(Error::NotTotalOrder);
    }
    Ok(SeparableCoalescent { leaf_times, trajectories, perm })
}

/// Random signed tree with `leaves` leaves: repeatedly splits a random leaf into 2 or 3.
pub fn random_signed_tree<R: RngCore + ?Sized>(leaves: usize, rng: &mut R) -> SignedTree {
    use rand::Rng;
    let mut t = SignedTree::leaf();
    let mut leaf_ids = vec![0usize];
    while leaf_ids.len() < leaves {
        let pick = rng.gen_range(0..leaf_ids.len());
        let v = leaf_ids.swap_remove(pick);
        let arity = if leaves - leaf_ids.len() >= 3 && rng.gen_bool(0.3) { 3 } else { 2 };
        for _ in 0..arity {
            let id = t.children.len();
            t.children.push(Vec::new());
            t.signs.push(None);
            t.children[v].push(id);
            leaf_ids.push(id);
        }
        t.signs[v] = Some(if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus });
    }
    t
}
