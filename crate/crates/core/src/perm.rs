//! Permutations in one-line notation, patterns, the Baxter test and diagram rotation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest size accepted by [`enumerate_baxter`].
pub const ENUM_LIMIT: usize = 9;

/// A permutation of `1..=n` stored in one-line notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation {
    values: Vec<usize>,
}

impl Permutation {
    /// Checks that `values` is a bijection of `1..=n`.
    pub fn new(values: Vec<usize>) -> Result<Self> {
        let n = values.len();
        let mut seen = vec![false; n + 1];
        for &v in &values {
            if v == 0 || v > n || seen[v] {
                return Err(Error::NotAPermutation);
            }
            seen[v] = true;
        }
        Ok(Self { values })
    }

    /// Caller guarantees the bijection invariant.
    pub(crate) fn from_vec_unchecked(values: Vec<usize>) -> Self {
        debug_assert!(Self::new(values.clone()).is_ok());
        Self { values }
    }

    pub fn identity(n: usize) -> Self {
        Self { values: (1..=n).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn into_values(self) -> Vec<usize> {
        self.values
    }

    /// Value at 1-based position `i`.
    pub fn at(&self, i: usize) -> usize {
        self.values[i - 1]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.values.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        Self { values: inv }
    }

    /// Quarter-turn clockwise of the diagram: `result(j) = n + 1 - inverse(j)`.
    pub fn rotate_star(&self) -> Self {
        let n = self.len();
        let inv = self.inverse();
        Self { values: inv.values.iter().map(|&p| n + 1 - p).collect() }
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self { values: other.values.iter().map(|&j| self.values[j - 1]).collect() }
    }

    pub fn is_baxter(&self) -> bool {
        is_baxter(self)
    }
}

impl std::fmt::Display for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Standardisation: the permutation in the same relative order as `seq`.
pub fn std<T: PartialOrd>(seq: &[T]) -> Result<Permutation> {
    let mut idx: Vec<usize> = (0..seq.len()).collect();
    idx.sort_by(|&a, &b| seq[a].partial_cmp(&seq[b]).unwrap_or(std::cmp::Ordering::Equal));
    for w in idx.windows(2) {
        if seq[w[0]].partial_cmp(&seq[w[1]]) != Some(std::cmp::Ordering::Less) {
            return Err(Error::DuplicateValues);
        }
    }
    let mut values = vec![0; seq.len()];
    for (rank, &i) in idx.iter().enumerate() {
        values[i] = rank + 1;
    }
    Ok(Permutation { values })
}

/// Pattern of `sigma` on the strictly increasing 1-based index set `idx`.
pub fn pattern(sigma: &Permutation, idx: &[usize]) -> Result<Permutation> {
    let n = sigma.len();
    for (k, &i) in idx.iter().enumerate() {
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, size: n });
        }
        if k > 0 && idx[k - 1] >= i {
            return Err(Error::BadParameter("index set must be strictly increasing".into()));
        }
    }
    let vals: Vec<usize> = idx.iter().map(|&i| sigma.at(i)).collect();
    std(&vals)
}

/// Definitional cubic scan: no `i < j < j+1 <= k` with
/// `s(j+1) < s(i) < s(k) < s(j)` or `s(j) < s(k) < s(i) < s(j+1)`.
pub fn is_baxter(sigma: &Permutation) -> bool {
    let s = &sigma.values;
    let n = s.len();
    for j in 1..n.saturating_sub(1) {
        let (a, b) = (s[j], s[j + 1]);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if hi - lo < 3 {
            continue;
        }
        for i in 0..j {
            let si = s[i];
            if si <= lo || si >= hi {
                continue;
            }
            for &sk in &s[j + 1..] {
                // descent at j: need s(i) < s(k) < s(j); ascent: s(k) < s(i)
                if a > b {
                    if si < sk && sk < a {
                        return false;
                    }
                } else if b > sk && sk > a && sk < si {
                    return false;
                }
            }
        }
    }
    true
}

/// Exact proportion of windows of `pi.len()` consecutive positions whose pattern is `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Density {
    pub count: usize,
    pub windows: usize,
}

impl Density {
    pub fn as_f64(&self) -> f64 {
        self.count as f64 / self.windows as f64
    }
}

pub fn consecutive_occurrence_density(pi: &Permutation, sigma: &Permutation) -> Result<Density> {
    let (k, n) = (pi.len(), sigma.len());
    if k == 0 || k > n {
        return Err(Error::PatternLargerThanHost { pattern: k, host: n });
    }
    let windows = n - k + 1;
    let count = (0..windows)
        .filter(|&s| std(&sigma.values[s..s + k]).map(|p| &p == pi).unwrap_or(false))
        .count();
    Ok(Density { count, windows })
}

/// Advances `v` to the next permutation in lexicographic order.
pub fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All permutations of size `n` in lexicographic order.
pub fn all_permutations(n: usize) -> impl Iterator<Item = Permutation> {
    let mut cur: Option<Vec<usize>> = Some((1..=n).collect());
    std::iter::from_fn(move || {
        let out = cur.take()?;
        let mut next = out.clone();
        if next_permutation(&mut next) {
            cur = Some(next);
        }
        Some(Permutation { values: out })
    })
}

/// Baxter permutations of size `n`, lexicographic, by filtering all of `S_n`.
pub fn enumerate_baxter(n: usize) -> Result<impl Iterator<Item = Permutation>> {
    if n > ENUM_LIMIT {
        return Err(Error::SizeTooLarge { size: n, limit: ENUM_LIMIT });
    }
    Ok(all_permutations(n).filter(is_baxter))
}
