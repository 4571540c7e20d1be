//! Seeded, splittable random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Stream `id` derived from `seed`. Distinct ids give independent streams.
pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Geometric(1/2) on {0,1,2,...}: mass 2^(-l-1) at l, by counting trailing zero bits.
pub fn geometric_half<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    let mut acc = 0u64;
    loop {
        let w = rng.next_u64();
        if w != 0 {
            return acc + w.trailing_zeros() as u64;
        }
        acc += 64;
    }
}

/// Number of worker threads allowed, honouring `BAXLAB_THREADS`.
pub fn thread_cap() -> Option<usize> {
    std::env::var("BAXLAB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Maps `f` over `0..count` on a worker pool capped by [`thread_cap`]; output is in index order.
pub fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 1).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(stream(7, 1).next_u64(), stream(7, 2).next_u64());
    }

    #[test]
    fn geometric_mass_at_zero() {
        let mut rng = stream(1, 0);
        let n = 200_000;
        let zeros = (0..n).filter(|_| geometric_half(&mut rng) == 0).count();
        let p = zeros as f64 / n as f64;
        assert!((p - 0.5).abs() < 0.005, "{p}");
    }

    #[test]
    fn par_map_is_ordered_and_deterministic() {
        use rand::Rng as _;
        let run = || par_map(100, |i| stream(5, i as u64).gen::<u64>());
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a[7], stream(5, 7).gen::<u64>());
    }
}
