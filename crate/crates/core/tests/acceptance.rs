//! Acceptance suite: one line per criterion.
//!
//! Criteria that depend on the exact uniform sampler at large sizes use a pilot budget unless
//! `BAXLAB_ACCEPT_FULL=1` is set, in which case the full stated budget is spent. Failing
//! criteria are reported but only turn the exit status non-zero with `BAXLAB_ACCEPT_STRICT=1`.

use std::time::{Duration, Instant};

use baxlab::bipolar::{theta, theta_tandem};
use baxlab::coal::{cp_streaming, fortree_linear, pcw, sigma_linear, trajectory_law_check, wc, wpc};
use baxlab::continuum::{alpha_expectation, g_total_mass, sde_ks};
use baxlab::perm::enumerate_baxter;
use baxlab::permuton::{baxter_permuton_estimate, d_square, mu_sigma_on_grid, perm_k_of_perm};
use baxlab::rng::stream;
use baxlab::walk::{
    enumerate_tandem, nu_moments, random_tandem_walk, sample_step, sample_uniform_tandem_with, validate_tandem,
    LatticeWalk, TandemWalk,
};
use baxlab::Permutation;

const SEED: u64 = 20_240_601;
const PILOT: Duration = Duration::from_secs(20);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn full_budget() -> bool {
    std::env::var("BAXLAB_ACCEPT_FULL").map(|v| v == "1").unwrap_or(false)
}

fn budget(stated: Duration) -> Duration {
    if full_budget() {
        stated
    } else {
        stated.min(PILOT)
    }
}

fn within(start: Instant, limit: Duration) -> bool {
    start.elapsed() < limit
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn walks_up_to(n: usize) -> Vec<TandemWalk> {
    (1..=n).flat_map(|k| enumerate_tandem(k).unwrap()).collect()
}

fn running_example() -> TandemWalk {
    validate_tandem(vec![(0, 2), (0, 3), (0, 3), (1, 2), (2, 1), (0, 3), (1, 2), (2, 1), (3, 0), (2, 0)]).unwrap()
}

fn involution(w: &TandemWalk) -> TandemWalk {
    let (z, zr) = wpc(w).unwrap();
    pcw(&z, &zr).unwrap()
}

fn c1_cardinality() -> Outcome {
    let t = Instant::now();
    let want = [1usize, 2, 6, 22, 92, 422, 2074];
    let mut got = Vec::new();
    for n in 1..=7 {
        let walks = enumerate_tandem(n).unwrap().len();
        let baxter = enumerate_baxter(n).unwrap().count();
        got.push((walks, baxter));
    }
    let ok = got.iter().zip(&want).all(|(&(a, b), &w)| a == w && b == w);
    outcome(ok && within(t, Duration::from_secs(300)), format!("(walks, baxter) = {got:?}"))
}

fn c2_diagram() -> Outcome {
    let t = Instant::now();
    let walks = walks_up_to(6);
    let exhaustive = walks
        .iter()
        .filter(|w| theta_tandem(w).op() == wc(&w.to_lattice()).unwrap().cp().unwrap())
        .count();
    let mut random_ok = 0;
    for r in 0..100 {
        let w = random_tandem_walk(10_000, &mut stream(SEED, 200 + r));
        if theta_tandem(&w).op() == cp_streaming(&w.to_lattice()) {
            random_ok += 1;
        }
    }
    let ok = walks.len() == 545 && exhaustive == 545 && random_ok == 100 && within(t, Duration::from_secs(600));
    outcome(ok, format!("exhaustive {exhaustive}/{}; random n=10^4 {random_ok}/100", walks.len()))
}

fn c3_running_example() -> Outcome {
    let w = running_example();
    let want = Permutation::new(vec![8, 6, 5, 7, 9, 1, 2, 4, 10, 3]).unwrap();
    let coalescent = wc(&w.to_lattice()).unwrap().cp().unwrap();
    let map = theta_tandem(&w).op();
    let linear = sigma_linear(&w.to_lattice());
    outcome(coalescent == want && map == want && linear == want, format!("cp = {coalescent}; op = {map}"))
}

fn c4_anti_involution() -> Outcome {
    let t = Instant::now();
    let walks = walks_up_to(5);
    let exhaustive = walks
        .iter()
        .filter(|w| {
            let mut v = (*w).clone();
            for _ in 0..4 {
                v = involution(&v);
            }
            v == **w
        })
        .count();
    let mut random_ok = 0;
    for r in 0..50 {
        let w = random_tandem_walk(1000, &mut stream(SEED, 400 + r));
        let mut v = w.clone();
        for _ in 0..4 {
            v = involution(&v);
        }
        random_ok += (v == w) as usize;
    }
    let ok = exhaustive == walks.len() && random_ok == 50 && within(t, Duration::from_secs(300));
    outcome(ok, format!("exhaustive {exhaustive}/{}; random n=10^3 {random_ok}/50", walks.len()))
}

fn local_time_and_forest(w: &TandemWalk) -> (bool, bool) {
    let n = w.len() as i64;
    let lw = w.to_lattice();
    let z = wc(&lw).unwrap();
    let sigma = z.cp().unwrap();
    let marked = theta(&lw).unwrap();
    let xstar = marked.to_plain().unwrap().dual().bow().xs();
    let local = (1..=n).all(|i| xstar[sigma.at(i as usize) - 1] == z.local_time(i, n).unwrap() as i64 - 1);
    let forest = marked.dual_forest() == z.fortree() && fortree_linear(&lw) == z.fortree();
    (local, forest)
}

fn c5_local_time_and_forest() -> Outcome {
    let t = Instant::now();
    let walks = walks_up_to(5);
    let (mut lt, mut fo) = (0, 0);
    for w in &walks {
        let (a, b) = local_time_and_forest(w);
        lt += a as usize;
        fo += b as usize;
    }
    let (mut rlt, mut rfo) = (0, 0);
    let reps = 20;
    for r in 0..reps {
        let w = random_tandem_walk(1000, &mut stream(SEED, 500 + r));
        let (a, b) = local_time_and_forest(&w);
        rlt += a as usize;
        rfo += b as usize;
    }
    // forests of free walks (not tandem) as well
    let mut free_ok = 0;
    for r in 0..reps {
        let mut rng = stream(SEED, 600 + r);
        let steps = (1..1000).map(|_| sample_step(&mut rng)).collect();
        let lw = LatticeWalk::with_origin(1, (0, 0), steps).unwrap();
        free_ok += (theta(&lw).unwrap().dual_forest() == wc(&lw).unwrap().fortree()) as usize;
    }
    let m = walks.len();
    let r = reps as usize;
    let ok = lt == m && fo == m && rlt == r && rfo == r && free_ok == r && within(t, Duration::from_secs(300));
    outcome(
        ok,
        format!("local time {lt}/{m}, forest {fo}/{m}; random n=10^3 local time {rlt}/{r}, forest {rfo}/{r}, free walks {free_ok}/{r}"),
    )
}

fn c6_rotation() -> Outcome {
    let t = Instant::now();
    let walks = walks_up_to(5);
    let ok_count = walks
        .iter()
        .filter(|w| {
            let m = theta_tandem(w);
            m.dual().op() == m.op().rotate_star()
        })
        .count();
    outcome(ok_count == walks.len() && within(t, Duration::from_secs(120)), format!("{ok_count}/{}", walks.len()))
}

fn c7_trajectory_law() -> Outcome {
    let t = Instant::now();
    let r = trajectory_law_check(8, 1_000_000, &mut stream(SEED, 7));
    outcome(
        r.passed(0.001) && within(t, Duration::from_secs(120)),
        format!("marginal p = {:.4}, joint p = {:.4}", r.marginal_p, r.joint_p),
    )
}

fn c8_moments() -> Outcome {
    let m = nu_moments();
    let want = [[2.0, -1.0], [-1.0, 2.0]];
    let mean_ok = m.mean.iter().all(|x| x.abs() < 1e-12);
    let cov_ok = (0..2).all(|a| (0..2).all(|b| (m.cov[a][b] - want[a][b]).abs() < 1e-12));
    outcome(mean_ok && cov_ok, format!("mean = {:?}, cov = {:?}", m.mean, m.cov))
}

fn c9_sde() -> Outcome {
    let t = Instant::now();
    let r = sde_ks(10_000, 1e-4, -0.5, SEED).unwrap();
    outcome(r.p_value > 0.001 && within(t, Duration::from_secs(600)), format!("KS D = {:.4}, p = {:.4}", r.statistic, r.p_value))
}

fn c10_density() -> Outcome {
    let t = Instant::now();
    let mass = g_total_mass();
    let alpha = alpha_expectation(0.2, 10_000, 1e-4, -0.5, SEED).unwrap();
    let mass_ok = (mass.value - 1.0).abs() < 1e-3;
    let alpha_ok = (alpha.mean - 1.0).abs() <= 0.02;
    outcome(
        mass_ok && alpha_ok && within(t, Duration::from_secs(900)),
        format!("∫∫g = {:.6}; E[alpha] = {:.3} ± {:.3} (target 1 ± 0.02)", mass.value, alpha.mean, alpha.std_err),
    )
}

fn sampler_note(n: usize, limit: Duration) -> String {
    let scope = if full_budget() { "stated budget" } else { "pilot budget, BAXLAB_ACCEPT_FULL=1 for the stated one" };
    format!("no uniform sample of size {n} within {}s ({scope})", limit.as_secs())
}

fn c11_concentration() -> Outcome {
    let stated = Duration::from_secs(600);
    let limit = budget(stated);
    let start = Instant::now();
    let deadline = start + limit;
    let mut attempts = 0;
    let sampled = sample_uniform_tandem_with(5000, 0.1, &mut stream(SEED, 11), |p| {
        attempts = p.attempts;
        if Instant::now() > deadline {
            std::ops::ControlFlow::Break(())
        } else {
            std::ops::ControlFlow::Continue(())
        }
    });
    let Some(s) = sampled else {
        return outcome(false, format!("{}; {attempts} attempts", sampler_note(5000, limit)));
    };
    let sigma = sigma_linear(&s.walk.to_lattice());
    let k = 4096;
    let grid = 512;
    let bound = 16.0 * (k as f64).powf(-0.25);
    let target = mu_sigma_on_grid(&sigma, grid);
    let mut rng = stream(SEED, 12);
    let mut worst = 0.0f64;
    let mut violations = 0;
    for _ in 0..20 {
        let p = perm_k_of_perm(&sigma, k, &mut rng);
        let d = d_square(&mu_sigma_on_grid(&p, grid), &target).unwrap();
        worst = worst.max(d);
        violations += (d > bound) as usize;
    }
    let ok = violations == 0 && worst <= 0.06 && start.elapsed() < stated;
    outcome(ok, format!("size {}, violations {violations}/20, max d = {worst:.4} (grid {grid})", s.size))
}

fn c12_stability_and_symmetry() -> Outcome {
    let stated = Duration::from_secs(1800);
    let limit = budget(stated);
    let start = Instant::now();
    let deadline = Some(start + limit);
    // discrete rotational invariance of the Baxter set
    let exact = (1..=6).all(|n| {
        let mut a: Vec<Vec<usize>> = enumerate_baxter(n).unwrap().map(|s| s.values().to_vec()).collect();
        let mut b: Vec<Vec<usize>> = enumerate_baxter(n).unwrap().map(|s| s.rotate_star().values().to_vec()).collect();
        a.sort();
        b.sort();
        a == b
    });
    let mut rng = stream(SEED, 13);
    let Some((small, _)) = baxter_permuton_estimate(10_000, 200, 64, 0.1, &mut rng, deadline) else {
        return outcome(false, format!("rotation multiset exact: {exact}; {}", sampler_note(10_000, limit)));
    };
    let Some((large, _)) = baxter_permuton_estimate(20_000, 200, 64, 0.1, &mut rng, deadline) else {
        return outcome(false, format!("rotation multiset exact: {exact}; {}", sampler_note(20_000, limit)));
    };
    // cells beyond 3 standard errors; about 0.27% expected by chance among 4096 cells
    let frac = |z: Vec<f64>| z.iter().filter(|&&v| v > 3.0).count() as f64 / z.len() as f64;
    let stab = frac(small.z_scores(&large));
    let rot = frac(small.z_scores(&small.rotate()));
    let ok = exact && stab <= 0.01 && rot <= 0.01 && start.elapsed() < stated;
    outcome(ok, format!("rotation multiset exact: {exact}; cells beyond 3σ: sizes {stab:.4}, rotation {rot:.4}"))
}

fn c13_performance() -> Outcome {
    let limit = Duration::from_secs(60);
    let start = Instant::now();
    let mut attempts = 0;
    let sampled = sample_uniform_tandem_with(1_000_000, 0.1, &mut stream(SEED, 14), |p| {
        attempts = p.attempts;
        if start.elapsed() > limit {
            std::ops::ControlFlow::Break(())
        } else {
            std::ops::ControlFlow::Continue(())
        }
    });
    // the σ build alone, on an unconditioned ν-walk of the same length
    let mut rng = stream(SEED, 15);
    let t = Instant::now();
    let steps = (1..1_000_000).map(|_| sample_step(&mut rng)).collect();
    let sigma = sigma_linear(&LatticeWalk::from_steps(steps).unwrap());
    let build = t.elapsed();
    let rss = peak_rss_bytes().map(|b| format!("{:.0} MB", b as f64 / 1e6)).unwrap_or_else(|| "unknown".into());
    let note = format!("linear σ build of a 10^6 ν-walk: {:.2}s (size {}), peak RSS {rss}", build.as_secs_f64(), sigma.len());
    match sampled {
        None => outcome(false, format!("no uniform sample of size 10^6 within 60s ({attempts} attempts); {note}")),
        Some(s) => {
            let sigma = sigma_linear(&s.walk.to_lattice());
            let mem_ok = peak_rss_bytes().map(|b| b < 4_000_000_000).unwrap_or(false);
            outcome(start.elapsed() < limit && mem_ok && sigma.len() == s.size, note)
        }
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("cardinality cross-check", c1_cardinality),
        ("diagram commutation", c2_diagram),
        ("running example", c3_running_example),
        ("anti-involution", c4_anti_involution),
        ("local time and forest identities", c5_local_time_and_forest),
        ("rotation symmetry", c6_rotation),
        ("trajectory law", c7_trajectory_law),
        ("step-law moments", c8_moments),
        ("flow endpoint gaussianity", c9_sde),
        ("endpoint density and alpha expectation", c10_density),
        ("permuton concentration", c11_concentration),
        ("intensity stability and symmetry", c12_stability_and_symmetry),
        ("performance budget", c13_performance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        failed += !o.pass as usize;
        println!(
            "{} criterion {:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    let strict = std::env::var("BAXLAB_ACCEPT_STRICT").map(|v| v == "1").unwrap_or(false);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
