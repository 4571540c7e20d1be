//! `check`: property suites run exhaustively up to a size, then on random instances.
//!
//! Exhaustive instances are visited by increasing size, so the first failure reported is a
//! smallest counterexample.

use baxlab::bipolar::{theta, theta_tandem};
use baxlab::coal::{fortree_linear, pcw, random_signed_tree, separable_coalescent, sigma_linear, wc, wpc, DENSE_LIMIT};
use baxlab::perm::enumerate_baxter;
use baxlab::rng::{par_map, stream};
use baxlab::walk::{enumerate_tandem, random_tandem_walk, reverse_swap, LatticeWalk, TandemWalk};
use baxlab::Permutation;
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{to_json, CliError, CliResult, Envelope, Outcome, OutputArg};

pub const SCHEMA: &str = "baxlab.check/1";
pub const MAX_EXHAUSTIVE: usize = 6;
pub const MAX_LEAVES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    /// The coalescent permutation of a walk equals the permutation of its map, and the
    /// walk-to-permutation map is a bijection onto Baxter permutations.
    Diagram,
    /// The dual map on walks, through the coalescent processes, has order 4.
    Involution,
    /// First coordinates of the dual walk are local times of the coalescent process.
    LocalTime,
    /// Duality rotates the permutation, has order 4, and reversal swaps the walk coordinates.
    DualRotation,
    /// Dual exploration forest equals the coalescent forest on free walks and their restrictions.
    Forest,
    /// The coalescent of a signed tree recovers the separable permutation of the tree.
    Separable,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Largest size checked exhaustively (at most 6).
    #[arg(long, default_value_t = 5)]
    pub max_size: usize,
    /// Number of random instances after the exhaustive phase.
    #[arg(long, default_value_t = 50)]
    pub random: usize,
    /// Size of random walks (leaves of random trees are drawn in 1..=12).
    #[arg(long, default_value_t = 200)]
    pub random_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swap two values of the coalescent permutation (diagram suite only).
    #[arg(long)]
    pub inject_fault: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeCount {
    pub size: usize,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub phase: &'static str,
    pub size: usize,
    pub index: usize,
    pub detail: String,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckBody {
    pub suite: Suite,
    pub passed: bool,
    pub instances: usize,
    pub random_instances: usize,
    pub per_size: Vec<SizeCount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

struct Failure {
    detail: String,
    data: Value,
}

fn fail(detail: impl Into<String>, data: Value) -> Failure {
    Failure { detail: detail.into(), data }
}

fn core_fail(e: baxlab::Error, w: &TandemWalk) -> Failure {
    fail(format!("library error: {e}"), json!({ "walk": w.values() }))
}

fn swap_first_two(p: Permutation) -> Permutation {
    let mut v = p.into_values();
    if v.len() >= 2 {
        v.swap(0, 1);
    }
    Permutation::new(v).expect("swap keeps a permutation")
}

fn diagram(w: &TandemWalk, fault: bool) -> Result<(), Failure> {
    let lw = w.to_lattice();
    let mut cp = wc(&lw).and_then(|z| z.cp()).map_err(|e| core_fail(e, w))?;
    if fault {
        cp = swap_first_two(cp);
    }
    let op = theta_tandem(w).op();
    let data = || json!({ "walk": w.values(), "coalescent_permutation": cp.values(), "map_permutation": op.values() });
    if cp != op {
        return Err(fail("coalescent permutation differs from map permutation", data()));
    }
    if !op.is_baxter() {
        return Err(fail("permutation is not Baxter", data()));
    }
    if sigma_linear(&lw) != op {
        return Err(fail("linear-time permutation differs", data()));
    }
    Ok(())
}

fn dual_walk(w: &TandemWalk) -> baxlab::Result<TandemWalk> {
    let (z, zr) = wpc(w)?;
    pcw(&z, &zr)
}

fn involution(w: &TandemWalk) -> Result<(), Failure> {
    let mut orbit = vec![w.clone()];
    for _ in 0..4 {
        let next = dual_walk(orbit.last().unwrap()).map_err(|e| core_fail(e, w))?;
        orbit.push(next);
    }
    let data = || json!({ "orbit": orbit.iter().map(|x| x.values().to_vec()).collect::<Vec<_>>() });
    if orbit[1] != theta_tandem(w).dual().bow() {
        return Err(fail("walk map differs from the walk of the dual map", data()));
    }
    if orbit[4] != orbit[0] {
        return Err(fail("fourth power is not the identity", data()));
    }
    Ok(())
}

fn local_time(w: &TandemWalk) -> Result<(), Failure> {
    let n = w.len() as i64;
    let z = wc(&w.to_lattice()).map_err(|e| core_fail(e, w))?;
    let sigma = z.cp().map_err(|e| core_fail(e, w))?;
    let xstar = theta_tandem(w).dual().bow().xs();
    for i in 1..=n {
        let si = sigma.at(i as usize);
        let lt = z.local_time(i, n).map_err(|e| core_fail(e, w))? as i64;
        if xstar[si - 1] != lt - 1 {
            return Err(fail(
                format!("dual walk at {si} is {} but local time of trajectory {i} is {lt}", xstar[si - 1]),
                json!({ "walk": w.values(), "dual_x": xstar, "permutation": sigma.values() }),
            ));
        }
    }
    Ok(())
}

fn dual_rotation(w: &TandemWalk) -> Result<(), Failure> {
    let m = theta_tandem(w);
    let d = m.dual();
    let data = || json!({ "walk": w.values(), "permutation": m.op().values(), "dual_permutation": d.op().values() });
    if let Err(e) = d.validate() {
        return Err(fail(format!("dual is not a valid map: {e}"), data()));
    }
    if d.op() != m.op().rotate_star() {
        return Err(fail("permutation of the dual is not the rotation", data()));
    }
    if d.dual().dual().dual() != m {
        return Err(fail("fourth power of duality is not the identity", data()));
    }
    if m.reverse_orientation().bow() != reverse_swap(w) {
        return Err(fail("reversal does not reverse and swap the walk", data()));
    }
    Ok(())
}

fn forest_on(lw: &LatticeWalk) -> Result<(), Failure> {
    let data = || json!({ "start_time": lw.start_time, "walk": lw.values() });
    let marked = theta(lw).map_err(|e| fail(format!("library error: {e}"), data()))?;
    let coal = wc(lw).map_err(|e| fail(format!("library error: {e}"), data()))?.fortree();
    if marked.dual_forest() != coal {
        return Err(fail("dual exploration forest differs from the coalescent forest", data()));
    }
    if fortree_linear(lw) != coal {
        return Err(fail("linear-time forest differs", data()));
    }
    Ok(())
}

fn forest(w: &TandemWalk, all_intervals: bool) -> Result<(), Failure> {
    let lw = w.to_lattice();
    let (a, b) = (lw.start_time, lw.end_time());
    let whole = theta(&lw).map_err(|e| core_fail(e, w))?;
    let intervals: Vec<(i64, i64)> = if all_intervals {
        (a..=b).flat_map(|lo| (lo..=b).map(move |hi| (lo, hi))).collect()
    } else {
        vec![(a, b), (a, (a + b) / 2), ((a + b) / 2, b)]
    };
    for (lo, hi) in intervals {
        let sub = lw.restrict(lo, hi).map_err(|e| core_fail(e, w))?;
        forest_on(&sub)?;
        let direct = theta(&sub).map_err(|e| core_fail(e, w))?.canonical();
        let restricted = whole.restrict(lo, hi).map_err(|e| core_fail(e, w))?.canonical();
        if direct != restricted {
            return Err(fail(
                format!("restriction to [{lo}, {hi}] does not commute with the construction"),
                json!({ "walk": w.values(), "lo": lo, "hi": hi }),
            ));
        }
    }
    Ok(())
}

fn check_walk(suite: Suite, w: &TandemWalk, fault: bool, exhaustive: bool) -> Result<(), Failure> {
    match suite {
        Suite::Diagram => diagram(w, fault),
        Suite::Involution => involution(w),
        Suite::LocalTime => local_time(w),
        Suite::DualRotation => dual_rotation(w),
        Suite::Forest => forest(w, exhaustive),
        Suite::Separable => unreachable!("separable suite has no walks"),
    }
}

fn validate(args: &CheckArgs) -> CliResult<()> {
    if args.max_size == 0 || args.max_size > MAX_EXHAUSTIVE {
        return Err(CliError::Usage(format!("max-size must lie in 1..={MAX_EXHAUSTIVE}")));
    }
    if args.random > 0 && (args.random_size == 0 || args.random_size > DENSE_LIMIT) {
        return Err(CliError::Usage(format!("random-size must lie in 1..={DENSE_LIMIT}")));
    }
    if args.inject_fault && args.suite != Suite::Diagram {
        return Err(CliError::Usage("inject-fault applies to the diagram suite only".into()));
    }
    Ok(())
}

fn first_failure(results: Vec<Result<(), Failure>>) -> Option<(usize, Failure)> {
    results.into_iter().enumerate().find_map(|(k, r)| r.err().map(|f| (k, f)))
}

fn run_walk_suite(args: &CheckArgs) -> CliResult<CheckBody> {
    let mut body = CheckBody {
        suite: args.suite,
        passed: true,
        instances: 0,
        random_instances: 0,
        per_size: Vec::new(),
        counterexample: None,
    };
    for n in 1..=args.max_size {
        let walks = enumerate_tandem(n)?;
        body.instances += walks.len();
        body.per_size.push(SizeCount { size: n, instances: walks.len() });
        let results = par_map(walks.len(), |k| check_walk(args.suite, &walks[k], args.inject_fault, true));
        let mut failure = first_failure(results);
        if failure.is_none() && args.suite == Suite::Diagram {
            failure = bijection_failure(&walks, n)?;
        }
        if let Some((index, f)) = failure {
            body.passed = false;
            body.counterexample = Some(Counterexample { phase: "exhaustive", size: n, index, detail: f.detail, data: f.data });
            return Ok(body);
        }
    }
    let results = par_map(args.random, |r| {
        let w = random_tandem_walk(args.random_size, &mut stream(args.seed, r as u64));
        check_walk(args.suite, &w, args.inject_fault, false)
    });
    body.random_instances = args.random;
    if let Some((index, f)) = first_failure(results) {
        body.passed = false;
        body.counterexample = Some(Counterexample {
            phase: "random",
            size: args.random_size,
            index,
            detail: f.detail,
            data: f.data,
        });
    }
    Ok(body)
}

/// All walks of size `n` give distinct permutations, which are exactly the Baxter ones.
fn bijection_failure(walks: &[TandemWalk], n: usize) -> CliResult<Option<(usize, Failure)>> {
    let mut images: Vec<Vec<usize>> = walks.iter().map(|w| theta_tandem(w).op().into_values()).collect();
    images.sort();
    let mut baxter: Vec<Vec<usize>> = enumerate_baxter(n)?.map(|p| p.into_values()).collect();
    baxter.sort();
    if images == baxter {
        return Ok(None);
    }
    let mut dup = images.clone();
    dup.dedup();
    let detail = format!(
        "{} walks give {} distinct permutations; {} Baxter permutations",
        walks.len(),
        dup.len(),
        baxter.len()
    );
    Ok(Some((0, fail(detail, json!({ "size": n })))))
}

fn run_separable(args: &CheckArgs) -> CliResult<CheckBody> {
    let results = par_map(args.random, |r| {
        let mut rng = stream(args.seed, r as u64);
        let leaves = 1 + (r % MAX_LEAVES);
        let t = random_signed_tree(leaves, &mut rng);
        let data = || json!({ "leaves": leaves, "tree": &t });
        let expected = t.perm().map_err(|e| fail(format!("library error: {e}"), data()))?;
        let got = separable_coalescent(&t).map_err(|e| fail(format!("library error: {e}"), data()))?.perm;
        if got != expected {
            return Err(fail(
                "coalescent permutation differs from the tree permutation",
                json!({ "leaves": leaves, "tree": &t, "expected": expected.values(), "got": got.values() }),
            ));
        }
        Ok(())
    });
    let mut body = CheckBody {
        suite: args.suite,
        passed: true,
        instances: 0,
        random_instances: args.random,
        per_size: Vec::new(),
        counterexample: None,
    };
    if let Some((index, f)) = first_failure(results) {
        body.passed = false;
        let size = 1 + index % MAX_LEAVES;
        body.counterexample = Some(Counterexample { phase: "random", size, index, detail: f.detail, data: f.data });
    }
    Ok(body)
}

pub fn check_body(args: &CheckArgs) -> CliResult<CheckBody> {
    validate(args)?;
    match args.suite {
        Suite::Separable => run_separable(args),
        _ => run_walk_suite(args),
    }
}

pub fn run(args: &CheckArgs) -> CliResult<Outcome> {
    let body = check_body(args)?;
    let failed = !body.passed;
    let text = to_json(&Envelope { schema: SCHEMA, seed: args.seed, config: args, body })?;
    Ok(Outcome { text, failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::OutputArg;

    fn args(suite: Suite, max_size: usize) -> CheckArgs {
        CheckArgs {
            suite,
            max_size,
            random: 5,
            random_size: 40,
            seed: 1,
            inject_fault: false,
            out: OutputArg { output: None },
        }
    }

    #[test]
    fn every_suite_passes() {
        for suite in [
            Suite::Diagram,
            Suite::Involution,
            Suite::LocalTime,
            Suite::DualRotation,
            Suite::Forest,
            Suite::Separable,
        ] {
            let b = check_body(&args(suite, 4)).unwrap();
            assert!(b.passed, "{suite:?}: {:?}", b.counterexample);
        }
    }

    #[test]
    fn diagram_counts_baxter_permutations() {
        let b = check_body(&args(Suite::Diagram, 5)).unwrap();
        assert_eq!(b.instances, 123);
        let counts: Vec<usize> = b.per_size.iter().map(|c| c.instances).collect();
        assert_eq!(counts, vec![1, 2, 6, 22, 92]);
    }

    #[test]
    fn injected_fault_gives_smallest_counterexample() {
        let mut a = args(Suite::Diagram, 5);
        a.inject_fault = true;
        let b = check_body(&a).unwrap();
        assert!(!b.passed);
        let c = b.counterexample.unwrap();
        assert_eq!((c.phase, c.size, c.index), ("exhaustive", 2, 0));
    }

    #[test]
    fn bad_arguments_are_usage_errors() {
        assert!(matches!(check_body(&args(Suite::Diagram, 7)), Err(CliError::Usage(_))));
        let mut a = args(Suite::Forest, 3);
        a.inject_fault = true;
        assert!(matches!(check_body(&a), Err(CliError::Usage(_))));
    }
}
