//! `sample`: uniform tandem walk by rejection, then its permutation and map.

use std::ops::ControlFlow;
use std::time::Instant;

use baxlab::bipolar::theta_tandem;
use baxlab::coal::sigma_linear;
use baxlab::rng::stream;
use baxlab::walk::sample_uniform_tandem_with;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::artifact::MapJson;
use crate::{deadline, to_json, CliError, CliResult, Envelope, OutputArg};

pub const SCHEMA: &str = "baxlab.sample/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SampleKind {
    Perm,
    Walk,
    Map,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    /// Object to output; the walk is always included.
    #[arg(long = "type", value_enum, default_value = "perm")]
    #[serde(rename = "type")]
    pub kind: SampleKind,
    /// Minimum size n.
    #[arg(long)]
    pub size: usize,
    /// Accepted sizes are n..=ceil((1+window)n).
    #[arg(long, default_value_t = 0.1)]
    pub window: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Give up after this many seconds (exit code 2).
    #[arg(long)]
    pub timeout: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBody {
    #[serde(rename = "type")]
    pub kind: SampleKind,
    pub requested_size: usize,
    pub size: usize,
    pub attempts: u64,
    pub walk: Vec<(i64, i64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapJson>,
}

pub fn validate(args: &SampleArgs) -> CliResult<()> {
    if args.size == 0 {
        return Err(CliError::Usage("size must be at least 1".into()));
    }
    if !(args.window.is_finite() && args.window >= 0.0) {
        return Err(CliError::Usage(format!("window {} must be finite and non-negative", args.window)));
    }
    Ok(())
}

/// One sample from stream 0 of the seed.
pub fn sample_body(args: &SampleArgs, stop: Option<Instant>) -> CliResult<SampleBody> {
    validate(args)?;
    let mut rng = stream(args.seed, 0);
    let s = sample_uniform_tandem_with(args.size, args.window, &mut rng, |_| match stop {
        Some(d) if Instant::now() > d => ControlFlow::Break(()),
        _ => ControlFlow::Continue(()),
    })
    .ok_or_else(|| CliError::Timeout(format!("no sample of size {} accepted in time", args.size)))?;
    let permutation = match args.kind {
        SampleKind::Walk => None,
        _ => Some(sigma_linear(&s.walk.to_lattice()).into_values()),
    };
    let map = match args.kind {
        SampleKind::Map => Some(MapJson::from_map(&theta_tandem(&s.walk))),
        _ => None,
    };
    Ok(SampleBody {
        kind: args.kind,
        requested_size: args.size,
        size: s.size,
        attempts: s.attempts,
        walk: s.walk.values().to_vec(),
        permutation,
        map,
    })
}

pub fn run(args: &SampleArgs) -> CliResult<String> {
    validate(args)?;
    let body = sample_body(args, deadline(args.timeout)?)?;
    to_json(&Envelope { schema: SCHEMA, seed: args.seed, config: args, body })
}
