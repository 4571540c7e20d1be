//! `render`: deterministic SVG drawings of JSON artifacts in the unit square.

use std::fmt::Write as _;
use std::path::PathBuf;

use baxlab::bipolar::BipolarOrientation;
use baxlab::Permutation;
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::artifact::{MapJson, PermutonJson, PERMUTON_TYPE};
use crate::{CliError, CliResult, OutputArg};

/// Pixel size of the drawing; coordinates live in the unit square.
pub const PIXELS: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Figure {
    /// Map if present, else permutation, else walk, else permuton.
    Auto,
    Permutation,
    Walk,
    Map,
    Permuton,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    /// JSON artifact produced by `sample` or `stats permuton_intensity --format json`.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub figure: Figure,
    #[command(flatten)]
    pub out: OutputArg,
}

struct Svg {
    body: String,
}

impl Svg {
    fn new() -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PIXELS}\" height=\"{PIXELS}\" viewBox=\"0 0 1 1\">"
        );
        body.push_str("<rect x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"white\"/>\n");
        Self { body }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Fixed-precision coordinate; the y axis points up.
fn c(v: f64) -> String {
    format!("{v:.5}")
}

fn flip(y: f64) -> f64 {
    1.0 - y
}

/// One dot per point `(i, σ(i))`, centred in its cell of the n by n grid.
pub fn permutation_svg(sigma: &Permutation) -> String {
    let n = sigma.len().max(1) as f64;
    let r = (0.4 / n).min(0.02);
    let mut svg = Svg::new();
    for (i, &v) in sigma.values().iter().enumerate() {
        let x = (i as f64 + 0.5) / n;
        let y = (v as f64 - 0.5) / n;
        let _ = writeln!(svg.body, "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"black\"/>", c(x), c(flip(y)), c(r));
    }
    svg.finish()
}

/// Polyline of the walk, scaled to fit with a margin.
pub fn walk_svg(values: &[(i64, i64)]) -> String {
    let mut svg = Svg::new();
    let mx = values.iter().map(|p| p.0).max().unwrap_or(0).max(1) as f64;
    let my = values.iter().map(|p| p.1).max().unwrap_or(0).max(1) as f64;
    let s = 0.9 / mx.max(my);
    let pts: Vec<String> = values
        .iter()
        .map(|&(x, y)| format!("{},{}", c(0.05 + x as f64 * s), c(flip(0.05 + y as f64 * s))))
        .collect();
    let _ = writeln!(
        svg.body,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.003\"/>",
        pts.join(" ")
    );
    svg.finish()
}

/// Vertices at their height in the down-right tree, spread left to right in exploration order.
pub fn map_svg(m: &BipolarOrientation) -> String {
    let nv = m.n_vertices();
    let heights = m.vertex_heights();
    let tree = m.down_right_tree();
    let mut rank = vec![usize::MAX; nv];
    let mut next = 0;
    rank[m.source] = next;
    next += 1;
    for &e in &tree.order {
        let v = m.top[e];
        if rank[v] == usize::MAX {
            rank[v] = next;
            next += 1;
        }
    }
    let hmax = heights.iter().copied().max().unwrap_or(0).max(1) as f64;
    let span = (nv.max(2) - 1) as f64;
    let pos: Vec<(f64, f64)> = (0..nv)
        .map(|v| {
            let x = if v == m.sink { 1.0 } else { rank[v] as f64 / span };
            let y = if v == m.sink { 1.0 } else { heights[v] as f64 / (hmax + 1.0) };
            (0.05 + 0.9 * x, flip(0.05 + 0.9 * y))
        })
        .collect();
    let mut svg = Svg::new();
    for e in 0..m.n_edges() {
        let (a, b) = (pos[m.bottom[e]], pos[m.top[e]]);
        let _ = writeln!(
            svg.body,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"0.003\"/>",
            c(a.0),
            c(a.1),
            c(b.0),
            c(b.1)
        );
    }
    let r = (0.3 / nv as f64).clamp(0.002, 0.015);
    for (v, p) in pos.iter().enumerate() {
        let fill = if v == m.source || v == m.sink { "red" } else { "black" };
        let _ = writeln!(svg.body, "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\"/>", c(p.0), c(p.1), c(r));
    }
    svg.finish()
}

/// Heat map of a k by k grid, darker for larger mass.
pub fn permuton_svg(k: usize, cells: &[f64]) -> String {
    let top = cells.iter().copied().fold(0.0f64, f64::max);
    let w = 1.0 / k as f64;
    let mut svg = Svg::new();
    for x in 0..k {
        for y in 0..k {
            let m = cells[x * k + y];
            if m <= 0.0 {
                continue;
            }
            let level = 255 - ((m / top) * 255.0).round() as u8;
            let _ = writeln!(
                svg.body,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({level},{level},{level})\"/>",
                c(x as f64 * w),
                c(flip((y + 1) as f64 * w)),
                c(w),
                c(w)
            );
        }
    }
    svg.finish()
}

fn field<T: serde::de::DeserializeOwned>(v: &Value, key: &str) -> CliResult<Option<T>> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(x) => serde_json::from_value(x.clone())
            .map(Some)
            .map_err(|e| CliError::Input(format!("field {key}: {e}"))),
    }
}

fn permuton_of(v: &Value) -> Option<&Value> {
    if v.get("type").and_then(Value::as_str) == Some(PERMUTON_TYPE) {
        Some(v)
    } else {
        v.get("permuton")
    }
}

/// SVG for a parsed artifact.
pub fn render_value(v: &Value, figure: Figure) -> CliResult<String> {
    let figure = match figure {
        Figure::Auto if v.get("map").is_some() => Figure::Map,
        Figure::Auto if v.get("permutation").is_some() => Figure::Permutation,
        Figure::Auto if v.get("walk").is_some() => Figure::Walk,
        Figure::Auto if permuton_of(v).is_some() => Figure::Permuton,
        Figure::Auto => return Err(CliError::Input("nothing to render".into())),
        f => f,
    };
    let missing = |k: &str| CliError::Input(format!("artifact has no {k}"));
    match figure {
        Figure::Permutation => {
            let values: Vec<usize> = field(v, "permutation")?.ok_or_else(|| missing("permutation"))?;
            let sigma = Permutation::new(values).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(permutation_svg(&sigma))
        }
        Figure::Walk => {
            let values: Vec<(i64, i64)> = field(v, "walk")?.ok_or_else(|| missing("walk"))?;
            Ok(walk_svg(&values))
        }
        Figure::Map => {
            let m: MapJson = field(v, "map")?.ok_or_else(|| missing("map"))?;
            Ok(map_svg(&m.to_map()?))
        }
        Figure::Permuton => {
            let p: PermutonJson = serde_json::from_value(permuton_of(v).ok_or_else(|| missing("permuton"))?.clone())
                .map_err(|e| CliError::Input(format!("permuton: {e}")))?;
            let cells = p.cells()?;
            Ok(permuton_svg(p.k, &cells))
        }
        Figure::Auto => unreachable!(),
    }
}

pub fn run(args: &RenderArgs) -> CliResult<String> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::io(format!("reading {}", args.input.display()), e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
    render_value(&v, args.figure)
}
