//! JSON forms of maps and grid permutons.

use baxlab::bipolar::BipolarOrientation;
use baxlab::permuton::GridPermuton;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const MAP_TYPE: &str = "bipolar_orientation";
pub const PERMUTON_TYPE: &str = "grid_permuton";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub id: usize,
    pub bottom: usize,
    pub top: usize,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: usize,
    /// Incoming edges, left to right.
    pub incoming: Vec<usize>,
    /// Outgoing edges, left to right.
    pub outgoing: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceJson {
    pub id: usize,
    /// Left boundary edges, bottom to top.
    pub left_boundary: Vec<usize>,
    /// Right boundary edges, bottom to top.
    pub right_boundary: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapJson {
    #[serde(rename = "type")]
    pub kind: String,
    pub source: usize,
    pub sink: usize,
    pub left_outer_face: usize,
    pub right_outer_face: usize,
    pub edges: Vec<EdgeJson>,
    pub vertices: Vec<VertexJson>,
    pub faces: Vec<FaceJson>,
}

impl MapJson {
    pub fn from_map(m: &BipolarOrientation) -> Self {
        Self {
            kind: MAP_TYPE.into(),
            source: m.source,
            sink: m.sink,
            left_outer_face: m.left_outer,
            right_outer_face: m.right_outer,
            edges: (0..m.n_edges())
                .map(|e| EdgeJson { id: e, bottom: m.bottom[e], top: m.top[e], left: m.left[e], right: m.right[e] })
                .collect(),
            vertices: (0..m.n_vertices())
                .map(|v| VertexJson { id: v, incoming: m.v_in[v].clone(), outgoing: m.v_out[v].clone() })
                .collect(),
            faces: (0..m.f_lb.len())
                .map(|f| FaceJson { id: f, left_boundary: m.f_lb[f].clone(), right_boundary: m.f_rb[f].clone() })
                .collect(),
        }
    }

    /// Rebuilds and validates the map; ids must be `0..len` in order.
    pub fn to_map(&self) -> CliResult<BipolarOrientation> {
        if self.kind != MAP_TYPE {
            return Err(CliError::Input(format!("expected type {MAP_TYPE}, found {}", self.kind)));
        }
        let ids_ok = self.edges.iter().enumerate().all(|(k, e)| e.id == k)
            && self.vertices.iter().enumerate().all(|(k, v)| v.id == k)
            && self.faces.iter().enumerate().all(|(k, f)| f.id == k);
        if !ids_ok {
            return Err(CliError::Input("ids must be consecutive from 0".into()));
        }
        let m = BipolarOrientation {
            bottom: self.edges.iter().map(|e| e.bottom).collect(),
            top: self.edges.iter().map(|e| e.top).collect(),
            left: self.edges.iter().map(|e| e.left).collect(),
            right: self.edges.iter().map(|e| e.right).collect(),
            v_in: self.vertices.iter().map(|v| v.incoming.clone()).collect(),
            v_out: self.vertices.iter().map(|v| v.outgoing.clone()).collect(),
            f_lb: self.faces.iter().map(|f| f.left_boundary.clone()).collect(),
            f_rb: self.faces.iter().map(|f| f.right_boundary.clone()).collect(),
            source: self.source,
            sink: self.sink,
            left_outer: self.left_outer_face,
            right_outer: self.right_outer_face,
        };
        m.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(m)
    }
}

/// Grid permuton as rows `mass[x][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutonJson {
    #[serde(rename = "type")]
    pub kind: String,
    pub k: usize,
    pub mass: Vec<Vec<f64>>,
}

impl PermutonJson {
    pub fn from_grid(g: &GridPermuton) -> Self {
        Self { kind: PERMUTON_TYPE.into(), k: g.resolution(), mass: g.rows() }
    }

    /// Grid of masses; marginals are not enforced so that estimates can be drawn.
    pub fn cells(&self) -> CliResult<Vec<f64>> {
        if self.kind != PERMUTON_TYPE {
            return Err(CliError::Input(format!("expected type {PERMUTON_TYPE}, found {}", self.kind)));
        }
        if self.k == 0 || self.mass.len() != self.k || self.mass.iter().any(|r| r.len() != self.k) {
            return Err(CliError::Input("permuton mass must be a k by k array".into()));
        }
        let cells: Vec<f64> = self.mass.iter().flatten().copied().collect();
        if cells.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(CliError::Input("permuton masses must be finite and non-negative".into()));
        }
        Ok(cells)
    }
}
