//! Plane bipolar orientations: the inductive construction from walks, duality, the
//! down-right tree, the walk encoding and the permutation of a map.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::coal::PlantedForest;
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::walk::{validate_tandem, LatticeWalk, TandemWalk};

/// Edge-centric plane bipolar orientation.
///
/// Vertices keep their incoming and outgoing edges left to right. Faces keep their left and
/// right boundaries bottom to top. The outer face is split into a left and a right face: the
/// left outer face has only a right boundary (the left side of the map) and the right outer
/// face has only a left boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipolarOrientation {
    pub bottom: Vec<usize>,
    pub top: Vec<usize>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub v_in: Vec<Vec<usize>>,
    pub v_out: Vec<Vec<usize>>,
    pub f_lb: Vec<Vec<usize>>,
    pub f_rb: Vec<Vec<usize>>,
    pub source: usize,
    pub sink: usize,
    pub left_outer: usize,
    pub right_outer: usize,
}

/// Rooted plane tree on the edges of a map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTree {
    pub roots: Vec<usize>,
    pub children: Vec<Vec<usize>>,
    /// Edges in exploration order.
    pub order: Vec<usize>,
    /// Number of edges from the root to each edge, the edge included.
    pub depth: Vec<usize>,
}

impl EdgeTree {
    /// Rank (1-based) of each edge in the exploration.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.order.len()];
        for (k, &e) in self.order.iter().enumerate() {
            r[e] = k + 1;
        }
        r
    }

    /// Height process: 0 for the root vertex, then the depth of each visited edge.
    pub fn height_process(&self) -> Vec<usize> {
        std::iter::once(0).chain(self.order.iter().map(|&e| self.depth[e])).collect()
    }
}

impl BipolarOrientation {
    pub fn n_edges(&self) -> usize {
        self.bottom.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.v_in.len()
    }

    /// Faces including both halves of the outer face.
    pub fn n_faces(&self) -> usize {
        self.f_lb.len()
    }

    pub fn single_edge() -> Self {
        Self {
            bottom: vec![0],
            top: vec![1],
            left: vec![0],
            right: vec![1],
            v_in: vec![vec![], vec![0]],
            v_out: vec![vec![0], vec![]],
            f_lb: vec![vec![], vec![0]],
            f_rb: vec![vec![0], vec![]],
            source: 0,
            sink: 1,
            left_outer: 0,
            right_outer: 1,
        }
    }

    fn fail(msg: impl Into<String>) -> Result<()> {
        Err(Error::InvalidMap(msg.into()))
    }

    /// Checks incidence consistency, the local orientation constraints, face shapes and
    /// Euler's formula.
    pub fn validate(&self) -> Result<()> {
        let (ne, nv, nf) = (self.n_edges(), self.n_vertices(), self.n_faces());
        if ne == 0 {
            return Self::fail("no edges");
        }
        for arr in [&self.top, &self.bottom] {
            if arr.len() != ne || arr.iter().any(|&v| v >= nv) {
                return Self::fail("vertex reference out of range");
            }
        }
        for arr in [&self.left, &self.right] {
            if arr.len() != ne || arr.iter().any(|&f| f >= nf) {
                return Self::fail("face reference out of range");
            }
        }
        if self.v_out.len() != nv || self.f_rb.len() != nf {
            return Self::fail("list size mismatch");
        }
        // every edge appears once in each of its four incidence lists
        let mut seen = vec![[0u8; 4]; ne];
        for v in 0..nv {
            for &e in &self.v_in[v] {
                if e >= ne || self.top[e] != v {
                    return Self::fail(format!("in-list of vertex {v}"));
                }
                seen[e][0] += 1;
            }
            for &e in &self.v_out[v] {
                if e >= ne || self.bottom[e] != v {
                    return Self::fail(format!("out-list of vertex {v}"));
                }
                seen[e][1] += 1;
            }
        }
        for f in 0..nf {
            for &e in &self.f_lb[f] {
                if e >= ne || self.right[e] != f {
                    return Self::fail(format!("left boundary of face {f}"));
                }
                seen[e][2] += 1;
            }
            for &e in &self.f_rb[f] {
                if e >= ne || self.left[e] != f {
                    return Self::fail(format!("right boundary of face {f}"));
                }
                seen[e][3] += 1;
            }
        }
        if seen.iter().any(|s| *s != [1, 1, 1, 1]) {
            return Self::fail("edge incidence counts");
        }
        let (s, t, lo, ro) = (self.source, self.sink, self.left_outer, self.right_outer);
        if !self.v_in[s].is_empty() || self.v_out[s].is_empty() {
            return Self::fail("source");
        }
        if !self.v_out[t].is_empty() || self.v_in[t].is_empty() {
            return Self::fail("sink");
        }
        if !self.f_lb[lo].is_empty() || !self.f_rb[ro].is_empty() || lo == ro {
            return Self::fail("outer faces");
        }
        // local constraints around vertices
        for v in 0..nv {
            let (ins, outs) = (&self.v_in[v], &self.v_out[v]);
            if v != s && v != t && (ins.is_empty() || outs.is_empty()) {
                return Self::fail(format!("vertex {v} is a pole"));
            }
            for w in ins.windows(2).chain(outs.windows(2)) {
                if self.right[w[0]] != self.left[w[1]] {
                    return Self::fail(format!("face between consecutive edges at vertex {v}"));
                }
            }
            let lf = |e: &[usize]| e.first().map(|&x| self.left[x]);
            let rf = |e: &[usize]| e.last().map(|&x| self.right[x]);
            if v == s {
                if lf(outs) != Some(lo) || rf(outs) != Some(ro) {
                    return Self::fail("source faces");
                }
            } else if v == t {
                if lf(ins) != Some(lo) || rf(ins) != Some(ro) {
                    return Self::fail("sink faces");
                }
            } else if lf(ins) != lf(outs) || rf(ins) != rf(outs) {
                return Self::fail(format!("side faces at vertex {v}"));
            }
        }
        // faces: boundaries are paths sharing their ends
        for f in 0..nf {
            for side in [&self.f_lb[f], &self.f_rb[f]] {
                for w in side.windows(2) {
                    if self.top[w[0]] != self.bottom[w[1]] {
                        return Self::fail(format!("boundary of face {f} is not a path"));
                    }
                }
            }
            let (lb, rb) = (&self.f_lb[f], &self.f_rb[f]);
            if f == lo || f == ro {
                let side = if f == lo { rb } else { lb };
                if self.bottom[side[0]] != s || self.top[*side.last().unwrap()] != t {
                    return Self::fail("outer boundary must join source to sink");
                }
                continue;
            }
            if lb.is_empty() || rb.is_empty() {
                return Self::fail(format!("face {f} has an empty side"));
            }
            if self.bottom[lb[0]] != self.bottom[rb[0]]
                || self.top[*lb.last().unwrap()] != self.top[*rb.last().unwrap()]
            {
                return Self::fail(format!("face {f} sides do not share ends"));
            }
        }
        // Euler with the outer face counted once
        if nv as i64 - ne as i64 + (nf as i64 - 1) != 2 {
            return Self::fail("Euler formula");
        }
        Ok(())
    }

    /// Dual map: faces become vertices, each edge is oriented from its right face to its left
    /// face; the right outer face is the source.
    pub fn dual(&self) -> Self {
        Self {
            bottom: self.right.clone(),
            top: self.left.clone(),
            left: self.bottom.clone(),
            right: self.top.clone(),
            v_in: self.f_rb.clone(),
            v_out: self.f_lb.clone(),
            f_lb: self.v_in.iter().map(|l| l.iter().rev().copied().collect()).collect(),
            f_rb: self.v_out.iter().map(|l| l.iter().rev().copied().collect()).collect(),
            source: self.right_outer,
            sink: self.left_outer,
            left_outer: self.source,
            right_outer: self.sink,
        }
    }

    /// Every edge flipped; the map turned by a half-turn.
    pub fn reverse_orientation(&self) -> Self {
        let rev = |ls: &Vec<Vec<usize>>| -> Vec<Vec<usize>> {
            ls.iter().map(|l| l.iter().rev().copied().collect()).collect()
        };
        Self {
            bottom: self.top.clone(),
            top: self.bottom.clone(),
            left: self.right.clone(),
            right: self.left.clone(),
            v_in: rev(&self.v_out),
            v_out: rev(&self.v_in),
            f_lb: rev(&self.f_rb),
            f_rb: rev(&self.f_lb),
            source: self.sink,
            sink: self.source,
            left_outer: self.right_outer,
            right_outer: self.left_outer,
        }
    }

    /// `T(m)`: the parent of an edge is the rightmost incoming edge of its bottom vertex.
    pub fn down_right_tree(&self) -> EdgeTree {
        let ne = self.n_edges();
        let mut children = vec![Vec::new(); ne];
        for v in 0..self.n_vertices() {
            if let Some(&p) = self.v_in[v].last() {
                children[p] = self.v_out[v].clone();
            }
        }
        let roots = self.v_out[self.source].clone();
        let mut order = Vec::with_capacity(ne);
        let mut depth = vec![0usize; ne];
        let mut stack: Vec<(usize, usize)> = roots.iter().rev().map(|&e| (e, 1)).collect();
        while let Some((e, d)) = stack.pop() {
            order.push(e);
            depth[e] = d;
            stack.extend(children[e].iter().rev().map(|&c| (c, d + 1)));
        }
        EdgeTree { roots, children, order, depth }
    }

    /// Height of every vertex in `T(m)`.
    pub fn vertex_heights(&self) -> Vec<usize> {
        let t = self.down_right_tree();
        let mut h = vec![0usize; self.n_vertices()];
        for &e in &t.order {
            if self.v_in[self.top[e]].last() == Some(&e) {
                h[self.top[e]] = t.depth[e];
            }
        }
        h
    }

    /// The tandem walk of the map: bottom heights in `T(m)`, top heights in `T(m**)`.
    pub fn bow(&self) -> TandemWalk {
        let order = self.down_right_tree().order;
        let hx = self.vertex_heights();
        let hy = self.reverse_orientation().vertex_heights();
        let values = order.iter().map(|&e| (hx[self.bottom[e]] as i64, hy[self.top[e]] as i64)).collect();
        validate_tandem(values).expect("walk of a bipolar orientation is a tandem walk")
    }

    /// `π(i)` = rank in the exploration of `T(m*)` of the `i`-th edge of `T(m)`.
    pub fn op(&self) -> Permutation {
        let primal = self.down_right_tree().order;
        let dual_rank = self.dual().down_right_tree().ranks();
        Permutation::from_vec_unchecked(primal.iter().map(|&e| dual_rank[e]).collect())
    }

    /// Edges renumbered by `T(m)` exploration, vertices and faces by first appearance.
    /// Two maps are isomorphic iff their canonical forms are equal.
    pub fn canonical(&self) -> Self {
        self.relabel(&self.down_right_tree().order)
    }

    /// Renumbers edges so that `order[k]` becomes edge `k`.
    pub fn relabel(&self, order: &[usize]) -> Self {
        let ne = self.n_edges();
        let mut new_e = vec![usize::MAX; ne];
        for (k, &e) in order.iter().enumerate() {
            new_e[e] = k;
        }
        let mut new_v = vec![usize::MAX; self.n_vertices()];
        let mut new_f = vec![usize::MAX; self.n_faces()];
        let (mut cv, mut cf) = (0, 0);
        for &e in order {
            for v in [self.bottom[e], self.top[e]] {
                if new_v[v] == usize::MAX {
                    new_v[v] = cv;
                    cv += 1;
                }
            }
            for f in [self.left[e], self.right[e]] {
                if new_f[f] == usize::MAX {
                    new_f[f] = cf;
                    cf += 1;
                }
            }
        }
        let map_list = |l: &Vec<usize>| l.iter().map(|&e| new_e[e]).collect::<Vec<_>>();
        let mut v_in = vec![Vec::new(); cv];
        let mut v_out = vec![Vec::new(); cv];
        for v in 0..self.n_vertices() {
            v_in[new_v[v]] = map_list(&self.v_in[v]);
            v_out[new_v[v]] = map_list(&self.v_out[v]);
        }
        let mut f_lb = vec![Vec::new(); cf];
        let mut f_rb = vec![Vec::new(); cf];
        for f in 0..self.n_faces() {
            f_lb[new_f[f]] = map_list(&self.f_lb[f]);
            f_rb[new_f[f]] = map_list(&self.f_rb[f]);
        }
        let per_edge = |a: &Vec<usize>, m: &Vec<usize>| order.iter().map(|&e| m[a[e]]).collect::<Vec<_>>();
        Self {
            bottom: per_edge(&self.bottom, &new_v),
            top: per_edge(&self.top, &new_v),
            left: per_edge(&self.left, &new_f),
            right: per_edge(&self.right, &new_f),
            v_in,
            v_out,
            f_lb,
            f_rb,
            source: new_v[self.source],
            sink: new_v[self.sink],
            left_outer: new_f[self.left_outer],
            right_outer: new_f[self.right_outer],
        }
    }

    /// Outgoing degree of the top vertex of `e`.
    pub fn top_outdegree(&self, e: usize) -> usize {
        self.v_out[self.top[e]].len()
    }

    /// Edges along a pole-to-pole path taking the leftmost (or rightmost) outgoing edge.
    fn boundary_path(&self, leftmost: bool) -> Vec<usize> {
        let mut out = Vec::new();
        let mut v = self.source;
        while v != self.sink {
            let outs = &self.v_out[v];
            let e = if leftmost { outs[0] } else { *outs.last().unwrap() };
            out.push(e);
            v = self.top[e];
        }
        out
    }
}

/// A bipolar orientation with explored edges labelled by a contiguous interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedBipolar {
    pub map: BipolarOrientation,
    pub labels: Vec<Option<i64>>,
    pub active: usize,
    pub first_label: i64,
    pub last_label: i64,
}

impl MarkedBipolar {
    pub fn is_fully_explored(&self) -> bool {
        self.labels.iter().all(|l| l.is_some())
    }

    /// Edge carrying label `l`.
    pub fn edge_with_label(&self, l: i64) -> Option<usize> {
        self.labels.iter().position(|&x| x == Some(l))
    }

    /// Plain orientation with edge `k` carrying label `first_label + k`.
    pub fn to_plain(&self) -> Result<BipolarOrientation> {
        if !self.is_fully_explored() {
            return Err(Error::InvalidMap("unexplored edges remain".into()));
        }
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by_key(|&e| self.labels[e]);
        Ok(self.map.relabel(&order))
    }

    /// Isomorphism-invariant form: canonical skeleton, labels and active edge in that numbering.
    pub fn canonical(&self) -> (BipolarOrientation, Vec<Option<i64>>, usize) {
        let order = self.map.down_right_tree().order;
        let mut new_e = vec![0; order.len()];
        for (k, &e) in order.iter().enumerate() {
            new_e[e] = k;
        }
        let labels = order.iter().map(|&e| self.labels[e]).collect();
        (self.map.relabel(&order), labels, new_e[self.active])
    }

    /// Submap of explored edges with labels in `[lo, hi]`, the inner faces with such edges on
    /// both sides, and the remaining edges of those faces.
    pub fn restrict(&self, lo: i64, hi: i64) -> Result<MarkedBipolar> {
        if lo > hi || lo < self.first_label || hi > self.last_label {
            return Err(Error::BadInterval { lo, hi });
        }
        let m = &self.map;
        let inside = |e: usize| matches!(self.labels[e], Some(l) if l >= lo && l <= hi);
        let nf = m.n_faces();
        let mut face_kept = vec![false; nf];
        for f in 0..nf {
            if f != m.left_outer && f != m.right_outer {
                face_kept[f] = m.f_lb[f].iter().any(|&e| inside(e)) && m.f_rb[f].iter().any(|&e| inside(e));
            }
        }
        let ne = m.n_edges();
        let keep: Vec<bool> = (0..ne)
            .map(|e| inside(e) || face_kept[m.left[e]] || face_kept[m.right[e]])
            .collect();
        let mut new_e = vec![usize::MAX; ne];
        let mut kept = Vec::new();
        for e in 0..ne {
            if keep[e] {
                new_e[e] = kept.len();
                kept.push(e);
            }
        }
        let mut new_v = vec![usize::MAX; m.n_vertices()];
        let mut nv = 0;
        for &e in &kept {
            for v in [m.bottom[e], m.top[e]] {
                if new_v[v] == usize::MAX {
                    new_v[v] = nv;
                    nv += 1;
                }
            }
        }
        // faces: 0 = left outer, 1 = right outer, then kept inner faces
        let mut new_f = vec![usize::MAX; nf];
        let mut nfk = 2;
        for f in 0..nf {
            if face_kept[f] {
                new_f[f] = nfk;
                nfk += 1;
            }
        }
        let lf = |f: usize| if face_kept[f] { new_f[f] } else { 0 };
        let rf = |f: usize| if face_kept[f] { new_f[f] } else { 1 };
        let filt = |l: &Vec<usize>| l.iter().filter(|&&e| keep[e]).map(|&e| new_e[e]).collect::<Vec<_>>();
        let mut v_in = vec![Vec::new(); nv];
        let mut v_out = vec![Vec::new(); nv];
        for v in 0..m.n_vertices() {
            if new_v[v] != usize::MAX {
                v_in[new_v[v]] = filt(&m.v_in[v]);
                v_out[new_v[v]] = filt(&m.v_out[v]);
            }
        }
        let mut f_lb = vec![Vec::new(); nfk];
        let mut f_rb = vec![Vec::new(); nfk];
        for f in 0..nf {
            if face_kept[f] {
                f_lb[new_f[f]] = filt(&m.f_lb[f]);
                f_rb[new_f[f]] = filt(&m.f_rb[f]);
            }
        }
        let sources: Vec<usize> = (0..nv).filter(|&v| v_in[v].is_empty()).collect();
        let sinks: Vec<usize> = (0..nv).filter(|&v| v_out[v].is_empty()).collect();
        if sources.len() != 1 || sinks.len() != 1 {
            return Err(Error::InvalidMap("restriction is not bipolar".into()));
        }
        let mut sub = BipolarOrientation {
            bottom: kept.iter().map(|&e| new_v[m.bottom[e]]).collect(),
            top: kept.iter().map(|&e| new_v[m.top[e]]).collect(),
            left: kept.iter().map(|&e| lf(m.left[e])).collect(),
            right: kept.iter().map(|&e| rf(m.right[e])).collect(),
            v_in,
            v_out,
            f_lb,
            f_rb,
            source: sources[0],
            sink: sinks[0],
            left_outer: 0,
            right_outer: 1,
        };
        sub.f_rb[0] = sub.boundary_path(true);
        sub.f_lb[1] = sub.boundary_path(false);
        sub.validate()?;
        let labels: Vec<Option<i64>> = kept.iter().map(|&e| if inside(e) { self.labels[e] } else { None }).collect();
        let active = labels.iter().position(|&l| l == Some(hi)).unwrap();
        Ok(MarkedBipolar { map: sub, labels, active, first_label: lo, last_label: hi })
    }

    /// Restriction of `T(m*)` to explored edges, planted on the integers.
    pub fn dual_forest(&self) -> PlantedForest {
        let m = &self.map;
        let n = (self.last_label - self.first_label + 1) as usize;
        let lab = |e: usize| self.labels[e].map(|l| (l - self.first_label) as usize);
        // heights along the right boundary relative to the active edge
        let rb = &m.f_lb[m.right_outer];
        let pos_active = rb.iter().position(|&e| e == self.active).expect("active edge on the right boundary");
        let mut rb_height = vec![None; m.n_edges()];
        for (k, &e) in rb.iter().enumerate() {
            rb_height[e] = Some(k as i64 - pos_active as i64);
        }
        let dual = m.dual();
        let dtree = dual.down_right_tree();
        let drank = dtree.ranks();
        let mut children = vec![Vec::new(); n];
        let mut roots: Vec<(usize, i64, usize)> = Vec::new();
        for e in 0..m.n_edges() {
            let Some(le) = lab(e) else { continue };
            for &c in &dtree.children[e] {
                if let Some(lc) = lab(c) {
                    children[le].push(lc);
                }
            }
            let f = m.right[e];
            let parent = if f == m.right_outer { None } else { m.f_rb[f].last().copied() };
            match parent {
                Some(p) if lab(p).is_some() => {}
                Some(p) => {
                    let h = rb_height[p].expect("unexplored parent lies on the right boundary");
                    roots.push((le, h, drank[e]));
                }
                None => {
                    let h = rb_height[e].expect("parent-less dual edge lies on the right boundary");
                    roots.push((le, h, drank[e]));
                }
            }
        }
        roots.sort_by_key(|r| r.2);
        PlantedForest {
            start_time: self.first_label,
            roots: roots.iter().map(|r| r.0).collect(),
            root_index: roots.iter().map(|r| r.1).collect(),
            children,
        }
    }
}

const LEFT_OUTER: usize = 0;
const RIGHT_OUTER: usize = 1;

/// Inductive construction of the marked orientation of a walk with steps in `A`.
pub fn theta(w: &LatticeWalk) -> Result<MarkedBipolar> {
    for (k, s) in w.steps.iter().enumerate() {
        if !s.is_valid() {
            return Err(Error::BadIncrement { index: k + 1, dx: s.dx, dy: s.dy });
        }
    }
    let mut b = Builder::new(w.start_time);
    for s in &w.steps {
        if s.is_up() {
            b.up();
        } else {
            b.face((-s.dx) as usize, s.dy as usize);
        }
    }
    Ok(b.finish())
}

struct Builder {
    bottom: Vec<usize>,
    top: Vec<usize>,
    left: Vec<usize>,
    right: Vec<usize>,
    v_in: Vec<Vec<usize>>,
    v_out: Vec<Vec<usize>>,
    f_lb: Vec<Vec<usize>>,
    f_rb: Vec<Vec<usize>>,
    labels: Vec<Option<i64>>,
    left_side: VecDeque<usize>,
    /// right boundary from the bottom up to the active edge
    lower: Vec<usize>,
    /// right boundary above the active edge, nearest last
    upper: Vec<usize>,
    source: usize,
    sink: usize,
    active: usize,
    next_label: i64,
    first_label: i64,
}

impl Builder {
    fn new(first_label: i64) -> Self {
        Self {
            bottom: vec![0],
            top: vec![1],
            left: vec![LEFT_OUTER],
            right: vec![RIGHT_OUTER],
            v_in: vec![vec![], vec![0]],
            v_out: vec![vec![0], vec![]],
            f_lb: vec![vec![], vec![]],
            f_rb: vec![vec![], vec![]],
            labels: vec![Some(first_label)],
            left_side: VecDeque::from([0]),
            lower: vec![0],
            upper: vec![],
            source: 0,
            sink: 1,
            active: 0,
            next_label: first_label + 1,
            first_label,
        }
    }

    fn new_vertex(&mut self) -> usize {
        self.v_in.push(Vec::new());
        self.v_out.push(Vec::new());
        self.v_in.len() - 1
    }

    fn new_edge(&mut self, b: usize, t: usize, l: usize, r: usize) -> usize {
        self.bottom.push(b);
        self.top.push(t);
        self.left.push(l);
        self.right.push(r);
        self.labels.push(None);
        self.bottom.len() - 1
    }

    fn activate(&mut self, e: usize) {
        self.labels[e] = Some(self.next_label);
        self.next_label += 1;
        self.active = e;
    }

    fn up(&mut self) {
        let e = match self.upper.pop() {
            Some(e) => e,
            None => {
                let t = self.new_vertex();
                let e = self.new_edge(self.sink, t, LEFT_OUTER, RIGHT_OUTER);
                self.v_out[self.sink].push(e);
                self.v_in[t].push(e);
                self.sink = t;
                self.left_side.push_back(e);
                e
            }
        };
        self.lower.push(e);
        self.activate(e);
    }

    fn face(&mut self, i: usize, j: usize) {
        let f = self.f_lb.len();
        self.f_lb.push(Vec::new());
        self.f_rb.push(Vec::new());
        // left side of the new face, top to bottom
        let mut glued = Vec::with_capacity(i + 1);
        for _ in 0..=i {
            let e = match self.lower.pop() {
                Some(e) => e,
                None => {
                    let s = self.new_vertex();
                    let e = self.new_edge(s, self.source, LEFT_OUTER, RIGHT_OUTER);
                    self.v_out[s].push(e);
                    self.v_in[self.source].insert(0, e);
                    self.source = s;
                    self.left_side.push_front(e);
                    e
                }
            };
            self.right[e] = f;
            glued.push(e);
        }
        glued.reverse();
        let b = self.bottom[glued[0]];
        let t = self.top[*glued.last().unwrap()];
        let mut side = Vec::with_capacity(j + 1);
        let mut cur = b;
        for k in 0..=j {
            let next = if k == j { t } else { self.new_vertex() };
            let e = self.new_edge(cur, next, f, RIGHT_OUTER);
            self.v_out[cur].push(e);
            self.v_in[next].push(e);
            side.push(e);
            cur = next;
        }
        self.f_lb[f] = glued;
        self.f_rb[f] = side.clone();
        for &e in side[1..].iter().rev() {
            self.upper.push(e);
        }
        self.lower.push(side[0]);
        self.activate(side[0]);
    }

    fn finish(mut self) -> MarkedBipolar {
        self.f_rb[LEFT_OUTER] = self.left_side.iter().copied().collect();
        let mut rb = self.lower.clone();
        rb.extend(self.upper.iter().rev());
        self.f_lb[RIGHT_OUTER] = rb;
        let last_label = self.next_label - 1;
        let map = BipolarOrientation {
            bottom: self.bottom,
            top: self.top,
            left: self.left,
            right: self.right,
            v_in: self.v_in,
            v_out: self.v_out,
            f_lb: self.f_lb,
            f_rb: self.f_rb,
            source: self.source,
            sink: self.sink,
            left_outer: LEFT_OUTER,
            right_outer: RIGHT_OUTER,
        };
        debug_assert!(map.validate().is_ok());
        MarkedBipolar { map, labels: self.labels, active: self.active, first_label: self.first_label, last_label }
    }
}

/// Plain orientation of a tandem walk.
pub fn theta_tandem(w: &TandemWalk) -> BipolarOrientation {
    theta(&w.to_lattice())
        .and_then(|m| m.to_plain())
        .expect("tandem walks give plain orientations")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coal::{fortree_linear, wc};
    use crate::rng::stream;
    use crate::walk::{enumerate_tandem, random_tandem_walk, reverse_swap, sample_step, Step};

    fn running() -> TandemWalk {
        validate_tandem(vec![(0, 2), (0, 3), (0, 3), (1, 2), (2, 1), (0, 3), (1, 2), (2, 1), (3, 0), (2, 0)]).unwrap()
    }

    fn small_walks(max: usize) -> impl Iterator<Item = TandemWalk> {
        (1..=max).flat_map(|n| enumerate_tandem(n).unwrap())
    }

    #[test]
    fn single_edge_base() {
        let m = theta(&LatticeWalk::from_steps(vec![]).unwrap()).unwrap();
        assert_eq!(m.map.n_edges(), 1);
        assert_eq!(m.labels, vec![Some(1)]);
        assert_eq!(m.map.canonical(), BipolarOrientation::single_edge());
        let p = m.to_plain().unwrap();
        assert_eq!(p.bow().values(), &[(0, 0)]);
        assert_eq!(p.op().values(), &[1]);
        assert_eq!(p.dual().canonical(), BipolarOrientation::single_edge());
        assert_eq!(p.reverse_orientation().canonical(), BipolarOrientation::single_edge());
        assert_eq!(p.down_right_tree().order, vec![0]);
    }

    #[test]
    fn running_example() {
        let m = theta_tandem(&running());
        m.validate().unwrap();
        assert_eq!(m.n_edges(), 10);
        assert_eq!(m.down_right_tree().order, (0..10).collect::<Vec<_>>());
        assert_eq!(m.bow(), running());
        assert_eq!(m.op().values(), &[8, 6, 5, 7, 9, 1, 2, 4, 10, 3]);
        // left outer face has 3 edges, right outer face 3 edges
        assert_eq!(m.f_rb[m.left_outer].len(), 3);
        assert_eq!(m.f_lb[m.right_outer].len(), 3);
    }

    #[test]
    fn non_tandem_walk_structure() {
        let w = LatticeWalk::from_values(5, &[(0, 0), (-2, 0), (-1, -1), (-4, 1)]).unwrap();
        let m = theta(&w).unwrap();
        m.map.validate().unwrap();
        assert_eq!((m.first_label, m.last_label), (5, 8));
        assert_eq!(m.labels.iter().filter(|l| l.is_some()).count(), 4);
        assert!(!m.is_fully_explored());
        assert_eq!(m.labels[m.active], Some(8));
    }

    #[test]
    fn bow_inverts_theta() {
        for w in small_walks(6) {
            let m = theta_tandem(&w);
            m.validate().unwrap();
            assert_eq!(m.down_right_tree().order, (0..w.len()).collect::<Vec<_>>());
            assert_eq!(m.bow(), w);
            // theta(bow(m)) is m itself up to isomorphism
            assert_eq!(theta_tandem(&m.bow()).canonical(), m.canonical());
        }
    }

    #[test]
    fn distinct_walks_give_distinct_maps() {
        for n in 1..=5 {
            let maps: std::collections::HashSet<_> =
                enumerate_tandem(n).unwrap().iter().map(|w| theta_tandem(w).canonical()).collect();
            assert_eq!(maps.len(), enumerate_tandem(n).unwrap().len());
        }
    }

    #[test]
    fn height_process_matches_walk() {
        for w in small_walks(6) {
            let m = theta_tandem(&w);
            let hp = m.down_right_tree().height_process();
            let want: Vec<usize> = std::iter::once(0).chain(w.xs().iter().map(|&x| x as usize + 1)).collect();
            assert_eq!(hp, want);
            // the reversed map's tree records Y backwards
            let hr = m.reverse_orientation().down_right_tree().height_process();
            let want: Vec<usize> = std::iter::once(0).chain(w.ys().iter().rev().map(|&y| y as usize + 1)).collect();
            assert_eq!(hr, want);
        }
    }

    #[test]
    fn face_steps_match_face_degrees() {
        for w in small_walks(6) {
            let m = theta_tandem(&w);
            let steps = w.steps();
            for (t, s) in steps.iter().enumerate() {
                if s.is_up() {
                    // consecutive in both trees: e_t is the parent of e_{t+1}
                    assert_eq!(m.top[t], m.bottom[t + 1]);
                } else {
                    let f = m.right[t];
                    assert_eq!(f, m.left[t + 1]);
                    assert_eq!(m.f_lb[f].len() as i64, -s.dx + 1);
                    assert_eq!(m.f_rb[f].len() as i64, s.dy + 1);
                }
            }
        }
    }

    #[test]
    fn duality() {
        for w in small_walks(5) {
            let m = theta_tandem(&w);
            let d = m.dual();
            d.validate().unwrap();
            assert_eq!(d.n_edges(), m.n_edges());
            assert_eq!(d.dual().canonical(), m.reverse_orientation().canonical());
            assert_eq!(d.dual().dual().dual().canonical(), m.canonical());
            assert_eq!(d.dual().dual().dual(), m);
        }
    }

    #[test]
    fn dual_rotates_permutation() {
        for w in small_walks(5) {
            let m = theta_tandem(&w);
            assert_eq!(m.dual().op(), m.op().rotate_star());
        }
    }

    #[test]
    fn reversal() {
        for w in small_walks(5) {
            let m = theta_tandem(&w);
            let r = m.reverse_orientation();
            r.validate().unwrap();
            assert_eq!(r.bow(), reverse_swap(&w));
            assert_eq!(r.reverse_orientation(), m);
            // T(m**) explores e_n, ..., e_1
            let order = r.down_right_tree().order;
            assert_eq!(order, (0..w.len()).rev().collect::<Vec<_>>());
        }
        let mut rng = stream(50, 0);
        for _ in 0..100 {
            let m = theta_tandem(&random_tandem_walk(1000, &mut rng));
            assert_eq!(m.reverse_orientation().reverse_orientation(), m);
        }
    }

    #[test]
    fn op_is_baxter_and_matches_cp() {
        for w in small_walks(6) {
            let m = theta_tandem(&w);
            let p = m.op();
            assert!(p.is_baxter());
            assert_eq!(p, wc(&w.to_lattice()).unwrap().cp().unwrap());
        }
    }

    #[test]
    fn dual_forest_equals_fortree_on_free_walks() {
        // all walks with steps in A on [1,k], coordinates bounded by 3
        let mut steps_set = vec![Step::UP];
        for i in 0..=3 {
            for j in 0..=3 {
                steps_set.push(Step::face(i, j));
            }
        }
        fn rec(k: usize, cur: &mut Vec<Step>, set: &[Step], f: &mut dyn FnMut(&[Step])) {
            f(cur);
            if cur.len() + 1 == k {
                return;
            }
            for &s in set {
                cur.push(s);
                rec(k, cur, set, f);
                cur.pop();
            }
        }
        let mut count = 0;
        rec(4, &mut Vec::new(), &steps_set, &mut |steps| {
            let w = LatticeWalk::with_origin(1, (0, 0), steps.to_vec()).unwrap();
            let m = theta(&w).unwrap();
            m.map.validate().unwrap();
            assert_eq!(m.dual_forest(), wc(&w).unwrap().fortree(), "{steps:?}");
            count += 1;
        });
        assert!(count > 1000);
    }

    #[test]
    fn dual_forest_random_and_tandem() {
        let mut rng = stream(51, 0);
        for len in [1usize, 2, 6, 30, 200] {
            for _ in 0..20 {
                let steps = (1..len).map(|_| sample_step(&mut rng)).collect();
                let w = LatticeWalk::with_origin(-3, (0, 0), steps).unwrap();
                assert_eq!(theta(&w).unwrap().dual_forest(), fortree_linear(&w));
            }
        }
        // for a plain map the forest is T(m*) cut at its root
        let m = theta(&running().to_lattice()).unwrap();
        let f = m.dual_forest();
        assert!(f.root_index.iter().all(|&h| h <= 0));
        let t = m.to_plain().unwrap().dual().down_right_tree();
        assert_eq!(f.roots, t.roots);
        assert_eq!(f.children, t.children);
    }

    #[test]
    fn restriction_is_theta_of_restricted_walk() {
        let w = running().to_lattice();
        let m = theta(&w).unwrap();
        assert_eq!(m.restrict(1, 10).unwrap().canonical(), m.canonical());
        for k in 1..=10 {
            let sub = m.restrict(1, k).unwrap();
            assert_eq!(sub.canonical(), theta(&w.restrict(1, k).unwrap()).unwrap().canonical());
        }
        assert!(m.restrict(0, 3).is_err());
        let mut rng = stream(52, 0);
        for _ in 0..100 {
            use rand::Rng;
            let len = rng.gen_range(1..40);
            let steps = (1..len).map(|_| sample_step(&mut rng)).collect();
            let w = LatticeWalk::with_origin(1, (0, 0), steps).unwrap();
            let m = theta(&w).unwrap();
            let a = rng.gen_range(1..=len as i64);
            let b = rng.gen_range(a..=len as i64);
            let c = rng.gen_range(a..=b);
            let d = rng.gen_range(c..=b);
            let r = m.restrict(a, b).unwrap();
            assert_eq!(r.canonical(), theta(&w.restrict(a, b).unwrap()).unwrap().canonical());
            assert_eq!(r.restrict(c, d).unwrap().canonical(), m.restrict(c, d).unwrap().canonical());
        }
    }

    #[test]
    fn degree_bound() {
        let check = |w: &LatticeWalk| {
            let m = theta(w).unwrap();
            let z = wc(w).unwrap();
            let (a, b) = (z.start_time(), z.end_time());
            for i in a..=b {
                let tr = z.trajectory(i).unwrap();
                let at = |t: i64| tr[(t - i) as usize];
                // the search starts at i itself: an up step at i + 1 already leaves top(e_i)
                let Some(j) = (i..b).find(|&j| at(j) == 0 && at(j + 1) < 0) else { continue };
                let Some(s) = (j + 2..=b).find(|&s| at(s) >= 0) else { continue };
                let e = m.edge_with_label(i).unwrap();
                assert!(m.map.top_outdegree(e) as i64 <= s - j - 1);
                for &o in &m.map.v_out[m.map.top[e]] {
                    let l = m.labels[o].unwrap();
                    assert!(j < l && l < s);
                }
            }
        };
        for w in small_walks(6) {
            check(&w.to_lattice());
        }
        let mut rng = stream(53, 0);
        for _ in 0..50 {
            check(&random_tandem_walk(300, &mut rng).to_lattice());
        }
    }

    #[test]
    fn degree_bound_needs_start_at_i() {
        // with the search for j strictly after i, the bound fails here for i = 1
        let w = validate_tandem(vec![(0, 1), (1, 0), (1, 1), (0, 1), (1, 0), (0, 0)]).unwrap();
        let m = theta(&w.to_lattice()).unwrap();
        let z = wc(&w.to_lattice()).unwrap();
        assert_eq!(z.trajectory(1).unwrap(), &[0, -1, -1, 0, -1, 0]);
        let (j, s) = (4, 6);
        assert_eq!(m.map.top_outdegree(m.edge_with_label(1).unwrap()), 2);
        assert!(2 > s - j - 1);
    }

    #[test]
    fn dual_heights_are_local_times() {
        use crate::coal::{pcw, wpc};
        for w in small_walks(5) {
            let n = w.len() as i64;
            let m = theta_tandem(&w);
            let z = wc(&w.to_lattice()).unwrap();
            let sigma = z.cp().unwrap();
            let xstar = m.dual().bow().xs();
            for i in 1..=n {
                let si = sigma.at(i as usize);
                assert_eq!(xstar[si - 1], z.local_time(i, n).unwrap() as i64 - 1);
            }
            let (z, zr) = wpc(&w).unwrap();
            assert_eq!(pcw(&z, &zr).unwrap(), m.dual().bow());
        }
    }
}
