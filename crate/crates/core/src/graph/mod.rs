//! Finite multigraphs, lattice boxes, contractions and planar structure.
//!
//! Edges are stored with their endpoints ordered `(min, max)`, which fixes
//! the orientation used for currents and gradients: an edge points from its
//! smaller vertex id to its larger one. Lattice boxes number their vertices
//! lexicographically by coordinate, so this orientation agrees with the
//! coordinate-wise order on `Z^d`.

pub mod contour;
pub mod planar;
mod text;

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use contour::{enumerate_contours_around, Contour, ContourEnumeration, DualPoint};
pub use planar::{planar_dual, PlaneGraph};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Integer coordinates for (some of) the vertices of a graph.
///
/// Vertices created by merging several lattice points carry no coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub dim: usize,
    pub points: Vec<Option<Vec<i64>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGraph {
    n_vertices: usize,
    edges: Vec<(VertexId, VertexId)>,
    boundary: Vec<VertexId>,
    embedding: Option<Embedding>,
    incidence: Vec<Vec<EdgeId>>,
    coord_index: HashMap<Vec<i64>, VertexId>,
}

impl FiniteGraph {
    /// Builds a connected multigraph. Parallel edges and self-loops are kept.
    pub fn new(
        n_vertices: usize,
        edges: Vec<(VertexId, VertexId)>,
        boundary: Vec<VertexId>,
    ) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::InvalidParameter("graph needs at least one vertex".into()));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for &(u, v) in &edges {
            for w in [u, v] {
                if w >= n_vertices {
                    return Err(Error::VertexOutOfRange { vertex: w, n_vertices });
                }
            }
            normalized.push((u.min(v), u.max(v)));
        }
        let mut boundary = boundary;
        boundary.sort_unstable();
        boundary.dedup();
        if let Some(&b) = boundary.iter().find(|&&b| b >= n_vertices) {
            return Err(Error::VertexOutOfRange { vertex: b, n_vertices });
        }
        let mut incidence = vec![Vec::new(); n_vertices];
        for (e, &(u, v)) in normalized.iter().enumerate() {
            incidence[u].push(e);
            if v != u {
                incidence[v].push(e);
            }
        }
        let graph = FiniteGraph {
            n_vertices,
            edges: normalized,
            boundary,
            embedding: None,
            incidence,
            coord_index: HashMap::new(),
        };
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(graph)
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Result<Self> {
        if embedding.points.len() != self.n_vertices {
            return Err(Error::InvalidParameter(format!(
                "embedding lists {} points for {} vertices",
                embedding.points.len(),
                self.n_vertices
            )));
        }
        let mut index = HashMap::new();
        for (v, p) in embedding.points.iter().enumerate() {
            if let Some(p) = p {
                if p.len() != embedding.dim {
                    return Err(Error::InvalidParameter(format!(
                        "vertex {v} has a coordinate of dimension {} (expected {})",
                        p.len(),
                        embedding.dim
                    )));
                }
                if index.insert(p.clone(), v).is_some() {
                    return Err(Error::InvalidParameter(format!(
                        "two vertices share the coordinate {p:?}"
                    )));
                }
            }
        }
        self.coord_index = index;
        self.embedding = Some(embedding);
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.edges[e]
    }

    pub fn is_loop(&self, e: EdgeId) -> bool {
        let (u, v) = self.edges[e];
        u == v
    }

    pub fn boundary(&self) -> &[VertexId] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn coords(&self, v: VertexId) -> Option<&[i64]> {
        self.embedding.as_ref()?.points[v].as_deref()
    }

    pub fn vertex_at(&self, point: &[i64]) -> Option<VertexId> {
        self.coord_index.get(point).copied()
    }

    /// Edge ids incident to `v`; a self-loop is listed once.
    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.incidence[v]
    }

    /// The endpoint of `e` opposite to `v`.
    pub fn other(&self, e: EdgeId, v: VertexId) -> VertexId {
        let (a, b) = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Degree with self-loops counted twice.
    pub fn degree(&self, v: VertexId) -> usize {
        self.incidence[v]
            .iter()
            .map(|&e| if self.is_loop(e) { 2 } else { 1 })
            .sum()
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        let key = (u.min(v), u.max(v));
        self.incidence[u].iter().copied().find(|&e| self.edges[e] == key)
    }

    /// The edge joining the lattice points `a` and `b`, if both are vertices.
    pub fn edge_at(&self, a: &[i64], b: &[i64]) -> Option<EdgeId> {
        let u = self.vertex_at(a)?;
        let v = self.vertex_at(b)?;
        self.edge_between(u, v)
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_vertices];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &e in &self.incidence[v] {
                let w = self.other(e, v);
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n_vertices
    }

    /// Stable content hash of the vertex count, edge list and boundary.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"detcond-graph-v1");
        h.update((self.n_vertices as u64).to_le_bytes());
        h.update((self.edges.len() as u64).to_le_bytes());
        for &(u, v) in &self.edges {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        h.update((self.boundary.len() as u64).to_le_bytes());
        for &b in &self.boundary {
            h.update((b as u64).to_le_bytes());
        }
        h.finalize().into()
    }

    /// The connected subgraph spanned by `edge_ids`, with the map from new
    /// edge ids to the original ones. Vertices keep their relative order.
    pub fn edge_subgraph(&self, edge_ids: &[EdgeId]) -> Result<(FiniteGraph, Vec<EdgeId>)> {
        let mut keep: Vec<EdgeId> = edge_ids.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(Error::InvalidParameter("subgraph needs at least one edge".into()));
        }
        let mut used = vec![false; self.n_vertices];
        for &e in &keep {
            if e >= self.n_edges() {
                return Err(Error::EdgeOutOfRange { edge: e, n_edges: self.n_edges() });
            }
            let (u, v) = self.edges[e];
            used[u] = true;
            used[v] = true;
        }
        let mut relabel = vec![usize::MAX; self.n_vertices];
        let mut next = 0;
        for v in 0..self.n_vertices {
            if used[v] {
                relabel[v] = next;
                next += 1;
            }
        }
        let edges = keep
            .iter()
            .map(|&e| {
                let (u, v) = self.edges[e];
                (relabel[u], relabel[v])
            })
            .collect();
        let boundary = self
            .boundary
            .iter()
            .filter(|&&b| used[b])
            .map(|&b| relabel[b])
            .collect();
        let mut sub = FiniteGraph::new(next, edges, boundary)?;
        if let Some(emb) = &self.embedding {
            let points = (0..self.n_vertices)
                .filter(|&v| used[v])
                .map(|v| emb.points[v].clone())
                .collect();
            sub = sub.with_embedding(Embedding { dim: emb.dim, points })?;
        }
        Ok((sub, keep))
    }

    pub fn to_text(&self) -> String {
        text::write(self)
    }

    pub fn from_text(input: &str) -> Result<FiniteGraph> {
        text::parse(input)
    }
}

/// What to identify in [`contract`].
#[derive(Clone, Copy, Debug)]
pub enum ContractSet<'a> {
    Edges(&'a [EdgeId]),
    Vertices(&'a [VertexId]),
}

/// Result of a contraction, with provenance for vertices and edges.
#[derive(Clone, Debug)]
pub struct Contraction {
    pub graph: FiniteGraph,
    /// Old vertex id to new vertex id.
    pub vertex_map: Vec<VertexId>,
    /// Old edge id to new edge id; `None` for edges that became self-loops.
    pub edge_map: Vec<Option<EdgeId>>,
}

impl Contraction {
    /// New edge id to old edge id.
    pub fn edge_origin(&self) -> Vec<EdgeId> {
        let mut origin = vec![usize::MAX; self.graph.n_edges()];
        for (old, new) in self.edge_map.iter().enumerate() {
            if let Some(new) = new {
                origin[*new] = old;
            }
        }
        origin
    }
}

/// Identifies the endpoints of the given edges (or all the given vertices).
///
/// New vertex ids follow the smallest old id in each class. Self-loops are
/// dropped, parallel edges kept.
pub fn contract(g: &FiniteGraph, set: ContractSet<'_>) -> Result<Contraction> {
    let n = g.n_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let union = |a: usize, b: usize, parent: &mut Vec<usize>| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    match set {
        ContractSet::Edges(es) => {
            for &e in es {
                if e >= g.n_edges() {
                    return Err(Error::EdgeOutOfRange { edge: e, n_edges: g.n_edges() });
                }
                let (u, v) = g.endpoints(e);
                union(u, v, &mut parent);
            }
        }
        ContractSet::Vertices(vs) => {
            for &v in vs {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n_vertices: n });
                }
            }
            for w in vs.windows(2) {
                union(w[0], w[1], &mut parent);
            }
        }
    }
    let mut class_id = vec![usize::MAX; n];
    let mut vertex_map = vec![0; n];
    let mut next = 0;
    let mut members: Vec<Vec<VertexId>> = Vec::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        if class_id[r] == usize::MAX {
            class_id[r] = next;
            members.push(Vec::new());
            next += 1;
        }
        vertex_map[v] = class_id[r];
        members[class_id[r]].push(v);
    }
    let mut edges = Vec::new();
    let mut edge_map = vec![None; g.n_edges()];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let (a, b) = (vertex_map[u], vertex_map[v]);
        if a != b {
            edge_map[e] = Some(edges.len());
            edges.push((a, b));
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyAfterContraction);
    }
    let mut boundary: Vec<VertexId> = g.boundary().iter().map(|&b| vertex_map[b]).collect();
    boundary.sort_unstable();
    boundary.dedup();
    let mut graph = FiniteGraph::new(next, edges, boundary)?;
    if let Some(emb) = g.embedding() {
        let points = members
            .iter()
            .map(|m| if m.len() == 1 { emb.points[m[0]].clone() } else { None })
            .collect();
        graph = graph.with_embedding(Embedding { dim: emb.dim, points })?;
    }
    Ok(Contraction { graph, vertex_map, edge_map })
}

/// `Λ_n = [-n, n]^d ∩ Z^d` with nearest-neighbour edges, optionally wired.
pub fn build_box(d: usize, n: usize, wired: bool) -> Result<FiniteGraph> {
    if wired {
        Ok(build_wired_box(d, n)?.graph)
    } else {
        build_free_box(d, n)
    }
}

/// The free box; boundary is the set of points with some `|x_i| = n`.
pub fn build_free_box(d: usize, n: usize) -> Result<FiniteGraph> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!("box needs d >= 1 and n >= 1 (got d={d}, n={n})")));
    }
    let side = 2 * n + 1;
    let count = side
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidParameter("box too large".into()))?;
    let point = |mut idx: usize| -> Vec<i64> {
        let mut p = vec![0i64; d];
        for k in (0..d).rev() {
            p[k] = (idx % side) as i64 - n as i64;
            idx /= side;
        }
        p
    };
    let mut points = Vec::with_capacity(count);
    let mut edges = Vec::new();
    let mut boundary = Vec::new();
    for v in 0..count {
        let p = point(v);
        if p.iter().any(|&c| c.unsigned_abs() as usize == n) {
            boundary.push(v);
        }
        let mut stride = 1;
        for k in (0..d).rev() {
            if p[k] < n as i64 {
                edges.push((v, v + stride));
            }
            stride *= side;
        }
        points.push(Some(p));
    }
    // Order edges by tail vertex, then by direction index.
    edges.sort_by_key(|&(u, v)| (u, std::cmp::Reverse(v - u)));
    FiniteGraph::new(count, edges, boundary)?.with_embedding(Embedding { dim: d, points })
}

/// The wired box `Λ_n / ∂Λ_n` together with its provenance in the free box.
pub fn build_wired_box(d: usize, n: usize) -> Result<Contraction> {
    let free = build_free_box(d, n)?;
    let boundary = free.boundary().to_vec();
    contract(&free, ContractSet::Vertices(&boundary))
}

pub fn path(n_vertices: usize) -> Result<FiniteGraph> {
    let edges = (1..n_vertices).map(|v| (v - 1, v)).collect();
    let points = (0..n_vertices).map(|v| Some(vec![v as i64, 0])).collect();
    FiniteGraph::new(n_vertices, edges, vec![])?.with_embedding(Embedding { dim: 2, points })
}

pub fn cycle(n_vertices: usize) -> Result<FiniteGraph> {
    if n_vertices < 3 {
        return Err(Error::InvalidParameter("cycle needs at least 3 vertices".into()));
    }
    let mut edges: Vec<_> = (1..n_vertices).map(|v| (v - 1, v)).collect();
    edges.push((0, n_vertices - 1));
    FiniteGraph::new(n_vertices, edges, vec![])
}

pub fn complete(n_vertices: usize) -> Result<FiniteGraph> {
    let mut edges = Vec::new();
    for u in 0..n_vertices {
        for v in u + 1..n_vertices {
            edges.push((u, v));
        }
    }
    FiniteGraph::new(n_vertices, edges, vec![])
}

/// The unit triangle, embedded at `(0,0), (1,0), (0,1)`.
pub fn triangle() -> FiniteGraph {
    FiniteGraph::new(3, vec![(0, 1), (1, 2), (0, 2)], vec![])
        .and_then(|g| {
            g.with_embedding(Embedding {
                dim: 2,
                points: vec![Some(vec![0, 0]), Some(vec![1, 0]), Some(vec![0, 1])],
            })
        })
        .expect("triangle is valid")
}

/// `K_{1,k}` with the leaves as boundary.
pub fn star(k: usize) -> Result<FiniteGraph> {
    let edges = (1..=k).map(|v| (0, v)).collect();
    FiniteGraph::new(k + 1, edges, (1..=k).collect())
}

/// Rectangular grid with `rows x cols` vertices at coordinates `(c, r)`.
pub fn grid(rows: usize, cols: usize) -> Result<FiniteGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("grid needs positive dimensions".into()));
    }
    let id = |r: usize, c: usize| c * rows + r;
    let mut edges = Vec::new();
    let mut points = vec![None; rows * cols];
    for c in 0..cols {
        for r in 0..rows {
            points[id(r, c)] = Some(vec![c as i64, r as i64]);
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
        }
    }
    FiniteGraph::new(rows * cols, edges, vec![])?.with_embedding(Embedding { dim: 2, points })
}

/// Named test graphs used by the command line and the audits.
pub fn builtin(name: &str) -> Result<FiniteGraph> {
    match name {
        "triangle" => Ok(triangle()),
        "c4" | "cycle4" => cycle(4),
        "k4" => complete(4),
        "path3" => path(3),
        "edge" => path(2),
        "grid2x2" => grid(2, 2),
        "grid2x3" => grid(2, 3),
        "grid3x3" | "box1" => build_free_box(2, 1),
        "wired1" => build_box(2, 1, true),
        "star4" => star(4),
        other => {
            // box:<d>:<n>[:wired]
            let parts: Vec<&str> = other.split(':').collect();
            if parts.first() == Some(&"box") && (parts.len() == 3 || parts.len() == 4) {
                let d = parts[1]
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad dimension in {other}")))?;
                let n = parts[2]
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad radius in {other}")))?;
                let wired = match parts.get(3) {
                    None | Some(&"free") => false,
                    Some(&"wired") => true,
                    Some(bc) => {
                        return Err(Error::InvalidParameter(format!("unknown boundary condition {bc}")))
                    }
                };
                build_box(d, n, wired)
            } else {
                Err(Error::InvalidParameter(format!("unknown builtin graph {other}")))
            }
        }
    }
}

/// The edge at the origin pointing in direction `e_1` of an embedded box.
pub fn central_edge(g: &FiniteGraph) -> Option<EdgeId> {
    let emb = g.embedding()?;
    let origin = vec![0i64; emb.dim];
    let mut unit = origin.clone();
    *unit.first_mut()? = 1;
    if let Some(e) = g.edge_at(&origin, &unit) {
        return Some(e);
    }
    // In a wired box of radius 1 the neighbour is the merged boundary vertex.
    let o = g.vertex_at(&origin)?;
    let merged = *g.boundary().first()?;
    g.edge_between(o, merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_boxes_have_expected_size() {
        let g = build_box(1, 1, false).unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (3, 2));
        let g = build_box(2, 1, false).unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (9, 12));
        assert_eq!(g.boundary().len(), 8);
        let w = build_box(2, 1, true).unwrap();
        assert_eq!((w.n_vertices(), w.n_edges()), (2, 4));
        assert!(w.edges().iter().all(|&e| e == (0, 1)));
        assert_eq!(w.boundary(), &[0]);
    }

    #[test]
    fn box_edges_point_in_positive_directions() {
        let g = build_box(2, 2, false).unwrap();
        for &(u, v) in g.edges() {
            let (a, b) = (g.coords(u).unwrap(), g.coords(v).unwrap());
            let diff: Vec<i64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
            assert_eq!(diff.iter().sum::<i64>(), 1);
            assert!(diff.iter().all(|&c| c >= 0));
        }
        assert_eq!(g.n_edges(), 2 * 5 * 4);
    }

    #[test]
    fn contraction_examples() {
        let t = triangle();
        let c = contract(&t, ContractSet::Edges(&[0])).unwrap();
        assert_eq!((c.graph.n_vertices(), c.graph.n_edges()), (2, 2));
        assert_eq!(c.edge_map, vec![None, Some(0), Some(1)]);

        let free = build_box(2, 1, false).unwrap();
        let b = free.boundary().to_vec();
        let c = contract(&free, ContractSet::Vertices(&b)).unwrap();
        assert_eq!(c.graph, build_box(2, 1, true).unwrap());

        let p = path(3).unwrap();
        assert!(matches!(
            contract(&p, ContractSet::Edges(&[0, 1])),
            Err(Error::EmptyAfterContraction)
        ));
    }

    #[test]
    fn contraction_vertex_count() {
        let g = build_box(2, 2, false).unwrap();
        // two disjoint pairs of adjacent edges merge 3 + 3 vertices into 2
        let e1 = g.edge_at(&[-2, -2], &[-2, -1]).unwrap();
        let e2 = g.edge_at(&[-2, -1], &[-2, 0]).unwrap();
        let e3 = g.edge_at(&[1, 1], &[2, 1]).unwrap();
        let e4 = g.edge_at(&[1, 1], &[1, 2]).unwrap();
        let c = contract(&g, ContractSet::Edges(&[e1, e2, e3, e4])).unwrap();
        assert_eq!(c.graph.n_vertices(), g.n_vertices() - 4);
    }

    #[test]
    fn disconnected_input_is_rejected() {
        assert!(matches!(
            FiniteGraph::new(4, vec![(0, 1), (2, 3)], vec![]),
            Err(Error::Disconnected)
        ));
        assert!(matches!(
            FiniteGraph::new(2, vec![(0, 2)], vec![]),
            Err(Error::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn handshake_with_loops() {
        let g = FiniteGraph::new(2, vec![(0, 1), (1, 1), (0, 1)], vec![]).unwrap();
        let total: usize = (0..2).map(|v| g.degree(v)).sum();
        assert_eq!(total, 2 * g.n_edges());
    }

    #[test]
    fn central_edge_is_found() {
        for (n, wired) in [(1, false), (1, true), (3, false), (3, true)] {
            let g = build_box(2, n, wired).unwrap();
            let e = central_edge(&g).unwrap();
            let (u, v) = g.endpoints(e);
            let origin = g.vertex_at(&[0, 0]).unwrap();
            assert!(u == origin || v == origin);
        }
    }

    #[test]
    fn edge_subgraph_keeps_order() {
        let t = triangle();
        let (sub, keep) = t.edge_subgraph(&[2, 0]).unwrap();
        assert_eq!(keep, vec![0, 2]);
        assert_eq!(sub.n_vertices(), 3);
        assert_eq!(sub.n_edges(), 2);
        assert!(t.edge_subgraph(&[]).is_err());
    }
}
