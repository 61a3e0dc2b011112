//! Combinatorial plane graphs and their duals.
//!
//! A plane graph is a graph plus a rotation system: for every vertex, the
//! cyclic counter-clockwise order of the darts leaving it. Dart `2e` runs
//! along edge `e` from its smaller endpoint to its larger one, dart `2e + 1`
//! runs back. Faces are traced keeping the face on the left of each dart.

use super::{EdgeId, FiniteGraph, VertexId};
use crate::error::{Error, Result};

pub type Dart = usize;

#[derive(Clone, Debug)]
pub struct PlaneGraph {
    graph: FiniteGraph,
    rotation: Vec<Vec<Dart>>,
    faces: Vec<Vec<Dart>>,
    face_of: Vec<usize>,
}

impl PlaneGraph {
    /// Reads the rotation system off a straight-line drawing in the plane.
    pub fn from_embedding(graph: FiniteGraph) -> Result<Self> {
        let emb = graph.embedding().ok_or(Error::MissingEmbedding)?;
        if emb.dim != 2 {
            return Err(Error::MissingEmbedding);
        }
        let mut pts = Vec::with_capacity(graph.n_vertices());
        for v in 0..graph.n_vertices() {
            let p = graph.coords(v).ok_or(Error::MissingEmbedding)?;
            pts.push((p[0], p[1]));
        }
        let mut rotation = vec![Vec::new(); graph.n_vertices()];
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            if u == v {
                return Err(Error::NonPlanar(0));
            }
            rotation[u].push(2 * e);
            rotation[v].push(2 * e + 1);
        }
        for (v, darts) in rotation.iter_mut().enumerate() {
            let angle = |d: &Dart| {
                let w = dart_head(&graph, *d);
                let (dx, dy) = (pts[w].0 - pts[v].0, pts[w].1 - pts[v].1);
                (dy as f64).atan2(dx as f64)
            };
            darts.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
            // Coincident directions mean overlapping edges in the drawing.
            for w in darts.windows(2) {
                if angle(&w[0]) == angle(&w[1]) {
                    return Err(Error::NonPlanar(0));
                }
            }
        }
        Self::from_rotation(graph, rotation)
    }

    /// Builds a plane graph from an explicit rotation system and checks that
    /// it describes a sphere embedding (`V - E + F = 2`).
    pub fn from_rotation(graph: FiniteGraph, rotation: Vec<Vec<Dart>>) -> Result<Self> {
        let n_darts = 2 * graph.n_edges();
        let mut position = vec![(usize::MAX, usize::MAX); n_darts];
        for (v, darts) in rotation.iter().enumerate() {
            for (i, &d) in darts.iter().enumerate() {
                if d >= n_darts || dart_tail(&graph, d) != v || position[d].0 != usize::MAX {
                    return Err(Error::InvalidParameter(format!("bad rotation entry {d} at vertex {v}")));
                }
                position[d] = (v, i);
            }
        }
        if position.iter().any(|p| p.0 == usize::MAX) {
            return Err(Error::InvalidParameter("rotation system misses darts".into()));
        }
        let next_in_face = |d: Dart| -> Dart {
            let twin = d ^ 1;
            let (v, i) = position[twin];
            let k = rotation[v].len();
            rotation[v][(i + k - 1) % k]
        };
        let mut face_of = vec![usize::MAX; n_darts];
        let mut faces = Vec::new();
        for start in 0..n_darts {
            if face_of[start] != usize::MAX {
                continue;
            }
            let mut face = Vec::new();
            let mut d = start;
            loop {
                face_of[d] = faces.len();
                face.push(d);
                d = next_in_face(d);
                if d == start {
                    break;
                }
            }
            faces.push(face);
        }
        let euler = graph.n_vertices() as i64 - graph.n_edges() as i64 + faces.len() as i64;
        if euler != 2 {
            return Err(Error::NonPlanar(euler));
        }
        Ok(PlaneGraph { graph, rotation, faces, face_of })
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    pub fn rotation(&self) -> &[Vec<Dart>] {
        &self.rotation
    }

    /// Faces as cyclic dart sequences, each face on the left of its darts.
    pub fn faces(&self) -> &[Vec<Dart>] {
        &self.faces
    }

    pub fn face_left_of(&self, d: Dart) -> usize {
        self.face_of[d]
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
}

pub fn dart_edge(d: Dart) -> EdgeId {
    d / 2
}

pub fn dart_tail(g: &FiniteGraph, d: Dart) -> VertexId {
    let (u, v) = g.endpoints(d / 2);
    if d % 2 == 0 {
        u
    } else {
        v
    }
}

pub fn dart_head(g: &FiniteGraph, d: Dart) -> VertexId {
    dart_tail(g, d ^ 1)
}

/// The dual plane graph: one vertex per face, one dual edge per edge.
///
/// Dual edge `i` crosses primal edge `i`; the returned vector spells the
/// bijection out explicitly. Bridges become self-loops and edges sharing two
/// faces become parallel dual edges.
pub fn planar_dual(pg: &PlaneGraph) -> Result<(PlaneGraph, Vec<EdgeId>)> {
    let g = pg.graph();
    let m = g.n_edges();
    let mut dual_edges = Vec::with_capacity(m);
    for e in 0..m {
        dual_edges.push((pg.face_left_of(2 * e), pg.face_left_of(2 * e + 1)));
    }
    let dual = FiniteGraph::new(pg.n_faces(), dual_edges.clone(), vec![])?;
    // Primal dart d is crossed by the dual dart leaving the face on its left.
    let dual_dart = |d: Dart| -> Dart {
        let e = dart_edge(d);
        let (a, b) = dual_edges[e];
        if a == b {
            d
        } else if dual.endpoints(e).0 == pg.face_left_of(d) {
            2 * e
        } else {
            2 * e + 1
        }
    };
    let rotation = pg
        .faces()
        .iter()
        .map(|face| face.iter().map(|&d| dual_dart(d)).collect())
        .collect();
    let dual = PlaneGraph::from_rotation(dual, rotation)?;
    Ok((dual, (0..m).collect()))
}
