//! Contours on the dual of `Z^2`.
//!
//! A dual point `(x, y)` stands for the plaquette centre `(x + 1/2, y + 1/2)`.
//! A directed dual bond crosses exactly one primal bond; the primal endpoint
//! on the left of the dual bond is its tail. A contour is a closed dual walk
//! crossing each primal bond at most once, for which some bounded component of
//! `Z^2` minus the crossed bonds has inner boundary equal to the set of
//! tails. Contours are walks up to cyclic rotation; the stored rotation is
//! the lexicographically smallest one starting at the smallest dual point.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{EdgeId, FiniteGraph, VertexId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DualPoint {
    pub x: i64,
    pub y: i64,
}

impl DualPoint {
    pub fn new(x: i64, y: i64) -> Self {
        DualPoint { x, y }
    }

    fn step(self, dir: usize) -> DualPoint {
        let (dx, dy) = STEPS[dir];
        DualPoint::new(self.x + dx, self.y + dy)
    }

    /// The four faces of the plaquette centred at this dual point, as pairs
    /// of lattice points.
    pub fn plaquette_faces(self) -> [([i64; 2], [i64; 2]); 4] {
        let (x, y) = (self.x, self.y);
        [
            ([x, y], [x + 1, y]),
            ([x + 1, y], [x + 1, y + 1]),
            ([x, y + 1], [x + 1, y + 1]),
            ([x, y], [x, y + 1]),
        ]
    }
}

const STEPS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// The primal bond crossed by the dual bond `from -> to`, as (tail, head).
pub fn crossed_bond(from: DualPoint, to: DualPoint) -> Option<([i64; 2], [i64; 2])> {
    let (x, y) = (from.x, from.y);
    match (to.x - x, to.y - y) {
        (0, 1) => Some(([x, y + 1], [x + 1, y + 1])),
        (0, -1) => Some(([x + 1, y], [x, y])),
        (-1, 0) => Some(([x, y], [x, y + 1])),
        (1, 0) => Some(([x + 1, y + 1], [x + 1, y])),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    /// Cyclic sequence; the closing return to the first point is implicit.
    pub dual_vertices: Vec<DualPoint>,
    pub dual_bonds: Vec<(DualPoint, DualPoint)>,
    /// Box edge ids of the crossed primal bonds, in walk order.
    pub primal_bonds: Vec<EdgeId>,
    /// Tail vertex of each crossed bond, in walk order.
    pub tails: Vec<VertexId>,
    /// `int(γ)`, sorted.
    pub interior: Vec<VertexId>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.dual_bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dual_bonds.is_empty()
    }

    /// Validates a closed dual walk against the contour definition inside a
    /// free two-dimensional box. Returns `None` when the walk is not a
    /// contour (or leaves the box).
    pub fn from_dual_walk(boxg: &FiniteGraph, walk: &[DualPoint]) -> Option<Contour> {
        let n = walk.len();
        if n < 4 {
            return None;
        }
        let mut bonds = Vec::with_capacity(n);
        let mut primal = Vec::with_capacity(n);
        let mut tails = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (walk[i], walk[(i + 1) % n]);
            let (t, h) = crossed_bond(a, b)?;
            let tv = boxg.vertex_at(&t)?;
            let hv = boxg.vertex_at(&h)?;
            primal.push(boxg.edge_between(tv, hv)?);
            tails.push(tv);
            bonds.push((a, b));
        }
        // each primal bond is crossed at most once
        let distinct: HashSet<_> = primal.iter().collect();
        if distinct.len() != n {
            return None;
        }
        let interior = interior_component(boxg, &primal, tails[0])?;
        let removed: HashSet<EdgeId> = primal.iter().copied().collect();
        let in_int = |v: VertexId| interior.binary_search(&v).is_ok();
        // Inner boundary of the component seen as a subgraph of Z^2: vertices
        // incident to a bond that is not an edge of the component.
        let mut inner: BTreeSet<VertexId> = BTreeSet::new();
        for &v in &interior {
            for &e in boxg.incident(v) {
                if removed.contains(&e) || !in_int(boxg.other(e, v)) {
                    inner.insert(v);
                }
            }
            if boxg.is_boundary(v) {
                return None;
            }
        }
        let tail_set: BTreeSet<VertexId> = tails.iter().copied().collect();
        if inner != tail_set {
            return None;
        }
        let rot = canonical_rotation(walk);
        let rotate = |i: usize| (i + rot) % n;
        Some(Contour {
            dual_vertices: (0..n).map(|i| walk[rotate(i)]).collect(),
            dual_bonds: (0..n).map(|i| bonds[rotate(i)]).collect(),
            primal_bonds: (0..n).map(|i| primal[rotate(i)]).collect(),
            tails: (0..n).map(|i| tails[rotate(i)]).collect(),
            interior,
        })
    }

    /// Edges of `int(γ)`: both endpoints inside and not crossed.
    pub fn interior_edges(&self, boxg: &FiniteGraph) -> Vec<EdgeId> {
        let crossed: HashSet<EdgeId> = self.primal_bonds.iter().copied().collect();
        let mut out = BTreeSet::new();
        for &v in &self.interior {
            for &e in boxg.incident(v) {
                let w = boxg.other(e, v);
                if !crossed.contains(&e) && self.interior.binary_search(&w).is_ok() {
                    out.insert(e);
                }
            }
        }
        out.into_iter().collect()
    }

    /// Edges that must be hard for a q-contour: faces of plaquettes centred
    /// at contour vertices that are edges of `int(γ)`.
    pub fn required_hard(&self, boxg: &FiniteGraph) -> Vec<EdgeId> {
        let interior: HashSet<EdgeId> = self.interior_edges(boxg).into_iter().collect();
        let mut out = BTreeSet::new();
        for p in &self.dual_vertices {
            for (a, b) in p.plaquette_faces() {
                if let Some(e) = boxg.edge_at(&a, &b) {
                    if interior.contains(&e) {
                        out.insert(e);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Crossed primal bonds without repetition, sorted.
    pub fn crossed_edges(&self) -> Vec<EdgeId> {
        let set: BTreeSet<EdgeId> = self.primal_bonds.iter().copied().collect();
        set.into_iter().collect()
    }
}

/// Component of `start` in the box minus `removed`, sorted, or `None` if it
/// touches the box boundary (that is, is unbounded in `Z^2`).
fn interior_component(boxg: &FiniteGraph, removed: &[EdgeId], start: VertexId) -> Option<Vec<VertexId>> {
    let removed: HashSet<EdgeId> = removed.iter().copied().collect();
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        if boxg.is_boundary(v) {
            return None;
        }
        for &e in boxg.incident(v) {
            if removed.contains(&e) {
                continue;
            }
            let w = boxg.other(e, v);
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    let mut out: Vec<_> = seen.into_iter().collect();
    out.sort_unstable();
    Some(out)
}

/// Offset of the lexicographically smallest rotation among those starting at
/// an occurrence of the minimal point.
fn canonical_rotation(walk: &[DualPoint]) -> usize {
    let n = walk.len();
    let min = *walk.iter().min().expect("non-empty walk");
    (0..n)
        .filter(|&i| walk[i] == min)
        .min_by(|&i, &j| {
            let a = (0..n).map(|k| walk[(i + k) % n]);
            let b = (0..n).map(|k| walk[(j + k) % n]);
            a.cmp(b)
        })
        .expect("minimum occurs")
}

#[derive(Clone, Debug, Default)]
pub struct ContourEnumeration {
    pub contours: Vec<Contour>,
    /// Set when `max_len < 6`: no contour can surround an edge.
    pub too_short: bool,
}

/// All contours of length at most `max_len` inside the free two-dimensional
/// box `boxg` whose interior contains edge `e` as an interior edge.
pub fn enumerate_contours_around(e: EdgeId, max_len: usize, boxg: &FiniteGraph) -> Result<ContourEnumeration> {
    let emb = boxg.embedding().ok_or(Error::MissingEmbedding)?;
    if emb.dim != 2 {
        return Err(Error::InvalidParameter("contours live in two dimensions".into()));
    }
    if e >= boxg.n_edges() {
        return Err(Error::EdgeOutOfRange { edge: e, n_edges: boxg.n_edges() });
    }
    if max_len < 6 {
        log::warn!("no contour shorter than 6 surrounds an edge (max_len = {max_len})");
        return Ok(ContourEnumeration { contours: vec![], too_short: true });
    }
    let (u, v) = boxg.endpoints(e);
    let (pu, pv) = match (boxg.coords(u), boxg.coords(v)) {
        (Some(a), Some(b)) => (a.to_vec(), b.to_vec()),
        _ => return Err(Error::MissingEmbedding),
    };
    // Dual points usable by a walk: centres of plaquettes lying in the box.
    let in_box = |p: DualPoint| boxg.vertex_at(&[p.x, p.y]).is_some() && boxg.vertex_at(&[p.x + 1, p.y + 1]).is_some();
    let reach = (max_len / 2) as i64;
    let (xlo, xhi) = (pu[0].min(pv[0]) - reach, pu[0].max(pv[0]) + reach);
    let (ylo, yhi) = (pu[1].min(pv[1]) - reach, pu[1].max(pv[1]) + reach);

    let mut found: BTreeSet<Vec<DualPoint>> = BTreeSet::new();
    let mut contours = Vec::new();
    for sx in xlo..=xhi {
        for sy in ylo..=yhi {
            let start = DualPoint::new(sx, sy);
            if !in_box(start) {
                continue;
            }
            let mut walk = vec![start];
            let mut used: Vec<(DualPoint, DualPoint)> = Vec::new();
            search(start, max_len, &in_box, &mut walk, &mut used, &mut |closed: &[DualPoint]| {
                let rot = canonical_rotation(closed);
                let n = closed.len();
                let key: Vec<DualPoint> = (0..n).map(|i| closed[(i + rot) % n]).collect();
                if found.contains(&key) {
                    return;
                }
                if let Some(c) = Contour::from_dual_walk(boxg, closed) {
                    if c.interior_edges(boxg).binary_search(&e).is_ok() {
                        found.insert(key);
                        contours.push(c);
                    }
                }
            });
        }
    }
    contours.sort_by(|a, b| a.dual_vertices.cmp(&b.dual_vertices));
    Ok(ContourEnumeration { contours, too_short: false })
}

fn search(
    start: DualPoint,
    max_len: usize,
    in_box: &dyn Fn(DualPoint) -> bool,
    walk: &mut Vec<DualPoint>,
    used: &mut Vec<(DualPoint, DualPoint)>,
    visit: &mut dyn FnMut(&[DualPoint]),
) {
    let here = *walk.last().expect("walk starts at start");
    let steps_left = max_len - used.len();
    for dir in 0..4 {
        let next = here.step(dir);
        if next < start || !in_box(next) || used.contains(&(here, next)) {
            continue;
        }
        let back = ((next.x - start.x).abs() + (next.y - start.y).abs()) as usize;
        if back + 1 > steps_left {
            continue;
        }
        used.push((here, next));
        if next == start {
            visit(walk);
        }
        walk.push(next);
        if used.len() < max_len {
            search(start, max_len, in_box, walk, used, visit);
        }
        walk.pop();
        used.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::super::build_free_box;
    use super::*;

    fn dp(x: i64, y: i64) -> DualPoint {
        DualPoint::new(x, y)
    }

    #[test]
    fn crossing_puts_the_tail_on_the_left() {
        // north-going dual bond crosses a horizontal bond from west to east
        assert_eq!(crossed_bond(dp(0, -1), dp(0, 0)), Some(([0, 0], [1, 0])));
        assert_eq!(crossed_bond(dp(0, 0), dp(-1, 0)), Some(([0, 0], [0, 1])));
        assert_eq!(crossed_bond(dp(0, 0), dp(1, 1)), None);
    }

    #[test]
    fn domino_is_the_only_length_six_contour() {
        let b = build_free_box(2, 4).unwrap();
        let e = b.edge_at(&[0, 0], &[1, 0]).unwrap();
        assert!(enumerate_contours_around(e, 5, &b).unwrap().too_short);
        let found = enumerate_contours_around(e, 6, &b).unwrap();
        assert_eq!(found.contours.len(), 1);
        let c = &found.contours[0];
        assert_eq!(c.len(), 6);
        assert_eq!(c.interior.len(), 2);
        assert_eq!(c.dual_vertices[0], dp(-1, -1));
        assert_eq!(c.required_hard(&b), vec![e]);
    }

    #[test]
    fn clockwise_walks_are_not_contours() {
        let b = build_free_box(2, 3).unwrap();
        let ccw = [dp(-1, -1), dp(0, -1), dp(0, 0), dp(-1, 0)];
        let cw: Vec<_> = ccw.iter().rev().copied().collect();
        let c = Contour::from_dual_walk(&b, &ccw).unwrap();
        assert_eq!(c.interior, vec![b.vertex_at(&[0, 0]).unwrap()]);
        assert!(Contour::from_dual_walk(&b, &cw).is_none());
    }
}
