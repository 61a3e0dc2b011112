//! Weighted spanning tree measures `Q_κ(t) ∝ Π_{e∈t} κ_e`.
//!
//! Small graphs are handled by explicit enumeration of all spanning trees;
//! larger ones through transfer currents. Sampling uses Wilson's algorithm
//! with conductance-weighted random walks.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, FiniteGraph};
use crate::laplacian::{self, Conductances};

/// Largest edge count for explicit tree enumeration.
pub const TREE_ENUM_CAP: usize = 16;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// All spanning trees as sorted edge lists, by recursive
/// deletion–contraction over the edges in id order.
pub fn spanning_trees(g: &FiniteGraph) -> Result<Vec<Vec<EdgeId>>> {
    if g.n_edges() > TREE_ENUM_CAP {
        return Err(Error::SizeCap { what: "edges for tree enumeration", actual: g.n_edges(), limit: TREE_ENUM_CAP });
    }
    let need = g.n_vertices() - 1;
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(need);
    let parent: Vec<usize> = (0..g.n_vertices()).collect();
    fn rec(
        g: &FiniteGraph,
        e: EdgeId,
        need: usize,
        parent: Vec<usize>,
        chosen: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<EdgeId>>,
    ) {
        if chosen.len() == need {
            out.push(chosen.clone());
            return;
        }
        if e == g.n_edges() || g.n_edges() - e < need - chosen.len() {
            return;
        }
        let (u, v) = g.endpoints(e);
        let mut p = parent.clone();
        let (ru, rv) = (find(&mut p, u), find(&mut p, v));
        if ru != rv {
            // contract e
            p[ru.max(rv)] = ru.min(rv);
            chosen.push(e);
            rec(g, e + 1, need, p, chosen, out);
            chosen.pop();
        }
        // delete e
        rec(g, e + 1, need, parent, chosen, out);
    }
    rec(g, 0, need, parent, &mut chosen, &mut out);
    Ok(out)
}

pub fn tree_weight(tree: &[EdgeId], w: &[f64]) -> f64 {
    tree.iter().map(|&e| w[e]).product()
}

/// `|V| · Σ_t w(κ, t)` by explicit enumeration.
pub fn kirchhoff_sum(g: &FiniteGraph, k: &Conductances) -> Result<f64> {
    k.check(g)?;
    let w = k.weights();
    let trees = spanning_trees(g)?;
    Ok(g.n_vertices() as f64 * trees.iter().map(|t| tree_weight(t, &w)).sum::<f64>())
}

/// `Σ_t w(t)` by memoised deletion–contraction on the multigraph structure.
/// Independent of the explicit listing and of any determinant.
pub fn tree_partition(g: &FiniteGraph, w: &[f64]) -> Result<f64> {
    if w.len() != g.n_edges() {
        return Err(Error::InvalidParameter("weight vector has wrong length".into()));
    }
    let edges: Vec<(usize, usize, f64)> = g.edges().iter().zip(w).map(|(&(u, v), &c)| (u, v, c)).collect();
    let mut memo = HashMap::new();
    Ok(partition_rec(g.n_vertices(), edges, &mut memo))
}

type Key = (usize, Vec<(usize, usize, u64)>);

fn normalise(n: usize, edges: Vec<(usize, usize, f64)>) -> (usize, Vec<(usize, usize, f64)>) {
    // drop loops, merge parallel edges
    let mut merged: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for (u, v, c) in edges {
        if u != v {
            *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += c;
        }
    }
    (n, merged.into_iter().map(|((u, v), c)| (u, v, c)).collect())
}

fn partition_rec(n: usize, edges: Vec<(usize, usize, f64)>, memo: &mut HashMap<Key, f64>) -> f64 {
    let (n, edges) = normalise(n, edges);
    if n == 1 {
        return 1.0;
    }
    if edges.is_empty() {
        return 0.0;
    }
    let key: Key = (n, edges.iter().map(|&(u, v, c)| (u, v, c.to_bits())).collect());
    if let Some(&z) = memo.get(&key) {
        return z;
    }
    let (a, b, c) = edges[edges.len() - 1];
    let rest: Vec<_> = edges[..edges.len() - 1].to_vec();
    // contraction: merge b into a, relabel to keep ids contiguous
    let relabel = |x: usize| -> usize {
        let x = if x == b { a } else { x };
        if x > b {
            x - 1
        } else {
            x
        }
    };
    let contracted: Vec<_> = rest.iter().map(|&(u, v, w)| (relabel(u), relabel(v), w)).collect();
    let with = c * partition_rec(n - 1, contracted, memo);
    let without = if connected(n, &rest) { partition_rec(n, rest, memo) } else { 0.0 };
    let z = with + without;
    memo.insert(key, z);
    z
}

fn connected(n: usize, edges: &[(usize, usize, f64)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    let mut comps = n;
    for &(u, v, _) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a.max(b)] = a.min(b);
            comps -= 1;
        }
    }
    comps == 1
}

/// Immutable weighted spanning tree measure.
#[derive(Clone, Debug)]
pub struct TreeMeasure<'g> {
    graph: &'g FiniteGraph,
    cond: Conductances,
    log_partition: f64,
    trees: Option<Vec<Vec<EdgeId>>>,
}

impl<'g> TreeMeasure<'g> {
    pub fn new(graph: &'g FiniteGraph, cond: Conductances) -> Result<Self> {
        cond.check(graph)?;
        let log_partition = laplacian::log_det_pinned_weights(graph, &cond.weights(), laplacian::default_pin(graph))?;
        let trees = if graph.n_edges() <= TREE_ENUM_CAP { Some(spanning_trees(graph)?) } else { None };
        Ok(TreeMeasure { graph, cond, log_partition, trees })
    }

    pub fn graph(&self) -> &FiniteGraph {
        self.graph
    }

    pub fn conductances(&self) -> &Conductances {
        &self.cond
    }

    /// `ln Σ_t w(κ, t)`.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn trees(&self) -> Option<&[Vec<EdgeId>]> {
        self.trees.as_deref()
    }

    fn enumerated_probability(&self, pred: impl Fn(&[EdgeId]) -> bool) -> Option<f64> {
        let trees = self.trees.as_ref()?;
        let w = self.cond.weights();
        let (mut num, mut den) = (0.0, 0.0);
        for t in trees {
            let x = tree_weight(t, &w);
            den += x;
            if pred(t) {
                num += x;
            }
        }
        Some(num / den)
    }

    /// `Q(f ∈ t)`.
    pub fn edge_marginal(&self, f: EdgeId) -> Result<f64> {
        self.check(f)?;
        if let Some(p) = self.enumerated_probability(|t| t.binary_search(&f).is_ok()) {
            return Ok(p);
        }
        laplacian::transfer_current(self.graph, &self.cond, f, f)
    }

    /// `Q(f ∈ t, g ∈ t)`.
    pub fn joint_marginal(&self, f: EdgeId, g: EdgeId) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        if let Some(p) = self.enumerated_probability(|t| t.binary_search(&f).is_ok() && t.binary_search(&g).is_ok()) {
            return Ok(p);
        }
        // transfer current theorem for two edges
        let w = self.cond.weights();
        let from_f = laplacian::transfer_currents_from(self.graph, &w, f)?;
        let from_g = laplacian::transfer_currents_from(self.graph, &w, g)?;
        Ok(from_f[f] * from_g[g] - from_f[g] * from_g[f])
    }

    /// `Q(f, g ∈ t) − Q(f ∈ t) Q(g ∈ t)`.
    pub fn pair_correlation(&self, f: EdgeId, g: EdgeId) -> Result<f64> {
        if f == g {
            return Err(Error::InvalidParameter("pair correlation needs distinct edges".into()));
        }
        Ok(self.joint_marginal(f, g)? - self.edge_marginal(f)? * self.edge_marginal(g)?)
    }

    fn check(&self, e: EdgeId) -> Result<()> {
        if e >= self.graph.n_edges() {
            return Err(Error::EdgeOutOfRange { edge: e, n_edges: self.graph.n_edges() });
        }
        Ok(())
    }

    pub fn sample_tree<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<EdgeId> {
        wilson(self.graph, &self.cond.weights(), rng)
    }
}

/// Wilson's algorithm rooted at vertex 0. Returns sorted edge ids.
pub fn wilson<R: Rng + ?Sized>(g: &FiniteGraph, w: &[f64], rng: &mut R) -> Vec<EdgeId> {
    let n = g.n_vertices();
    let mut in_tree = vec![false; n];
    let mut next: Vec<Option<EdgeId>> = vec![None; n];
    in_tree[0] = true;
    let total: Vec<f64> = (0..n)
        .map(|v| g.incident(v).iter().filter(|&&e| !g.is_loop(e)).map(|&e| w[e]).sum())
        .collect();
    for start in 0..n {
        let mut v = start;
        while !in_tree[v] {
            let mut u = rng.random::<f64>() * total[v];
            let mut pick = None;
            for &e in g.incident(v) {
                if g.is_loop(e) {
                    continue;
                }
                pick = Some(e);
                if u < w[e] {
                    break;
                }
                u -= w[e];
            }
            let e = pick.expect("connected graph has non-loop edges");
            next[v] = Some(e);
            v = g.other(e, v);
        }
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            let e = next[v].expect("walk recorded");
            v = g.other(e, v);
        }
    }
    let mut tree: Vec<EdgeId> = next.into_iter().enumerate().filter(|&(v, _)| v != 0).filter_map(|(_, e)| e).collect();
    tree.sort_unstable();
    tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{builtin, cycle, triangle};

    #[test]
    fn triangle_sums() {
        let t = triangle();
        assert_eq!(kirchhoff_sum(&t, &Conductances::all_soft(2.0, 3).unwrap()).unwrap(), 9.0);
        let k = Conductances::new(2.0, vec![true, false, false]).unwrap();
        assert_eq!(kirchhoff_sum(&t, &k).unwrap(), 15.0);
        assert_eq!(tree_partition(&t, &k.weights()).unwrap(), 5.0);
    }

    #[test]
    fn tree_counts() {
        assert_eq!(spanning_trees(&builtin("k4").unwrap()).unwrap().len(), 16);
        assert_eq!(spanning_trees(&cycle(4).unwrap()).unwrap().len(), 4);
        assert_eq!(spanning_trees(&builtin("grid3x3").unwrap()).unwrap().len(), 192);
        assert_eq!(tree_partition(&builtin("grid3x3").unwrap(), &[1.0; 12]).unwrap(), 192.0);
    }

    #[test]
    fn c4_adjacent_pair() {
        let c = cycle(4).unwrap();
        let tm = TreeMeasure::new(&c, Conductances::all_soft(1.0, 4).unwrap()).unwrap();
        let (a, b) = (c.edge_between(0, 1).unwrap(), c.edge_between(1, 2).unwrap());
        assert!((tm.pair_correlation(a, b).unwrap() + 1.0 / 16.0).abs() < 1e-15);
    }
}
