//! Weighted Laplacians, determinants, solves and transfer currents.
//!
//! The Laplacian `Δ_κ` acts on functions of the vertices; restricted to
//! zero-mean functions it is invertible on a connected graph. Determinants of
//! that restriction are computed through the pinned Laplacian `Δ̃`, obtained
//! by deleting the row and column of one vertex `x₀`, using
//! `det Δ = |V| · det Δ̃`.
//!
//! Edges are oriented from the smaller vertex id to the larger one. For the
//! box builders this agrees with the coordinate-wise order.

mod banded;
mod state;

pub use banded::{conjugate_gradient, BandedCholesky};
pub use state::{LaplacianState, DEFAULT_REFRESH};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, FiniteGraph, VertexId};

/// Above this many vertices the dense backend is replaced by banded
/// factorizations and conjugate gradients.
pub const DENSE_LIMIT: usize = 2000;
const ELIMINATION_LIMIT: usize = 400;

/// Per-edge conductances in `{1, q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conductances {
    q: f64,
    hard: Vec<bool>,
}

impl Conductances {
    pub fn new(q: f64, hard: Vec<bool>) -> Result<Self> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be a finite real >= 1, got {q}")));
        }
        Ok(Conductances { q, hard })
    }

    pub fn all_soft(q: f64, n_edges: usize) -> Result<Self> {
        Self::new(q, vec![false; n_edges])
    }

    pub fn all_hard(q: f64, n_edges: usize) -> Result<Self> {
        Self::new(q, vec![true; n_edges])
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.hard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty()
    }

    pub fn is_hard(&self, e: EdgeId) -> bool {
        self.hard[e]
    }

    pub fn hard(&self) -> &[bool] {
        &self.hard
    }

    pub fn set(&mut self, e: EdgeId, hard: bool) {
        self.hard[e] = hard;
    }

    pub fn value(&self, e: EdgeId) -> f64 {
        if self.hard[e] {
            self.q
        } else {
            1.0
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.hard.len()).map(|e| self.value(e)).collect()
    }

    pub(crate) fn check(&self, g: &FiniteGraph) -> Result<()> {
        if self.hard.len() != g.n_edges() {
            return Err(Error::InvalidParameter(format!(
                "{} conductances for {} edges",
                self.hard.len(),
                g.n_edges()
            )));
        }
        Ok(())
    }
}

/// Default pinned vertex: the first boundary vertex, else vertex 0.
pub fn default_pin(g: &FiniteGraph) -> VertexId {
    g.boundary().first().copied().unwrap_or(0)
}

/// Row of `v` in the pinned system, `None` for the pin itself.
pub(crate) fn pinned_index(v: VertexId, pin: VertexId) -> Option<usize> {
    use std::cmp::Ordering::*;
    match v.cmp(&pin) {
        Less => Some(v),
        Equal => None,
        Greater => Some(v - 1),
    }
}

fn check_weights(g: &FiniteGraph, w: &[f64]) -> Result<()> {
    if w.len() != g.n_edges() {
        return Err(Error::InvalidParameter(format!("{} weights for {} edges", w.len(), g.n_edges())));
    }
    if w.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidParameter("conductances must be positive and finite".into()));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(())
}

/// Full `|V| x |V|` Laplacian. Parallel edges add up, loops contribute nothing.
pub fn laplacian_matrix(g: &FiniteGraph, w: &[f64]) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut l = DMatrix::zeros(n, n);
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        if u == v {
            continue;
        }
        l[(u, u)] += w[e];
        l[(v, v)] += w[e];
        l[(u, v)] -= w[e];
        l[(v, u)] -= w[e];
    }
    l
}

pub fn pinned_matrix(g: &FiniteGraph, w: &[f64], pin: VertexId) -> DMatrix<f64> {
    let l = laplacian_matrix(g, w);
    l.remove_row(pin).remove_column(pin)
}

/// Sparse pinned Laplacian: diagonal plus off-diagonal adjacency.
#[derive(Clone, Debug)]
pub(crate) struct SparsePinned {
    pub diag: Vec<f64>,
    pub off: Vec<Vec<(usize, f64)>>,
}

impl SparsePinned {
    pub fn new(g: &FiniteGraph, w: &[f64], pin: VertexId) -> Self {
        let m = g.n_vertices() - 1;
        let mut diag = vec![0.0; m];
        let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            if u == v {
                continue;
            }
            let (iu, iv) = (pinned_index(u, pin), pinned_index(v, pin));
            if let Some(i) = iu {
                diag[i] += w[e];
            }
            if let Some(j) = iv {
                diag[j] += w[e];
            }
            if let (Some(i), Some(j)) = (iu, iv) {
                off[i].push((j, -w[e]));
                off[j].push((i, -w[e]));
            }
        }
        SparsePinned { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.diag.len() {
            let mut s = self.diag[i] * x[i];
            for &(j, a) in &self.off[i] {
                s += a * x[j];
            }
            y[i] = s;
        }
    }

    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for (i, row) in self.off.iter().enumerate() {
            for &(j, _) in row {
                b = b.max(i.abs_diff(j));
            }
        }
        b
    }
}

/// Eliminates every vertex but `pin`, reading each pivot as the total weight
/// at the vertex. Only sums, products and quotients of positive numbers
/// occur, so the result keeps full relative accuracy however large the
/// conductance ratios are.
fn log_det_by_elimination(g: &FiniteGraph, w: &[f64], pin: VertexId) -> f64 {
    let n = g.n_vertices();
    let mut a = vec![0.0; n * n];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        if u != v {
            a[u * n + v] += w[e];
            a[v * n + u] += w[e];
        }
    }
    let mut alive: Vec<usize> = (0..n).collect();
    let mut log_det = 0.0;
    for x in (0..n).filter(|&x| x != pin) {
        alive.retain(|&y| y != x);
        let d: f64 = alive.iter().map(|&y| a[x * n + y]).sum();
        log_det += d.ln();
        let nbrs: Vec<(usize, f64)> = alive.iter().map(|&y| (y, a[x * n + y])).filter(|&(_, c)| c > 0.0).collect();
        for (i, &(u, cu)) in nbrs.iter().enumerate() {
            for &(v, cv) in &nbrs[i + 1..] {
                let add = cu * cv / d;
                a[u * n + v] += add;
                a[v * n + u] += add;
            }
        }
    }
    log_det
}

/// `ln det Δ̃` with the given pinned vertex.
pub fn log_det_pinned_weights(g: &FiniteGraph, w: &[f64], pin: VertexId) -> Result<f64> {
    check_weights(g, w)?;
    if pin >= g.n_vertices() {
        return Err(Error::VertexOutOfRange { vertex: pin, n_vertices: g.n_vertices() });
    }
    if g.n_vertices() == 1 {
        return Ok(0.0);
    }
    if g.n_vertices() <= ELIMINATION_LIMIT {
        Ok(log_det_by_elimination(g, w, pin))
    } else if g.n_vertices() <= DENSE_LIMIT {
        let chol = nalgebra::Cholesky::new(pinned_matrix(g, w, pin))
            .ok_or_else(|| Error::Factorization("pinned Laplacian not positive definite".into()))?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    } else {
        Ok(BandedCholesky::new(&SparsePinned::new(g, w, pin))?.log_det())
    }
}

/// `ln det Δ` on zero-mean functions, for arbitrary positive weights.
pub fn log_det_zero_mean_weights(g: &FiniteGraph, w: &[f64], pin: VertexId) -> Result<f64> {
    Ok((g.n_vertices() as f64).ln() + log_det_pinned_weights(g, w, pin)?)
}

pub fn log_det_zero_mean(g: &FiniteGraph, k: &Conductances) -> Result<f64> {
    k.check(g)?;
    log_det_zero_mean_weights(g, &k.weights(), default_pin(g))
}

/// Solves `Δ φ = b` for a zero-sum right-hand side, returning the solution
/// normalised by `φ(pin) = 0`.
pub fn solve_pinned(g: &FiniteGraph, w: &[f64], pin: VertexId, b: &[f64]) -> Result<Vec<f64>> {
    let mut out = solve_pinned_many(g, w, pin, &[b.to_vec()])?;
    Ok(out.pop().expect("one right-hand side"))
}

/// Several right-hand sides sharing one factorisation.
pub fn solve_pinned_many(g: &FiniteGraph, w: &[f64], pin: VertexId, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_weights(g, w)?;
    let n = g.n_vertices();
    if pin >= n {
        return Err(Error::VertexOutOfRange { vertex: pin, n_vertices: n });
    }
    for b in rhs {
        if b.len() != n {
            return Err(Error::InvalidParameter("right-hand side has wrong length".into()));
        }
        let scale = b.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        if b.iter().sum::<f64>().abs() > 1e-12 * scale {
            return Err(Error::InvalidParameter("right-hand side must sum to zero".into()));
        }
    }
    let reduce = |b: &Vec<f64>| -> Vec<f64> { (0..n).filter(|&v| v != pin).map(|v| b[v]).collect() };
    let expand = |x: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; n];
        for v in 0..n {
            if let Some(i) = pinned_index(v, pin) {
                full[v] = x[i];
            }
        }
        full
    };
    if n == 1 {
        return Ok(rhs.iter().map(|_| vec![0.0]).collect());
    }
    let solutions: Vec<Vec<f64>> = if n <= DENSE_LIMIT {
        let chol = nalgebra::Cholesky::new(pinned_matrix(g, w, pin))
            .ok_or_else(|| Error::Factorization("pinned Laplacian not positive definite".into()))?;
        rhs.iter()
            .map(|b| chol.solve(&DVector::from_vec(reduce(b))).as_slice().to_vec())
            .collect()
    } else {
        let sp = SparsePinned::new(g, w, pin);
        let band = BandedCholesky::new(&sp)?;
        rhs.iter().map(|b| band.solve(&reduce(b))).collect()
    };
    // residual check on the pinned system
    let sp = SparsePinned::new(g, w, pin);
    for (b, x) in rhs.iter().zip(&solutions) {
        let rb = reduce(b);
        let mut ax = vec![0.0; sp.dim()];
        sp.mul(x, &mut ax);
        let res: f64 = ax.iter().zip(&rb).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
        let nb: f64 = rb.iter().map(|c| c * c).sum::<f64>().sqrt();
        if res > 1e-10 * nb.max(1e-300) && nb > 0.0 {
            return Err(Error::Solve(format!("relative residual {:.3e}", res / nb)));
        }
    }
    Ok(solutions.iter().map(|x| expand(x)).collect())
}

/// `δ_u − δ_v` for edge `e = (u, v)`, `u < v`.
pub fn edge_vector(g: &FiniteGraph, e: EdgeId) -> Vec<f64> {
    let mut b = vec![0.0; g.n_vertices()];
    let (u, v) = g.endpoints(e);
    b[u] += 1.0;
    b[v] -= 1.0;
    b
}

fn check_edge(g: &FiniteGraph, e: EdgeId) -> Result<()> {
    if e >= g.n_edges() {
        return Err(Error::EdgeOutOfRange { edge: e, n_edges: g.n_edges() });
    }
    Ok(())
}

/// Transfer current `I_f(g2) = κ_{g2} b_{g2}ᵀ Δ⁻¹ b_f`.
pub fn transfer_current(g: &FiniteGraph, k: &Conductances, f: EdgeId, g2: EdgeId) -> Result<f64> {
    k.check(g)?;
    check_edge(g, f)?;
    check_edge(g, g2)?;
    let w = k.weights();
    let phi = solve_pinned(g, &w, default_pin(g), &edge_vector(g, f))?;
    let (u, v) = g.endpoints(g2);
    Ok(w[g2] * (phi[u] - phi[v]))
}

/// All currents `I_f(g)` for a fixed source edge `f`, one solve.
pub fn transfer_currents_from(g: &FiniteGraph, w: &[f64], f: EdgeId) -> Result<Vec<f64>> {
    check_edge(g, f)?;
    let phi = solve_pinned(g, w, default_pin(g), &edge_vector(g, f))?;
    Ok(g.edges().iter().enumerate().map(|(e, &(u, v))| w[e] * (phi[u] - phi[v])).collect())
}

/// Gradient-gradient Green kernel `(δ_{x1} − δ_{x0}) · Δ⁻¹ (δ_{y1} − δ_{y0})`
/// for the oriented pairs `x = (x0, x1)` and `y = (y0, y1)`.
pub fn green_gradient(
    g: &FiniteGraph,
    k: &Conductances,
    x: (VertexId, VertexId),
    y: (VertexId, VertexId),
) -> Result<f64> {
    k.check(g)?;
    green_gradient_weights(g, &k.weights(), x, &[y]).map(|v| v[0])
}

/// Green kernel between one source pair and many target pairs.
pub fn green_gradient_weights(
    g: &FiniteGraph,
    w: &[f64],
    x: (VertexId, VertexId),
    ys: &[(VertexId, VertexId)],
) -> Result<Vec<f64>> {
    let n = g.n_vertices();
    for &v in [x.0, x.1].iter().chain(ys.iter().flat_map(|y| [&y.0, &y.1])) {
        if v >= n {
            return Err(Error::VertexOutOfRange { vertex: v, n_vertices: n });
        }
    }
    let mut b = vec![0.0; n];
    b[x.1] += 1.0;
    b[x.0] -= 1.0;
    let phi = solve_pinned(g, w, default_pin(g), &b)?;
    Ok(ys.iter().map(|&(y0, y1)| phi[y1] - phi[y0]).collect())
}
