//! Planar duality of configurations, q-contours and the Peierls experiment.
//!
//! The dual configuration is `κ*_{e*} = 1 + q − κ_e`: hard and soft swap.
//! Under `P^{G,p}` the dual configuration is distributed as `P^{G*,p*}`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    build_free_box, build_wired_box, central_edge, enumerate_contours_around, planar_dual, Contour, EdgeId,
    FiniteGraph, PlaneGraph,
};
use crate::mcmc::{Chain, ChainConfig};
use crate::model::{dual_parameter, enumerate, self_dual_point, total_variation, BoundaryCondition, Configuration, MeasureSpec};
use crate::stats::{mean, variance, Estimate};

/// A plane graph, its dual and the edge bijection `e ↦ e*`.
#[derive(Clone, Debug)]
pub struct DualMap {
    primal: PlaneGraph,
    dual: PlaneGraph,
    bijection: Vec<EdgeId>,
}

impl DualMap {
    pub fn new(primal: FiniteGraph) -> Result<Self> {
        let primal = PlaneGraph::from_embedding(primal)?;
        let (dual, bijection) = planar_dual(&primal)?;
        Ok(DualMap { primal, dual, bijection })
    }

    pub fn primal(&self) -> &FiniteGraph {
        self.primal.graph()
    }

    pub fn dual(&self) -> &FiniteGraph {
        self.dual.graph()
    }

    pub fn bijection(&self) -> &[EdgeId] {
        &self.bijection
    }

    /// `κ*` on the dual edges.
    pub fn dual_configuration(&self, c: &Configuration) -> Configuration {
        let mut out = vec![false; self.bijection.len()];
        for (e, &d) in self.bijection.iter().enumerate() {
            out[d] = !c.is_hard(e);
        }
        Configuration(out)
    }

    /// Maps a dual configuration back to the primal edges.
    pub fn primal_configuration(&self, c: &Configuration) -> Configuration {
        Configuration(self.bijection.iter().map(|&d| !c.is_hard(d)).collect())
    }
}

/// Total variation between the pushforward of `P^{G,p}` under `κ ↦ κ*` and
/// `P^{G*,p*}`.
pub fn check_duality_pushforward(g: &FiniteGraph, p: f64, q: f64) -> Result<f64> {
    let dm = DualMap::new(g.clone())?;
    let primal = enumerate(&MeasureSpec::new(Arc::new(dm.primal().clone()), p, q)?)?;
    let dual_spec = MeasureSpec::new(Arc::new(dm.dual().clone()), dual_parameter(p, q), q)?;
    let dual = enumerate(&dual_spec)?;
    let mut pushed = vec![0.0; dual.len()];
    for m in 0..primal.len() as u64 {
        let star = dm.dual_configuration(&primal.configuration(m));
        pushed[dual_spec.mask_of(&star) as usize] += primal.probabilities()[m as usize];
    }
    Ok(total_variation(&pushed, dual.probabilities()))
}

/// Both clauses of the q-contour definition.
pub fn is_q_contour(gamma: &Contour, c: &Configuration, boxg: &FiniteGraph) -> bool {
    gamma.primal_bonds.iter().all(|&b| !c.is_hard(b)) && gamma.required_hard(boxg).iter().all(|&b| c.is_hard(b))
}

/// `(4 q^{-1/8})^ℓ q^{1/2}`.
pub fn peierls_bound(length: usize, q: f64) -> f64 {
    (length as f64 * (4f64.ln() - q.ln() / 8.0) + q.ln() / 2.0).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourFrequency {
    pub length: usize,
    pub dual_vertices: Vec<(i64, i64)>,
    pub hits: u64,
    pub frequency: f64,
    pub stderr: f64,
    pub bound: f64,
    pub vacuous: bool,
    /// Frequency above a non-vacuous bound by more than three standard errors.
    pub flagged: bool,
    /// `p^{#required hard} (1-p)^{#crossed}`, exact when `q = 1`.
    pub product_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthClass {
    pub length: usize,
    pub count: usize,
    pub frequency: f64,
    pub bound: f64,
    pub vacuous: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourReport {
    pub radius: usize,
    pub bc: String,
    pub p: f64,
    pub q: f64,
    pub edge: EdgeId,
    pub sweeps: u64,
    pub seed: u64,
    pub contours: Vec<ContourFrequency>,
    pub classes: Vec<LengthClass>,
    /// `Σ_ℓ N(ℓ) (4 q^{-1/8})^ℓ q^{1/2}` over the enumerated lengths.
    pub contour_sum_bound: f64,
}

const BATCHES: u64 = 50;

/// Heat-bath frequencies of every contour of length at most `max_len`
/// around the central edge of the two-dimensional box of radius `n`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_contour_frequency(
    n: usize,
    wired: bool,
    p: f64,
    q: f64,
    max_len: usize,
    sweeps: u64,
    burnin: u64,
    seed: u64,
) -> Result<ContourReport> {
    if p > self_dual_point(q) + 1e-15 {
        log::warn!("p = {p} exceeds the self-dual point; the contour bound does not apply");
    }
    let free = build_free_box(2, n)?;
    let e = central_edge(&free).ok_or_else(|| Error::InvalidParameter("box has no central edge".into()))?;
    let found = enumerate_contours_around(e, max_len, &free)?;
    let contours = found.contours;
    // The chain runs on the requested box; contour edges are free-box ids.
    let (spec, to_chain): (MeasureSpec, Vec<Option<EdgeId>>) = if wired {
        let w = build_wired_box(2, n)?;
        let map = w.edge_map.clone();
        (MeasureSpec::new(Arc::new(w.graph), p, q)?.with_bc(BoundaryCondition::Wired), map)
    } else {
        let m = free.n_edges();
        (MeasureSpec::new(Arc::new(free.clone()), p, q)?.with_bc(BoundaryCondition::Free), (0..m).map(Some).collect())
    };
    let lift = |c: &Configuration| -> Configuration {
        Configuration(to_chain.iter().map(|x| x.is_some_and(|e| c.is_hard(e))).collect())
    };
    let mut chain = Chain::new(spec, ChainConfig::new(seed).burnin(burnin))?;
    chain.run(burnin)?;
    let batch = (sweeps / BATCHES).max(1);
    let mut hits = vec![0u64; contours.len()];
    let mut batch_hits: Vec<Vec<u64>> = Vec::new();
    let mut current = vec![0u64; contours.len()];
    let required: Vec<Vec<EdgeId>> = contours.iter().map(|g| g.required_hard(&free)).collect();
    for s in 0..sweeps {
        chain.sweep()?;
        let c = lift(chain.configuration());
        for (i, g) in contours.iter().enumerate() {
            if g.primal_bonds.iter().all(|&b| !c.is_hard(b)) && required[i].iter().all(|&b| c.is_hard(b)) {
                hits[i] += 1;
                current[i] += 1;
            }
        }
        if (s + 1) % batch == 0 {
            batch_hits.push(std::mem::replace(&mut current, vec![0; contours.len()]));
        }
    }
    let mut out = Vec::with_capacity(contours.len());
    for (i, g) in contours.iter().enumerate() {
        let freq = hits[i] as f64 / sweeps.max(1) as f64;
        let means: Vec<f64> = batch_hits.iter().map(|b| b[i] as f64 / batch as f64).collect();
        let batch_se = if means.len() > 1 { (variance(&means) / means.len() as f64).sqrt() } else { 0.0 };
        // batch means see nothing for rare contours; never report less than
        // the independent-sample binomial error
        let n = sweeps.max(1) as f64;
        let fl = freq.max(1.0 / n);
        let stderr = batch_se.max((fl * (1.0 - fl) / n).sqrt());
        let bound = peierls_bound(g.len(), q);
        let vacuous = bound >= 1.0;
        let n_hard = required[i].len() as i32;
        let n_soft = g.crossed_edges().len() as i32;
        out.push(ContourFrequency {
            length: g.len(),
            dual_vertices: g.dual_vertices.iter().map(|d| (d.x, d.y)).collect(),
            hits: hits[i],
            frequency: freq,
            stderr,
            bound,
            vacuous,
            flagged: !vacuous && freq > bound + 3.0 * stderr,
            product_probability: p.powi(n_hard) * (1.0 - p).powi(n_soft),
        });
    }
    let mut classes: Vec<LengthClass> = Vec::new();
    for f in &out {
        match classes.iter_mut().find(|c| c.length == f.length) {
            Some(c) => {
                c.count += 1;
                c.frequency += f.frequency;
            }
            None => classes.push(LengthClass {
                length: f.length,
                count: 1,
                frequency: f.frequency,
                bound: f.bound,
                vacuous: f.vacuous,
            }),
        }
    }
    classes.sort_by_key(|c| c.length);
    for c in &mut classes {
        c.frequency /= c.count as f64;
    }
    let contour_sum_bound = classes.iter().map(|c| c.count as f64 * c.bound).sum();
    Ok(ContourReport {
        radius: n,
        bc: if wired { "wired" } else { "free" }.into(),
        p,
        q,
        edge: e,
        sweeps,
        seed,
        contours: out,
        classes,
        contour_sum_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub free: Estimate,
    pub wired: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub sweeps: u64,
    pub runs: Vec<SeedRun>,
    pub free: f64,
    pub free_stderr: f64,
    pub wired: f64,
    pub wired_stderr: f64,
    pub gap: f64,
    pub gap_stderr: f64,
    /// `μ⁰(κ_e = q) + μ¹(κ_e = q)`; tends to one by duality.
    pub sum: f64,
}

/// Free and wired central-edge hard marginals at `p` on the two-dimensional
/// box of radius `n`, one pair of chains per seed. Chains run in parallel.
pub fn free_wired_gap(n: usize, p: f64, q: f64, sweeps: u64, burnin: u64, seeds: &[u64]) -> Result<GapReport> {
    let free = Arc::new(build_free_box(2, n)?);
    let wired = build_wired_box(2, n)?;
    let ef = central_edge(&free).ok_or_else(|| Error::InvalidParameter("box has no central edge".into()))?;
    let ew = wired.edge_map[ef].ok_or_else(|| Error::InvalidParameter("central edge lost".into()))?;
    let wired_graph = Arc::new(wired.graph);
    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| {
            let fs = MeasureSpec::new(free.clone(), p, q)?.with_bc(BoundaryCondition::Free);
            let ws = MeasureSpec::new(wired_graph.clone(), p, q)?.with_bc(BoundaryCondition::Wired);
            let mut cf = Chain::new(fs, ChainConfig::new(seed).burnin(burnin).observe(ef))?;
            let mut cw = Chain::new(ws, ChainConfig::new(seed).burnin(burnin).observe(ew))?;
            cf.run(burnin + sweeps)?;
            cw.run(burnin + sweeps)?;
            Ok(SeedRun {
                seed,
                free: cf.report().marginal.expect("observed"),
                wired: cw.report().marginal.expect("observed"),
            })
        })
        .collect::<Result<_>>()?;
    let combine = |xs: Vec<Estimate>| -> (f64, f64) {
        let means: Vec<f64> = xs.iter().map(|e| e.mean).collect();
        let m = mean(&means);
        let k = means.len() as f64;
        let within = (xs.iter().map(|e| e.stderr * e.stderr).sum::<f64>()).sqrt() / k;
        let between = if means.len() > 1 { (variance(&means) / k).sqrt() } else { 0.0 };
        (m, within.max(between))
    };
    let (f, fe) = combine(runs.iter().map(|r| r.free).collect());
    let (w, we) = combine(runs.iter().map(|r| r.wired).collect());
    Ok(GapReport {
        n,
        p,
        q,
        sweeps,
        runs,
        free: f,
        free_stderr: fe,
        wired: w,
        wired_stderr: we,
        gap: w - f,
        gap_stderr: (fe * fe + we * we).sqrt(),
        sum: f + w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{grid, triangle, DualPoint};

    #[test]
    fn bound_values() {
        assert!((peierls_bound(6, 1e20) - 0.04096).abs() < 1e-12);
        assert!((peierls_bound(9, 65536.0) - 256.0).abs() < 1e-9);
    }

    #[test]
    fn pushforward_small() {
        assert!(check_duality_pushforward(&grid(2, 2).unwrap(), 0.5, 4.0).unwrap() <= 1e-10);
        assert!(check_duality_pushforward(&triangle(), 0.3, 2.0).unwrap() <= 1e-10);
    }

    #[test]
    fn figure_example_is_a_q_contour() {
        // 3 x 2 block of vertices (1..=3) x (1..=2); the middle vertical bond is soft
        let b = build_free_box(2, 5).unwrap();
        let walk: Vec<DualPoint> = [(0, 0), (1, 0), (2, 0), (3, 0), (3, 1), (3, 2), (2, 2), (1, 2), (0, 2), (0, 1)]
            .iter()
            .map(|&(x, y)| DualPoint::new(x, y))
            .collect();
        let g = Contour::from_dual_walk(&b, &walk).unwrap();
        assert_eq!(g.len(), 10);
        let mut c = Configuration::all_soft(b.n_edges());
        for e in g.interior_edges(&b) {
            c.0[e] = true;
        }
        let mid = b.edge_at(&[2, 1], &[2, 2]).unwrap();
        c.0[mid] = false;
        assert!(is_q_contour(&g, &c, &b));
        assert!(!is_q_contour(&g, &Configuration::all_soft(b.n_edges()), &b));
    }
}
