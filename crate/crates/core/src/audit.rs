//! Exhaustive checks of the correlation inequalities on enumerable
//! instances. Every margin is reported as `LHS − RHS` in log space with the
//! inequality oriented so that it should be non-negative.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_free_box, build_wired_box, central_edge, contract, ContractSet, EdgeId, FiniteGraph};
use crate::laplacian::{self, Conductances};
use crate::mcmc::{Chain, ChainConfig};
use crate::model::{enumerate, BoundaryCondition, Configuration, ExactDistribution, MeasureSpec};
use crate::spanning_tree::{spanning_trees, tree_weight};
use crate::stats::Estimate;

/// Floating-point slack allowed on log-space margins.
pub const SLACK: f64 = 1e-12;
const MAX_LISTED: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub id: String,
    pub instance: String,
    pub cases: u64,
    pub worst_margin: f64,
    pub violations: Vec<String>,
    pub violation_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AuditReport {
    fn new(id: &str, instance: String) -> Self {
        AuditReport {
            id: id.into(),
            instance,
            cases: 0,
            worst_margin: f64::INFINITY,
            violations: Vec::new(),
            violation_count: 0,
            seed: None,
        }
    }

    fn record(&mut self, margin: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
        if !(margin >= -SLACK) {
            self.violation_count += 1;
            if self.violations.len() < MAX_LISTED {
                self.violations.push(format!("{} (margin {margin:.3e})", describe()));
            }
        }
    }

    /// Min-margin reduction of two partial reports for the same audit.
    pub fn merge(mut self, other: AuditReport) -> AuditReport {
        self.cases += other.cases;
        if other.worst_margin < self.worst_margin || other.worst_margin.is_nan() {
            self.worst_margin = other.worst_margin;
        }
        self.violation_count += other.violation_count;
        for v in other.violations {
            if self.violations.len() < MAX_LISTED {
                self.violations.push(v);
            }
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0 && self.worst_margin >= -SLACK
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// `a − b` for log quantities, treating two `−∞` as equal.
fn log_margin(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        0.0
    } else {
        a - b
    }
}

fn configurations(m: usize) -> impl Iterator<Item = u64> {
    0..(1u64 << m)
}

fn mask_config(mask: u64, m: usize) -> Configuration {
    Configuration((0..m).map(|i| (mask >> i) & 1 == 1).collect())
}

/// `det Δ_{κ++} det Δ_{κ−−} ≤ det Δ_{κ+−} det Δ_{κ−+}` for every `κ` and every
/// pair of edges, with determinants from spanning-tree sums.
pub fn audit_two_edge_determinant(g: &FiniteGraph, q: f64) -> Result<AuditReport> {
    let m = g.n_edges();
    let trees = spanning_trees(g)?;
    let log_s: Vec<f64> = configurations(m)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&mask| {
            let w: Vec<f64> = (0..m).map(|e| if (mask >> e) & 1 == 1 { q } else { 1.0 }).collect();
            trees.iter().map(|t| tree_weight(t, &w)).sum::<f64>().ln()
        })
        .collect();
    let mut rep = AuditReport::new("two-edge", format!("{} vertices, {} edges, q={q}", g.n_vertices(), m));
    for mask in configurations(m) {
        for f in 0..m {
            for h in f + 1..m {
                let base = mask & !(1 << f) & !(1 << h);
                let (pp, mm) = (base | 1 << f | 1 << h, base);
                let (pm, mp) = (base | 1 << f, base | 1 << h);
                if base != mask {
                    continue; // each (κ off f,h) once
                }
                let margin = (log_s[pm as usize] + log_s[mp as usize]) - (log_s[pp as usize] + log_s[mm as usize]);
                rep.record(margin, || format!("edges {f},{h} rest {}", mask_config(base, m).bits()));
            }
        }
    }
    Ok(rep)
}

/// FKG lattice condition `P(a∨b) P(a∧b) ≥ P(a) P(b)`. Exhaustive when the
/// measure has at most six active edges, otherwise `samples` seeded pairs.
pub fn audit_fkg_lattice(spec: &MeasureSpec, samples: u64, seed: u64) -> Result<AuditReport> {
    let dist = enumerate(spec)?;
    let k = spec.active_edges().len();
    let lw = dist.log_weights();
    let mut rep = AuditReport::new(
        "fkg",
        format!("{} active edges, p={}, q={}", k, spec.p(), spec.q()),
    );
    let check = |a: u64, b: u64, rep: &mut AuditReport| {
        let lhs = lw[(a | b) as usize] + lw[(a & b) as usize];
        let rhs = lw[a as usize] + lw[b as usize];
        rep.record(log_margin(lhs, rhs), || format!("masks {a:b} {b:b}"));
    };
    if k <= 6 {
        let n = 1u64 << k;
        for a in 0..n {
            for b in 0..n {
                check(a, b, &mut rep);
            }
        }
    } else {
        rep.seed = Some(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1u64 << k;
        for _ in 0..samples {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            check(a, b, &mut rep);
        }
    }
    Ok(rep)
}

/// Holley criterion for `μ₁ ≼ μ₂`, matching the `i`-th active edge of
/// `spec1` with the `i`-th active edge of `spec2`.
pub fn audit_holley_pair(spec1: &MeasureSpec, spec2: &MeasureSpec) -> Result<AuditReport> {
    if spec1.active_edges().len() != spec2.active_edges().len() {
        return Err(Error::Incompatible("measures have different numbers of active edges".into()));
    }
    let pairs: Vec<(EdgeId, EdgeId)> =
        spec1.active_edges().iter().copied().zip(spec2.active_edges().iter().copied()).collect();
    let d1 = enumerate(spec1)?;
    let d2 = enumerate(spec2)?;
    audit_holley_mapped(&d1, &d2, &pairs)
}

/// Holley single-edge and two-edge conditions between two enumerated
/// measures whose active edges are matched by `pairs` (edge of `μ₁`, edge of
/// `μ₂`). Also checks singleton domination `μ₁(κ_e = q) ≤ μ₂(κ_e = q)`.
pub fn audit_holley_mapped(
    d1: &ExactDistribution,
    d2: &ExactDistribution,
    pairs: &[(EdgeId, EdgeId)],
) -> Result<AuditReport> {
    let (a1, a2) = (d1.spec().active_edges(), d2.spec().active_edges());
    let k = a1.len();
    if a2.len() != k || pairs.len() != k {
        return Err(Error::Incompatible("Holley audit needs a bijection between active sets".into()));
    }
    // bit i of a μ₁ mask corresponds to bit perm[i] of a μ₂ mask
    let mut perm = vec![usize::MAX; k];
    for &(e1, e2) in pairs {
        let i = a1.binary_search(&e1).map_err(|_| Error::Incompatible(format!("edge {e1} not active")))?;
        let j = a2.binary_search(&e2).map_err(|_| Error::Incompatible(format!("edge {e2} not active")))?;
        perm[i] = j;
    }
    let mut seen = perm.clone();
    seen.sort_unstable();
    if seen != (0..k).collect::<Vec<_>>() {
        return Err(Error::Incompatible("edge pairing is not a bijection".into()));
    }
    let to2 = |m: u64| (0..k).fold(0u64, |acc, i| if (m >> i) & 1 == 1 { acc | 1 << perm[i] } else { acc });
    let l1 = d1.log_weights();
    let l2: Vec<f64> = (0..1u64 << k).map(|m| d2.log_weights()[to2(m) as usize]).collect();
    let mut rep = AuditReport::new(
        "holley",
        format!(
            "{} active edges; p1={} q1={} vs p2={} q2={}",
            k,
            d1.spec().p(),
            d1.spec().q(),
            d2.spec().p(),
            d2.spec().q()
        ),
    );
    let n = 1u64 << k;
    for m in 0..n {
        for f in 0..k {
            if (m >> f) & 1 == 1 {
                continue;
            }
            let (plus, minus) = (m | 1 << f, m);
            let lhs = l2[plus as usize] + l1[minus as usize];
            let rhs = l1[plus as usize] + l2[minus as usize];
            rep.record(log_margin(lhs, rhs), || format!("single edge {f} at {m:b}"));
            for g in f + 1..k {
                if (m >> g) & 1 == 1 {
                    continue;
                }
                let pp = m | 1 << f | 1 << g;
                let pm = m | 1 << f;
                let mp = m | 1 << g;
                let lhs = l2[pp as usize] + l1[m as usize];
                let rhs = l1[pm as usize] + l2[mp as usize];
                rep.record(log_margin(lhs, rhs), || format!("edges {f},{g} at {m:b}"));
                // the criterion is not symmetric in (f, g)
                let rhs = l1[mp as usize] + l2[pm as usize];
                rep.record(log_margin(lhs, rhs), || format!("edges {g},{f} at {m:b}"));
            }
        }
    }
    for &(e1, e2) in pairs {
        let margin = d2.marginal(e2) - d1.marginal(e1);
        rep.record(margin, || format!("singleton domination on edge {e1}/{e2}"));
    }
    Ok(rep)
}

/// Free `Λ_1` with the eight outer edges frozen at every `λ`, against the
/// wired `Λ_1`, in dimension two.
pub fn audit_holley_free_wired(p: f64, q: f64) -> Result<AuditReport> {
    let free = Arc::new(build_free_box(2, 1)?);
    let wired = build_wired_box(2, 1)?;
    let wired_graph = Arc::new(wired.graph.clone());
    let inner: Vec<EdgeId> = (0..free.n_edges()).filter(|&e| wired.edge_map[e].is_some()).collect();
    let outer: Vec<EdgeId> = (0..free.n_edges()).filter(|&e| wired.edge_map[e].is_none()).collect();
    let pairs: Vec<(EdgeId, EdgeId)> = inner.iter().map(|&e| (e, wired.edge_map[e].expect("inner edge"))).collect();
    let upper = enumerate(&MeasureSpec::new(wired_graph, p, q)?.with_bc(BoundaryCondition::Wired))?;
    let mut total: Option<AuditReport> = None;
    for lam in 0..1u64 << outer.len() {
        let mut ext = Configuration::all_soft(free.n_edges());
        for (i, &e) in outer.iter().enumerate() {
            ext.0[e] = (lam >> i) & 1 == 1;
        }
        let spec = MeasureSpec::new(free.clone(), p, q)?.with_frozen(&inner, &ext)?;
        let rep = audit_holley_mapped(&enumerate(&spec)?, &upper, &pairs)?;
        total = Some(match total {
            None => rep,
            Some(t) => t.merge(rep),
        });
    }
    let mut rep = total.expect("at least one exterior");
    rep.id = "holley-free-wired".into();
    rep.instance = format!("free box radius 1 with frozen exterior vs wired box radius 1, p={p}, q={q}");
    Ok(rep)
}

/// `ln(det Δ_{κ_f⁺} / det Δ_{κ_f⁻})` on `g`, with `κ` given on all edges.
fn log_ratio(g: &FiniteGraph, hard: &[bool], f: EdgeId, q: f64) -> Result<f64> {
    let mut c = hard.to_vec();
    c[f] = true;
    let plus = laplacian::log_det_zero_mean(g, &Conductances::new(q, c.clone())?)?;
    c[f] = false;
    let minus = laplacian::log_det_zero_mean(g, &Conductances::new(q, c)?)?;
    Ok(plus - minus)
}

/// Ratio monotonicity `G′ ≥ G ≥ G/F` for every `κ` on `G` and every edge
/// `f ∈ G′ \ F`. `sub_edges` lists the edges of `G` forming `G′`.
pub fn audit_subgraph_contraction(
    g: &FiniteGraph,
    sub_edges: &[EdgeId],
    contract_edges: &[EdgeId],
    q: f64,
) -> Result<AuditReport> {
    let m = g.n_edges();
    if m > 16 {
        return Err(Error::SizeCap { what: "edges for the contraction audit", actual: m, limit: 16 });
    }
    let (sub, sub_map) = g.edge_subgraph(sub_edges)?;
    let quot = contract(g, ContractSet::Edges(contract_edges))?;
    let mut rep = AuditReport::new(
        "subgraph-contraction",
        format!("{} edges, subgraph {:?}, contracted {:?}, q={q}", m, sub_edges, contract_edges),
    );
    let candidates: Vec<EdgeId> =
        sub_edges.iter().copied().filter(|e| !contract_edges.contains(e)).collect();
    for mask in configurations(m) {
        let hard: Vec<bool> = (0..m).map(|e| (mask >> e) & 1 == 1).collect();
        let sub_hard: Vec<bool> = sub_map.iter().map(|&e| hard[e]).collect();
        let quot_hard: Vec<bool> = quot.edge_origin().iter().map(|&e| hard[e]).collect();
        for &f in &candidates {
            let r_g = log_ratio(g, &hard, f, q)?;
            let fs = sub_map.iter().position(|&e| e == f).expect("f in subgraph");
            let r_sub = log_ratio(&sub, &sub_hard, fs, q)?;
            let r_quot = match quot.edge_map[f] {
                Some(fq) => log_ratio(&quot.graph, &quot_hard, fq, q)?,
                None => 0.0,
            };
            rep.record(r_sub - r_g, || format!("subgraph vs graph, edge {f}, κ {}", mask_config(mask, m).bits()));
            rep.record(r_g - r_quot, || format!("graph vs contraction, edge {f}, κ {}", mask_config(mask, m).bits()));
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkRow {
    pub n: usize,
    pub method: String,
    pub free_marginal: Estimate,
    pub wired_marginal: Estimate,
    pub difference: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkReport {
    pub q: f64,
    pub p: f64,
    pub p_prime: f64,
    pub rows: Vec<BulkRow>,
    /// Exact check on radius 1 of `(2^{2d} q)^{-|∂Λ|/2} μ⁰ ≤ μ¹ ≤ (2^{2d} q)^{|∂Λ|/2} μ⁰`.
    pub bracket: AuditReport,
}

fn exact_estimate(x: f64) -> Estimate {
    Estimate { mean: x, stderr: 0.0, tau_int: 0.0, samples: 0 }
}

/// Central-edge difference `μ⁰_{n,p′}(κ_e = q) − μ¹_{n,p}(κ_e = q)` in `d = 2`.
/// Radius 1 is enumerated; larger radii use heat-bath chains.
pub fn audit_bulk_vs_boundary(q: f64, p: f64, p_prime: f64, radii: &[usize], sweeps: u64, seed: u64) -> Result<BulkReport> {
    let mut rows = Vec::new();
    for &n in radii {
        let free = Arc::new(build_free_box(2, n)?);
        let wired = build_wired_box(2, n)?;
        let ef = central_edge(&free).ok_or_else(|| Error::InvalidParameter("box has no central edge".into()))?;
        let ew = wired.edge_map[ef].ok_or_else(|| Error::InvalidParameter("central edge lost".into()))?;
        let wired_graph = Arc::new(wired.graph);
        let fspec = MeasureSpec::new(free.clone(), p_prime, q)?.with_bc(BoundaryCondition::Free);
        let wspec = MeasureSpec::new(wired_graph, p, q)?.with_bc(BoundaryCondition::Wired);
        let row = if n == 1 {
            let a = enumerate(&fspec)?.marginal(ef);
            let b = enumerate(&wspec)?.marginal(ew);
            BulkRow {
                n,
                method: "exact".into(),
                free_marginal: exact_estimate(a),
                wired_marginal: exact_estimate(b),
                difference: a - b,
                stderr: 0.0,
            }
        } else {
            let burn = (sweeps / 10).max(1);
            let mut cf = Chain::new(fspec, ChainConfig::new(seed).burnin(burn).observe(ef))?;
            let mut cw = Chain::new(wspec, ChainConfig::new(seed ^ 0x5eed).burnin(burn).observe(ew))?;
            cf.run(sweeps + burn)?;
            cw.run(sweeps + burn)?;
            let a = cf.report().marginal.expect("observed");
            let b = cw.report().marginal.expect("observed");
            BulkRow {
                n,
                method: "mcmc".into(),
                free_marginal: a,
                wired_marginal: b,
                difference: a.mean - b.mean,
                stderr: (a.stderr * a.stderr + b.stderr * b.stderr).sqrt(),
            }
        };
        rows.push(row);
    }
    Ok(BulkReport { q, p, p_prime, rows, bracket: bracket_check(p, q)? })
}

/// Pointwise bracket between the free and wired measures on all edges of
/// the radius-one box. The wired measure keeps the outer edges as loops,
/// each an independent Bernoulli(p) variable.
fn bracket_check(p: f64, q: f64) -> Result<AuditReport> {
    let d = 2;
    let free = Arc::new(build_free_box(d, 1)?);
    let wired = build_wired_box(d, 1)?;
    let m = free.n_edges();
    let boundary = free.boundary().len() as f64;
    let bound = 0.5 * boundary * ((1u64 << (2 * d)) as f64 * q).ln();
    let fspec = MeasureSpec::new(free.clone(), p, q)?;
    let f_dist = enumerate(&fspec)?;
    let origin = wired.edge_origin();
    let lw: Vec<f64> = (0..1u64 << m)
        .map(|mask| {
            let c = fspec.configuration_from_mask(mask);
            let h = c.hard_count();
            let bern = h as f64 * p.ln() + (m - h) as f64 * (1.0 - p).ln();
            let wired_hard: Vec<bool> = origin.iter().map(|&e| c.is_hard(e)).collect();
            let ld = laplacian::log_det_zero_mean(&wired.graph, &Conductances::new(q, wired_hard)?)?;
            Ok(bern - 0.5 * ld)
        })
        .collect::<Result<_>>()?;
    let mx = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = mx + lw.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    let mut rep = AuditReport::new("bulk-bracket", format!("d=2 radius 1, p={p}, q={q}"));
    for mask in 0..1u64 << m {
        let l1 = lw[mask as usize] - log_z;
        let l0 = f_dist.probabilities()[mask as usize].ln();
        rep.record(bound - (l1 - l0), || format!("upper bracket at {mask:b}"));
        rep.record(bound + (l1 - l0), || format!("lower bracket at {mask:b}"));
    }
    Ok(rep)
}
