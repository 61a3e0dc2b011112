//! Finite-volume measures `P^{G,p}` and their boundary-condition versions.
//!
//! A configuration assigns every edge hard (`κ_e = q`) or soft (`κ_e = 1`).
//! With an active edge set `E′` and a frozen exterior `λ` on the remaining
//! edges, the weight of `κ` is
//! `p^{h(κ,E′)} (1-p)^{s(κ,E′)} / sqrt(det Δ_{κ∪λ})`.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, FiniteGraph};
use crate::laplacian::{self, Conductances};

/// Largest number of active edges [`enumerate`] accepts.
pub const ENUM_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(pub Vec<bool>);

impl Configuration {
    pub fn all_soft(n_edges: usize) -> Self {
        Configuration(vec![false; n_edges])
    }

    pub fn all_hard(n_edges: usize) -> Self {
        Configuration(vec![true; n_edges])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_hard(&self, e: EdgeId) -> bool {
        self.0[e]
    }

    pub fn hard_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn conductances(&self, q: f64) -> Result<Conductances> {
        Conductances::new(q, self.0.clone())
    }

    /// `'1'` for hard, `'0'` for soft, in edge order.
    pub fn bits(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn join(&self, other: &Self) -> Self {
        Configuration(self.0.iter().zip(&other.0).map(|(a, b)| *a || *b).collect())
    }

    pub fn meet(&self, other: &Self) -> Self {
        Configuration(self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect())
    }

    /// Pointwise order `self ≤ other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| !*a || *b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Free,
    Wired,
    /// Not built from a box, or built some other way.
    None,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Free => "free",
            BoundaryCondition::Wired => "wired",
            BoundaryCondition::None => "none",
        }
    }
}

/// Active edges `E′` and the exterior configuration `λ` on the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenExterior {
    active: Vec<EdgeId>,
    exterior: Vec<bool>,
}

/// One finite-volume measure.
#[derive(Clone, Debug)]
pub struct MeasureSpec {
    graph: Arc<FiniteGraph>,
    p: f64,
    q: f64,
    frozen: Option<FrozenExterior>,
    bc: BoundaryCondition,
    active: Vec<EdgeId>,
}

impl MeasureSpec {
    pub fn new(graph: Arc<FiniteGraph>, p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p must lie in [0, 1], got {p}")));
        }
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be a finite real >= 1, got {q}")));
        }
        let active = (0..graph.n_edges()).collect();
        Ok(MeasureSpec { graph, p, q, frozen: None, bc: BoundaryCondition::None, active })
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        self
    }

    /// Restricts the randomness to `active`, freezing the other edges to
    /// `exterior` (a full-length configuration; its active entries are ignored).
    pub fn with_frozen(mut self, active: &[EdgeId], exterior: &Configuration) -> Result<Self> {
        let m = self.graph.n_edges();
        if exterior.len() != m {
            return Err(Error::InvalidParameter("exterior configuration has wrong length".into()));
        }
        let mut act = active.to_vec();
        act.sort_unstable();
        act.dedup();
        if let Some(&e) = act.iter().find(|&&e| e >= m) {
            return Err(Error::EdgeOutOfRange { edge: e, n_edges: m });
        }
        let mut ext = exterior.0.clone();
        for &e in &act {
            ext[e] = false;
        }
        self.frozen = Some(FrozenExterior { active: act.clone(), exterior: ext });
        self.active = act;
        Ok(self)
    }

    pub fn graph(&self) -> &Arc<FiniteGraph> {
        &self.graph
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn frozen(&self) -> Option<&FrozenExterior> {
        self.frozen.as_ref()
    }

    pub fn active_edges(&self) -> &[EdgeId] {
        &self.active
    }

    pub fn is_active(&self, e: EdgeId) -> bool {
        self.active.binary_search(&e).is_ok()
    }

    /// Full configuration with active edges set from the bits of `mask`
    /// (bit `i` is the `i`-th active edge) and the exterior from `λ`.
    pub fn configuration_from_mask(&self, mask: u64) -> Configuration {
        let mut c = match &self.frozen {
            Some(f) => f.exterior.clone(),
            None => vec![false; self.graph.n_edges()],
        };
        for (i, &e) in self.active.iter().enumerate() {
            c[e] = (mask >> i) & 1 == 1;
        }
        Configuration(c)
    }

    pub fn mask_of(&self, c: &Configuration) -> u64 {
        self.active.iter().enumerate().fold(0u64, |m, (i, &e)| if c.is_hard(e) { m | (1 << i) } else { m })
    }

    /// Overwrites the exterior entries of `c` with `λ`.
    pub fn with_exterior(&self, c: &Configuration) -> Configuration {
        match &self.frozen {
            None => c.clone(),
            Some(f) => {
                let mut out = f.exterior.clone();
                for &e in &self.active {
                    out[e] = c.is_hard(e);
                }
                Configuration(out)
            }
        }
    }

    /// `h(κ, E′)`.
    pub fn hard_active(&self, c: &Configuration) -> usize {
        self.active.iter().filter(|&&e| c.is_hard(e)).count()
    }

    /// Content hash of graph, parameters and exterior.
    pub fn content_hash(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.graph.content_hash());
        h.update(self.p.to_le_bytes());
        h.update(self.q.to_le_bytes());
        h.update(self.bc.as_str().as_bytes());
        if let Some(f) = &self.frozen {
            for &e in &f.active {
                h.update((e as u64).to_le_bytes());
            }
            h.update(f.exterior.iter().map(|&b| b as u8).collect::<Vec<_>>());
        }
        h.finalize().into()
    }

    fn check_config(&self, c: &Configuration) -> Result<()> {
        if c.len() != self.graph.n_edges() {
            return Err(Error::InvalidParameter(format!(
                "configuration has {} entries for {} edges",
                c.len(),
                self.graph.n_edges()
            )));
        }
        Ok(())
    }

    /// `h ln p + s ln(1-p) − ½ ln det Δ`, with the exterior taken from `λ`.
    /// Off the support of the degenerate measures at `p ∈ {0, 1}` this is `−∞`.
    pub fn log_weight(&self, c: &Configuration) -> Result<f64> {
        self.check_config(c)?;
        let c = self.with_exterior(c);
        let h = self.hard_active(&c);
        let s = self.active.len() - h;
        let bern = bernoulli_log(self.p, h, s);
        if bern == f64::NEG_INFINITY {
            return Ok(bern);
        }
        let ld = laplacian::log_det_zero_mean(&self.graph, &c.conductances(self.q)?)?;
        Ok(bern - 0.5 * ld)
    }

    /// `P(κ_f = q | κ off f)` from the tree marginal of `f` with `f` soft.
    pub fn conditional_hard(&self, c: &Configuration, f: EdgeId) -> Result<f64> {
        self.check_config(c)?;
        if !self.is_active(f) {
            return Err(Error::InvalidParameter(format!("edge {f} is not active")));
        }
        let mut c = self.with_exterior(c);
        c.0[f] = false;
        let qm = laplacian::transfer_current(&self.graph, &c.conductances(self.q)?, f, f)?;
        Ok(heat_bath_probability(self.p, self.q, qm))
    }
}

fn bernoulli_log(p: f64, h: usize, s: usize) -> f64 {
    let term = |x: f64, k: usize| if k == 0 { 0.0 } else { k as f64 * x.ln() };
    term(p, h) + term(1.0 - p, s)
}

/// `p / (p + (1-p) sqrt(1 + (q-1) Q⁻))`.
pub fn heat_bath_probability(p: f64, q: f64, marginal_minus: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    p / (p + (1.0 - p) * (1.0 + (q - 1.0) * marginal_minus).sqrt())
}

/// Exact distribution over the active edges of a measure.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    spec: MeasureSpec,
    log_weights: Vec<f64>,
    probabilities: Vec<f64>,
    log_z: f64,
}

pub fn enumerate(spec: &MeasureSpec) -> Result<ExactDistribution> {
    let k = spec.active.len();
    if k > ENUM_CAP {
        return Err(Error::SizeCap { what: "active edges for enumeration", actual: k, limit: ENUM_CAP });
    }
    let n = 1u64 << k;
    let log_weights: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|mask| spec.log_weight(&spec.configuration_from_mask(mask)))
        .collect::<Result<_>>()?;
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_weights.iter().map(|&l| (l - max).exp()).sum();
    let log_z = max + sum.ln();
    let probabilities = log_weights.iter().map(|&l| (l - log_z).exp()).collect();
    Ok(ExactDistribution { spec: spec.clone(), log_weights, probabilities, log_z })
}

impl ExactDistribution {
    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Indexed by mask over the active edges.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, c: &Configuration) -> f64 {
        self.probabilities[self.spec.mask_of(c) as usize]
    }

    pub fn configuration(&self, mask: u64) -> Configuration {
        self.spec.configuration_from_mask(mask)
    }

    pub fn event_probability(&self, event: impl Fn(&Configuration) -> bool) -> f64 {
        (0..self.len() as u64)
            .filter(|&m| event(&self.configuration(m)))
            .map(|m| self.probabilities[m as usize])
            .sum()
    }

    /// `P(κ_e = q)`; exterior edges report their frozen value.
    pub fn marginal(&self, e: EdgeId) -> f64 {
        match self.spec.active.binary_search(&e) {
            Ok(i) => self
                .probabilities
                .iter()
                .enumerate()
                .filter(|(m, _)| (m >> i) & 1 == 1)
                .map(|(_, p)| p)
                .sum(),
            Err(_) => {
                if self.configuration(0).is_hard(e) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.spec.graph.n_edges()).map(|e| self.marginal(e)).collect()
    }

    /// CSV with columns `config_bits,log_weight,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config_bits,log_weight,probability\n");
        for m in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e}",
                self.configuration(m as u64).bits(),
                self.log_weights[m],
                self.probabilities[m]
            );
        }
        out
    }
}

/// Total variation distance between two probability vectors.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `γ_E(A, λ)`: probability of `event` under the measure on `active` with
/// exterior `λ`.
pub fn specification_kernel(
    spec: &MeasureSpec,
    active: &[EdgeId],
    exterior: &Configuration,
    event: impl Fn(&Configuration) -> bool,
) -> Result<f64> {
    let frozen = MeasureSpec::new(spec.graph.clone(), spec.p, spec.q)?.with_frozen(active, exterior)?;
    Ok(enumerate(&frozen)?.event_probability(event))
}

/// Dual parameter: `p*/(1-p*) = (1-p) sqrt(q) / p`.
pub fn dual_parameter(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let a = (1.0 - p) * q.sqrt();
    a / (p + a)
}

/// Solution of `(p/(1-p))^4 = q`.
pub fn self_dual_point(q: f64) -> f64 {
    let t = q.sqrt().sqrt();
    t / (1.0 + t)
}
