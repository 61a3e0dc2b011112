//! The Gaussian gradient layer: the mixture potential, fields given `κ` and
//! the two-layer round trip `κ → η → κ′`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{contract, ContractSet, EdgeId, FiniteGraph, VertexId};
use crate::laplacian::{green_gradient_weights, pinned_index, BandedCholesky, Conductances, SparsePinned};
use crate::mcmc::{Chain, ChainConfig};
use crate::model::{enumerate, total_variation, Configuration, MeasureSpec, ENUM_CAP};
use crate::stats::{variance, wilson_interval};

fn log_mixture(x: f64, p: f64, q: f64) -> (f64, f64) {
    let x2 = x * x / 2.0;
    (p.ln() - q * x2, (1.0 - p).ln() - x2)
}

/// `V_{p,q}(x) = −ln(p e^{−qx²/2} + (1−p) e^{−x²/2})`.
pub fn potential(x: f64, p: f64, q: f64) -> f64 {
    let (a, b) = log_mixture(x, p, q);
    let m = a.max(b);
    -(m + ((a - m).exp() + (b - m).exp()).ln())
}

/// `P(κ_e = q | η_e)`.
pub fn conditional_kappa_given_eta(eta: f64, p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (a, b) = log_mixture(eta, p, q);
    1.0 / (1.0 + (b - a).exp())
}

/// `η_e = φ(v) − φ(u)` for every edge `e = (u, v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientField(pub Vec<f64>);

impl GradientField {
    pub fn from_heights(g: &FiniteGraph, phi: &[f64]) -> Self {
        GradientField(g.edges().iter().map(|&(u, v)| phi[v] - phi[u]).collect())
    }

    /// Value along the oriented pair `a → b`; reversal negates.
    pub fn along(&self, g: &FiniteGraph, a: VertexId, b: VertexId) -> Option<f64> {
        let e = g.edge_between(a, b)?;
        let (u, _) = g.endpoints(e);
        Some(if u == a { self.0[e] } else { -self.0[e] })
    }

    /// Largest circulation around a unit plaquette of the embedding.
    /// Plaquettes with an unembedded corner are skipped.
    pub fn max_plaquette_residual(&self, g: &FiniteGraph) -> Result<f64> {
        let emb = g.embedding().ok_or(Error::MissingEmbedding)?;
        let d = emb.dim;
        let mut worst = 0.0f64;
        for x in 0..g.n_vertices() {
            let Some(cx) = g.coords(x) else { continue };
            for i in 0..d {
                for j in i + 1..d {
                    let shift = |p: &[i64], k: usize| {
                        let mut p = p.to_vec();
                        p[k] += 1;
                        p
                    };
                    let a = shift(cx, i);
                    let c = shift(cx, j);
                    let b = shift(&a, j);
                    let (Some(va), Some(vb), Some(vc)) = (g.vertex_at(&a), g.vertex_at(&b), g.vertex_at(&c)) else {
                        continue;
                    };
                    let s = [(x, va), (va, vb), (vb, vc), (vc, x)]
                        .iter()
                        .map(|&(s, t)| self.along(g, s, t))
                        .collect::<Option<Vec<f64>>>();
                    if let Some(s) = s {
                        worst = worst.max(s.iter().sum::<f64>().abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge_id,eta\n");
        for (e, v) in self.0.iter().enumerate() {
            out.push_str(&format!("{e},{v:.16e}\n"));
        }
        out
    }
}

/// Centred Gaussian heights with covariance `(Δ̃_κ)⁻¹`, where `Δ̃_κ` is the
/// Laplacian with the boundary vertices held at zero. Graphs without a
/// boundary are pinned at vertex 0.
#[derive(Clone, Debug)]
pub struct PinnedGaussianSampler {
    graph: Arc<FiniteGraph>,
    vertex_map: Vec<VertexId>,
    pin: VertexId,
    dim: usize,
    chol: BandedCholesky,
}

impl PinnedGaussianSampler {
    pub fn new(graph: Arc<FiniteGraph>, cond: &Conductances) -> Result<Self> {
        cond.check(&graph)?;
        let w = cond.weights();
        let boundary = graph.boundary().to_vec();
        let (reduced, vertex_map, rw) = if boundary.len() > 1 {
            let c = contract(&graph, ContractSet::Vertices(&boundary))?;
            let rw: Vec<f64> = c.edge_origin().iter().map(|&e| w[e]).collect();
            (c.graph, c.vertex_map, rw)
        } else {
            ((*graph).clone(), (0..graph.n_vertices()).collect(), w)
        };
        let pin = boundary.first().map_or(0, |&b| vertex_map[b]);
        let a = SparsePinned::new(&reduced, &rw, pin);
        let chol = BandedCholesky::new(&a)?;
        Ok(PinnedGaussianSampler { graph, vertex_map, pin, dim: a.dim(), chol })
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    /// `φ = L^{-T} z` with `z` iid standard normal, so `Cov φ = (L Lᵀ)⁻¹`.
    pub fn sample_heights<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let x = self.chol.backward(&z);
        self.vertex_map
            .iter()
            .map(|&r| pinned_index(r, self.pin).map_or(0.0, |i| x[i]))
            .collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> GradientField {
        GradientField::from_heights(&self.graph, &self.sample_heights(rng))
    }
}

/// `count` independent fields; sample `i` uses its own ChaCha8 stream.
pub fn sample_field_given_kappa(sampler: &PinnedGaussianSampler, seed: u64, count: usize) -> Vec<GradientField> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sampler.sample(&mut rng)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaBin {
    pub abs_eta_lo: f64,
    pub abs_eta_hi: f64,
    pub hits: u64,
    pub hard: u64,
    pub empirical: f64,
    /// Mean of `P(κ_e = q | η_e)` over the hits.
    pub predicted: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub p: f64,
    pub q: f64,
    pub samples: u64,
    pub seed: u64,
    /// TV between the empirical law of `κ′` and the exact law; `None` when
    /// the graph is too large to enumerate.
    pub tv_kappa_prime: Option<f64>,
    /// Same for the chain's own `κ`, for scale.
    pub tv_kappa: Option<f64>,
    pub bins: Vec<EtaBin>,
    /// Every bin with at least `MIN_BIN_HITS` hits contains its prediction.
    pub bins_ok: bool,
    /// Sample `E η_e²` per edge, with batch-means standard errors.
    pub eta_second_moment: Vec<f64>,
    pub eta_second_moment_stderr: Vec<f64>,
    /// `Σ_κ P(κ) (∇∇G_κ)(e, e)` when the graph is enumerable.
    pub eta_second_moment_exact: Option<Vec<f64>>,
}

pub const MIN_BIN_HITS: u64 = 100;
const BIN_EDGES: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, f64::INFINITY];
const SAMPLER_CACHE: usize = 1 << 16;
const MOMENT_BATCHES: u64 = 50;

/// `κ` from heat-bath sweeps, `η` given `κ`, then `κ′` given `η` edge by edge.
pub fn two_layer_roundtrip(spec: &MeasureSpec, burnin: u64, samples: u64, seed: u64) -> Result<RoundtripReport> {
    let (p, q) = (spec.p(), spec.q());
    let graph = spec.graph().clone();
    let m = graph.n_edges();
    let exact = if spec.active_edges().len() <= ENUM_CAP { Some(enumerate(spec)?) } else { None };
    let mut chain = Chain::new(spec.clone(), ChainConfig::new(seed).burnin(burnin))?;
    chain.run(burnin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut cache: HashMap<Vec<bool>, PinnedGaussianSampler> = HashMap::new();
    let n_cells = exact.as_ref().map_or(0, |d| d.len());
    let mut counts_prime = vec![0u64; n_cells];
    let mut counts = vec![0u64; n_cells];
    let nb = BIN_EDGES.len() - 1;
    let (mut hits, mut hard, mut pred) = (vec![0u64; nb], vec![0u64; nb], vec![0.0f64; nb]);
    let batch = (samples / MOMENT_BATCHES).max(1);
    let mut batch_sums: Vec<Vec<f64>> = Vec::new();
    for i in 0..samples {
        chain.sweep()?;
        let kappa = chain.configuration().clone();
        if cache.len() >= SAMPLER_CACHE {
            cache.clear();
        }
        if !cache.contains_key(&kappa.0) {
            let s = PinnedGaussianSampler::new(graph.clone(), &kappa.conductances(q)?)?;
            cache.insert(kappa.0.clone(), s);
        }
        let eta = cache[&kappa.0].sample(&mut rng);
        if i % batch == 0 {
            batch_sums.push(vec![0.0; m]);
        }
        let sums = batch_sums.last_mut().expect("batch opened");
        for (s, x) in sums.iter_mut().zip(&eta.0) {
            *s += x * x;
        }
        let mut prime = vec![false; m];
        for e in 0..m {
            let pr = conditional_kappa_given_eta(eta.0[e], p, q);
            prime[e] = rng.random::<f64>() < pr;
            if graph.is_loop(e) {
                continue;
            }
            let a = eta.0[e].abs();
            let b = BIN_EDGES.partition_point(|&x| x <= a) - 1;
            hits[b] += 1;
            pred[b] += pr;
            if kappa.is_hard(e) {
                hard[b] += 1;
            }
        }
        if exact.is_some() {
            let prime = spec.with_exterior(&Configuration(prime));
            counts_prime[spec.mask_of(&prime) as usize] += 1;
            counts[spec.mask_of(&kappa) as usize] += 1;
        }
    }
    let tv = |c: &[u64]| -> Option<f64> {
        exact.as_ref().map(|d| {
            let emp: Vec<f64> = c.iter().map(|&k| k as f64 / samples as f64).collect();
            total_variation(&emp, d.probabilities())
        })
    };
    let bins: Vec<EtaBin> = (0..nb)
        .map(|b| {
            let (lo, hi) = wilson_interval(hard[b], hits[b], 1.959963984540054);
            let predicted = if hits[b] > 0 { pred[b] / hits[b] as f64 } else { f64::NAN };
            EtaBin {
                abs_eta_lo: BIN_EDGES[b],
                abs_eta_hi: BIN_EDGES[b + 1],
                hits: hits[b],
                hard: hard[b],
                empirical: if hits[b] > 0 { hard[b] as f64 / hits[b] as f64 } else { f64::NAN },
                predicted,
                ci_lo: lo,
                ci_hi: hi,
                within: hits[b] < MIN_BIN_HITS || (lo <= predicted && predicted <= hi),
            }
        })
        .collect();
    // full batches only; the tail batch is dropped from the error estimate
    let full: Vec<&Vec<f64>> = batch_sums.iter().take((samples / batch) as usize).collect();
    let k = full.len() as f64;
    let mut second = vec![0.0; m];
    let mut second_se = vec![0.0; m];
    for e in 0..m {
        let means: Vec<f64> = full.iter().map(|b| b[e] / batch as f64).collect();
        second[e] = means.iter().sum::<f64>() / k;
        second_se[e] = if full.len() > 1 { (variance(&means) / k).sqrt() } else { f64::NAN };
    }
    // with several boundary vertices the sampler pins them all, which the
    // plain Green kernel does not see
    let second_exact = match &exact {
        Some(d) if graph.boundary().len() <= 1 => {
            let mut acc = vec![0.0; m];
            for mask in 0..d.len() as u64 {
                let c = spec.with_exterior(&d.configuration(mask));
                let w = c.conductances(q)?.weights();
                let pr = d.probabilities()[mask as usize];
                for (e, a) in acc.iter_mut().enumerate() {
                    if !graph.is_loop(e) {
                        let ends = graph.endpoints(e);
                        *a += pr * green_gradient_weights(&graph, &w, ends, &[ends])?[0];
                    }
                }
            }
            Some(acc)
        }
        _ => None,
    };
    Ok(RoundtripReport {
        eta_second_moment: second,
        eta_second_moment_stderr: second_se,
        eta_second_moment_exact: second_exact,
        p,
        q,
        samples,
        seed,
        tv_kappa_prime: tv(&counts_prime),
        tv_kappa: tv(&counts),
        bins_ok: bins.iter().all(|b| b.within),
        bins,
    })
}

/// Sample means and covariances of the gradients on the given edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMoments {
    pub samples: usize,
    pub edges: Vec<EdgeId>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub max_plaquette_residual: f64,
}

pub fn field_moments(g: &FiniteGraph, fields: &[GradientField], edges: &[EdgeId]) -> Result<FieldMoments> {
    let n = fields.len() as f64;
    let k = edges.len();
    let mut mean = vec![0.0; k];
    for f in fields {
        for (i, &e) in edges.iter().enumerate() {
            mean[i] += f.0[e] / n;
        }
    }
    let mut cov = vec![vec![0.0; k]; k];
    for f in fields {
        for i in 0..k {
            let a = f.0[edges[i]] - mean[i];
            for j in 0..k {
                cov[i][j] += a * (f.0[edges[j]] - mean[j]) / (n - 1.0);
            }
        }
    }
    let mut worst = 0.0f64;
    if g.embedding().is_some() {
        for f in fields {
            worst = worst.max(f.max_plaquette_residual(g)?);
        }
    }
    Ok(FieldMoments { samples: fields.len(), edges: edges.to_vec(), mean, covariance: cov, max_plaquette_residual: worst })
}
