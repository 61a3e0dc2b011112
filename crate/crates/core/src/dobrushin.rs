//! Dobrushin interdependence estimates from transfer currents, and the decay
//! of the gradient-gradient Green kernel on large boxes.
//!
//! The entry for a pair of distinct edges is bounded by
//! `sup_κ p(1−p)(q−1)² I_f(g) I_g(f)`. The supremum is only available over
//! a finite set of probed configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_free_box, build_wired_box, central_edge, EdgeId, FiniteGraph};
use crate::laplacian::{default_pin, edge_vector, solve_pinned, transfer_currents_from};
use crate::model::ENUM_CAP;
use crate::stats::linear_fit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Probes {
    /// Every configuration of the graph; the maximum is the true supremum.
    AllConfigs,
    /// All-soft and all-hard.
    Extremal,
    /// `count` configurations with iid fair hard/soft edges.
    Random { count: usize, seed: u64 },
}

impl Probes {
    pub fn name(&self) -> &'static str {
        match self {
            Probes::AllConfigs => "all",
            Probes::Extremal => "extremal",
            Probes::Random { .. } => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DobrushinEntry {
    pub g: EdgeId,
    /// Endpoint coordinates when the graph is embedded.
    pub endpoints: Option<(Vec<i64>, Vec<i64>)>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DobrushinReport {
    pub n_edges: usize,
    pub p: f64,
    pub q: f64,
    pub f: EdgeId,
    pub probes: String,
    pub probed: usize,
    pub certified: bool,
    pub entries: Vec<DobrushinEntry>,
    pub row_sum: f64,
}

impl DobrushinReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn entry_at(&self, a: &[i64], b: &[i64]) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.endpoints.as_ref().is_some_and(|(x, y)| x == a && y == b))
            .map(|e| e.c)
    }
}

fn probe_set(m: usize, probes: &Probes) -> Result<Vec<Vec<bool>>> {
    Ok(match probes {
        Probes::AllConfigs => {
            if m > ENUM_CAP {
                return Err(Error::SizeCap { what: "probed edges", actual: m, limit: ENUM_CAP });
            }
            (0..1u64 << m).map(|mask| (0..m).map(|e| mask >> e & 1 == 1).collect()).collect()
        }
        Probes::Extremal => vec![vec![false; m], vec![true; m]],
        Probes::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count).map(|_| (0..m).map(|_| rng.random::<bool>()).collect()).collect()
        }
    })
}

/// Probed maxima of `p(1−p)(q−1)² I_f(g) I_g(f)` over `g ≠ f`.
pub fn dobrushin_bound(g: &FiniteGraph, p: f64, q: f64, f: EdgeId, probes: &Probes) -> Result<DobrushinReport> {
    if !(0.0..=1.0).contains(&p) || !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("need p in [0,1] and finite q >= 1, got p={p}, q={q}")));
    }
    let m = g.n_edges();
    if f >= m {
        return Err(Error::EdgeOutOfRange { edge: f, n_edges: m });
    }
    let configs = probe_set(m, probes)?;
    let factor = p * (1.0 - p) * (q - 1.0) * (q - 1.0);
    let rows: Vec<Vec<f64>> = configs
        .par_iter()
        .map(|hard| {
            let w: Vec<f64> = hard.iter().map(|&h| if h { q } else { 1.0 }).collect();
            let i = transfer_currents_from(g, &w, f)?;
            // I_g(f) = (κ_f / κ_g) I_f(g)
            Ok((0..m).map(|e| if e == f { 0.0 } else { factor * w[f] / w[e] * i[e] * i[e] }).collect())
        })
        .collect::<Result<_>>()?;
    let mut best = vec![0.0f64; m];
    for r in &rows {
        for (b, &x) in best.iter_mut().zip(r) {
            *b = b.max(x);
        }
    }
    let entries: Vec<DobrushinEntry> = (0..m)
        .filter(|&e| e != f)
        .map(|e| {
            let (u, v) = g.endpoints(e);
            let endpoints = g.coords(u).zip(g.coords(v)).map(|(a, b)| (a.to_vec(), b.to_vec()));
            DobrushinEntry { g: e, endpoints, c: best[e] }
        })
        .collect();
    Ok(DobrushinReport {
        n_edges: m,
        p,
        q,
        f,
        probes: probes.name().into(),
        probed: configs.len(),
        certified: matches!(probes, Probes::AllConfigs),
        row_sum: entries.iter().map(|e| e.c).sum(),
        entries,
    })
}

/// [`dobrushin_bound`] at the central edge of the `d`-dimensional box of radius `n`.
pub fn dobrushin_on_box(d: usize, n: usize, wired: bool, p: f64, q: f64, probes: &Probes) -> Result<DobrushinReport> {
    let free = build_free_box(d, n)?;
    let f = central_edge(&free).ok_or_else(|| Error::InvalidParameter("box has no central edge".into()))?;
    if wired {
        let w = build_wired_box(d, n)?;
        let fw = w.edge_map[f].ok_or_else(|| Error::InvalidParameter("central edge is a loop".into()))?;
        dobrushin_bound(&w.graph, p, q, fw, probes)
    } else {
        dobrushin_bound(&free, p, q, f, probes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KappaStrategy {
    AllSoft,
    AllHard,
    /// iid fair configurations, averaged over `count` draws.
    Random { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub r: usize,
    pub edges: usize,
    /// Mean midpoint distance of the shell, the abscissa of the fit.
    pub distance: f64,
    pub mean_abs_grad2_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub d: usize,
    pub n: usize,
    pub q: f64,
    pub rows: Vec<DecayRow>,
    /// Minus the slope of `ln |∇∇G|` against the log shell distance.
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub rms_residual: f64,
}

impl DecayFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,mean_abs_grad2_G,fit_exponent\n");
        for row in &self.rows {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", row.r, row.mean_abs_grad2_g, self.exponent));
        }
        out
    }
}

/// Mean of `|∇_x ∇_y G_κ|` over edges `y` whose midpoint lies at distance
/// `[r, r+1)` from the central edge `x` of the wired box of radius `n`, for
/// each `r` in `radii`, followed by a log-log fit.
pub fn green_decay_fit(d: usize, n: usize, radii: &[usize], q: f64, kappa: &KappaStrategy) -> Result<DecayFit> {
    let (&lo, &hi) = (radii.iter().min().unwrap_or(&0), radii.iter().max().unwrap_or(&0));
    if lo == 0 || (hi as f64) < 10.0 * lo as f64 {
        return Err(Error::InsufficientRange(format!("distances {lo}..{hi} span less than a decade")));
    }
    if hi >= n {
        return Err(Error::InsufficientRange(format!("distance {hi} does not fit in a box of radius {n}")));
    }
    let free = build_free_box(d, n)?;
    let f0 = central_edge(&free).ok_or_else(|| Error::InvalidParameter("box has no central edge".into()))?;
    let w = build_wired_box(d, n)?;
    let g = &w.graph;
    let f = w.edge_map[f0].expect("central edge survives wiring");
    let mid = |e: EdgeId| -> Option<Vec<f64>> {
        let (u, v) = g.endpoints(e);
        let (a, b) = (g.coords(u)?, g.coords(v)?);
        Some(a.iter().zip(b).map(|(&x, &y)| (x + y) as f64 / 2.0).collect())
    };
    let mf = mid(f).expect("central edge is embedded");
    let mut shells: Vec<Vec<EdgeId>> = vec![Vec::new(); radii.len()];
    let mut dsum = vec![0.0; radii.len()];
    for e in 0..g.n_edges() {
        let Some(me) = mid(e) else { continue };
        let dist = me.iter().zip(&mf).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        for (k, &r) in radii.iter().enumerate() {
            if dist >= r as f64 && dist < r as f64 + 1.0 {
                shells[k].push(e);
                dsum[k] += dist;
            }
        }
    }
    if shells.iter().any(|s| s.is_empty()) {
        return Err(Error::InsufficientRange("a requested distance has no edges".into()));
    }
    let m = g.n_edges();
    let weights: Vec<Vec<f64>> = match kappa {
        KappaStrategy::AllSoft => vec![vec![1.0; m]],
        KappaStrategy::AllHard => vec![vec![q; m]],
        KappaStrategy::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count).map(|_| (0..m).map(|_| if rng.random::<bool>() { q } else { 1.0 }).collect()).collect()
        }
    };
    let b = edge_vector(g, f);
    let per_sample: Vec<Vec<f64>> = weights
        .par_iter()
        .map(|w| {
            let phi = solve_pinned(g, w, default_pin(g), &b)?;
            Ok(shells
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|&e| {
                            let (u, v) = g.endpoints(e);
                            (phi[u] - phi[v]).abs()
                        })
                        .sum::<f64>()
                        / s.len() as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let k = per_sample.len() as f64;
    let rows: Vec<DecayRow> = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| DecayRow {
            r,
            edges: shells[i].len(),
            distance: dsum[i] / shells[i].len() as f64,
            mean_abs_grad2_g: per_sample.iter().map(|s| s[i]).sum::<f64>() / k,
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.distance.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_abs_grad2_g.ln()).collect();
    let (_, slope, rms, se) = linear_fit(&x, &y);
    Ok(DecayFit { d, n, q, rows, exponent: -slope, exponent_stderr: se, rms_residual: rms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::builtin;
    use crate::laplacian::{transfer_current, Conductances};

    #[test]
    fn trivial_parameters_vanish() {
        let g = builtin("grid2x2").unwrap();
        for (p, q) in [(0.5, 1.0), (0.0, 4.0), (1.0, 4.0)] {
            let r = dobrushin_bound(&g, p, q, 0, &Probes::AllConfigs).unwrap();
            assert_eq!(r.row_sum, 0.0);
            assert!(r.certified);
        }
    }

    #[test]
    fn entries_match_pairwise_currents() {
        let g = builtin("grid2x3").unwrap();
        let (p, q) = (0.3, 3.0);
        let r = dobrushin_bound(&g, p, q, 1, &Probes::AllConfigs).unwrap();
        let mut best = vec![0.0f64; g.n_edges()];
        for mask in 0..1u32 << g.n_edges() {
            let k = Conductances::new(q, (0..g.n_edges()).map(|e| mask >> e & 1 == 1).collect()).unwrap();
            for (e, b) in best.iter_mut().enumerate().filter(|&(e, _)| e != 1) {
                let x = transfer_current(&g, &k, 1, e).unwrap() * transfer_current(&g, &k, e, 1).unwrap();
                *b = b.max(p * (1.0 - p) * (q - 1.0) * (q - 1.0) * x);
            }
        }
        for e in &r.entries {
            assert!((e.c - best[e.g]).abs() <= 1e-12, "edge {}: {} vs {}", e.g, e.c, best[e.g]);
        }
    }

    #[test]
    fn short_range_is_rejected() {
        assert!(matches!(
            green_decay_fit(2, 20, &[2, 3, 5], 2.0, &KappaStrategy::AllSoft),
            Err(Error::InsufficientRange(_))
        ));
    }
}
