use std::collections::HashMap;
use std::sync::Arc;

use detcond::graph::{builtin, FiniteGraph};
use detcond::laplacian::{transfer_current, Conductances, LaplacianState};
use detcond::spanning_tree::{spanning_trees, tree_weight, wilson};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tree marginals straight from the list of spanning trees.
struct TreeOracle {
    trees: Vec<Vec<usize>>,
    weights: Vec<f64>,
    z: f64,
}

impl TreeOracle {
    fn new(g: &FiniteGraph, w: &[f64]) -> Self {
        let trees = spanning_trees(g).unwrap();
        let weights: Vec<f64> = trees.iter().map(|t| tree_weight(t, w)).collect();
        let z = weights.iter().sum();
        TreeOracle { trees, weights, z }
    }

    fn prob(&self, event: impl Fn(&[usize]) -> bool) -> f64 {
        self.trees.iter().zip(&self.weights).filter(|(t, _)| event(t)).map(|(_, w)| w).sum::<f64>() / self.z
    }
}

fn random_cond(rng: &mut ChaCha8Rng, m: usize, q: f64) -> Conductances {
    Conductances::new(q, (0..m).map(|_| rng.random_bool(0.5)).collect()).unwrap()
}

#[test]
fn currents_give_tree_marginals_and_pair_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in ["triangle", "k4", "grid2x3", "grid3x3"] {
        let g = builtin(name).unwrap();
        let m = g.n_edges();
        for q in [1.0, 3.0, 50.0] {
            let k = random_cond(&mut rng, m, q);
            let oracle = TreeOracle::new(&g, &k.weights());
            let cur: Vec<Vec<f64>> =
                (0..m).map(|f| (0..m).map(|e| transfer_current(&g, &k, f, e).unwrap()).collect()).collect();
            for f in 0..m {
                let pf = oracle.prob(|t| t.contains(&f));
                assert!((cur[f][f] - pf).abs() < 1e-12, "{name} q={q} f={f}");
                for e in 0..m {
                    if e == f {
                        continue;
                    }
                    // negative correlation, transfer-current form
                    let joint = oracle.prob(|t| t.contains(&f) && t.contains(&e));
                    let det = cur[f][f] * cur[e][e] - cur[f][e] * cur[e][f];
                    assert!((joint - det).abs() < 1e-12, "{name} q={q} ({f},{e})");
                    // reciprocity
                    let ratio = k.value(f) / k.value(e);
                    assert!((cur[e][f] - ratio * cur[f][e]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn flip_walk_tracks_fresh_factorisation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = [0.0f64; 3];
    for (name, q, refresh) in [("grid2x3", 7.0, 256), ("k4", 1e4, 13), ("grid3x3", 2.0, 64), ("wired1", 1.0, 5)] {
        let g = Arc::new(builtin(name).unwrap());
        let m = g.n_edges();
        let mut st = LaplacianState::with_options(g.clone(), Conductances::all_soft(q, m).unwrap(), 0, refresh, false).unwrap();
        let steps = if name == "grid3x3" { 2_000 } else { 10_000 };
        for step in 0..steps {
            let e = rng.random_range(0..m);
            // Q(e in t) with e soft, from the tree list
            let mut w = st.conductances().weights();
            w[e] = 1.0;
            let q_minus = TreeOracle::new(&g, &w).prob(|t| t.contains(&e));
            let to_hard = !st.conductances().is_hard(e);
            let d = st.flip_edge(e).unwrap();
            let ratio = 1.0 + (q - 1.0) * q_minus;
            let want = if to_hard { ratio } else { 1.0 / ratio };
            worst[0] = worst[0].max((d.exp() - want).abs() / want);
            let oracle = TreeOracle::new(&g, &st.conductances().weights());
            let fresh = oracle.z.ln();
            worst[1] = worst[1].max((st.log_det_pinned() - fresh).abs() / fresh.abs().max(1.0));
            let f = rng.random_range(0..m);
            let pf = oracle.prob(|t| t.contains(&f));
            worst[2] = worst[2].max((st.edge_marginal(f).unwrap() - pf).abs());
            assert!(worst.iter().all(|&x| x <= 1e-9), "{name} step {step}: {worst:?}");
        }
    }
}

#[test]
fn sparse_backend_agrees_with_dense() {
    let g = Arc::new(builtin("box:2:3").unwrap());
    let m = g.n_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = random_cond(&mut rng, m, 20.0);
    let mut dense = LaplacianState::with_options(g.clone(), k.clone(), 0, 32, false).unwrap();
    let mut sparse = LaplacianState::with_options(g.clone(), k, 0, 32, true).unwrap();
    for _ in 0..300 {
        let e = rng.random_range(0..m);
        let a = dense.flip_edge(e).unwrap();
        let b = sparse.flip_edge(e).unwrap();
        assert!((a - b).abs() < 1e-8);
        let f = rng.random_range(0..m);
        assert!((dense.marginal_minus(f).unwrap() - sparse.marginal_minus(f).unwrap()).abs() < 1e-8);
    }
    assert!((dense.log_det_pinned() - sparse.log_det_pinned()).abs() < 1e-8);
}

#[test]
fn wilson_samples_the_weighted_tree_law() {
    let g = builtin("k4").unwrap();
    let w = [1.0, 4.0, 1.0, 2.5, 1.0, 4.0];
    let oracle = TreeOracle::new(&g, &w);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 200_000;
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..n {
        let mut t = wilson(&g, &w, &mut rng);
        t.sort_unstable();
        *counts.entry(t).or_default() += 1;
    }
    assert_eq!(counts.len(), 16);
    for (t, wt) in oracle.trees.iter().zip(&oracle.weights) {
        let pr = wt / oracle.z;
        let sd = (pr * (1.0 - pr) / n as f64).sqrt();
        let got = counts[t] as f64 / n as f64;
        assert!((got - pr).abs() < 5.0 * sd, "{t:?}: {got} vs {pr}");
    }
}
