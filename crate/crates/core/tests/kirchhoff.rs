use std::sync::Arc;

use detcond::graph::{builtin, FiniteGraph};
use detcond::laplacian::{log_det_zero_mean, Conductances};
use detcond::model::{enumerate, Configuration, MeasureSpec};
use detcond::spanning_tree::{kirchhoff_sum, spanning_trees, tree_partition};

const GRAPHS: [&str; 6] = ["triangle", "c4", "k4", "grid2x2", "grid2x3", "wired1"];
const QS: [f64; 4] = [1.0, 2.0, 10.0, 1e4];

fn configs(m: usize) -> impl Iterator<Item = Configuration> {
    (0u64..1 << m).map(move |mask| Configuration((0..m).map(|i| mask >> i & 1 == 1).collect()))
}

#[test]
fn log_det_matches_tree_sum_for_every_configuration() {
    for name in GRAPHS {
        let g = builtin(name).unwrap();
        for q in QS {
            for c in configs(g.n_edges()) {
                let k = c.conductances(q).unwrap();
                let trees = kirchhoff_sum(&g, &k).unwrap().ln();
                let dc = (g.n_vertices() as f64).ln() + tree_partition(&g, &k.weights()).unwrap().ln();
                let ld = log_det_zero_mean(&g, &k).unwrap();
                assert!((trees - ld).abs() <= 1e-10 * trees.abs().max(1.0), "{name} q={q} {}: {trees} vs {ld}", c.bits());
                assert!((dc - ld).abs() <= 1e-10 * ld.abs().max(1.0), "{name} q={q} {}", c.bits());
            }
        }
    }
}

#[test]
fn tree_counts() {
    // Cayley for K4, and the 2x3 ladder
    let count = |name: &str| spanning_trees(&builtin(name).unwrap()).unwrap().len();
    assert_eq!(count("triangle"), 3);
    assert_eq!(count("c4"), 4);
    assert_eq!(count("k4"), 16);
    assert_eq!(count("grid2x2"), 4);
    assert_eq!(count("grid2x3"), 15);
    assert_eq!(count("grid3x3"), 192);
}

fn direct_weights(g: &FiniteGraph, p: f64, q: f64) -> Vec<f64> {
    let m = g.n_edges();
    let w: Vec<f64> = configs(m)
        .map(|c| {
            let h = c.hard_count() as i32;
            let k = Conductances::new(q, c.0.clone()).unwrap();
            p.powi(h) * (1.0 - p).powi(m as i32 - h) / kirchhoff_sum(g, &k).unwrap().sqrt()
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[test]
fn exact_distribution_matches_tree_sums() {
    for name in GRAPHS {
        let g = Arc::new(builtin(name).unwrap());
        for q in QS {
            for p in [0.2, 0.5, 0.9] {
                let spec = MeasureSpec::new(g.clone(), p, q).unwrap();
                let exact = enumerate(&spec).unwrap();
                let direct = direct_weights(&g, p, q);
                for (mask, (&a, &b)) in exact.probabilities().iter().zip(&direct).enumerate() {
                    assert!((a - b).abs() <= 1e-12, "{name} p={p} q={q} mask={mask}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn q_one_is_bernoulli() {
    let g = Arc::new(builtin("grid2x3").unwrap());
    let spec = MeasureSpec::new(g.clone(), 0.3, 1.0).unwrap();
    let exact = enumerate(&spec).unwrap();
    for (mask, &pr) in exact.probabilities().iter().enumerate() {
        let h = (mask as u64).count_ones() as i32;
        let want = 0.3f64.powi(h) * 0.7f64.powi(g.n_edges() as i32 - h);
        assert!((pr - want).abs() < 1e-14);
    }
}
