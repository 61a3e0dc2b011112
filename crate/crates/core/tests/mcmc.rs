use std::sync::Arc;

use detcond::graph::{build_free_box, build_wired_box, builtin};
use detcond::mcmc::{free_wired_pairs, identity_pairs, Chain, ChainConfig, CoupledChains};
use detcond::model::{enumerate, total_variation, MeasureSpec};

#[test]
fn chain_matches_exact_law() {
    let g = Arc::new(builtin("grid2x2").unwrap());
    for (p, q, seed) in [(0.5, 4.0, 1), (0.3, 50.0, 2)] {
        let spec = MeasureSpec::new(g.clone(), p, q).unwrap();
        let exact = enumerate(&spec).unwrap();
        let mut chain = Chain::new(spec.clone(), ChainConfig::new(seed).burnin(100)).unwrap();
        chain.run(100).unwrap();
        let mut counts = vec![0.0; exact.len()];
        let sweeps = 100_000;
        for _ in 0..sweeps {
            chain.sweep().unwrap();
            counts[spec.mask_of(chain.configuration()) as usize] += 1.0;
        }
        let emp: Vec<f64> = counts.iter().map(|c| c / sweeps as f64).collect();
        let tv = total_variation(&emp, exact.probabilities());
        assert!(tv < 0.01, "p={p} q={q}: tv {tv}");
        assert!(chain.log_det_drift().unwrap() < 1e-8);
    }
}

#[test]
fn monotone_couplings_hold() {
    let free = Arc::new(build_free_box(2, 2).unwrap());
    let wired = build_wired_box(2, 2).unwrap();
    for q in [2.0, 100.0] {
        // p-ordered, same graph
        let lo = MeasureSpec::new(free.clone(), 0.3, q).unwrap();
        let hi = MeasureSpec::new(free.clone(), 0.6, q).unwrap();
        let pairs = identity_pairs(&lo);
        let rep = CoupledChains::new(lo, hi, pairs, 7, 0, (None, None)).unwrap().run(2_000).unwrap();
        assert!(rep.checks > 0);
        assert_eq!(rep.violations, 0);
        // free below wired
        let lo = MeasureSpec::new(free.clone(), 0.5, q).unwrap();
        let hi = MeasureSpec::new(Arc::new(wired.graph.clone()), 0.5, q).unwrap();
        let rep = CoupledChains::new(lo, hi, free_wired_pairs(&wired), 8, 0, (None, None))
            .unwrap()
            .run(2_000)
            .unwrap();
        assert_eq!(rep.violations, 0);
    }
}

#[test]
fn chains_are_reproducible() {
    let g = Arc::new(builtin("box:2:3:wired").unwrap());
    let spec = MeasureSpec::new(g, 0.6, 9.0).unwrap();
    let run = |seed| {
        let mut c = Chain::new(spec.clone(), ChainConfig::new(seed).burnin(10).observe(0)).unwrap();
        c.run(200).unwrap();
        (c.configuration().clone(), c.report())
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3).0, run(4).0);
}
