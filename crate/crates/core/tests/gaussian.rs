use std::sync::Arc;

use detcond::gaussian::{
    conditional_kappa_given_eta, field_moments, potential, sample_field_given_kappa, PinnedGaussianSampler,
};
use detcond::graph::{build_box, build_wired_box, FiniteGraph};
use detcond::laplacian::{green_gradient, Conductances};

fn checkerboard(g: &FiniteGraph, q: f64) -> Conductances {
    let hard = g
        .edges()
        .iter()
        .map(|&(u, _)| g.coords(u).map_or(false, |c| (c[0] + c[1]).rem_euclid(2) == 0))
        .collect();
    Conductances::new(q, hard).unwrap()
}

/// Every entry of the sample covariance lies within four standard errors of
/// the Green kernel of `oracle`; `image` sends sampled edges to oracle edges
/// and `vmap` sampled vertices to oracle vertices.
fn check_covariance(
    g: Arc<FiniteGraph>,
    k: &Conductances,
    oracle: &FiniteGraph,
    image: &[Option<usize>],
    vmap: &[usize],
    n: usize,
    seed: u64,
) {
    let sampler = PinnedGaussianSampler::new(g.clone(), k).unwrap();
    let fields = sample_field_given_kappa(&sampler, seed, n);
    let edges: Vec<usize> = (0..g.n_edges()).step_by(3).filter(|&e| image[e].is_some()).collect();
    let m = field_moments(&g, &fields, &edges).unwrap();
    assert!(m.max_plaquette_residual < 1e-10);
    let mut hard = vec![false; oracle.n_edges()];
    for (e, img) in image.iter().enumerate() {
        if let Some(o) = img {
            hard[*o] = k.is_hard(e);
        }
    }
    let ok = Conductances::new(k.q(), hard).unwrap();
    let ends = |e: usize| {
        let (u, v) = g.endpoints(e);
        (vmap[u], vmap[v])
    };
    let kernel = |a: usize, b: usize| green_gradient(oracle, &ok, ends(a), ends(b)).unwrap();
    for (i, &a) in edges.iter().enumerate() {
        for (j, &b) in edges.iter().enumerate() {
            let want = kernel(a, b);
            let se = ((kernel(a, a) * kernel(b, b) + want * want) / n as f64).sqrt();
            let got = m.covariance[i][j];
            assert!((got - want).abs() < 4.0 * se, "({a},{b}): {got} vs {want} +- {se}");
        }
        assert!(m.mean[i].abs() < 4.0 * (m.covariance[i][i] / n as f64).sqrt());
    }
}

#[test]
fn wired_box_covariance_is_the_green_kernel() {
    let g = Arc::new(build_box(2, 2, true).unwrap());
    let identity: Vec<Option<usize>> = (0..g.n_edges()).map(Some).collect();
    let vertices: Vec<usize> = (0..g.n_vertices()).collect();
    let q = 6.0;
    for (seed, k) in [
        (1, Conductances::all_soft(q, g.n_edges()).unwrap()),
        (2, Conductances::all_hard(q, g.n_edges()).unwrap()),
        (3, checkerboard(&g, q)),
    ] {
        check_covariance(g.clone(), &k, &g, &identity, &vertices, 40_000, seed);
    }
}

#[test]
fn free_box_with_pinned_boundary_is_the_wired_field() {
    let free = Arc::new(build_box(2, 2, false).unwrap());
    let wired = build_wired_box(2, 2).unwrap();
    let k = checkerboard(&free, 3.0);
    let sampler = PinnedGaussianSampler::new(free.clone(), &k).unwrap();
    // bonds between boundary vertices carry no gradient
    for f in sample_field_given_kappa(&sampler, 9, 200) {
        for (e, img) in wired.edge_map.iter().enumerate() {
            if img.is_none() {
                assert_eq!(f.0[e], 0.0);
            }
        }
    }
    check_covariance(free, &k, &wired.graph, &wired.edge_map, &wired.vertex_map, 30_000, 4);
}

#[test]
fn potential_normalisation_by_quadrature() {
    for (p, q) in [(0.3, 4.0), (0.5, 16.0), (0.9, 1.5)] {
        let (a, b, steps) = (-40.0f64, 40.0f64, 400_000);
        let h = (b - a) / steps as f64;
        let integral: f64 = (0..=steps)
            .map(|i| {
                let x = a + i as f64 * h;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                w * (-potential(x, p, q)).exp()
            })
            .sum::<f64>()
            * h;
        let tau = std::f64::consts::TAU;
        let want = p * (tau / q).sqrt() + (1.0 - p) * tau.sqrt();
        assert!((integral - want).abs() < 1e-9, "{integral} vs {want}");
    }
}

#[test]
fn conditional_is_logistic_in_eta_squared() {
    let (p, q) = (0.4, 9.0);
    let logit = |x: f64| (x / (1.0 - x)).ln();
    let base = logit(conditional_kappa_given_eta(0.0, p, q));
    assert!((base - (p / (1.0 - p)).ln()).abs() < 1e-12);
    for eta in [0.1, 0.5, 1.0, 2.0, 3.0] {
        let l = logit(conditional_kappa_given_eta(eta, p, q));
        assert!((l - base + (q - 1.0) * eta * eta / 2.0).abs() < 1e-9);
        assert_eq!(conditional_kappa_given_eta(-eta, p, q), conditional_kappa_given_eta(eta, p, q));
    }
}

#[test]
fn fields_are_reproducible() {
    let g = Arc::new(build_box(2, 1, true).unwrap());
    let s = PinnedGaussianSampler::new(g.clone(), &Conductances::all_soft(2.0, g.n_edges()).unwrap()).unwrap();
    assert_eq!(sample_field_given_kappa(&s, 5, 50), sample_field_given_kappa(&s, 5, 50));
    assert_ne!(sample_field_given_kappa(&s, 5, 2), sample_field_given_kappa(&s, 6, 2));
}
