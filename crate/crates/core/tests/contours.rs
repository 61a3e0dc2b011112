//! Contours around an edge, counted a second way: every contour is a closed
//! circuit through the dual bonds of the edge boundary of its interior, so
//! summing Eulerian circuit counts (BEST theorem) over connected vertex sets
//! reproduces the enumeration.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use detcond::graph::{build_free_box, enumerate_contours_around, Contour, DualPoint, FiniteGraph};
use nalgebra::DMatrix;

type Pt = (i64, i64);

/// Directed dual bond across the bond `a -> b` with `a` on its left.
fn dual_bond(a: Pt, b: Pt) -> (Pt, Pt) {
    let (x, y) = a;
    match (b.0 - x, b.1 - y) {
        (1, 0) => ((x, y - 1), (x, y)),
        (-1, 0) => ((x - 1, y), (x - 1, y - 1)),
        (0, 1) => ((x, y), (x - 1, y)),
        (0, -1) => ((x - 1, y - 1), (x, y - 1)),
        _ => unreachable!(),
    }
}

fn neighbours((x, y): Pt) -> [Pt; 4] {
    [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
}

/// Eulerian circuits of a balanced digraph: arborescences times
/// `Π (outdeg - 1)!`.
fn eulerian_circuits(arcs: &[(Pt, Pt)]) -> u64 {
    let nodes: BTreeSet<Pt> = arcs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let idx: HashMap<Pt, usize> = nodes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let n = nodes.len();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    let mut out = vec![0u64; n];
    for &(a, b) in arcs {
        let (i, j) = (idx[&a], idx[&b]);
        lap[(i, i)] += 1.0;
        lap[(i, j)] -= 1.0;
        out[i] += 1;
    }
    let minor = lap.remove_row(0).remove_column(0);
    let trees = minor.determinant().round().max(0.0) as u64;
    let fact = |k: u64| (1..k).product::<u64>();
    trees * out.iter().map(|&d| fact(d)).product::<u64>()
}

/// Interior vertex sets with their circuit counts.
fn oracle(n: i64, a: Pt, b: Pt, max_len: usize) -> BTreeMap<Vec<Pt>, u64> {
    let inside = |p: Pt| p.0.abs() < n && p.1.abs() < n;
    let max_size = max_len * max_len / 16;
    let mut level: BTreeSet<BTreeSet<Pt>> = BTreeSet::from([BTreeSet::from([a, b])]);
    let mut all = level.clone();
    for _ in 2..max_size {
        let mut next = BTreeSet::new();
        for s in &level {
            for &p in s {
                for w in neighbours(p) {
                    if inside(w) && !s.contains(&w) {
                        let mut t = s.clone();
                        t.insert(w);
                        next.insert(t);
                    }
                }
            }
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    let mut out = BTreeMap::new();
    for s in all {
        let arcs: Vec<(Pt, Pt)> = s
            .iter()
            .flat_map(|&p| neighbours(p).into_iter().filter(|w| !s.contains(w)).map(move |w| dual_bond(p, w)))
            .collect();
        if arcs.len() > max_len {
            continue;
        }
        let ec = eulerian_circuits(&arcs);
        if ec > 0 {
            out.insert(s.into_iter().collect(), ec);
        }
    }
    out
}

fn enumerated(g: &FiniteGraph, a: Pt, b: Pt, max_len: usize) -> BTreeMap<Vec<Pt>, u64> {
    let e = g.edge_at(&[a.0, a.1], &[b.0, b.1]).unwrap();
    let coord = |v: usize| {
        let c = g.coords(v).unwrap();
        (c[0], c[1])
    };
    let mut out = BTreeMap::new();
    for c in enumerate_contours_around(e, max_len, g).unwrap().contours {
        let mut s: Vec<Pt> = c.interior.iter().map(|&v| coord(v)).collect();
        s.sort_unstable();
        // crossed bonds are exactly the edge boundary of the interior
        let set: BTreeSet<Pt> = s.iter().copied().collect();
        let mut boundary: Vec<(Pt, Pt)> = s
            .iter()
            .flat_map(|&p| neighbours(p).into_iter().filter(|w| !set.contains(w)).map(move |w| (p, w)))
            .collect();
        boundary.sort_unstable();
        let mut crossed: Vec<(Pt, Pt)> = c
            .primal_bonds
            .iter()
            .zip(&c.tails)
            .map(|(&e, &t)| (coord(t), coord(g.other(e, t))))
            .collect();
        crossed.sort_unstable();
        assert_eq!(crossed, boundary);
        *out.entry(s).or_insert(0) += 1;
    }
    out
}

#[test]
fn enumeration_matches_circuit_count() {
    let g = build_free_box(2, 4).unwrap();
    for (a, b, max_len) in [
        ((0, 0), (1, 0), 6),
        ((0, 0), (1, 0), 8),
        ((0, 0), (1, 0), 10),
        ((0, 0), (0, 1), 10),
        ((2, 2), (2, 1), 10),
        ((-3, 0), (-2, 0), 12),
    ] {
        let want = oracle(4, a, b, max_len);
        let got = enumerated(&g, a, b, max_len);
        assert_eq!(got, want, "edge {a:?}-{b:?} up to length {max_len}");
    }
}

#[test]
fn small_lengths() {
    let g = build_free_box(2, 4).unwrap();
    let total = |len| enumerated(&g, (0, 0), (1, 0), len).values().sum::<u64>();
    // the domino; then straight and bent trominoes, and two squares
    assert_eq!(total(6), 1);
    assert_eq!(total(8), 1 + 6 + 2);
    assert_eq!(total(5), 0);
}

/// One Eulerian circuit, by Hierholzer, as a closed sequence of points.
fn circuit(arcs: &[(Pt, Pt)]) -> Vec<Pt> {
    let mut out_arcs: BTreeMap<Pt, Vec<Pt>> = BTreeMap::new();
    for &(a, b) in arcs {
        out_arcs.entry(a).or_default().push(b);
    }
    let mut stack = vec![arcs[0].0];
    let mut tour = Vec::new();
    while let Some(&v) = stack.last() {
        match out_arcs.get_mut(&v).and_then(|n| n.pop()) {
            Some(w) => stack.push(w),
            None => tour.push(stack.pop().unwrap()),
        }
    }
    tour.reverse();
    tour.pop();
    tour
}

#[test]
fn pinched_interior_is_one_circuit() {
    // a ring around (0, 1) that closes only through a corner at (1/2, 1/2)
    let s: BTreeSet<Pt> = BTreeSet::from([(0, 0), (-1, 0), (-1, 1), (-1, 2), (0, 2), (1, 2), (1, 1)]);
    let arcs: Vec<(Pt, Pt)> = s
        .iter()
        .flat_map(|&p| neighbours(p).into_iter().filter(|w| !s.contains(w)).map(move |w| dual_bond(p, w)))
        .collect();
    assert_eq!(eulerian_circuits(&arcs), 1);
    let walk: Vec<DualPoint> = circuit(&arcs).into_iter().map(|(x, y)| DualPoint::new(x, y)).collect();
    assert_eq!(walk.len(), arcs.len());
    let g = build_free_box(2, 4).unwrap();
    let c = Contour::from_dual_walk(&g, &walk).expect("pinched ring is a contour");
    let mut interior: Vec<Pt> = c.interior.iter().map(|&v| (g.coords(v).unwrap()[0], g.coords(v).unwrap()[1])).collect();
    interior.sort_unstable();
    assert_eq!(interior, s.into_iter().collect::<Vec<_>>());
}
