use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;
use vicsek_sandpile::graph::{classify_coord, has_ternary_digit_two, kappa, DiagonalClass};
use vicsek_sandpile::{Coord, Lattice, Topology, VicsekGraph};

fn c(x: u32, y: u32) -> Coord {
    Coord::new(x, y)
}

/// Vertex set by direct set union of shifted copies, independent of the
/// block-corner construction used by the library.
fn vertex_union(level: u32) -> BTreeSet<Coord> {
    if level == 0 {
        return [c(0, 0), c(1, 0), c(0, 1), c(1, 1)].into_iter().collect();
    }
    let prev = vertex_union(level - 1);
    let s = 3u32.pow(level - 1);
    let mut out = BTreeSet::new();
    for (dx, dy) in [(0, 0), (s, s), (2 * s, 0), (0, 2 * s), (2 * s, 2 * s)] {
        out.extend(prev.iter().map(|p| c(p.x + dx, p.y + dy)));
    }
    out
}

#[test]
fn counts_and_degrees_through_level_five() {
    for n in 0..=5 {
        let g = VicsekGraph::build(n).unwrap();
        let p = 5usize.pow(n);
        assert_eq!(g.vertex_count(), 3 * p + 1);
        assert_eq!(g.edge_count(), 6 * p);
        assert_eq!(g.degree_histogram(), (2 * p + 2, p - 1), "level {n}");
        let side = 3u32.pow(n);
        assert_eq!(g.coord(g.sink()), c(side, side));
        let listed: BTreeSet<Coord> = g.coords().iter().copied().collect();
        assert_eq!(listed, vertex_union(n));
    }
}

#[test]
fn adjacency_is_symmetric_and_connected() {
    let g = VicsekGraph::build(3).unwrap();
    for v in 0..g.vertex_count() {
        for &w in g.neighbors(v) {
            assert!(g.neighbors(w as usize).contains(&(v as u32)));
        }
    }
    assert!(g.distances_from(0).iter().all(|&d| d != u32::MAX));
}

#[test]
fn cutpoints_disconnect() {
    let g = VicsekGraph::build(2).unwrap();
    for v in 0..g.vertex_count() {
        let start = if v == 0 { 1 } else { 0 };
        let mut seen = vec![false; g.vertex_count()];
        seen[v] = true;
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in g.neighbors(u) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    stack.push(w as usize);
                }
            }
        }
        let connected = count == g.vertex_count() - 1;
        assert_eq!(connected, g.degree(v) == 3, "vertex {}", g.coord(v));
    }
}

#[test]
fn nesting() {
    for n in 1..=4 {
        let g = VicsekGraph::build(n).unwrap();
        let h = VicsekGraph::build(n - 1).unwrap();
        let s = 3u32.pow(n - 1);
        let inner: Vec<Coord> = g
            .coords()
            .iter()
            .copied()
            .filter(|p| p.x <= s && p.y <= s)
            .collect();
        assert_eq!(inner, h.coords());
        for (v, &p) in h.coords().iter().enumerate() {
            let gv = g.index_of(p).unwrap();
            let mut a: Vec<Coord> = h
                .neighbors(v)
                .iter()
                .map(|&w| h.coord(w as usize))
                .collect();
            let mut b: Vec<Coord> = g
                .neighbors(gv)
                .iter()
                .map(|&w| g.coord(w as usize))
                .filter(|q| q.x <= s && q.y <= s)
                .collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn diagonal_copies() {
    let g = VicsekGraph::build(2).unwrap();
    for i in 1..=9 {
        let k = g.diagonal_copy(i).unwrap();
        for a in 0..4 {
            for b in a + 1..4 {
                assert!(g.neighbors(k[a]).contains(&(k[b] as u32)));
            }
        }
    }
    assert!(g.diagonal_copy(0).is_err());
    assert!(g.diagonal_copy(10).is_err());
}

#[test]
fn branch_components_have_a_single_cutpoint() {
    for n in 1..=3 {
        let g = VicsekGraph::build(n).unwrap();
        for &x in g.coords() {
            if classify_coord(x) != DiagonalClass::OffsetD1 {
                assert!(g.branch_component(x).is_err());
                continue;
            }
            let t: HashSet<Coord> = g.branch_component(x).unwrap().into_iter().collect();
            assert!(t
                .iter()
                .all(|p| classify_coord(*p) == DiagonalClass::Branch));
            for p in &t {
                let v = g.index_of(*p).unwrap();
                for &w in g.neighbors(v) {
                    let q = g.coord(w as usize);
                    assert!(q == x || t.contains(&q), "{p} leaks to {q}");
                }
            }
            assert_eq!(t.is_empty(), g.degree(g.index_of(x).unwrap()) == 3);
        }
    }
}

#[test]
fn branch_at_four_five() {
    let g = VicsekGraph::build(2).unwrap();
    let t = g.branch_component(c(4, 5)).unwrap();
    assert_eq!(t.len(), 18);
    assert!(t.contains(&c(3, 5)) && t.contains(&c(4, 6)) && t.contains(&c(0, 9)));
}

#[test]
fn geodesic_subgraphs() {
    let g1 = VicsekGraph::build(1).unwrap();
    let d1: Vec<Coord> = g1.diagonal_graph().coords().to_vec();
    assert_eq!(g1.geodesic_subgraph(c(0, 0)).unwrap(), d1);
    assert_eq!(d1.len(), 10);
    assert_eq!(
        g1.geodesic_subgraph(c(3, 2)).unwrap(),
        vec![c(2, 2), c(2, 3), c(3, 2), c(3, 3)]
    );
    assert!(g1.geodesic_subgraph(c(3, 3)).is_err());

    let g2 = VicsekGraph::build(2).unwrap();
    let dg = g2.diagonal_graph();
    for &x in dg.coords() {
        if x == c(9, 9) {
            continue;
        }
        let gamma = g2.geodesic_subgraph(x).unwrap();
        assert!(gamma.contains(&x) && gamma.contains(&c(9, 9)));
        if classify_coord(x) == DiagonalClass::OffsetD1 {
            let bound = x.chebyshev() - 1;
            assert!(gamma
                .iter()
                .all(|y| classify_coord(*y) != DiagonalClass::Branch && y.chebyshev() >= bound));
        }
    }
}

#[test]
fn distance_examples() {
    let g = VicsekGraph::build(1).unwrap();
    assert_eq!(g.graph_distance(c(0, 0), c(1, 1)).unwrap(), 1);
    assert_eq!(g.graph_distance(c(0, 0), c(3, 3)).unwrap(), 3);
    assert!(g.graph_distance(c(0, 0), c(2, 2)).is_ok());
    assert!(g.graph_distance(c(0, 0), c(4, 4)).is_err());
}

fn ternary_digits(mut n: u64) -> Vec<u64> {
    let mut d = Vec::new();
    while n > 0 {
        d.push(n % 3);
        n /= 3;
    }
    d
}

proptest! {
    #[test]
    fn kappa_matches_digit_definition(n in 0u64..1_000_000) {
        let want: u64 = ternary_digits(n).iter().enumerate().map(|(i, &a)| a.min(1) * 3u64.pow(i as u32)).sum();
        prop_assert_eq!(kappa(n), want);
        prop_assert!(kappa(n) <= n);
        prop_assert_eq!(has_ternary_digit_two(n), ternary_digits(n).contains(&2));
    }

    #[test]
    fn metric_axioms(a in 0usize..76, b in 0usize..76, m in 0usize..76) {
        let g = VicsekGraph::build(2).unwrap();
        let (pa, pb, pm) = (g.coord(a), g.coord(b), g.coord(m));
        let d = |x, y| g.graph_distance(x, y).unwrap();
        prop_assert_eq!(d(pa, pb), d(pb, pa));
        prop_assert!(d(pa, pb) <= d(pa, pm) + d(pm, pb));
        prop_assert_eq!(d(pa, pb) == 0, a == b);
    }
}
