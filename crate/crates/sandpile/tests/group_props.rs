use num::{BigInt, BigUint, Integer, One, Signed, Zero};
use proptest::prelude::*;
use rand::Rng;
use vicsek_sandpile::chain::{k_step_distribution, to_f64};
use vicsek_sandpile::group::{
    element_order, group_structure, order2_count, reduced_laplacian, sink_hit_probability,
    smith_normal_form, IntegerMatrix,
};
use vicsek_sandpile::identity::identity;
use vicsek_sandpile::parallel::stream;
use vicsek_sandpile::recurrence::{enumerate_recurrent_k4, sample_recurrent};
use vicsek_sandpile::{stabilize, Error, SandpileConfig, Topology, VicsekGraph};

fn laplace_det(m: &[Vec<i64>]) -> i64 {
    if m.len() == 1 {
        return m[0][0];
    }
    (0..m.len())
        .map(|j| {
            let minor: Vec<Vec<i64>> = m[1..]
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|&(k, _)| k != j)
                        .map(|(_, &x)| x)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1 } else { -1 };
            sign * m[0][j] * laplace_det(&minor)
        })
        .sum()
}

/// gcd of all k×k minors, for k = 1, 2.
fn minor_gcd(m: &[Vec<i64>], k: usize) -> i64 {
    let n = m.len();
    let mut g = 0i64;
    if k == 1 {
        for r in m {
            for &x in r {
                g = g.gcd(&x);
            }
        }
        return g;
    }
    for r1 in 0..n {
        for r2 in r1 + 1..n {
            for c1 in 0..n {
                for c2 in c1 + 1..n {
                    g = g.gcd(&(m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]));
                }
            }
        }
    }
    g
}

fn random_matrix(rng: &mut impl Rng, n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| rng.gen_range(-6..=6) * [1, 2, 4][rng.gen_range(0..3)])
                .collect()
        })
        .collect()
}

#[test]
fn snf_against_determinant_and_minors() {
    let mut rng = stream(99, 0);
    let mut checked = 0;
    while checked < 50 {
        let n = rng.gen_range(1..=6);
        let rows = random_matrix(&mut rng, n);
        let det = laplace_det(&rows);
        let m = IntegerMatrix::from_rows(&rows);
        if det == 0 {
            assert!(matches!(smith_normal_form(&m), Err(Error::Singular(_))));
            continue;
        }
        checked += 1;
        let f = smith_normal_form(&m).unwrap();
        assert_eq!(f.0.len(), n);
        assert!(f.is_divisibility_chain());
        assert_eq!(f.product(), BigInt::from(det.abs()));
        assert_eq!(m.determinant().unwrap(), BigInt::from(det));
        assert_eq!(f.0[0], BigInt::from(minor_gcd(&rows, 1)));
        if n >= 2 {
            assert_eq!(&f.0[0] * &f.0[1], BigInt::from(minor_gcd(&rows, 2)));
        }
    }
}

#[test]
fn laplacian_shape() {
    let g = VicsekGraph::build(2).unwrap();
    let l = reduced_laplacian(&g);
    let n = g.site_count();
    assert_eq!((l.rows, l.cols), (n, n));
    for i in 0..n {
        assert_eq!(*l.get(i, i), BigInt::from(g.degree(i)));
        let mut row = BigInt::zero();
        for j in 0..n {
            assert_eq!(l.get(i, j), l.get(j, i));
            if i != j {
                assert!(l.get(i, j).is_zero() || *l.get(i, j) == -BigInt::one());
            }
            row += l.get(i, j);
        }
        let to_sink = g
            .neighbors(i)
            .iter()
            .filter(|&&w| w as usize == g.sink())
            .count();
        assert_eq!(row, BigInt::from(to_sink));
    }
}

#[test]
fn group_structure_through_level_two() {
    for n in 0..=2u32 {
        let f = group_structure(n).unwrap();
        let p = 5usize.pow(n);
        assert_eq!(f.0.len(), 3 * p);
        assert_eq!(f.unit_count(), p);
        assert!(f.non_unit().iter().all(|&d| *d == BigInt::from(4)));
        assert_eq!(f.non_unit().len(), 2 * p);
        assert_eq!(f.product(), BigInt::from(16).pow(p as u32));
        assert_eq!(
            f.product(),
            reduced_laplacian(&VicsekGraph::build(n).unwrap())
                .determinant()
                .unwrap()
        );
    }
}

#[test]
fn order_two_counts() {
    let counts: Vec<BigUint> = (0..=2).map(|n| order2_count(n).unwrap()).collect();
    assert_eq!(counts[0], BigUint::from(4u32));
    assert_eq!(counts[1], BigUint::from(1u32 << 10));
    assert_eq!(counts[2], BigUint::from(2u32).pow(50));
    for n in 1..=2 {
        assert!(counts[n] <= counts[n - 1].pow(5));
    }
}

#[test]
fn order_two_elements_of_k4() {
    let g = VicsekGraph::build(0).unwrap();
    let id = identity(0).unwrap();
    let orders: Vec<u64> = enumerate_recurrent_k4()
        .iter()
        .map(|e| element_order(&g, e, &id).unwrap())
        .collect();
    assert_eq!(orders.iter().filter(|&&o| o <= 2).count(), 4);
    assert_eq!(orders.iter().filter(|&&o| o == 1).count(), 1);
    assert_eq!(*orders.iter().max().unwrap(), 4);
}

#[test]
fn element_orders_divide_four() {
    for level in [1, 2] {
        let g = VicsekGraph::build(level).unwrap();
        let id = identity(level).unwrap();
        assert_eq!(element_order(&g, &id, &id).unwrap(), 1);
        let mut rng = stream(level as u64, 0);
        let mut seen = [0u32; 5];
        for _ in 0..200 {
            let eta = sample_recurrent(&g, &mut rng);
            let k = element_order(&g, &eta, &id).unwrap();
            assert!(k == 1 || k == 2 || k == 4, "order {k}");
            seen[k as usize] += 1;
        }
        // Most elements of Z₄^m have order 4.
        assert!(seen[4] > 150);
        let largest = group_structure(level).unwrap().0.last().unwrap().clone();
        assert_eq!(largest, BigInt::from(4));
    }
    let g = VicsekGraph::build(1).unwrap();
    let bad = SandpileConfig::zeros(&g);
    assert!(matches!(
        element_order(&g, &bad, &identity(1).unwrap()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn four_particles_anywhere_return_the_configuration() {
    for level in [1, 2] {
        let g = VicsekGraph::build(level).unwrap();
        let mut rng = stream(50 + level as u64, 0);
        for _ in 0..50 {
            let eta = sample_recurrent(&g, &mut rng);
            let x = rng.gen_range(0..g.site_count());
            let mut c = eta.clone();
            c.add_particles(&g, x, 4).unwrap();
            let (out, rep) = stabilize(&g, &c);
            assert_eq!(out, eta);
            assert_eq!(rep.sink_particles, 4);
        }
    }
}

#[test]
fn sink_hits() {
    let g = VicsekGraph::build(2).unwrap();
    for x in [0, 17, 40, g.site_count() - 1] {
        let e = sink_hit_probability(&g, x, 4, 300, 1, None).unwrap();
        assert_eq!(e.hits, e.samples);
    }
    let one = sink_hit_probability(&g, 0, 1, 20_000, 2, None).unwrap();
    let two = sink_hit_probability(&g, 0, 2, 20_000, 3, None).unwrap();
    let joint = (two.stderr.powi(2) + 4.0 * one.stderr.powi(2)).sqrt();
    assert!(
        two.estimate <= 2.0 * one.estimate + 3.0 * joint,
        "{two:?} vs {one:?}"
    );
    assert!(sink_hit_probability(&g, g.sink(), 1, 10, 0, None).is_err());
    assert!(sink_hit_probability(&g, 0, 0, 10, 0, None).is_err());
}

#[test]
fn sink_hit_at_origin_matches_the_chain() {
    // On 𝒱₁ the sink is the third checkpoint, so a hit is X₃ ≥ 1.
    let g = VicsekGraph::build(1).unwrap();
    let exact = 1.0 - to_f64(&k_step_distribution(1, 3).unwrap()[0]);
    let e = sink_hit_probability(&g, 0, 1, 40_000, 4, None).unwrap();
    assert!(
        (e.estimate - exact).abs() < 4.0 * e.stderr,
        "{} vs {exact}",
        e.estimate
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn snf_preserves_absolute_determinant(rows in prop::collection::vec(prop::collection::vec(-9i64..=9, 4), 4)) {
        let det = laplace_det(&rows);
        let m = IntegerMatrix::from_rows(&rows);
        match smith_normal_form(&m) {
            Ok(f) => {
                prop_assert!(f.is_divisibility_chain());
                prop_assert!(f.0.iter().all(|d| d.is_positive()));
                prop_assert_eq!(f.product(), BigInt::from(det.abs()));
            }
            Err(_) => prop_assert_eq!(det, 0),
        }
    }
}

/// `P(sink hit)` at the origin of `𝒱_n` when `k` particles are added:
/// the chain started at `k` has not been absorbed at 0 by step `3ⁿ`.
fn exact_hit(level: u32, k: usize) -> vicsek_sandpile::chain::Rational {
    let v = k_step_distribution(k, 3u32.pow(level)).unwrap();
    vicsek_sandpile::chain::rat(1, 1) - &v[0]
}

#[test]
fn doubling_inequality_at_the_origin_is_exact_and_tight() {
    use vicsek_sandpile::chain::rat;
    for level in 1..=4 {
        let (one, two) = (exact_hit(level, 1), exact_hit(level, 2));
        assert!(two < rat(2, 1) * &one, "level {level}");
    }
    // The gap closes: the limits are 1/4 and 1/2.
    let gap = rat(2, 1) * exact_hit(4, 1) - exact_hit(4, 2);
    assert!(to_f64(&gap) < 1e-20);

    let g = VicsekGraph::build(2).unwrap();
    for k in [1, 2] {
        let e = sink_hit_probability(&g, 0, k as i64, 20_000, 60 + k as u64, None).unwrap();
        let p = to_f64(&exact_hit(2, k));
        assert!(
            (e.estimate - p).abs() < 4.0 * e.stderr,
            "k = {k}: {} vs {p}",
            e.estimate
        );
    }
}
