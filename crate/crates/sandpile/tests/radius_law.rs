//! Empirical law of the toppled-set diameter of `η + δ_o` on the full graph,
//! with `η` uniform recurrent (Wilson), against the exact radius law.

mod common;

use common::p_value;
use vicsek_sandpile::chain::{radius_pmf, radius_pmf_derived, rat, to_f64, Rational};
use vicsek_sandpile::parallel::run_trials;
use vicsek_sandpile::recurrence::sample_recurrent;
use vicsek_sandpile::{stabilize, VicsekGraph};

/// Cells: diameter ≤ 0, 1, 3, 4, anything else.
fn diameter_cells(level: u32, trials: u64, seed: u64) -> [u64; 5] {
    let g = VicsekGraph::build(level).unwrap();
    run_trials(
        trials,
        seed,
        None,
        |rng, acc: &mut [u64; 5]| {
            let mut c = sample_recurrent(&g, rng);
            c.heights[g.origin()] += 1;
            let (_, rep) = stabilize(&g, &c);
            let cell = match (rep.sink_particles, rep.diameter(&g)) {
                (0, d) if d <= 0 => 0,
                (0, 1) => 1,
                (0, 3) => 2,
                (0, 4) => 3,
                _ => 4,
            };
            acc[cell] += 1;
        },
        |mut a, b| {
            for i in 0..5 {
                a[i] += b[i];
            }
            a
        },
    )
    .unwrap()
}

#[test]
fn diameter_at_most_zero_is_nineteen_over_thirty_two() {
    let n = 200_000;
    let cells = diameter_cells(1, n, 3);
    let f = cells[0] as f64 / n as f64;
    let sd = (f * (1.0 - f) / n as f64).sqrt();
    let derived = to_f64(&radius_pmf_derived(0));
    let verbatim = to_f64(&radius_pmf(0));
    assert!((f - derived).abs() < 4.0 * sd, "{f} vs {derived}");
    assert!((f - verbatim).abs() > 20.0 * sd, "{f} vs {verbatim}");
}

#[test]
fn small_diameters_follow_the_exact_law() {
    let cells = diameter_cells(2, 100_000, 4);
    let head: Vec<Rational> = [0, 1, 3, 4]
        .iter()
        .map(|&n| radius_pmf_derived(n))
        .collect();
    let rest = rat(1, 1) - head.iter().sum::<Rational>();
    let probs: Vec<f64> = head.iter().chain([&rest]).map(to_f64).collect();
    let p = p_value(&cells, &probs);
    assert!(p > 1e-3, "p = {p}, cells {cells:?}");
}
