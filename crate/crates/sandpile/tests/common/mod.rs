#![allow(dead_code)]

use vicsek_sandpile::Topology;

/// Plain adjacency lists with an explicit sink, for oracles that must not
/// share code with the library's engine.
pub struct Adj {
    pub nbrs: Vec<Vec<usize>>,
    pub sink: usize,
}

impl Adj {
    pub fn of<T: Topology>(g: &T) -> Self {
        let nbrs = (0..g.vertex_count())
            .map(|v| g.neighbors(v).iter().map(|&w| w as usize).collect())
            .collect();
        Adj {
            nbrs,
            sink: g.sink(),
        }
    }
}

/// Topples the lowest-index unstable vertex one at a time. Heights are
/// indexed like `a.nbrs`; the entry at the sink accumulates.
pub fn naive_stabilize(a: &Adj, h: &mut [i64]) -> Vec<u64> {
    let mut odo = vec![0u64; h.len()];
    loop {
        let v = (0..h.len()).find(|&v| v != a.sink && h[v] >= a.nbrs[v].len() as i64);
        let Some(v) = v else { return odo };
        h[v] -= a.nbrs[v].len() as i64;
        odo[v] += 1;
        for &w in &a.nbrs[v] {
            h[w] += 1;
        }
    }
}

/// Chi-square p-value of `observed` against equal expected counts.
pub fn uniform_p_value(observed: &[u64]) -> f64 {
    let total: u64 = observed.iter().sum();
    let e = total as f64 / observed.len() as f64;
    let stat: f64 = observed.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    chi2_sf(stat, (observed.len() - 1) as f64)
}

/// Chi-square p-value of `observed` against `probs`.
pub fn p_value(observed: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut df = -1.0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(o, 0, "observed an impossible outcome");
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        df += 1.0;
    }
    chi2_sf(stat, df)
}

pub fn chi2_sf(stat: f64, df: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}
