//! Burning test, the burning bijection, uniform spanning trees and the
//! samplers built on them.

use rand::Rng;

use crate::engine::{stabilize, SandpileConfig};
use crate::error::{Error, Result};
use crate::graph::{Coord, DiagonalGraph, Lattice, Topology, VicsekGraph};

/// Dhar's burning test. Requires a stable configuration.
pub fn is_recurrent<T: Topology>(g: &T, c: &SandpileConfig) -> Result<bool> {
    if c.len() != g.site_count() {
        return Err(Error::Domain("configuration does not fit the graph".into()));
    }
    if !c.is_stable(g) || !c.is_nonnegative() {
        return Err(Error::Domain(
            "burning test needs a stable configuration".into(),
        ));
    }
    let sink = g.sink();
    let mut burned = c.clone();
    for v in 0..g.site_count() {
        burned.heights[v] += g
            .neighbors(v)
            .iter()
            .filter(|&&w| w as usize == sink)
            .count() as i64;
    }
    let (out, report) = stabilize(g, &burned);
    Ok(out == *c && report.odometer.iter().all(|&k| k == 1))
}

/// Every stable configuration of `g`. Only sensible for a handful of sites.
pub fn enumerate_stable<T: Topology>(g: &T) -> Vec<SandpileConfig> {
    let degs: Vec<i64> = (0..g.site_count()).map(|v| g.degree(v) as i64).collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; degs.len()];
    loop {
        out.push(SandpileConfig::new(cur.clone()));
        let mut i = cur.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < degs[i] {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// The 16 recurrent configurations of K₄ (sink at the top-right corner),
/// heights listed at `(0,0), (0,1), (1,0)`, in lexicographic order.
pub fn enumerate_recurrent_k4() -> Vec<SandpileConfig> {
    let g = VicsekGraph::build_with_cap(0, 0).expect("level 0 always builds");
    enumerate_stable(&g)
        .into_iter()
        .filter(|c| is_recurrent(&g, c).expect("stable by construction"))
        .collect()
}

/// A spanning tree rooted at the sink: `parent[v]` for every non-sink `v`.
/// The connecting edge is `{v, parent[v]}` since Vicsek graphs are simple.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpanningTree {
    pub parent: Vec<u32>,
}

impl SpanningTree {
    /// Depth of every vertex (sink = 0), or an error if the parent map is not
    /// a spanning tree of `g` rooted at the sink.
    pub fn depths<T: Topology + ?Sized>(&self, g: &T) -> Result<Vec<u32>> {
        let n = g.site_count();
        if self.parent.len() != n {
            return Err(Error::Domain("parent map has the wrong length".into()));
        }
        for (v, &p) in self.parent.iter().enumerate() {
            if !g.neighbors(v).contains(&p) {
                return Err(Error::Domain(format!("{v} -> {p} is not an edge")));
            }
        }
        const UNSET: u32 = u32::MAX;
        let mut depth = vec![UNSET; n + 1];
        depth[g.sink()] = 0;
        let mut path = Vec::new();
        for start in 0..n {
            let mut v = start;
            while depth[v] == UNSET {
                if path.len() > n {
                    return Err(Error::Domain("parent map contains a cycle".into()));
                }
                path.push(v);
                v = self.parent[v] as usize;
            }
            let mut d = depth[v];
            while let Some(u) = path.pop() {
                d += 1;
                depth[u] = d;
            }
        }
        Ok(depth)
    }

    pub fn is_valid<T: Topology + ?Sized>(&self, g: &T) -> bool {
        self.depths(g).is_ok()
    }
}

/// Total order `<_v` on the edges at each vertex, given as a rank per
/// neighbor slot. The default ranks edges by the neighbor's canonical index.
#[derive(Clone, Debug, Default)]
pub struct EdgeOrder {
    ranks: Option<Vec<Vec<u32>>>,
}

impl EdgeOrder {
    pub fn neighbor_index() -> Self {
        EdgeOrder { ranks: None }
    }

    /// `ranks[v][j]` is the rank of the edge to the `j`-th neighbor of `v`.
    pub fn from_ranks(ranks: Vec<Vec<u32>>) -> Self {
        EdgeOrder { ranks: Some(ranks) }
    }

    fn rank(&self, v: usize, slot: usize, neighbor: u32) -> u32 {
        match &self.ranks {
            Some(r) => r[v][slot],
            None => neighbor,
        }
    }
}

/// The burning bijection `T ↦ σ_T` with
/// `σ_T(v) = deg(v) − 1 − a_T(v) − b_T(v)`.
pub fn tree_to_config<T: Topology + ?Sized>(
    g: &T,
    t: &SpanningTree,
    ord: &EdgeOrder,
) -> Result<SandpileConfig> {
    let depth = t.depths(g)?;
    let mut heights = Vec::with_capacity(g.site_count());
    for v in 0..g.site_count() {
        let lv = depth[v];
        let p = t.parent[v];
        let nbrs = g.neighbors(v);
        let p_slot = nbrs.iter().position(|&w| w == p).expect("validated");
        let p_rank = ord.rank(v, p_slot, p);
        let mut a = 0;
        let mut b = 0;
        for (slot, &w) in nbrs.iter().enumerate() {
            let lw = depth[w as usize];
            if lw + 1 < lv {
                a += 1;
            } else if lw + 1 == lv && ord.rank(v, slot, w) < p_rank {
                b += 1;
            }
        }
        heights.push(nbrs.len() as i64 - 1 - a - b);
    }
    Ok(SandpileConfig::new(heights))
}

/// All spanning trees rooted at the sink, by exhaustive parent choice.
/// Exponential; meant for K₄-sized graphs.
pub fn enumerate_spanning_trees<T: Topology + ?Sized>(g: &T) -> Vec<SpanningTree> {
    let n = g.site_count();
    let mut out = Vec::new();
    let mut parent = vec![0u32; n];
    fn rec<T: Topology + ?Sized>(
        g: &T,
        v: usize,
        parent: &mut Vec<u32>,
        out: &mut Vec<SpanningTree>,
    ) {
        if v == parent.len() {
            let t = SpanningTree {
                parent: parent.clone(),
            };
            if t.is_valid(g) {
                out.push(t);
            }
            return;
        }
        for &w in g.neighbors(v) {
            parent[v] = w;
            rec(g, v + 1, parent, out);
        }
    }
    rec(g, 0, &mut parent, &mut out);
    out
}

/// Wilson's algorithm rooted at the sink: exactly uniform.
pub fn wilson_ust<T: Topology + ?Sized, R: Rng + ?Sized>(g: &T, rng: &mut R) -> SpanningTree {
    let n = g.vertex_count();
    let sink = g.sink();
    let mut in_tree = vec![false; n];
    in_tree[sink] = true;
    let mut next = vec![0u32; n];
    for start in 0..n {
        // Random walk from `start` until it hits the tree, remembering the
        // last exit from each vertex; that erases loops implicitly.
        let mut v = start;
        while !in_tree[v] {
            let nbrs = g.neighbors(v);
            next[v] = nbrs[rng.gen_range(0..nbrs.len())];
            v = next[v] as usize;
        }
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            v = next[v] as usize;
        }
    }
    next.truncate(g.site_count());
    SpanningTree { parent: next }
}

/// Uniform recurrent configuration via Wilson and the burning bijection.
pub fn sample_recurrent<T: Topology + ?Sized, R: Rng + ?Sized>(
    g: &T,
    rng: &mut R,
) -> SandpileConfig {
    let t = wilson_ust(g, rng);
    tree_to_config(g, &t, &EdgeOrder::neighbor_index()).expect("Wilson output is a spanning tree")
}

/// Heights of one K₄ copy at its local `(0,0), (0,1), (1,0)`.
pub type K4Config = [i64; 3];

/// `m` independent uniform recurrent K₄ configurations, one per diagonal
/// copy `K¹ … Kᵐ`.
pub fn sample_ivl_diagonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<K4Config> {
    let table = k4_recurrent_table();
    (0..m)
        .map(|_| table[rng.gen_range(0..table.len())])
        .collect()
}

pub fn k4_recurrent_table() -> Vec<K4Config> {
    enumerate_recurrent_k4()
        .into_iter()
        .map(|c| [c.heights[0], c.heights[1], c.heights[2]])
        .collect()
}

/// Glues per-copy configurations into a configuration on `D_n`, adding 3 at
/// every cutpoint `(i,i)` shared by `Kⁱ` and `Kⁱ⁺¹`.
pub fn assemble_diagonal(g: &DiagonalGraph, copies: &[K4Config]) -> Result<SandpileConfig> {
    let side = 3usize.pow(g.level());
    if copies.len() != side {
        return Err(Error::Domain(format!(
            "need {side} copies, got {}",
            copies.len()
        )));
    }
    let mut c = SandpileConfig::zeros(g);
    for (k, local) in copies.iter().enumerate() {
        let i = k as u32;
        let spots = [Coord::new(i, i), Coord::new(i, i + 1), Coord::new(i + 1, i)];
        for (spot, &h) in spots.iter().zip(local) {
            let v = g.index_of(*spot).expect("diagonal copy vertex");
            c.heights[v] = h + if i > 0 && spot.x == spot.y { 3 } else { 0 };
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn k4_has_sixteen() {
        let rec = enumerate_recurrent_k4();
        assert_eq!(rec.len(), 16);
        assert!(rec.contains(&SandpileConfig::new(vec![2, 2, 2])));
        assert!(rec.contains(&SandpileConfig::new(vec![1, 2, 0])));
        assert!(!rec.contains(&SandpileConfig::new(vec![0, 0, 0])));
    }

    #[test]
    fn star_tree_is_all_two() {
        let g = VicsekGraph::build(0).unwrap();
        let star = SpanningTree {
            parent: vec![3, 3, 3],
        };
        let c = tree_to_config(&g, &star, &EdgeOrder::neighbor_index()).unwrap();
        assert_eq!(c.heights, vec![2, 2, 2]);
    }

    #[test]
    fn malformed_trees_rejected() {
        let g = VicsekGraph::build(0).unwrap();
        let cyc = SpanningTree {
            parent: vec![1, 0, 3],
        };
        assert!(tree_to_config(&g, &cyc, &EdgeOrder::neighbor_index()).is_err());
    }

    #[test]
    fn unstable_input_rejected() {
        let g = VicsekGraph::build(0).unwrap();
        assert!(is_recurrent(&g, &SandpileConfig::new(vec![3, 0, 0])).is_err());
    }

    #[test]
    fn wilson_output_spans() {
        let g = VicsekGraph::build(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = wilson_ust(&g, &mut rng);
            assert!(t.is_valid(&g));
        }
    }
}
