//! Vicsek graphs and the structural queries the sandpile code needs.
//!
//! Vertices are stored in lexicographic `(x, y)` order. The sink
//! `(3^n, 3^n)` is the lexicographic maximum, so it always lands on the last
//! index and the non-sink vertices occupy `0..vertex_count() - 1`.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the level accepted by [`VicsekGraph::build`].
pub const DEFAULT_LEVEL_CAP: u32 = 6;

/// Environment variable that overrides [`DEFAULT_LEVEL_CAP`].
pub const LEVEL_CAP_ENV: &str = "SANDPILE_LEVEL_CAP";

/// Level cap honouring `SANDPILE_LEVEL_CAP` when it parses.
pub fn level_cap() -> u32 {
    std::env::var(LEVEL_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_LEVEL_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
}

impl Coord {
    pub const fn new(x: u32, y: u32) -> Self {
        Coord { x, y }
    }

    pub fn chebyshev(self) -> u32 {
        self.x.max(self.y)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagonalClass {
    DiagonalD0,
    OffsetD1,
    Branch,
}

pub fn classify_coord(c: Coord) -> DiagonalClass {
    match c.x.abs_diff(c.y) {
        0 => DiagonalClass::DiagonalD0,
        1 => DiagonalClass::OffsetD1,
        _ => DiagonalClass::Branch,
    }
}

/// Adjacency view used by the engine. Vertex `vertex_count() - 1` is the sink.
pub trait Topology: Sync {
    fn vertex_count(&self) -> usize;
    fn neighbors(&self, v: usize) -> &[u32];

    fn sink(&self) -> usize {
        self.vertex_count() - 1
    }

    /// Number of non-sink vertices, i.e. the length of a configuration.
    fn site_count(&self) -> usize {
        self.vertex_count() - 1
    }

    fn degree(&self, v: usize) -> usize {
        self.neighbors(v).len()
    }
}

/// A topology whose vertices are lattice points of some `𝒱_n`.
pub trait Lattice: Topology {
    fn level(&self) -> u32;
    fn coords(&self) -> &[Coord];
    fn index_of(&self, c: Coord) -> Option<usize> {
        self.coords().binary_search(&c).ok()
    }
    fn coord(&self, v: usize) -> Coord {
        self.coords()[v]
    }
}

/// Compressed adjacency over lexicographically sorted coordinates.
#[derive(Clone, Debug)]
struct Csr {
    coords: Vec<Coord>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_edges(mut coords: Vec<Coord>, edges: &[(Coord, Coord)]) -> Self {
        coords.sort_unstable();
        coords.dedup();
        let idx = |c: &Coord| coords.binary_search(c).expect("edge endpoint is a vertex") as u32;
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(edges.len() * 2);
        for (a, b) in edges {
            let (ia, ib) = (idx(a), idx(b));
            pairs.push((ia, ib));
            pairs.push((ib, ia));
        }
        pairs.sort_unstable();
        let mut offsets = vec![0u32; coords.len() + 1];
        for &(a, _) in &pairs {
            offsets[a as usize + 1] += 1;
        }
        for i in 0..coords.len() {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.into_iter().map(|(_, b)| b).collect();
        Csr {
            coords,
            offsets,
            targets,
        }
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }
}

/// Bottom-left corners of the `5^level` K₄ blocks of `𝒱_level`.
pub fn block_corners(level: u32) -> Vec<Coord> {
    let mut corners = vec![Coord::new(0, 0)];
    for l in 1..=level {
        let s = 3u32.pow(l - 1);
        let shifts = [(0, 0), (s, s), (2 * s, 0), (0, 2 * s), (2 * s, 2 * s)];
        let mut next = Vec::with_capacity(corners.len() * 5);
        for &(dx, dy) in &shifts {
            next.extend(corners.iter().map(|c| Coord::new(c.x + dx, c.y + dy)));
        }
        corners = next;
    }
    corners
}

fn block_vertices(c: Coord) -> [Coord; 4] {
    [
        c,
        Coord::new(c.x, c.y + 1),
        Coord::new(c.x + 1, c.y),
        Coord::new(c.x + 1, c.y + 1),
    ]
}

#[derive(Clone, Debug)]
pub struct VicsekGraph {
    level: u32,
    csr: Csr,
    blocks: Vec<Coord>,
}

impl VicsekGraph {
    /// Builds `𝒱_level`, refusing levels above [`level_cap`].
    pub fn build(level: u32) -> Result<Self> {
        Self::build_with_cap(level, level_cap())
    }

    pub fn build_with_cap(level: u32, cap: u32) -> Result<Self> {
        if level > cap {
            return Err(Error::Capacity(format!("level {level} exceeds cap {cap}")));
        }
        let blocks = block_corners(level);
        let mut coords = Vec::with_capacity(blocks.len() * 4);
        let mut edges = Vec::with_capacity(blocks.len() * 6);
        for &b in &blocks {
            let vs = block_vertices(b);
            coords.extend_from_slice(&vs);
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((vs[i], vs[j]));
                }
            }
        }
        let csr = Csr::from_edges(coords, &edges);
        let mut blocks = blocks;
        blocks.sort_unstable();
        Ok(VicsekGraph { level, csr, blocks })
    }

    pub fn side(&self) -> u32 {
        3u32.pow(self.level)
    }

    pub fn edge_count(&self) -> usize {
        self.csr.edge_count()
    }

    pub fn origin(&self) -> usize {
        0
    }

    /// Bottom-left corners of all K₄ blocks, lexicographically sorted.
    pub fn blocks(&self) -> &[Coord] {
        &self.blocks
    }

    /// Vertex indices of the diagonal copy `Kⁱ`, `1 ≤ i ≤ 3ⁿ`, in lex order.
    pub fn diagonal_copy(&self, i: u32) -> Result<[usize; 4]> {
        if i == 0 || i > self.side() {
            return Err(Error::Domain(format!(
                "no diagonal copy K^{i} at level {}",
                self.level
            )));
        }
        let vs = block_vertices(Coord::new(i - 1, i - 1));
        let mut out = [0; 4];
        for (o, c) in out.iter_mut().zip(vs) {
            *o = self.require(c)?;
        }
        Ok(out)
    }

    pub fn require(&self, c: Coord) -> Result<usize> {
        self.index_of(c)
            .ok_or_else(|| Error::Domain(format!("{c} is not a vertex of level {}", self.level)))
    }

    pub fn classify(&self, c: Coord) -> Result<DiagonalClass> {
        self.require(c)?;
        Ok(classify_coord(c))
    }

    pub fn is_cutpoint(&self, v: usize) -> bool {
        self.degree(v) == 6
    }

    /// Vertices of the component of `G − {x}` that avoids the diagonal graph.
    pub fn branch_component(&self, x: Coord) -> Result<Vec<Coord>> {
        if self.classify(x)? != DiagonalClass::OffsetD1 {
            return Err(Error::Domain(format!(
                "{x} is not an off-diagonal (D1) vertex"
            )));
        }
        let xi = self.require(x)?;
        for &start in self.neighbors(xi) {
            let comp = self.component_avoiding(start as usize, xi);
            if comp
                .iter()
                .all(|&v| classify_coord(self.coord(v)) == DiagonalClass::Branch)
            {
                let mut out: Vec<Coord> = comp.into_iter().map(|v| self.coord(v)).collect();
                out.sort_unstable();
                return Ok(out);
            }
        }
        Ok(Vec::new())
    }

    fn component_avoiding(&self, start: usize, blocked: usize) -> Vec<usize> {
        let mut seen = vec![false; self.vertex_count()];
        seen[blocked] = true;
        seen[start] = true;
        let mut out = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                let w = w as usize;
                if !seen[w] {
                    seen[w] = true;
                    out.push(w);
                    queue.push_back(w);
                }
            }
        }
        out
    }

    /// Breadth-first distances from `v` to every vertex.
    pub fn distances_from(&self, v: usize) -> Vec<u32> {
        bfs(self, v)
    }

    pub fn graph_distance(&self, v: Coord, w: Coord) -> Result<u32> {
        let (a, b) = (self.require(v)?, self.require(w)?);
        Ok(self.distances_from(a)[b])
    }

    /// `Γ_n(x)`: vertices within distance one of the geodesic from `x` to the
    /// sink, excluding the descendants of `x`.
    pub fn geodesic_subgraph(&self, x: Coord) -> Result<Vec<Coord>> {
        let xi = self.require(x)?;
        if xi == self.sink() {
            return Err(Error::Domain("the sink has no geodesic subgraph".into()));
        }
        let to_sink = self.distances_from(self.sink());
        let mut path = vec![xi];
        let mut cur = xi;
        while cur != self.sink() {
            cur = self
                .neighbors(cur)
                .iter()
                .map(|&w| w as usize)
                .find(|&w| to_sink[w] + 1 == to_sink[cur])
                .expect("graph is connected");
            path.push(cur);
        }
        // Descendants: everything cut off from the sink once x is removed.
        let mut reach = vec![false; self.vertex_count()];
        for v in self.component_avoiding(self.sink(), xi) {
            reach[v] = true;
        }
        let mut inside = vec![false; self.vertex_count()];
        for &p in &path {
            inside[p] = true;
            for &w in self.neighbors(p) {
                inside[w as usize] = true;
            }
        }
        Ok((0..self.vertex_count())
            .filter(|&v| inside[v] && (v == xi || reach[v]))
            .map(|v| self.coord(v))
            .collect())
    }

    /// Induced subgraph on `|x − y| ≤ 1` with the same sink.
    pub fn diagonal_graph(&self) -> DiagonalGraph {
        let keep: Vec<Coord> = self
            .coords()
            .iter()
            .copied()
            .filter(|&c| classify_coord(c) != DiagonalClass::Branch)
            .collect();
        let mut edges = Vec::new();
        for (v, &c) in self.coords().iter().enumerate() {
            if classify_coord(c) == DiagonalClass::Branch {
                continue;
            }
            for &w in self.neighbors(v) {
                let d = self.coord(w as usize);
                if c < d && classify_coord(d) != DiagonalClass::Branch {
                    edges.push((c, d));
                }
            }
        }
        DiagonalGraph {
            level: self.level,
            csr: Csr::from_edges(keep, &edges),
        }
    }

    /// Counts of degree-3 and degree-6 vertices.
    pub fn degree_histogram(&self) -> (usize, usize) {
        let six = (0..self.vertex_count())
            .filter(|&v| self.degree(v) == 6)
            .count();
        (self.vertex_count() - six, six)
    }
}

impl Topology for VicsekGraph {
    fn vertex_count(&self) -> usize {
        self.csr.coords.len()
    }
    fn neighbors(&self, v: usize) -> &[u32] {
        self.csr.neighbors(v)
    }
}

impl Lattice for VicsekGraph {
    fn level(&self) -> u32 {
        self.level
    }
    fn coords(&self) -> &[Coord] {
        &self.csr.coords
    }
}

/// The diagonal graph `D_n`: the chain of copies `K¹ … K^{3ⁿ}`.
#[derive(Clone, Debug)]
pub struct DiagonalGraph {
    level: u32,
    csr: Csr,
}

impl DiagonalGraph {
    pub fn edge_count(&self) -> usize {
        self.csr.edge_count()
    }
}

impl Topology for DiagonalGraph {
    fn vertex_count(&self) -> usize {
        self.csr.coords.len()
    }
    fn neighbors(&self, v: usize) -> &[u32] {
        self.csr.neighbors(v)
    }
}

impl Lattice for DiagonalGraph {
    fn level(&self) -> u32 {
        self.level
    }
    fn coords(&self) -> &[Coord] {
        &self.csr.coords
    }
}

pub fn bfs<T: Topology + ?Sized>(g: &T, from: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; g.vertex_count()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            let w = w as usize;
            if dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// `κ_n = Σ min(1, a_i)·3^i` over the ternary digits `a_i` of `n`.
pub fn kappa(mut n: u64) -> u64 {
    let (mut out, mut p) = (0, 1);
    while n > 0 {
        if !n.is_multiple_of(3) {
            out += p;
        }
        n /= 3;
        p *= 3;
    }
    out
}

pub fn has_ternary_digit_two(mut n: u64) -> bool {
    while n > 0 {
        if n % 3 == 2 {
            return true;
        }
        n /= 3;
    }
    false
}
