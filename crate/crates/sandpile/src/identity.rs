//! The merge `μ_k` of five level-(n−1) sandpiles and the recursive identity.
//!
//! Copies of `𝒱_{n−1}` sit at offsets LB `(0,0)`, M `(L,L)`, RB `(2L,0)`,
//! LT `(0,2L)` and RT `(2L,2L)`, `L = 3ⁿ⁻¹`. The RB copy is read through
//! `φ(u,v) = (v, L−u)` and the LT copy through `φ³(u,v) = (L−v, u)`, so the
//! local sink of each lands on the cutpoint the merge overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{group_add, stabilize, SandpileConfig};
use crate::error::{Error, Result};
use crate::graph::{Coord, Lattice, Topology, VicsekGraph};
use crate::parallel::stream;
use crate::recurrence::{is_recurrent, sample_recurrent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CopyTag {
    LB,
    RB,
    RT,
    LT,
    M,
}

pub struct MergeSpec<'a> {
    pub k: i64,
    pub lb: &'a SandpileConfig,
    pub rb: &'a SandpileConfig,
    pub rt: &'a SandpileConfig,
    pub lt: &'a SandpileConfig,
    pub m: &'a SandpileConfig,
}

impl<'a> MergeSpec<'a> {
    /// All five copies equal to `c`.
    pub fn uniform(k: i64, c: &'a SandpileConfig) -> Self {
        MergeSpec {
            k,
            lb: c,
            rb: c,
            rt: c,
            lt: c,
            m: c,
        }
    }

    fn get(&self, tag: CopyTag) -> &'a SandpileConfig {
        match tag {
            CopyTag::LB => self.lb,
            CopyTag::RB => self.rb,
            CopyTag::RT => self.rt,
            CopyTag::LT => self.lt,
            CopyTag::M => self.m,
        }
    }
}

/// Which copy and which local vertex the value at `c` is read from, before
/// the cutpoint overrides are applied.
fn locate(c: Coord, l: u32) -> (CopyTag, Coord) {
    let (x, y) = (c.x, c.y);
    if x <= l && y <= l {
        (CopyTag::LB, c)
    } else if x >= 2 * l && y <= l {
        let (u, v) = (x - 2 * l, y);
        (CopyTag::RB, Coord::new(v, l - u))
    } else if x <= l && y >= 2 * l {
        let (u, v) = (x, y - 2 * l);
        (CopyTag::LT, Coord::new(l - v, u))
    } else if x >= 2 * l && y >= 2 * l {
        (CopyTag::RT, Coord::new(x - 2 * l, y - 2 * l))
    } else {
        (CopyTag::M, Coord::new(x - l, y - l))
    }
}

/// `μ_k`: a configuration on `next` (level n) from five on `prev` (level n−1).
pub fn merge(prev: &VicsekGraph, next: &VicsekGraph, spec: &MergeSpec) -> Result<SandpileConfig> {
    if next.level() != prev.level() + 1 {
        return Err(Error::Domain("merge needs consecutive levels".into()));
    }
    for tag in [
        CopyTag::LB,
        CopyTag::RB,
        CopyTag::RT,
        CopyTag::LT,
        CopyTag::M,
    ] {
        if spec.get(tag).len() != prev.site_count() {
            return Err(Error::Domain(format!(
                "{tag:?} input does not fit level {}",
                prev.level()
            )));
        }
    }
    let l = prev.side();
    let at = |tag: CopyTag, c: Coord| -> i64 {
        let v = prev.index_of(c).expect("local vertex");
        spec.get(tag).heights[v]
    };
    let overrides = [Coord::new(l, l), Coord::new(2 * l, l), Coord::new(l, 2 * l)];
    let mut heights = Vec::with_capacity(next.site_count());
    for v in 0..next.site_count() {
        let c = next.coord(v);
        let h = if overrides.contains(&c) {
            spec.k + at(CopyTag::M, Coord::new(c.x - l, c.y - l))
        } else if c == Coord::new(2 * l, 2 * l) {
            spec.k + at(CopyTag::RT, Coord::new(0, 0))
        } else {
            let (tag, local) = locate(c, l);
            at(tag, local)
        };
        heights.push(h);
    }
    Ok(SandpileConfig::new(heights))
}

/// Bump used by the merge that produces the identity of `level ≥ 1`.
///
/// From level 2 on the bump is 2. Building level 1 needs 3: the level-2
/// argument subtracts one particle from each of the three outer corners of
/// `id_{n−1}`, and those corners lie in three different K₄ copies only when
/// `n − 1 ≥ 1`. On a single K₄, `(1,1,1)` is not recurrent.
pub fn identity_bump(level: u32) -> i64 {
    if level == 1 {
        3
    } else {
        2
    }
}

/// `id₀ = (2,2,2)`, `id₁ = μ₃(id₀, …)`, `id_n = μ₂(id_{n−1}, …)` for `n ≥ 2`.
pub fn identity(level: u32) -> Result<SandpileConfig> {
    let mut prev = VicsekGraph::build(0)?;
    let mut id = SandpileConfig::constant(&prev, 2);
    for l in 1..=level {
        let next = VicsekGraph::build(l)?;
        id = merge(&prev, &next, &MergeSpec::uniform(identity_bump(l), &id))?;
        prev = next;
    }
    Ok(id)
}

/// `(4η)∘` for a uniform recurrent `η`: the identity by another route.
pub fn identity_oracle<T: Topology>(g: &T, eta: &SandpileConfig) -> SandpileConfig {
    stabilize(g, &eta.scaled(4)).0
}

pub fn height_histogram(c: &SandpileConfig) -> BTreeMap<i64, usize> {
    let mut h = BTreeMap::new();
    for &x in &c.heights {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub level: u32,
    pub samples: u64,
    pub clauses: Vec<ClauseResult>,
    /// `|(4·id)∘|` sink count.
    pub sink_count_4id: u64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }
}

/// Runs clauses (a)–(e) and returns the report, or a verification error
/// naming the first failed clause.
pub fn verify_identity(
    g: &VicsekGraph,
    id: &SandpileConfig,
    samples: u64,
    seed: u64,
) -> Result<IdentityReport> {
    let report = identity_report(g, id, samples, seed)?;
    const NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];
    if let Some(i) = report.clauses.iter().position(|c| !c.passed) {
        return Err(Error::Verification {
            clause: NAMES[i],
            detail: report.clauses[i].detail.clone(),
        });
    }
    Ok(report)
}

/// As [`verify_identity`] without turning failures into errors.
pub fn identity_report(
    g: &VicsekGraph,
    id: &SandpileConfig,
    samples: u64,
    seed: u64,
) -> Result<IdentityReport> {
    if id.len() != g.site_count() {
        return Err(Error::Domain("identity does not fit the graph".into()));
    }
    let mut clauses = Vec::new();
    let mut push = |clause: &str, passed: bool, detail: String| {
        clauses.push(ClauseResult {
            clause: clause.into(),
            passed,
            detail,
        })
    };

    let stable = id.is_stable(g) && id.is_nonnegative();
    push(
        "a",
        stable && is_recurrent(g, id)?,
        "id is recurrent".into(),
    );
    push("b", group_add(g, id, id) == *id, "id + id = id".into());

    let mut rng = stream(seed, 0);
    let mut neutral = 0;
    let mut killed = 0;
    for _ in 0..samples {
        let eta = sample_recurrent(g, &mut rng);
        neutral += (group_add(g, id, &eta) == eta) as u64;
        killed += (identity_oracle(g, &eta) == *id) as u64;
    }
    push(
        "c",
        neutral == samples,
        format!("id + eta = eta for {neutral}/{samples} samples"),
    );
    push(
        "d",
        killed == samples,
        format!("(4 eta) stabilizes to id for {killed}/{samples} samples"),
    );

    let sink = stabilize(g, &id.scaled(4)).1.sink_particles;
    push(
        "e",
        sink % 4 == 2,
        format!("sink count of (4 id) is {sink}, {} mod 4", sink % 4),
    );
    Ok(IdentityReport {
        level: g.level(),
        samples,
        clauses,
        sink_count_4id: sink,
    })
}
