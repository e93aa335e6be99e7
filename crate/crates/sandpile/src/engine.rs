//! Configurations, toppling and stabilization.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bfs, Coord, Lattice, Topology};

/// Heights on the non-sink vertices, in canonical order.
///
/// Heights are signed so that illegal topplings (which the group algebra
/// needs) can be represented; every configuration produced by stabilization
/// from a non-negative start is non-negative.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SandpileConfig {
    pub heights: Vec<i64>,
}

impl SandpileConfig {
    pub fn new(heights: Vec<i64>) -> Self {
        SandpileConfig { heights }
    }

    pub fn zeros<T: Topology + ?Sized>(g: &T) -> Self {
        SandpileConfig {
            heights: vec![0; g.site_count()],
        }
    }

    pub fn constant<T: Topology + ?Sized>(g: &T, h: i64) -> Self {
        SandpileConfig {
            heights: vec![h; g.site_count()],
        }
    }

    /// `deg(v) − 1` everywhere.
    pub fn max_stable<T: Topology + ?Sized>(g: &T) -> Self {
        SandpileConfig {
            heights: (0..g.site_count())
                .map(|v| g.degree(v) as i64 - 1)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn mass(&self) -> i64 {
        self.heights.iter().sum()
    }

    pub fn is_stable<T: Topology + ?Sized>(&self, g: &T) -> bool {
        self.heights
            .iter()
            .enumerate()
            .all(|(v, &h)| h < g.degree(v) as i64)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.heights.iter().all(|&h| h >= 0)
    }

    pub fn scaled(&self, k: i64) -> Self {
        SandpileConfig {
            heights: self.heights.iter().map(|h| h * k).collect(),
        }
    }

    pub fn plus(&self, other: &SandpileConfig) -> Self {
        assert_eq!(
            self.len(),
            other.len(),
            "configurations on different graphs"
        );
        SandpileConfig {
            heights: self
                .heights
                .iter()
                .zip(&other.heights)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn check_site<T: Topology + ?Sized>(&self, g: &T, v: usize) -> Result<()> {
        if self.len() != g.site_count() {
            return Err(Error::Domain(format!(
                "configuration has {} sites, graph has {}",
                self.len(),
                g.site_count()
            )));
        }
        if v >= g.site_count() {
            return Err(Error::Domain(format!(
                "vertex {v} is the sink or out of range"
            )));
        }
        Ok(())
    }

    pub fn add_particles<T: Topology + ?Sized>(&mut self, g: &T, v: usize, k: i64) -> Result<()> {
        self.check_site(g, v)?;
        if k < 0 {
            return Err(Error::Domain(
                "cannot add a negative number of particles".into(),
            ));
        }
        self.heights[v] = self.heights[v]
            .checked_add(k)
            .ok_or_else(|| Error::Capacity("height overflow".into()))?;
        Ok(())
    }

    pub fn add_particles_at<L: Lattice + ?Sized>(&mut self, g: &L, c: Coord, k: i64) -> Result<()> {
        let v = g
            .index_of(c)
            .ok_or_else(|| Error::Domain(format!("{c} is not a vertex")))?;
        self.add_particles(g, v, k)
    }

    /// Topples `v` once, legal or not. Untoppling is `topple_by(v, -1)`.
    pub fn topple<T: Topology + ?Sized>(&mut self, g: &T, v: usize) -> Result<ToppleOutcome> {
        self.topple_by(g, v, 1)
    }

    pub fn topple_by<T: Topology + ?Sized>(
        &mut self,
        g: &T,
        v: usize,
        times: i64,
    ) -> Result<ToppleOutcome> {
        self.check_site(g, v)?;
        let legal = self.heights[v] >= times * g.degree(v) as i64;
        let sink = g.sink();
        let mut to_sink = 0;
        self.heights[v] -= times * g.degree(v) as i64;
        for &w in g.neighbors(v) {
            if w as usize == sink {
                to_sink += times;
            } else {
                self.heights[w as usize] += times;
            }
        }
        Ok(ToppleOutcome {
            legal,
            sink_particles: to_sink,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToppleOutcome {
    /// Whether the vertex was unstable before the call.
    pub legal: bool,
    /// Signed: negative when untoppling pulls particles back from the sink.
    pub sink_particles: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AvalancheReport {
    pub odometer: Vec<u64>,
    pub sink_particles: u64,
}

impl AvalancheReport {
    pub fn toppled_set(&self) -> Vec<usize> {
        self.odometer
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(v, _)| v)
            .collect()
    }

    pub fn topple_count(&self) -> u64 {
        self.odometer.iter().sum()
    }

    /// Largest graph distance between two toppled vertices: −1 if nothing
    /// toppled, 0 for a single vertex.
    ///
    /// Uses two breadth-first sweeps. That is exact on block graphs (their
    /// metric satisfies the four-point condition), which covers every Vicsek
    /// level and the diagonal graphs, but only a lower bound elsewhere.
    pub fn diameter<T: Topology + ?Sized>(&self, g: &T) -> i64 {
        let set = self.toppled_set();
        let Some(&first) = set.first() else { return -1 };
        let d = bfs(g, first);
        let far = *set.iter().max_by_key(|&&v| d[v]).unwrap();
        let d = bfs(g, far);
        set.iter().map(|&v| d[v] as i64).max().unwrap()
    }
}

/// A legal toppling order. By the Abelian property every schedule yields the
/// same stable configuration and odometer; they differ only in speed.
pub trait ToppleSchedule: Send + Sync {
    fn name(&self) -> &str;

    /// Topples unstable vertices until none is left. Vertices marked in
    /// `frozen` collect particles but never topple, i.e. act as extra sinks.
    /// Returns the number of particles delivered to the real sink.
    fn relax(
        &self,
        g: &dyn Topology,
        heights: &mut [i64],
        frozen: Option<&[bool]>,
        odometer: &mut [u64],
    ) -> u64;
}

fn movable(frozen: Option<&[bool]>, v: usize) -> bool {
    frozen.is_none_or(|f| !f[v])
}

/// Work queue of unstable vertices, each fired as many times as it can in
/// one visit. The default.
#[derive(Clone, Copy, Debug, Default)]
pub struct RoundQueue;

impl ToppleSchedule for RoundQueue {
    fn name(&self) -> &str {
        "rounds"
    }

    fn relax(
        &self,
        g: &dyn Topology,
        heights: &mut [i64],
        frozen: Option<&[bool]>,
        odometer: &mut [u64],
    ) -> u64 {
        let sink = g.sink();
        let mut queued = vec![false; heights.len()];
        let mut queue = VecDeque::new();
        for v in 0..heights.len() {
            if movable(frozen, v) && heights[v] >= g.degree(v) as i64 {
                queued[v] = true;
                queue.push_back(v);
            }
        }
        let mut to_sink = 0u64;
        while let Some(v) = queue.pop_front() {
            queued[v] = false;
            let deg = g.degree(v) as i64;
            let k = heights[v] / deg;
            if k <= 0 {
                continue;
            }
            heights[v] -= k * deg;
            odometer[v] += k as u64;
            for &w in g.neighbors(v) {
                let w = w as usize;
                if w == sink {
                    to_sink += k as u64;
                    continue;
                }
                heights[w] = heights[w].checked_add(k).expect("height overflow");
                if !queued[w] && movable(frozen, w) && heights[w] >= g.degree(w) as i64 {
                    queued[w] = true;
                    queue.push_back(w);
                }
            }
        }
        to_sink
    }
}

/// Single topplings from a stack.
#[derive(Clone, Copy, Debug, Default)]
pub struct StackSingle;

impl ToppleSchedule for StackSingle {
    fn name(&self) -> &str {
        "stack"
    }

    fn relax(
        &self,
        g: &dyn Topology,
        heights: &mut [i64],
        frozen: Option<&[bool]>,
        odometer: &mut [u64],
    ) -> u64 {
        let sink = g.sink();
        let mut stack: Vec<usize> = (0..heights.len())
            .filter(|&v| movable(frozen, v) && heights[v] >= g.degree(v) as i64)
            .collect();
        let mut to_sink = 0;
        while let Some(v) = stack.pop() {
            let deg = g.degree(v) as i64;
            if heights[v] < deg {
                continue;
            }
            heights[v] -= deg;
            odometer[v] += 1;
            if heights[v] >= deg {
                stack.push(v);
            }
            for &w in g.neighbors(v) {
                let w = w as usize;
                if w == sink {
                    to_sink += 1;
                } else {
                    heights[w] += 1;
                    if movable(frozen, w) && heights[w] == g.degree(w) as i64 {
                        stack.push(w);
                    }
                }
            }
        }
        to_sink
    }
}

/// Topples one uniformly chosen unstable vertex at a time. Slow; exists to
/// exercise order independence.
#[derive(Clone, Copy, Debug)]
pub struct Shuffled {
    pub seed: u64,
}

impl ToppleSchedule for Shuffled {
    fn name(&self) -> &str {
        "shuffled"
    }

    fn relax(
        &self,
        g: &dyn Topology,
        heights: &mut [i64],
        frozen: Option<&[bool]>,
        odometer: &mut [u64],
    ) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let sink = g.sink();
        let mut to_sink = 0;
        loop {
            let mut unstable: Vec<usize> = (0..heights.len())
                .filter(|&v| movable(frozen, v) && heights[v] >= g.degree(v) as i64)
                .collect();
            if unstable.is_empty() {
                return to_sink;
            }
            // Fire a random prefix of a random permutation before rescanning.
            unstable.shuffle(&mut rng);
            let take = 1 + unstable.len() / 4;
            for &v in &unstable[..take] {
                let deg = g.degree(v) as i64;
                if heights[v] < deg {
                    continue;
                }
                heights[v] -= deg;
                odometer[v] += 1;
                for &w in g.neighbors(v) {
                    if w as usize == sink {
                        to_sink += 1;
                    } else {
                        heights[w as usize] += 1;
                    }
                }
            }
        }
    }
}

pub fn stabilize<T: Topology>(g: &T, c: &SandpileConfig) -> (SandpileConfig, AvalancheReport) {
    stabilize_with(g, c, &RoundQueue)
}

pub fn stabilize_with<T: Topology>(
    g: &T,
    c: &SandpileConfig,
    schedule: &dyn ToppleSchedule,
) -> (SandpileConfig, AvalancheReport) {
    assert_eq!(
        c.len(),
        g.site_count(),
        "configuration does not fit the graph"
    );
    let mut heights = c.heights.clone();
    let mut odometer = vec![0; heights.len()];
    let sink_particles = schedule.relax(g, &mut heights, None, &mut odometer);
    (
        SandpileConfig { heights },
        AvalancheReport {
            odometer,
            sink_particles,
        },
    )
}

/// In-place stabilization without a report, for hot loops.
pub fn stabilize_in_place<T: Topology>(g: &T, c: &mut SandpileConfig) -> u64 {
    let mut odometer = vec![0; c.len()];
    RoundQueue.relax(g, &mut c.heights, None, &mut odometer)
}

/// `a ⊕ b = (a + b)∘`.
pub fn group_add<T: Topology>(g: &T, a: &SandpileConfig, b: &SandpileConfig) -> SandpileConfig {
    let mut sum = a.plus(b);
    stabilize_in_place(g, &mut sum);
    sum
}

/// Stage of each vertex for nested-volume stabilization: a vertex has stage
/// `i` when it lies in the component of `G − {(i,i)}` containing the origin
/// but not in the one for `(i−1,i−1)`. The checkpoint `(i−1,i−1)` itself has
/// stage `i`. The sink gets stage 0.
pub fn diagonal_stages<L: Lattice + ?Sized>(g: &L) -> Vec<u32> {
    let side = 3u32.pow(g.level());
    let mut stage = vec![0u32; g.vertex_count()];
    let mut start = g.index_of(Coord::new(0, 0)).expect("origin");
    for i in 1..=side {
        let cut = g.index_of(Coord::new(i, i)).expect("diagonal vertex");
        let mut queue = VecDeque::new();
        if stage[start] == 0 {
            stage[start] = i;
            queue.push_back(start);
        }
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                let w = w as usize;
                if w != cut && stage[w] == 0 {
                    stage[w] = i;
                    queue.push_back(w);
                }
            }
        }
        start = cut;
    }
    stage
}

/// Particle counts arriving at each checkpoint `(i,i)` when `c` is stabilized
/// in the nested volumes behind successive checkpoints.
///
/// Volumes are processed incrementally: after the volume behind `(i,i)` is
/// stable, `(i,i)` is released and relaxation continues. By the Abelian
/// property this equals stabilizing each volume from scratch.
pub fn boundary_flow<L: Lattice>(
    g: &L,
    c: &SandpileConfig,
    checkpoints: &[Coord],
) -> Result<Vec<u64>> {
    boundary_flow_until(g, c, checkpoints, |_| false)
}

/// As [`boundary_flow`], stopping after the first checkpoint whose value
/// satisfies `stop`.
pub fn boundary_flow_until<L: Lattice>(
    g: &L,
    c: &SandpileConfig,
    checkpoints: &[Coord],
    stop: impl Fn(u64) -> bool,
) -> Result<Vec<u64>> {
    if c.len() != g.site_count() {
        return Err(Error::Domain("configuration does not fit the graph".into()));
    }
    let mut prev = 0;
    let mut targets = Vec::with_capacity(checkpoints.len());
    for &cp in checkpoints {
        if cp.x != cp.y || cp.x <= prev {
            return Err(Error::Domain(format!(
                "checkpoint {cp} is not an ascending diagonal vertex"
            )));
        }
        prev = cp.x;
        targets.push(
            g.index_of(cp)
                .ok_or_else(|| Error::Domain(format!("{cp} is not a vertex")))?,
        );
    }
    let stage = diagonal_stages(g);
    let sites = g.site_count();
    let mut heights = c.heights.clone();
    let mut frozen = vec![true; sites];
    let mut odometer = vec![0; sites];
    let mut released = 0u32;
    let mut out = Vec::with_capacity(targets.len());
    // Release vertices stage by stage, sorted once.
    let mut by_stage: Vec<usize> = (0..sites).collect();
    by_stage.sort_by_key(|&v| stage[v]);
    let mut cursor = 0;
    for (cp, &t) in checkpoints.iter().zip(&targets) {
        while released < cp.x {
            released += 1;
            while cursor < sites && stage[by_stage[cursor]] <= released {
                frozen[by_stage[cursor]] = false;
                cursor += 1;
            }
        }
        let before = if t == g.sink() { 0 } else { heights[t] };
        let to_sink = RoundQueue.relax(g, &mut heights, Some(&frozen), &mut odometer);
        let x = if t == g.sink() {
            to_sink
        } else {
            (heights[t] - before) as u64
        };
        out.push(x);
        if stop(x) {
            break;
        }
    }
    Ok(out)
}

/// Checkpoints `(1,1), …, (m,m)`.
pub fn diagonal_checkpoints(m: u32) -> Vec<Coord> {
    (1..=m).map(|i| Coord::new(i, i)).collect()
}
