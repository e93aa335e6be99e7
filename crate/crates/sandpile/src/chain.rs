//! The nested-volume chain `(X_i)` in exact arithmetic, the avalanche-radius
//! law, and Monte Carlo estimates of the stabilization probability.

use std::fmt;
use std::sync::OnceLock;

use num::{BigInt, BigRational, One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{boundary_flow_until, diagonal_checkpoints, stabilize, SandpileConfig};
use crate::error::{Error, Result};
use crate::graph::{
    has_ternary_digit_two, kappa, level_cap, Coord, DiagonalGraph, Lattice, VicsekGraph,
};
use crate::parallel::{run_trials, Stream};
use crate::recurrence::{
    assemble_diagonal, enumerate_recurrent_k4, sample_ivl_diagonal, sample_recurrent, K4Config,
};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// `"num/den"`, or just `"num"` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::Format(format!("not a rational: {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (
            n.trim().parse::<BigInt>().map_err(|_| bad())?,
            d.trim().parse::<BigInt>().map_err(|_| bad())?,
        ),
        None => (
            s.trim().parse::<BigInt>().map_err(|_| bad())?,
            BigInt::one(),
        ),
    };
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// Dense matrix of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Domain("ragged rows".into()));
        }
        Ok(RationalMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &RationalMatrix) -> Result<RationalMatrix> {
        if self.cols != other.rows {
            return Err(Error::Domain("dimension mismatch".into()));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * &other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![Rational::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for j in 0..self.cols {
                out[j] += vi * &self[(i, j)];
            }
        }
        out
    }

    /// Solves `self · x = b` by Gauss–Jordan elimination.
    pub fn solve(&self, b: &[Rational]) -> Result<Vec<Rational>> {
        let n = self.rows;
        if self.cols != n || b.len() != n {
            return Err(Error::Domain("solve needs a square system".into()));
        }
        let mut a = self.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .find(|&r| !a[(r, col)].is_zero())
                .ok_or_else(|| Error::Singular(format!("no pivot in column {col}")))?;
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                }
                x.swap(piv, col);
            }
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] /= &p;
            }
            x[col] /= &p;
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    let t = &f * &a[(col, j)];
                    a[(r, j)] -= t;
                }
                let t = &f * &x[col];
                x[r] -= t;
            }
        }
        Ok(x)
    }
}

impl std::ops::Index<(usize, usize)> for RationalMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RationalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(format_rational).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub const STATES: usize = 5;

/// Sink count for each recurrent K₄ configuration when `added ∈ 0..=4`
/// particles are dropped on the bottom-left corner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct K4TransitionRow {
    pub config: K4Config,
    pub collected: [u64; STATES],
}

pub fn k4_transition_table() -> Vec<K4TransitionRow> {
    let g = VicsekGraph::build_with_cap(0, 0).expect("level 0");
    enumerate_recurrent_k4()
        .into_iter()
        .map(|eta| {
            let mut collected = [0; STATES];
            for (added, slot) in collected.iter_mut().enumerate() {
                let mut c = eta.clone();
                c.heights[0] += added as i64;
                *slot = stabilize(&g, &c).1.sink_particles;
            }
            K4TransitionRow {
                config: [eta.heights[0], eta.heights[1], eta.heights[2]],
                collected,
            }
        })
        .collect()
}

fn cached_table() -> &'static [K4TransitionRow] {
    static TABLE: OnceLock<Vec<K4TransitionRow>> = OnceLock::new();
    TABLE.get_or_init(k4_transition_table)
}

/// The 5×5 transition matrix of `(X_i)`, averaged from the K₄ table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMatrix(pub RationalMatrix);

pub fn transition_matrix() -> TransitionMatrix {
    let table = cached_table();
    let mut p = RationalMatrix::zeros(STATES, STATES);
    let w = rat(1, table.len() as i64);
    for row in table {
        for (a, &out) in row.collected.iter().enumerate() {
            p[(a, out as usize)] += &w;
        }
    }
    TransitionMatrix(p)
}

fn cached_matrix() -> &'static RationalMatrix {
    static P: OnceLock<RationalMatrix> = OnceLock::new();
    P.get_or_init(|| transition_matrix().0)
}

/// `x_k = P(τ₀ < τ₄ | X₀ = k)`, from `(P − I)x = 0` with `x₀ = 1, x₄ = 0`.
pub fn absorption_probabilities() -> Result<Vec<Rational>> {
    absorption_probabilities_for(cached_matrix())
}

pub fn absorption_probabilities_for(p: &RationalMatrix) -> Result<Vec<Rational>> {
    // Transient states 1..=3: (I − Q) x_T = R e₀.
    let t = [1, 2, 3];
    let mut a = RationalMatrix::zeros(3, 3);
    let mut b = vec![Rational::zero(); 3];
    for (r, &i) in t.iter().enumerate() {
        for (c, &j) in t.iter().enumerate() {
            a[(r, c)] = if i == j {
                Rational::one()
            } else {
                Rational::zero()
            } - &p[(i, j)];
        }
        b[r] = p[(i, 0)].clone();
    }
    let xt = a.solve(&b)?;
    let mut x = vec![Rational::one()];
    x.extend(xt);
    x.push(Rational::zero());
    Ok(x)
}

/// Row `start` of `Pᵏ`.
pub fn k_step_distribution(start: usize, k: u32) -> Result<Vec<Rational>> {
    if start >= STATES {
        return Err(Error::Domain(format!("no state {start}")));
    }
    let p = cached_matrix();
    let mut v = vec![Rational::zero(); STATES];
    v[start] = Rational::one();
    for _ in 0..k {
        v = p.left_apply(&v);
    }
    Ok(v)
}

pub fn lambda_plus() -> f64 {
    (5.0 + 13f64.sqrt()) / 16.0
}

pub fn lambda_minus() -> f64 {
    (5.0 - 13f64.sqrt()) / 16.0
}

/// Coefficients `(c, a₊, b₊, a₋, b₋)` of
/// `c + (a₊ + b₊√13)/52·λ₊ᵏ + (a₋ + b₋√13)/52·λ₋ᵏ`, per target state.
type ClosedRow = [(f64, f64, f64, f64, f64); STATES];

/// Start state 1, valid for `k ≥ 1`.
const FROM_ONE: ClosedRow = [
    (0.75, -13.0, -3.0, -13.0, 3.0),
    (0.0, 13.0, 1.0, 13.0, -1.0),
    (0.0, 0.0, 4.0, 0.0, -4.0),
    (0.0, 13.0, 1.0, 13.0, -1.0),
    (0.25, -13.0, -3.0, -13.0, 3.0),
];

/// As printed in the paper's display for start 1. The λ₋ terms of states 3
/// and 4 carry the wrong sign; kept for the diagnostics in `closed_form_report`.
const FROM_ONE_AS_PRINTED: ClosedRow = [
    (0.75, -13.0, -3.0, -13.0, 3.0),
    (0.0, 13.0, 1.0, 13.0, -1.0),
    (0.0, 0.0, 4.0, 0.0, -4.0),
    (0.0, 13.0, 1.0, -13.0, 1.0),
    (0.25, -13.0, -3.0, 13.0, -3.0),
];

/// Start state 2, valid for all `k ≥ 0`.
const FROM_TWO: ClosedRow = [
    (0.5, -13.0, -5.0, -13.0, 5.0),
    (0.0, 0.0, 6.0, 0.0, -6.0),
    (0.0, 26.0, -2.0, 26.0, 2.0),
    (0.0, 0.0, 6.0, 0.0, -6.0),
    (0.5, -13.0, -5.0, -13.0, 5.0),
];

fn eval_closed(row: &ClosedRow, k: u32) -> [f64; STATES] {
    let s = 13f64.sqrt();
    let (lp, lm) = (lambda_plus().powi(k as i32), lambda_minus().powi(k as i32));
    let mut out = [0.0; STATES];
    for (o, &(c, ap, bp, am, bm)) in out.iter_mut().zip(row) {
        *o = c + (ap + bp * s) / 52.0 * lp + (am + bm * s) / 52.0 * lm;
    }
    out
}

/// `P(X_k = · | X₀ = start)` from the eigen-decomposition. Start 3 is the
/// mirror image of start 1. Starts 1 and 3 need `k ≥ 1`.
pub fn closed_form_k_step(start: usize, k: u32) -> Result<[f64; STATES]> {
    match start {
        0 => Ok([1.0, 0.0, 0.0, 0.0, 0.0]),
        4 => Ok([0.0, 0.0, 0.0, 0.0, 1.0]),
        2 => Ok(eval_closed(&FROM_TWO, k)),
        1 | 3 if k == 0 => Err(Error::Domain(
            "closed form from states 1 and 3 holds for k >= 1".into(),
        )),
        1 => Ok(eval_closed(&FROM_ONE, k)),
        3 => {
            let mut r = eval_closed(&FROM_ONE, k);
            r.reverse();
            Ok(r)
        }
        _ => Err(Error::Domain(format!("no state {start}"))),
    }
}

/// The start-1 closed form exactly as printed, for comparison.
pub fn printed_closed_form_from_one(k: u32) -> [f64; STATES] {
    eval_closed(&FROM_ONE_AS_PRINTED, k)
}

/// Subset of `{0,…,4}` as a bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct StateSet(pub u8);

impl StateSet {
    pub const ALL: StateSet = StateSet(0b11111);

    pub fn of(states: &[usize]) -> Self {
        StateSet(states.iter().fold(0, |m, &s| m | (1 << s)))
    }

    pub fn contains(self, s: usize) -> bool {
        self.0 >> s & 1 == 1
    }

    pub fn intersect(self, o: StateSet) -> StateSet {
        StateSet(self.0 & o.0)
    }
}

/// Constraints `X_t ∈ S_t` at strictly increasing times.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainEvent {
    constraints: Vec<(u64, StateSet)>,
}

impl ChainEvent {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `X_t ∈ set`; a second constraint at the same time intersects.
    pub fn at(mut self, t: u64, set: StateSet) -> Self {
        match self.constraints.binary_search_by_key(&t, |&(s, _)| s) {
            Ok(i) => self.constraints[i].1 = self.constraints[i].1.intersect(set),
            Err(i) => self.constraints.insert(i, (t, set)),
        }
        self
    }

    pub fn constraints(&self) -> &[(u64, StateSet)] {
        &self.constraints
    }

    pub fn horizon(&self) -> u64 {
        self.constraints.last().map_or(0, |c| c.0)
    }
}

/// Probability of `ev` for the chain started in `start` at time 0.
pub fn path_probability(ev: &ChainEvent, start: usize) -> Result<Rational> {
    path_probability_for(cached_matrix(), ev, start)
}

/// `P = A / d` with `A` integral. Propagating integer numerators avoids
/// renormalizing rationals at every step.
fn integer_form(p: &RationalMatrix) -> (BigInt, Vec<Vec<BigInt>>) {
    let den = (0..STATES)
        .flat_map(|i| (0..STATES).map(move |j| (i, j)))
        .fold(BigInt::one(), |acc, (i, j)| {
            num::integer::lcm(acc, p[(i, j)].denom().clone())
        });
    let a = (0..STATES)
        .map(|i| {
            (0..STATES)
                .map(|j| (&p[(i, j)] * Rational::from_integer(den.clone())).to_integer())
                .collect()
        })
        .collect();
    (den, a)
}

fn integer_step(a: &[Vec<BigInt>], v: &[BigInt]) -> Vec<BigInt> {
    let mut w = vec![BigInt::zero(); STATES];
    for (i, x) in v.iter().enumerate().filter(|(_, x)| !x.is_zero()) {
        for (j, y) in w.iter_mut().enumerate() {
            if !a[i][j].is_zero() {
                *y += x * &a[i][j];
            }
        }
    }
    w
}

pub fn path_probability_for(p: &RationalMatrix, ev: &ChainEvent, start: usize) -> Result<Rational> {
    if start >= STATES || p.rows() != STATES || p.cols() != STATES {
        return Err(Error::Domain(format!("no state {start}")));
    }
    let (den, a) = integer_form(p);
    let mut v = vec![BigInt::zero(); STATES];
    v[start] = BigInt::one();
    let mut t = 0;
    for &(time, set) in ev.constraints() {
        while t < time {
            v = integer_step(&a, &v);
            t += 1;
        }
        for (s, x) in v.iter_mut().enumerate() {
            if !set.contains(s) {
                *x = BigInt::zero();
            }
        }
    }
    let total: BigInt = v.into_iter().sum();
    Ok(Rational::new(total, num::pow(den, t as usize)))
}

/// The two terms of the radius law at `n ≥ 1` with `κ = κ_{n−1}`:
/// `X_{κ+1} ∈ {2,3}` and `X_{κ+1} = 1, X_{κ+2} ∈ {1,2,3}`, each followed by
/// `X_{n+1} ∈ {0,1}, X_{n+2} = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadiusTerms {
    pub first: Rational,
    pub second: Rational,
    /// True when `κ + 2 = n + 1`, so the second term's constraints meet at
    /// one time and are intersected.
    pub coinciding_times: bool,
}

pub fn radius_events(n: u64) -> (ChainEvent, ChainEvent) {
    let k = kappa(n - 1);
    let tail = |e: ChainEvent| {
        e.at(n + 1, StateSet::of(&[0, 1]))
            .at(n + 2, StateSet::of(&[0]))
    };
    let first = tail(ChainEvent::new().at(k + 1, StateSet::of(&[2, 3])));
    let second = tail(
        ChainEvent::new()
            .at(k + 1, StateSet::of(&[1]))
            .at(k + 2, StateSet::of(&[1, 2, 3])),
    );
    (first, second)
}

pub fn radius_terms(n: u64) -> Result<RadiusTerms> {
    if n == 0 {
        return Err(Error::Domain("the radius terms start at n = 1".into()));
    }
    let (a, b) = radius_events(n);
    Ok(RadiusTerms {
        first: path_probability(&a, 1)?,
        second: path_probability(&b, 1)?,
        coinciding_times: kappa(n - 1) + 2 == n + 1,
    })
}

/// Probability that the avalanche of `η + δ_o` has diameter `n` under the
/// infinite-volume measure. The `n = 0` value is `p₁₀ + (3/8)·p₁₁·p₁₀`.
pub fn radius_pmf(n: u64) -> Rational {
    if n == 0 {
        let p = cached_matrix();
        return &p[(1, 0)] + rat(3, 8) * &p[(1, 1)] * &p[(1, 0)];
    }
    if has_ternary_digit_two(n) {
        return Rational::zero();
    }
    let t = radius_terms(n).expect("n >= 1");
    t.first + t.second
}

/// As [`radius_pmf`] except at `n = 0`, where the value is
/// `p₁₀ + p₁₁·p₁₀`: either `o` stays stable, or it topples alone, which
/// happens exactly when one particle reaches `(1,1)` and goes no further.
/// With this value the law sums to one together with the explosion mass.
pub fn radius_pmf_derived(n: u64) -> Rational {
    if n == 0 {
        let p = cached_matrix();
        return &p[(1, 0)] + &p[(1, 1)] * &p[(1, 0)];
    }
    radius_pmf(n)
}

/// `Σ_{n ≤ max_n} radius_pmf(n)`.
pub fn radius_cumulative(max_n: u64) -> Rational {
    (0..=max_n).map(radius_pmf).sum()
}

/// `P(X_k ∈ {1,2,3} | X₀ = 1)`: the chance a run is still transient after
/// `k` steps. Chain mode truncated at `k` steps leaves exactly this mass.
pub fn transient_mass(k: u32) -> Rational {
    let v = k_step_distribution(1, k).expect("state 1 exists");
    &v[1] + &v[2] + &v[3]
}

/// Rigorous upper bound on `Σ_{n > max_n} radius_pmf(n)`.
///
/// Each term needs `X_{κ+1}` transient with `κ = κ_{n−1}`, so
/// `radius_pmf(n) ≤ t(κ_{n−1} + 1)` with `t = transient_mass`. Terms with
/// `n − 1 < 3^D` are bounded one by one. Past that, the `2·3^d` values of
/// `n − 1` in `[3^d, 3^{d+1})` all have `κ ≥ 3^d`, and since no transient
/// state stays transient with probability above 5/8 per step the sum over
/// `d ≥ D` is at most twice its first term.
pub fn radius_tail_bound(max_n: u64) -> Result<Rational> {
    let mut d = 1u32;
    while 3u64.pow(d) <= max_n {
        d += 1;
    }
    let top = 3u64.pow(d);
    if top > 1 << 16 {
        return Err(Error::Capacity(format!(
            "tail bound supports max_n < {}",
            (1u64 << 16) / 3
        )));
    }
    // Numerators of t(k) over den^k for k = 0..=top+1.
    let (den, a) = integer_form(cached_matrix());
    let mut v = vec![BigInt::zero(); STATES];
    v[1] = BigInt::one();
    let mut t = Vec::with_capacity(top as usize + 2);
    for _ in 0..=top + 1 {
        t.push(&v[1] + &v[2] + &v[3]);
        v = integer_step(&a, &v);
    }
    // Everything over den^(top+1).
    let h = top as usize + 1;
    let lift = |k: usize| &t[k] * num::pow(den.clone(), h - k);
    let mut sum = BigInt::zero();
    for m in max_n..top {
        if !has_ternary_digit_two(m + 1) {
            sum += lift(kappa(m) as usize + 1);
        }
    }
    sum += BigInt::from(4 * top) * &t[h];
    Ok(Rational::new(sum, num::pow(den, h)))
}

pub fn to_f64(r: &Rational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Both parts too large for f64: scale down first.
        let shift = r
            .denom()
            .bits()
            .max(r.numer().abs().bits())
            .saturating_sub(1000);
        let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Outcome of one stabilization trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorption {
    /// Absorbed at 0: the avalanche stopped.
    Stabilized,
    /// Absorbed at 4: all four particles passed on.
    Exploded,
    /// Still transient when the finite volume ran out.
    Truncated,
}

/// One way of producing the trajectory `(X_i)` for a given level.
pub trait StabilizationEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn prepare(&self, level: u32) -> Result<Box<dyn TrialRunner>>;
}

pub trait TrialRunner: Sync {
    fn run(&self, rng: &mut Stream) -> Absorption;
}

fn classify_last(values: &[u64]) -> Absorption {
    match values.last() {
        Some(0) => Absorption::Stabilized,
        Some(4) => Absorption::Exploded,
        _ => Absorption::Truncated,
    }
}

/// Draws the chain directly from the engine-computed K₄ table.
pub struct ChainMode;

struct ChainRunner {
    steps: u64,
    table: &'static [K4TransitionRow],
}

impl TrialRunner for ChainRunner {
    fn run(&self, rng: &mut Stream) -> Absorption {
        let mut x = 1usize;
        for _ in 0..self.steps {
            x = self.table[rng.gen_range(0..self.table.len())].collected[x] as usize;
            match x {
                0 => return Absorption::Stabilized,
                4 => return Absorption::Exploded,
                _ => {}
            }
        }
        Absorption::Truncated
    }
}

impl StabilizationEstimator for ChainMode {
    fn name(&self) -> &'static str {
        "chain"
    }
    fn describe(&self) -> &'static str {
        "simulate (X_i) from the K4 table, at most 3^level steps"
    }
    fn prepare(&self, level: u32) -> Result<Box<dyn TrialRunner>> {
        if level > 30 {
            return Err(Error::Capacity(format!(
                "chain mode supports level <= 30, got {level}"
            )));
        }
        Ok(Box::new(ChainRunner {
            steps: 3u64.pow(level),
            table: cached_table(),
        }))
    }
}

/// Infinite-volume sample on the diagonal graph, stabilized in nested volumes.
pub struct DiagonalSandpileMode;

struct DiagonalRunner {
    graph: DiagonalGraph,
    checkpoints: Vec<Coord>,
}

impl TrialRunner for DiagonalRunner {
    fn run(&self, rng: &mut Stream) -> Absorption {
        let copies = sample_ivl_diagonal(self.checkpoints.len(), rng);
        let mut c = assemble_diagonal(&self.graph, &copies).expect("copy count matches level");
        c.heights[0] += 1;
        let flow = boundary_flow_until(&self.graph, &c, &self.checkpoints, |x| x == 0 || x == 4)
            .expect("checkpoints are diagonal");
        classify_last(&flow)
    }
}

impl StabilizationEstimator for DiagonalSandpileMode {
    fn name(&self) -> &'static str {
        "sandpile"
    }
    fn describe(&self) -> &'static str {
        "i.i.d. recurrent K4 copies on the diagonal graph, stabilized by the engine"
    }
    fn prepare(&self, level: u32) -> Result<Box<dyn TrialRunner>> {
        let g = VicsekGraph::build(level)?;
        Ok(Box::new(DiagonalRunner {
            graph: g.diagonal_graph(),
            checkpoints: diagonal_checkpoints(g.side()),
        }))
    }
}

/// Uniform recurrent sandpile on the whole of `𝒱_n` via Wilson's algorithm.
pub struct FullSandpileMode;

struct FullRunner {
    graph: VicsekGraph,
    checkpoints: Vec<Coord>,
}

impl TrialRunner for FullRunner {
    fn run(&self, rng: &mut Stream) -> Absorption {
        let mut c = sample_recurrent(&self.graph, rng);
        c.heights[0] += 1;
        let flow = boundary_flow_until(&self.graph, &c, &self.checkpoints, |x| x == 0 || x == 4)
            .expect("checkpoints are diagonal");
        classify_last(&flow)
    }
}

impl StabilizationEstimator for FullSandpileMode {
    fn name(&self) -> &'static str {
        "sandpile-full"
    }
    fn describe(&self) -> &'static str {
        "uniform recurrent sandpile on the full graph (Wilson), stabilized by the engine"
    }
    fn prepare(&self, level: u32) -> Result<Box<dyn TrialRunner>> {
        let g = VicsekGraph::build(level)?;
        let checkpoints = diagonal_checkpoints(g.side());
        Ok(Box::new(FullRunner {
            graph: g,
            checkpoints,
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationEstimate {
    pub mode: String,
    pub level: u32,
    pub trials: u64,
    pub stabilized: u64,
    pub exploded: u64,
    pub truncated: u64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Default)]
struct Tally {
    stabilized: u64,
    exploded: u64,
    truncated: u64,
}

pub fn monte_carlo_stabilization(
    mode: &dyn StabilizationEstimator,
    level: u32,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<StabilizationEstimate> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    if mode.name() != "chain" && level > level_cap() {
        return Err(Error::Capacity(format!(
            "level {level} exceeds cap {}",
            level_cap()
        )));
    }
    let runner = mode.prepare(level)?;
    let tally = run_trials(
        trials,
        seed,
        workers,
        |rng, acc: &mut Tally| match runner.run(rng) {
            Absorption::Stabilized => acc.stabilized += 1,
            Absorption::Exploded => acc.exploded += 1,
            Absorption::Truncated => acc.truncated += 1,
        },
        |a, b| Tally {
            stabilized: a.stabilized + b.stabilized,
            exploded: a.exploded + b.exploded,
            truncated: a.truncated + b.truncated,
        },
    )?;
    let p = tally.stabilized as f64 / trials as f64;
    Ok(StabilizationEstimate {
        mode: mode.name().to_string(),
        level,
        trials,
        stabilized: tally.stabilized,
        exploded: tally.exploded,
        truncated: tally.truncated,
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

/// The first-checkpoint value of `η + δ_o` on `D_n` for a sampled η; used to
/// compare the assembled sampler against row 1 of `P`.
pub fn first_checkpoint_value(g: &DiagonalGraph, rng: &mut Stream) -> u64 {
    let m = 3usize.pow(g.level());
    let copies = sample_ivl_diagonal(m, rng);
    let mut c: SandpileConfig = assemble_diagonal(g, &copies).expect("sized");
    c.heights[0] += 1;
    boundary_flow_until(g, &c, &[Coord::new(1, 1)], |_| true).expect("diagonal")[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows() {
        let p = transition_matrix().0;
        let row1: Vec<Rational> = vec![rat(1, 2), rat(3, 16), rat(2, 16), rat(3, 16), rat(0, 1)];
        assert_eq!(p.row(1), &row1[..]);
        let row2 = [rat(3, 16), rat(3, 16), rat(1, 4), rat(3, 16), rat(3, 16)];
        assert_eq!(p.row(2), &row2[..]);
    }

    #[test]
    fn absorb() {
        let x = absorption_probabilities().unwrap();
        assert_eq!(
            x,
            vec![rat(1, 1), rat(3, 4), rat(1, 2), rat(1, 4), rat(0, 1)]
        );
    }

    #[test]
    fn events() {
        let e = ChainEvent::new().at(1, StateSet::of(&[0]));
        assert_eq!(path_probability(&e, 1).unwrap(), rat(1, 2));
        let all = ChainEvent::new().at(1, StateSet::ALL);
        assert_eq!(path_probability(&all, 1).unwrap(), rat(1, 1));
        assert_eq!(radius_pmf(1), rat(36, 512));
        let t = radius_terms(1).unwrap();
        assert_eq!((t.first, t.second), (rat(27, 512), rat(9, 512)));
        assert!(t.coinciding_times);
    }

    #[test]
    fn rational_text() {
        let r = rat(-6, 8);
        assert_eq!(format_rational(&r), "-3/4");
        assert_eq!(parse_rational("-3/4").unwrap(), r);
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn singular_detected() {
        let m = RationalMatrix::zeros(2, 2);
        assert!(matches!(
            m.solve(&[rat(1, 1), rat(1, 1)]),
            Err(Error::Singular(_))
        ));
    }
}
