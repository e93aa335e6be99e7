//! The sandpile group as the cokernel of the reduced Laplacian.

use std::cmp::Ordering;

use num::{BigInt, BigUint, Integer, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::engine::{group_add, stabilize, SandpileConfig};
use crate::error::{Error, Result};
use crate::graph::{Topology, VicsekGraph};
use crate::parallel::run_trials;
use crate::recurrence::{is_recurrent, sample_recurrent};

/// Largest level for which [`group_structure`] runs the dense SNF.
pub const SNF_LEVEL_CAP: u32 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigInt>,
}

impl IntegerMatrix {
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        IntegerMatrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().map(|&v| BigInt::from(v)).collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::Domain("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a: Vec<Vec<BigInt>> = (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].to_vec())
            .collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                    Some(r) => {
                        a.swap(k, r);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        Ok(sign
            * if n == 0 {
                BigInt::one()
            } else {
                a[n - 1][n - 1].clone()
            })
    }
}

/// `d₁ | d₂ | … | d_r`, unit factors included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantFactors(pub Vec<BigInt>);

impl InvariantFactors {
    pub fn product(&self) -> BigInt {
        self.0.iter().product()
    }

    pub fn is_divisibility_chain(&self) -> bool {
        self.0.iter().all(|d| d.is_positive())
            && self.0.windows(2).all(|w| (&w[1] % &w[0]).is_zero())
    }

    pub fn non_unit(&self) -> Vec<&BigInt> {
        self.0.iter().filter(|d| !d.is_one()).collect()
    }

    pub fn unit_count(&self) -> usize {
        self.0.iter().filter(|d| d.is_one()).count()
    }

    /// Number of elements `g` with `2g = 0`: `Π gcd(d, 2)`.
    pub fn order2_count(&self) -> BigUint {
        let two = BigInt::from(2);
        self.0
            .iter()
            .map(|d| d.gcd(&two).to_biguint().expect("positive"))
            .product()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(ToString::to_string).collect()
    }
}

pub fn reduced_laplacian<T: Topology>(g: &T) -> IntegerMatrix {
    let n = g.site_count();
    let mut data = vec![BigInt::zero(); n * n];
    for v in 0..n {
        data[v * n + v] = BigInt::from(g.degree(v));
        for &w in g.neighbors(v) {
            if (w as usize) < n {
                data[v * n + w as usize] -= 1;
            }
        }
    }
    IntegerMatrix {
        rows: n,
        cols: n,
        data,
    }
}

/// Entry type for the elimination. `None` from an arithmetic step means
/// overflow, upon which the caller restarts in arbitrary precision.
trait Entry: Clone + Sized {
    fn e_is_zero(&self) -> bool;
    fn cmp_abs(&self, o: &Self) -> Ordering;
    fn is_unit(&self) -> bool;
    fn quot(&self, d: &Self) -> Self;
    fn divides(&self, o: &Self) -> bool;
    fn sub_mul(&self, q: &Self, b: &Self) -> Option<Self>;
    fn add(&self, b: &Self) -> Option<Self>;
    fn to_big(&self) -> BigInt;
}

impl Entry for i128 {
    fn e_is_zero(&self) -> bool {
        *self == 0
    }
    fn cmp_abs(&self, o: &Self) -> Ordering {
        self.unsigned_abs().cmp(&o.unsigned_abs())
    }
    fn is_unit(&self) -> bool {
        self.unsigned_abs() == 1
    }
    fn quot(&self, d: &Self) -> Self {
        self / d
    }
    fn divides(&self, o: &Self) -> bool {
        o % self == 0
    }
    fn sub_mul(&self, q: &Self, b: &Self) -> Option<Self> {
        self.checked_sub(q.checked_mul(*b)?)
    }
    fn add(&self, b: &Self) -> Option<Self> {
        self.checked_add(*b)
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Entry for BigInt {
    fn e_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn cmp_abs(&self, o: &Self) -> Ordering {
        self.magnitude().cmp(o.magnitude())
    }
    fn is_unit(&self) -> bool {
        self.magnitude().is_one()
    }
    fn quot(&self, d: &Self) -> Self {
        self / d
    }
    fn divides(&self, o: &Self) -> bool {
        Zero::is_zero(&(o % self))
    }
    fn sub_mul(&self, q: &Self, b: &Self) -> Option<Self> {
        Some(self - q * b)
    }
    fn add(&self, b: &Self) -> Option<Self> {
        Some(self + b)
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

struct Dense<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Entry> Dense<T> {
    fn at(&self, i: usize, j: usize) -> &T {
        &self.a[i * self.n + j]
    }

    fn swap_rows(&mut self, r: usize, s: usize) {
        if r != s {
            for j in 0..self.n {
                self.a.swap(r * self.n + j, s * self.n + j);
            }
        }
    }

    fn swap_cols(&mut self, c: usize, d: usize) {
        if c != d {
            for i in 0..self.n {
                self.a.swap(i * self.n + c, i * self.n + d);
            }
        }
    }

    /// row r -= q · row t, on the columns in `cols`.
    fn row_op(&mut self, r: usize, t: usize, q: &T, cols: &[usize]) -> Option<()> {
        for &j in cols {
            let v = self.a[r * self.n + j].sub_mul(q, &self.a[t * self.n + j])?;
            self.a[r * self.n + j] = v;
        }
        Some(())
    }

    /// col c -= q · col t, on the rows in `rows`.
    fn col_op(&mut self, c: usize, t: usize, q: &T, rows: &[usize]) -> Option<()> {
        for &i in rows {
            let v = self.a[i * self.n + c].sub_mul(q, &self.a[i * self.n + t])?;
            self.a[i * self.n + c] = v;
        }
        Some(())
    }

    fn smith(mut self) -> Result<Option<Vec<BigInt>>> {
        let n = self.n;
        let mut diag = Vec::with_capacity(n);
        for t in 0..n {
            // Least absolute value pivot over the remaining block.
            let mut best: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    let v = self.at(i, j);
                    if !v.e_is_zero()
                        && best.is_none_or(|(bi, bj)| v.cmp_abs(self.at(bi, bj)) == Ordering::Less)
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                return Err(Error::Singular(format!("rank {t} < {n}")));
            };
            self.swap_rows(t, pi);
            self.swap_cols(t, pj);
            loop {
                // Clear column t below and row t to the right.
                let row_support: Vec<usize> =
                    (t..n).filter(|&j| !self.at(t, j).e_is_zero()).collect();
                let mut residue = false;
                for r in t + 1..n {
                    if self.at(r, t).e_is_zero() {
                        continue;
                    }
                    let q = self.at(r, t).quot(self.at(t, t));
                    if self.row_op(r, t, &q, &row_support).is_none() {
                        return Ok(None);
                    }
                    residue |= !self.at(r, t).e_is_zero();
                }
                let col_support: Vec<usize> =
                    (t..n).filter(|&i| !self.at(i, t).e_is_zero()).collect();
                for c in t + 1..n {
                    if self.at(t, c).e_is_zero() {
                        continue;
                    }
                    let q = self.at(t, c).quot(self.at(t, t));
                    if self.col_op(c, t, &q, &col_support).is_none() {
                        return Ok(None);
                    }
                    residue |= !self.at(t, c).e_is_zero();
                }
                if residue {
                    // A remainder smaller than the pivot survived: make it the pivot.
                    let mut best = (t, t);
                    for k in t + 1..n {
                        for cand in [(k, t), (t, k)] {
                            let v = self.at(cand.0, cand.1);
                            if !v.e_is_zero()
                                && v.cmp_abs(self.at(best.0, best.1)) == Ordering::Less
                            {
                                best = cand;
                            }
                        }
                    }
                    self.swap_rows(t, best.0);
                    self.swap_cols(t, best.1);
                    continue;
                }
                // Enforce divisibility of the rest of the block by the pivot.
                if !self.at(t, t).is_unit() {
                    let offender = (t + 1..n)
                        .find(|&i| (t + 1..n).any(|j| !self.at(t, t).divides(self.at(i, j))));
                    if let Some(r) = offender {
                        for j in t..n {
                            let v = match self.at(t, j).add(self.at(r, j)) {
                                Some(v) => v,
                                None => return Ok(None),
                            };
                            self.a[t * n + j] = v;
                        }
                        continue;
                    }
                }
                break;
            }
            diag.push(self.at(t, t).to_big().abs());
        }
        Ok(Some(diag))
    }
}

/// Invariant factors of a square non-singular integer matrix.
pub fn smith_normal_form(m: &IntegerMatrix) -> Result<InvariantFactors> {
    if m.rows != m.cols {
        return Err(Error::Domain(
            "Smith normal form needs a square matrix".into(),
        ));
    }
    let n = m.rows;
    let small: Option<Vec<i128>> = m.data.iter().map(|v| v.to_i128()).collect();
    if let Some(a) = small {
        if let Some(d) = (Dense { n, a }).smith()? {
            return Ok(InvariantFactors(d));
        }
    }
    let d = (Dense {
        n,
        a: m.data.clone(),
    })
    .smith()?
    .expect("arbitrary precision cannot overflow");
    Ok(InvariantFactors(d))
}

pub fn group_structure(level: u32) -> Result<InvariantFactors> {
    if level > SNF_LEVEL_CAP {
        return Err(Error::Capacity(format!(
            "group structure supports level <= {SNF_LEVEL_CAP}, got {level}"
        )));
    }
    let g = VicsekGraph::build(level)?;
    smith_normal_form(&reduced_laplacian(&g))
}

pub fn order2_count(level: u32) -> Result<BigUint> {
    Ok(group_structure(level)?.order2_count())
}

/// Smallest `k ≥ 1` with the `k`-fold ⊕-power of `eta` equal to `id`.
pub fn element_order<T: Topology>(g: &T, eta: &SandpileConfig, id: &SandpileConfig) -> Result<u64> {
    if !is_recurrent(g, eta)? {
        return Err(Error::Domain(
            "element_order needs a recurrent configuration".into(),
        ));
    }
    if eta == id {
        return Ok(1);
    }
    let two = group_add(g, eta, eta);
    if two == *id {
        return Ok(2);
    }
    let four = group_add(g, &two, &two);
    if four == *id {
        // Order divides 4 and is neither 1 nor 2.
        return Ok(4);
    }
    let mut cur = group_add(g, &two, eta);
    for k in 3..1_000_000u64 {
        if cur == *id {
            return Ok(k);
        }
        cur = group_add(g, &cur, eta);
    }
    Err(Error::Capacity("order exceeds search bound".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitEstimate {
    pub samples: u64,
    pub hits: u64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Fraction of uniform recurrent `η` for which `η + k·δ_x` sends at least
/// one particle into the sink.
pub fn sink_hit_probability<T: Topology>(
    g: &T,
    x: usize,
    k: i64,
    samples: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<HitEstimate> {
    if x >= g.site_count() || k < 1 || samples == 0 {
        return Err(Error::Domain(
            "need a non-sink vertex, k >= 1 and samples >= 1".into(),
        ));
    }
    let hits = run_trials(
        samples,
        seed,
        workers,
        |rng, acc: &mut u64| {
            let mut c = sample_recurrent(g, rng);
            c.heights[x] += k;
            if stabilize(g, &c).1.sink_particles > 0 {
                *acc += 1;
            }
        },
        |a, b| a + b,
    )?;
    let p = hits as f64 / samples as f64;
    Ok(HitEstimate {
        samples,
        hits,
        estimate: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
    })
}
