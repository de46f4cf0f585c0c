//! Finite abelian groups given by generators and relations.
//!
//! The Smith normal form is computed over arbitrary-precision integers. A
//! group keeps enough of the change of basis to rewrite elements written in
//! the presentation generators, which is what the ray class code needs to
//! transport the Galois action.

#![allow(clippy::needless_range_loop)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type IntMatrix = Vec<Vec<BigInt>>;

/// `u * m * v = diag`, with `diag[i] | diag[i+1]` (zeros last).
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub diag: Vec<BigInt>,
    pub u: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
}

fn identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| BigInt::from((i == j) as i32)).collect())
        .collect()
}

pub fn to_big(m: &[Vec<i64>]) -> IntMatrix {
    m.iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect()
}

struct Reducer {
    a: IntMatrix,
    rows: usize,
    cols: usize,
    u: Option<IntMatrix>,
    // v and v_inv are tracked together
    v: Option<(IntMatrix, IntMatrix)>,
}

impl Reducer {
    // row_i <- row_i - q * row_j
    fn row_sub(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for k in 0..self.cols {
            let t = &self.a[j][k] * q;
            self.a[i][k] -= t;
        }
        if let Some(u) = &mut self.u {
            for k in 0..self.rows {
                let t = &u[j][k] * q;
                u[i][k] -= t;
            }
        }
    }

    // col_i <- col_i - q * col_j
    fn col_sub(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for r in 0..self.rows {
            let t = &self.a[r][j] * q;
            self.a[r][i] -= t;
        }
        if let Some((v, vi)) = &mut self.v {
            for r in 0..self.cols {
                let t = &v[r][j] * q;
                v[r][i] -= t;
            }
            // inverse: row_j <- row_j + q * row_i
            for k in 0..self.cols {
                let t = &vi[i][k] * q;
                vi[j][k] += t;
            }
        }
    }

    fn row_swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.a.swap(i, j);
        if let Some(u) = &mut self.u {
            u.swap(i, j);
        }
    }

    fn col_swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.rows {
            self.a[r].swap(i, j);
        }
        if let Some((v, vi)) = &mut self.v {
            for r in 0..self.cols {
                v[r].swap(i, j);
            }
            vi.swap(i, j);
        }
    }

    fn row_negate(&mut self, i: usize) {
        for x in self.a[i].iter_mut() {
            *x = -&*x;
        }
        if let Some(u) = &mut self.u {
            for x in u[i].iter_mut() {
                *x = -&*x;
            }
        }
    }

    fn run(&mut self) {
        let n = self.rows.min(self.cols);
        for t in 0..n {
            loop {
                // pivot: smallest nonzero |entry| in the trailing block
                let mut best: Option<(usize, usize)> = None;
                for i in t..self.rows {
                    for j in t..self.cols {
                        let x = &self.a[i][j];
                        if !x.is_zero()
                            && best.is_none_or(|(bi, bj)| x.abs() < self.a[bi][bj].abs())
                        {
                            best = Some((i, j));
                        }
                    }
                }
                let Some((pi, pj)) = best else { return };
                self.row_swap(t, pi);
                self.col_swap(t, pj);
                if self.a[t][t].is_negative() {
                    self.row_negate(t);
                }
                let mut clean = true;
                for i in t + 1..self.rows {
                    if !self.a[i][t].is_zero() {
                        let q = self.a[i][t].div_floor(&self.a[t][t]);
                        self.row_sub(i, t, &q);
                        if !self.a[i][t].is_zero() {
                            clean = false;
                        }
                    }
                }
                for j in t + 1..self.cols {
                    if !self.a[t][j].is_zero() {
                        let q = self.a[t][j].div_floor(&self.a[t][t]);
                        self.col_sub(j, t, &q);
                        if !self.a[t][j].is_zero() {
                            clean = false;
                        }
                    }
                }
                if !clean {
                    continue;
                }
                // divisibility of the rest of the block
                let p = self.a[t][t].clone();
                let bad = (t + 1..self.rows)
                    .find(|&i| (t + 1..self.cols).any(|j| !(&self.a[i][j] % &p).is_zero()));
                match bad {
                    Some(i) => {
                        // row_t += row_i and start over
                        self.row_sub(t, i, &-BigInt::one());
                    }
                    None => break,
                }
            }
        }
    }
}

fn reduce(m: IntMatrix, cols: usize, track: bool) -> Reducer {
    let rows = m.len();
    let mut r = Reducer {
        a: m,
        rows,
        cols,
        u: track.then(|| identity(rows)),
        v: track.then(|| (identity(cols), identity(cols))),
    };
    r.run();
    r
}

fn diagonal(r: &Reducer) -> Vec<BigInt> {
    (0..r.rows.min(r.cols)).map(|i| r.a[i][i].clone()).collect()
}

/// Smith normal form with unimodular transforms.
pub fn smith_normal_form(m: &IntMatrix, cols: usize) -> SmithForm {
    let r = reduce(m.clone(), cols, true);
    let diag = diagonal(&r);
    let (v, v_inv) = r.v.unwrap();
    SmithForm {
        diag,
        u: r.u.unwrap(),
        v,
        v_inv,
    }
}

/// Elementary divisors only (no transforms).
pub fn elementary_divisors(m: &IntMatrix, cols: usize) -> Vec<BigInt> {
    diagonal(&reduce(m.clone(), cols, false))
}

/// Index of the row lattice in `Z^cols`, or `None` when it is not full rank.
pub fn lattice_index(rows: &IntMatrix, cols: usize) -> Option<BigInt> {
    let d = elementary_divisors(rows, cols);
    if d.len() < cols || d.iter().any(|x| x.is_zero()) {
        return None;
    }
    Some(d.iter().product())
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Row lattice `L + D Z^n` kept in upper-triangular Hermite form with
/// entries reduced mod `D`.
///
/// When the true relation lattice has index `D`, it contains `D Z^n`, so
/// adding those rows loses nothing; the index of the accumulated lattice
/// then reaches `D` exactly when enough relations have been inserted.
#[derive(Debug, Clone)]
pub struct ModularHnf {
    modulus: i128,
    rows: Vec<Vec<i128>>,
}

impl ModularHnf {
    pub fn new(n: usize, modulus: u64) -> Self {
        assert!(modulus >= 1);
        let m = modulus as i128;
        ModularHnf {
            modulus: m,
            rows: (0..n)
                .map(|i| (0..n).map(|j| if i == j { m } else { 0 }).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn insert(&mut self, v: &[i64]) {
        let m = self.modulus;
        let n = self.rows.len();
        let mut v: Vec<i128> = v.iter().map(|&x| (x as i128).rem_euclid(m)).collect();
        for i in 0..n {
            let vi = v[i];
            if vi == 0 {
                continue;
            }
            let h = &self.rows[i];
            let a = h[i];
            let (g, s, t) = ext_gcd(a, vi);
            let (ag, vg) = (a / g, vi / g);
            let mut new_h = vec![0i128; n];
            for j in i..n {
                new_h[j] = (s * h[j] + t * v[j]).rem_euclid(m);
                v[j] = (ag * v[j] - vg * h[j]).rem_euclid(m);
            }
            new_h[i] = g;
            self.rows[i] = new_h;
        }
    }

    /// `[Z^n : L + D Z^n]`, saturating.
    pub fn index(&self) -> u128 {
        self.rows
            .iter()
            .enumerate()
            .fold(1u128, |acc, (i, r)| acc.saturating_mul(r[i] as u128))
    }

    pub fn basis(&self) -> Vec<Vec<i64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&x| x as i64).collect())
            .collect()
    }
}

const RANK_PRIME: u128 = (1 << 61) - 1;

fn det_abs(rows: &[Vec<i64>], n: usize) -> BigInt {
    elementary_divisors(&to_big(rows), n)
        .iter()
        .product::<BigInt>()
        .abs()
}

/// Accumulates integer relations whose index is not known in advance.
///
/// Rows are stored until they span a full-rank lattice (rank tested mod a
/// large prime); then a multiple `D` of the index is read off from
/// determinants of full-rank subsets, and everything folds into a
/// [`ModularHnf`] mod `D`.
#[derive(Debug, Clone)]
pub struct RelationAccumulator {
    n: usize,
    pending: Vec<Vec<i64>>,
    echelon: Vec<Option<Vec<u128>>>,
    hnf: Option<ModularHnf>,
}

impl RelationAccumulator {
    pub fn new(n: usize) -> Self {
        RelationAccumulator {
            n,
            pending: Vec::new(),
            echelon: vec![None; n],
            hnf: (n == 0).then(|| ModularHnf::new(0, 1)),
        }
    }

    fn raises_rank(&mut self, row: &[i64]) -> bool {
        let p = RANK_PRIME;
        let mut v: Vec<u128> = row
            .iter()
            .map(|&x| (x as i128).rem_euclid(p as i128) as u128)
            .collect();
        for i in 0..self.n {
            if v[i] == 0 {
                continue;
            }
            match &self.echelon[i] {
                Some(e) => {
                    let f = v[i];
                    for j in i..self.n {
                        v[j] = (v[j] + p - f * e[j] % p) % p;
                    }
                }
                None => {
                    // normalise pivot to 1
                    let inv = pow_mod(v[i], p - 2, p);
                    for x in v.iter_mut() {
                        *x = *x * inv % p;
                    }
                    self.echelon[i] = Some(v);
                    return true;
                }
            }
        }
        false
    }

    pub fn insert(&mut self, row: &[i64]) {
        if let Some(h) = &mut self.hnf {
            h.insert(row);
            return;
        }
        self.pending.push(row.to_vec());
        if self.raises_rank(row) && self.echelon.iter().all(Option::is_some) {
            self.switch_to_modular();
        }
    }

    fn full_rank_subset(&self, order: impl Iterator<Item = usize>) -> Vec<Vec<i64>> {
        let mut probe = RelationAccumulator::new(self.n);
        let mut out = Vec::new();
        for i in order {
            if probe.raises_rank(&self.pending[i]) {
                out.push(self.pending[i].clone());
            }
        }
        out
    }

    fn switch_to_modular(&mut self) {
        let m = self.pending.len();
        let limit = BigInt::from(1u64 << 62);
        let mut d = BigInt::zero();
        for shift in 0..8 {
            let order: Vec<usize> = if shift % 2 == 0 {
                (0..m).map(|i| (i + shift * m / 8) % m).collect()
            } else {
                (0..m).rev().map(|i| (i + shift * m / 8) % m).collect()
            };
            let rows = self.full_rank_subset(order.into_iter());
            d = d.gcd(&det_abs(&rows, self.n));
            if d < limit {
                break;
            }
        }
        if d >= limit {
            // settle for the exact index of everything seen so far
            d = det_abs_lattice(&self.pending, self.n);
        }
        let mut h = ModularHnf::new(self.n, d.to_u64().expect("index below 2^62"));
        for r in self.pending.drain(..) {
            h.insert(&r);
        }
        self.hnf = Some(h);
    }

    pub fn is_full_rank(&self) -> bool {
        self.hnf.is_some()
    }

    /// The quotient group, once the relations have full rank.
    pub fn group(&self) -> Option<FiniteAbelianGroup> {
        let h = self.hnf.as_ref()?;
        Some(
            group_from_presentation(&Presentation {
                num_generators: self.n,
                relations: h.basis(),
            })
            .expect("full rank"),
        )
    }
}

fn det_abs_lattice(rows: &[Vec<i64>], n: usize) -> BigInt {
    lattice_index(&to_big(rows), n).expect("full rank")
}

fn pow_mod(mut b: u128, mut e: u128, m: u128) -> u128 {
    let mut r = 1u128;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

/// Quotient `Z^g / rowspan(relations)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub num_generators: usize,
    pub relations: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteAbelianGroup {
    /// `d_1 | d_2 | ... | d_r`, all at least 2.
    pub invariants: Vec<u64>,
    /// Column `j` reduced mod `invariants[j]`: maps presentation coordinates
    /// (row vectors) to invariant-factor coordinates.
    to_invariant: Vec<Vec<u64>>,
    /// Row `i` holds the presentation coordinates of the `i`-th invariant
    /// factor generator.
    generators: IntMatrix,
}

impl PartialEq for FiniteAbelianGroup {
    /// Groups compare by isomorphism type.
    fn eq(&self, other: &Self) -> bool {
        self.invariants == other.invariants
    }
}

impl FiniteAbelianGroup {
    pub fn trivial(num_generators: usize) -> Self {
        FiniteAbelianGroup {
            invariants: Vec::new(),
            to_invariant: vec![Vec::new(); num_generators],
            generators: Vec::new(),
        }
    }

    pub fn cyclic(n: u64) -> Self {
        group_from_presentation(&Presentation {
            num_generators: 1,
            relations: vec![vec![n as i64]],
        })
        .expect("finite")
    }

    pub fn order(&self) -> u64 {
        self.invariants.iter().product()
    }

    pub fn rank(&self) -> usize {
        self.invariants.len()
    }

    pub fn num_presentation_generators(&self) -> usize {
        self.to_invariant.len()
    }

    /// Invariant-factor coordinates of an element given in presentation
    /// generators.
    pub fn coords(&self, x: &[i64]) -> Vec<u64> {
        assert_eq!(x.len(), self.to_invariant.len());
        (0..self.invariants.len())
            .map(|j| {
                let d = self.invariants[j] as i128;
                let s: i128 = x
                    .iter()
                    .zip(&self.to_invariant)
                    .map(|(&xi, row)| (xi as i128).rem_euclid(d) * row[j] as i128 % d)
                    .sum();
                s.rem_euclid(d) as u64
            })
            .collect()
    }

    /// Same as [`coords`](Self::coords) for big-integer input.
    pub fn coords_big(&self, x: &[BigInt]) -> Vec<u64> {
        (0..self.invariants.len())
            .map(|j| {
                let d = BigInt::from(self.invariants[j]);
                let mut s = BigInt::zero();
                for (xi, row) in x.iter().zip(&self.to_invariant) {
                    s += xi.mod_floor(&d) * row[j];
                }
                s.mod_floor(&d).to_u64().unwrap()
            })
            .collect()
    }

    /// Presentation coordinates of the invariant-factor generators.
    pub fn generator_basis(&self) -> &IntMatrix {
        &self.generators
    }

    pub fn is_identity(&self, x: &[i64]) -> bool {
        self.coords(x).iter().all(|&c| c == 0)
    }
}

pub fn group_from_presentation(p: &Presentation) -> Result<FiniteAbelianGroup> {
    let g = p.num_generators;
    if g == 0 {
        return Ok(FiniteAbelianGroup::trivial(0));
    }
    let snf = smith_normal_form(&to_big(&p.relations), g);
    let rank = snf.diag.iter().filter(|x| !x.is_zero()).count();
    if rank < g {
        return Err(Error::InfiniteQuotient {
            rank,
            generators: g,
        });
    }
    let mut invariants = Vec::new();
    let mut keep = Vec::new();
    for (i, d) in snf.diag.iter().enumerate() {
        if !d.is_one() {
            invariants.push(d.to_u64().expect("group order fits in u64"));
            keep.push(i);
        }
    }
    let to_invariant = (0..g)
        .map(|r| {
            keep.iter()
                .zip(&invariants)
                .map(|(&j, &d)| snf.v[r][j].mod_floor(&BigInt::from(d)).to_u64().unwrap())
                .collect()
        })
        .collect();
    let generators = keep.iter().map(|&j| snf.v_inv[j].clone()).collect();
    Ok(FiniteAbelianGroup {
        invariants,
        to_invariant,
        generators,
    })
}

/// Size of the `p`-torsion subgroup.
pub fn p_torsion_size(g: &FiniteAbelianGroup, p: u64) -> u64 {
    let r = g.invariants.iter().filter(|&&d| d % p == 0).count() as u32;
    p.pow(r)
}

/// An automorphism of order dividing 2, written on the invariant-factor
/// generators: row `i` is the image of generator `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Involution {
    pub matrix: Vec<Vec<u64>>,
}

impl Involution {
    pub fn identity(g: &FiniteAbelianGroup) -> Self {
        let r = g.rank();
        Involution {
            matrix: (0..r)
                .map(|i| (0..r).map(|j| u64::from(i == j)).collect())
                .collect(),
        }
    }

    pub fn negation(g: &FiniteAbelianGroup) -> Self {
        let r = g.rank();
        Involution {
            matrix: (0..r)
                .map(|i| {
                    (0..r)
                        .map(|j| if i == j { g.invariants[i] - 1 } else { 0 })
                        .collect()
                })
                .collect(),
        }
    }

    /// Transport a map given on presentation generators (`action[k]` is the
    /// image of generator `k`, in presentation coordinates).
    pub fn from_presentation_action(g: &FiniteAbelianGroup, action: &[Vec<i64>]) -> Self {
        let n = g.num_presentation_generators();
        assert_eq!(action.len(), n);
        let matrix = g
            .generators
            .iter()
            .map(|row| {
                let mut image = vec![BigInt::zero(); n];
                for (k, coeff) in row.iter().enumerate() {
                    if coeff.is_zero() {
                        continue;
                    }
                    for (l, &a) in action[k].iter().enumerate() {
                        if a != 0 {
                            image[l] += coeff * a;
                        }
                    }
                }
                g.coords_big(&image)
            })
            .collect();
        Involution { matrix }
    }

    /// Row vectors in invariant coordinates; apply the map.
    fn apply(&self, g: &FiniteAbelianGroup, x: &[u64]) -> Vec<u64> {
        (0..g.rank())
            .map(|j| {
                let d = g.invariants[j] as u128;
                let s: u128 = x
                    .iter()
                    .zip(&self.matrix)
                    .map(|(&xi, row)| xi as u128 * row[j] as u128 % d)
                    .sum();
                (s % d) as u64
            })
            .collect()
    }

    pub fn is_involution_on(&self, g: &FiniteAbelianGroup) -> bool {
        (0..g.rank()).all(|i| {
            let twice = self.apply(g, &self.matrix[i]);
            twice
                .iter()
                .enumerate()
                .all(|(j, &x)| x == u64::from(i == j) % g.invariants[j])
        })
    }
}

fn rank_mod3(mut m: Vec<Vec<u8>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col]; // 1 and 2 are self-inverse mod 3
        for x in m[rank].iter_mut() {
            *x = (*x * inv) % 3;
        }
        for r in 0..rows {
            if r != rank && m[r][col] != 0 {
                let f = m[r][col];
                for c in 0..cols {
                    m[r][c] = (m[r][c] + 3 * 3 - f * m[rank][c]) % 3;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Ranks over F_3 of the `+1` and `-1` eigenspaces of `s` on the 3-torsion.
pub fn involution_eigenspace_ranks(g: &FiniteAbelianGroup, s: &Involution) -> Result<(u32, u32)> {
    if !s.is_involution_on(g) {
        return Err(Error::NotInvolution);
    }
    // basis t_i = (d_i / 3) g_i of G[3]
    let idx: Vec<usize> = (0..g.rank())
        .filter(|&i| g.invariants[i].is_multiple_of(3))
        .collect();
    let r3 = idx.len();
    let mut t = vec![vec![0u8; r3]; r3];
    for (a, &i) in idx.iter().enumerate() {
        let mut x = vec![0u64; g.rank()];
        x[i] = g.invariants[i] / 3;
        let y = s.apply(g, &x);
        for (b, &j) in idx.iter().enumerate() {
            let step = g.invariants[j] / 3;
            debug_assert_eq!(y[j] % step, 0);
            t[a][b] = ((y[j] / step) % 3) as u8;
        }
        debug_assert!((0..g.rank()).all(|j| g.invariants[j].is_multiple_of(3) || y[j] == 0));
    }
    let shifted = |sign: u8| -> Vec<Vec<u8>> {
        (0..r3)
            .map(|a| {
                (0..r3)
                    .map(|b| {
                        let diag = if a == b { sign } else { 0 };
                        (t[a][b] + 3 - diag) % 3
                    })
                    .collect()
            })
            .collect()
    };
    // kernel of (T - 1) and (T + 1) = (T - 2)
    let plus = r3 - rank_mod3(shifted(1));
    let minus = r3 - rank_mod3(shifted(2));
    debug_assert_eq!(plus + minus, r3);
    Ok((plus as u32, minus as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag_of(m: &[Vec<i64>]) -> Vec<i64> {
        let cols = m[0].len();
        elementary_divisors(&to_big(m), cols)
            .iter()
            .map(|x| x.to_i64().unwrap())
            .collect()
    }

    fn mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
        let n = b.first().map_or(0, Vec::len);
        a.iter()
            .map(|row| {
                (0..n)
                    .map(|j| row.iter().zip(b).map(|(x, brow)| x * &brow[j]).sum())
                    .collect()
            })
            .collect()
    }

    fn det(m: &[Vec<i64>]) -> i64 {
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
                sign * m[0][j] * det(&minor)
            })
            .sum()
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        (k - 1..n)
            .flat_map(|last| {
                subsets(last, k - 1).into_iter().map(move |mut s| {
                    s.push(last);
                    s
                })
            })
            .collect()
    }

    // d_k = D_k / D_{k-1} where D_k is the gcd of all k x k minors.
    fn determinantal_oracle(m: &[Vec<i64>]) -> Vec<i64> {
        let n = m.len().min(m[0].len());
        let mut prev = 1;
        let mut out = Vec::new();
        for k in 1..=n {
            let mut g = 0;
            for rs in subsets(m.len(), k) {
                for cs in subsets(m[0].len(), k) {
                    let sub: Vec<Vec<i64>> = rs
                        .iter()
                        .map(|&r| cs.iter().map(|&c| m[r][c]).collect())
                        .collect();
                    g = crate::arith::gcd(g, det(&sub));
                }
            }
            out.push(if prev == 0 { 0 } else { g / prev });
            prev = g;
        }
        out
    }

    #[test]
    fn snf_examples() {
        assert_eq!(diag_of(&[vec![3, 0], vec![0, 3]]), vec![3, 3]);
        assert_eq!(diag_of(&[vec![2, 4], vec![0, 6]]), vec![2, 6]);
        assert_eq!(diag_of(&[vec![1]]), vec![1]);
    }

    #[test]
    fn snf_transforms_are_consistent() {
        let m = to_big(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]);
        let s = smith_normal_form(&m, 3);
        let d = mul(&mul(&s.u, &m), &s.v);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j {
                    s.diag[i].clone()
                } else {
                    BigInt::zero()
                };
                assert_eq!(d[i][j], expect);
            }
        }
        assert_eq!(mul(&s.v, &s.v_inv), identity(3));
        let got: Vec<i64> = s.diag.iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(
            got,
            determinantal_oracle(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]])
        );
    }

    #[test]
    fn presentation_examples() {
        let g = |n, rel: Vec<Vec<i64>>| {
            group_from_presentation(&Presentation {
                num_generators: n,
                relations: rel,
            })
        };
        assert_eq!(
            g(2, vec![vec![3, 0], vec![0, 3]]).unwrap().invariants,
            vec![3, 3]
        );
        assert_eq!(g(1, vec![vec![6]]).unwrap().invariants, vec![6]);
        assert_eq!(
            g(2, vec![vec![2, 4], vec![0, 6]]).unwrap().invariants,
            vec![2, 6]
        );
        assert!(matches!(
            g(2, vec![vec![2, 4]]),
            Err(Error::InfiniteQuotient { .. })
        ));
        assert_eq!(g(2, vec![vec![1, 0], vec![0, 1]]).unwrap().order(), 1);
    }

    #[test]
    fn torsion_examples() {
        assert_eq!(p_torsion_size(&FiniteAbelianGroup::cyclic(6), 3), 3);
        let g = group_from_presentation(&Presentation {
            num_generators: 2,
            relations: vec![vec![2, 0], vec![0, 12]],
        })
        .unwrap();
        assert_eq!(p_torsion_size(&g, 3), 3);
        let g = group_from_presentation(&Presentation {
            num_generators: 2,
            relations: vec![vec![9, 0], vec![0, 3]],
        })
        .unwrap();
        assert_eq!(p_torsion_size(&g, 3), 9);
    }

    fn c3xc3() -> FiniteAbelianGroup {
        group_from_presentation(&Presentation {
            num_generators: 2,
            relations: vec![vec![3, 0], vec![0, 3]],
        })
        .unwrap()
    }

    #[test]
    fn eigenspace_examples() {
        let g = c3xc3();
        assert_eq!(
            involution_eigenspace_ranks(&g, &Involution::negation(&g)),
            Ok((0, 2))
        );
        let c3 = FiniteAbelianGroup::cyclic(3);
        assert_eq!(
            involution_eigenspace_ranks(&c3, &Involution::identity(&c3)),
            Ok((1, 0))
        );
        let swap = Involution::from_presentation_action(&g, &[vec![0, 1], vec![1, 0]]);
        assert_eq!(involution_eigenspace_ranks(&g, &swap), Ok((1, 1)));
        let not_inv = Involution {
            matrix: vec![vec![1, 1], vec![0, 1]],
        };
        assert_eq!(
            involution_eigenspace_ranks(&g, &not_inv),
            Err(Error::NotInvolution)
        );
    }

    #[test]
    fn coordinates_respect_relations() {
        // Z^3 / <(2,4,4), (-6,6,12), (10,-4,-16)> = C2 x C6 x C12
        let p = Presentation {
            num_generators: 3,
            relations: vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]],
        };
        let g = group_from_presentation(&p).unwrap();
        assert_eq!(g.order(), 144);
        assert_eq!(g.invariants, vec![2, 6, 12]);
        for r in &p.relations {
            assert!(g.is_identity(r));
        }
        assert!(!g.is_identity(&[1, 0, 0]));
    }

    #[test]
    fn modular_hnf_tracks_index() {
        let rels = [vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let mut h = ModularHnf::new(3, 144);
        assert_eq!(h.index(), 144u128.pow(3));
        for r in &rels {
            h.insert(r);
        }
        assert_eq!(h.index(), 144);
        let g = group_from_presentation(&Presentation {
            num_generators: 3,
            relations: h.basis(),
        })
        .unwrap();
        assert_eq!(g.invariants, vec![2, 6, 12]);
    }

    proptest! {
        #[test]
        fn accumulator_agrees_with_snf(
            entries in proptest::collection::vec(-9i64..9, 24)
        ) {
            let m: Vec<Vec<i64>> = entries.chunks(4).map(|c| c.to_vec()).collect();
            let mut acc = RelationAccumulator::new(4);
            for r in &m {
                acc.insert(r);
            }
            let direct = group_from_presentation(&Presentation { num_generators: 4, relations: m.clone() });
            match (direct, acc.group()) {
                (Ok(a), Some(b)) => prop_assert_eq!(a.invariants, b.invariants),
                (Err(_), None) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn modular_hnf_agrees_with_snf(
            entries in proptest::collection::vec(-20i64..20, 12)
        ) {
            let m: Vec<Vec<i64>> = entries.chunks(3).map(|c| c.to_vec()).collect();
            if let Some(idx) = lattice_index(&to_big(&m), 3) {
                let idx = idx.to_u64().unwrap();
                let mut h = ModularHnf::new(3, idx);
                for r in &m {
                    h.insert(r);
                }
                prop_assert_eq!(h.index(), idx as u128);
                let a = group_from_presentation(&Presentation { num_generators: 3, relations: m.clone() }).unwrap();
                let b = group_from_presentation(&Presentation { num_generators: 3, relations: h.basis() }).unwrap();
                prop_assert_eq!(a.invariants, b.invariants);
            }
        }

        #[test]
        fn snf_is_idempotent_and_preserves_order(
            entries in proptest::collection::vec(-30i64..30, 9)
        ) {
            let m: Vec<Vec<i64>> = entries.chunks(3).map(|c| c.to_vec()).collect();
            let d = elementary_divisors(&to_big(&m), 3);
            // divisibility chain
            for w in d.windows(2) {
                if !w[0].is_zero() {
                    prop_assert!((&w[1] % &w[0]).is_zero());
                }
            }
            let again: Vec<Vec<BigInt>> = (0..3)
                .map(|i| (0..3).map(|j| if i == j { d[i].clone() } else { BigInt::zero() }).collect())
                .collect();
            prop_assert_eq!(elementary_divisors(&again, 3), d.clone());
            // |det| equals the product of elementary divisors
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let prod: BigInt = d.iter().product();
            prop_assert_eq!(prod, BigInt::from(det.abs()));
            let oracle: Vec<BigInt> = determinantal_oracle(&m).into_iter().map(BigInt::from).collect();
            prop_assert_eq!(d, oracle);
        }

        #[test]
        fn eigenspace_ranks_multiply_to_torsion(
            a in 1u64..4, b in 1u64..4, c in 1u64..4
        ) {
            let g = group_from_presentation(&Presentation {
                num_generators: 3,
                relations: vec![vec![(3u64.pow(a as u32)) as i64, 0, 0],
                                vec![0, (3u64.pow(b as u32) * 2) as i64, 0],
                                vec![0, 0, (3u64.pow(c as u32)) as i64]],
            }).unwrap();
            for s in [Involution::identity(&g), Involution::negation(&g)] {
                let (rp, rm) = involution_eigenspace_ranks(&g, &s).unwrap();
                prop_assert_eq!(3u64.pow(rp) * 3u64.pow(rm), p_torsion_size(&g, 3));
            }
        }
    }
}
