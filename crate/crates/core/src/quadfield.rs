//! Quadratic fields `Q(sqrt d)` for fundamental `d`.
//!
//! Elements are written `x + y*omega` with `omega = (d + sqrt d)/2`, so
//! `omega^2 = d*omega - n0` where `n0 = (d^2 - d)/4 = N(omega)`. Ideals are
//! kept as `content * (aZ + (b + omega)Z)`.
//!
//! Class groups come from a relation lattice on a factor base of prime
//! ideals. Relations are norms of short vectors in ideal lattices, and the
//! lattice is accepted once its index equals the class number counted from
//! reduced binary quadratic forms.

use std::collections::HashMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::abgroup::{
    elementary_divisors, group_from_presentation, to_big, FiniteAbelianGroup, ModularHnf,
    Presentation,
};
use crate::arith::{self, factor_u64, isqrt, kronecker};
use crate::error::{Error, Result};

/// `x + y*omega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Elt {
    pub x: i128,
    pub y: i128,
}

impl Elt {
    pub const fn new(x: i128, y: i128) -> Self {
        Elt { x, y }
    }
}

/// `x + y*omega` with unbounded coefficients (fundamental units).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigElt {
    pub x: BigInt,
    pub y: BigInt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signature {
    Real,
    Imaginary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitGroupDesc {
    pub torsion_order: u32,
    /// A generator of the roots of unity.
    pub torsion_generator: Elt,
    pub fundamental_unit: Option<BigElt>,
    pub fundamental_unit_norm: Option<i8>,
}

/// `content * (aZ + (b + omega)Z)` with `0 <= b < a` and `a | N(b + omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadIdeal {
    pub a: i128,
    pub b: i128,
    pub content: i128,
}

impl QuadIdeal {
    pub fn unit() -> Self {
        QuadIdeal {
            a: 1,
            b: 0,
            content: 1,
        }
    }

    pub fn norm(&self) -> i128 {
        self.content * self.content * self.a
    }

    /// Z-basis as elements.
    pub fn basis(&self) -> [Elt; 2] {
        [
            Elt::new(self.content * self.a, 0),
            Elt::new(self.content * self.b, self.content),
        ]
    }

    pub fn contains(&self, e: Elt) -> bool {
        // e = s*(ca, 0) + t*(cb, c)
        if e.y % self.content != 0 {
            return false;
        }
        let t = e.y / self.content;
        let rest = e.x - t * self.content * self.b;
        rest % (self.content * self.a) == 0
    }
}

#[derive(Debug)]
pub struct QuadraticField {
    pub d: i64,
    /// `N(omega)`.
    pub n0: i64,
    units: OnceLock<UnitGroupDesc>,
    class: OnceLock<ClassData>,
}

impl Clone for QuadraticField {
    fn clone(&self) -> Self {
        QuadraticField {
            d: self.d,
            n0: self.n0,
            units: self.units.clone(),
            class: self.class.clone(),
        }
    }
}

fn round_div(a: i128, b: i128) -> i128 {
    // nearest integer to a/b, b > 0
    (2 * a + b).div_euclid(2 * b)
}

impl QuadraticField {
    pub fn new(d: i64) -> Result<Self> {
        if !arith::is_fundamental_discriminant(d) {
            return Err(Error::NotFundamental(d));
        }
        Ok(QuadraticField {
            d,
            n0: (d * d - d) / 4,
            units: OnceLock::new(),
            class: OnceLock::new(),
        })
    }

    pub fn signature(&self) -> Signature {
        if self.d > 0 {
            Signature::Real
        } else {
            Signature::Imaginary
        }
    }

    pub fn is_real(&self) -> bool {
        self.d > 0
    }

    pub fn norm(&self, e: Elt) -> i128 {
        let d = self.d as i128;
        e.x * e.x + d * e.x * e.y + self.n0 as i128 * e.y * e.y
    }

    pub fn trace(&self, e: Elt) -> i128 {
        2 * e.x + self.d as i128 * e.y
    }

    pub fn mul(&self, a: Elt, b: Elt) -> Elt {
        let d = self.d as i128;
        Elt::new(
            a.x * b.x - self.n0 as i128 * a.y * b.y,
            a.x * b.y + a.y * b.x + d * a.y * b.y,
        )
    }

    pub fn conj(&self, e: Elt) -> Elt {
        Elt::new(e.x + e.y * self.d as i128, -e.y)
    }

    /// `4 * (u^2 + |d| y^2 / 4)` where `e = u + y sqrt(d)/2`: four times the
    /// norm for imaginary fields, and a positive definite majorant of `4|N|`
    /// for real ones.
    pub fn t2x4(&self, e: Elt) -> i128 {
        let u = 2 * e.x + e.y * self.d as i128;
        u * u + (self.d.abs() as i128) * e.y * e.y
    }

    fn bilinear(&self, a: Elt, b: Elt) -> i128 {
        let d = self.d as i128;
        (2 * a.x + a.y * d) * (2 * b.x + b.y * d) + d.abs() * a.y * b.y
    }

    pub fn splitting(&self, p: u64) -> Splitting {
        match kronecker(self.d, p as i64) {
            1 => Splitting::Split,
            -1 => Splitting::Inert,
            _ => Splitting::Ramified,
        }
    }

    /// Roots of `t^2 - d t + n0` mod `p`, i.e. the images of `omega` in the
    /// residue fields above `p`.
    fn omega_roots(&self, p: u64) -> Vec<u64> {
        let d = self.d.rem_euclid(p as i64) as u64;
        let n0 = self.n0.rem_euclid(p as i64) as u64;
        (0..p)
            .filter(|&t| (t * t % p + p * p - d * t % p + n0).is_multiple_of(p))
            .collect()
    }

    /// Prime ideals above `p`: two conjugates when split, one otherwise.
    pub fn prime_ideal_above(&self, p: u64) -> Vec<QuadIdeal> {
        let p128 = p as i128;
        match self.splitting(p) {
            Splitting::Inert => vec![QuadIdeal {
                a: 1,
                b: 0,
                content: p128,
            }],
            _ => self
                .omega_roots(p)
                .into_iter()
                .map(|r| QuadIdeal {
                    a: p128,
                    b: (-(r as i128)).rem_euclid(p128),
                    content: 1,
                })
                .collect(),
        }
    }

    /// Ideal generated (as a Z-module) by the given elements, which must span
    /// an ideal.
    pub fn ideal_from_generators(&self, gens: &[Elt]) -> QuadIdeal {
        let (n11, n21, n22) = hnf2(gens);
        assert!(n22 > 0 && n11 > 0, "generators do not span a full lattice");
        QuadIdeal {
            a: n11 / n22,
            b: (n21 / n22).rem_euclid(n11 / n22),
            content: n22,
        }
    }

    pub fn principal_ideal(&self, e: Elt) -> QuadIdeal {
        let omega = Elt::new(0, 1);
        self.ideal_from_generators(&[e, self.mul(e, omega)])
    }

    pub fn multiply(&self, i: &QuadIdeal, j: &QuadIdeal) -> QuadIdeal {
        let bi = i.basis();
        let bj = j.basis();
        let gens = [
            self.mul(bi[0], bj[0]),
            self.mul(bi[0], bj[1]),
            self.mul(bi[1], bj[0]),
            self.mul(bi[1], bj[1]),
        ];
        self.ideal_from_generators(&gens)
    }

    pub fn conjugate(&self, i: &QuadIdeal) -> QuadIdeal {
        let b = i.basis();
        self.ideal_from_generators(&[self.conj(b[0]), self.conj(b[1])])
    }

    /// Integral ideal of small norm in the same class: `conj(alpha) * I / N(I)`
    /// for the shortest `alpha` in `I`.
    pub fn reduce(&self, i: &QuadIdeal) -> QuadIdeal {
        let [v1, _] = self.reduced_basis(i);
        let n = i.norm();
        let ca = self.conj(v1);
        let b = i.basis();
        let p0 = self.mul(ca, b[0]);
        let p1 = self.mul(ca, b[1]);
        let div = |e: Elt| Elt::new(e.x / n, e.y / n);
        debug_assert!(p0.x % n == 0 && p0.y % n == 0 && p1.x % n == 0 && p1.y % n == 0);
        self.ideal_from_generators(&[div(p0), div(p1)])
    }

    /// Lagrange-reduced basis of the ideal lattice for the `t2x4` form.
    pub fn reduced_basis(&self, i: &QuadIdeal) -> [Elt; 2] {
        let [mut v1, mut v2] = i.basis();
        loop {
            if self.t2x4(v1) > self.t2x4(v2) {
                std::mem::swap(&mut v1, &mut v2);
            }
            let mu = round_div(self.bilinear(v1, v2), self.t2x4(v1));
            if mu == 0 {
                break;
            }
            v2 = Elt::new(v2.x - mu * v1.x, v2.y - mu * v1.y);
        }
        [v1, v2]
    }

    /// Nonzero elements of `I` with `t2x4 <= bound`, one from each `±` pair.
    pub fn short_elements(&self, i: &QuadIdeal, bound: i128) -> Vec<Elt> {
        let [v1, v2] = self.reduced_basis(i);
        let a = self.t2x4(v1) as f64;
        let b = self.bilinear(v1, v2) as f64;
        let c = self.t2x4(v2) as f64;
        let t = bound as f64;
        let det = a * c - b * b;
        let ymax = (t * a / det).sqrt().floor() as i128 + 1;
        let mut out = Vec::new();
        for s in 0..=ymax {
            let centre = -b * s as f64 / a;
            let rad = ((t - det / a * (s * s) as f64).max(0.0) / a).sqrt();
            let lo = (centre - rad).floor() as i128 - 1;
            let hi = (centre + rad).ceil() as i128 + 1;
            for r in lo..=hi {
                if s == 0 && r <= 0 {
                    continue;
                }
                let e = Elt::new(r * v1.x + s * v2.x, r * v1.y + s * v2.y);
                if self.t2x4(e) <= bound {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn unit_group(&self) -> &UnitGroupDesc {
        self.units.get_or_init(|| {
            let (torsion_order, torsion_generator) = match self.d {
                -3 => (6, Elt::new(2, 1)),
                -4 => (4, Elt::new(2, 1)),
                _ => (2, Elt::new(-1, 0)),
            };
            let (fundamental_unit, fundamental_unit_norm) = if self.d > 0 {
                let (e, n) = fundamental_unit(self.d).expect("real field");
                (Some(e), Some(n))
            } else {
                (None, None)
            };
            UnitGroupDesc {
                torsion_order,
                torsion_generator,
                fundamental_unit,
                fundamental_unit_norm,
            }
        })
    }

    /// The class number, counted from reduced binary quadratic forms.
    pub fn class_number(&self) -> u64 {
        if self.d < 0 {
            reduced_form_count(self.d)
        } else {
            let narrow = narrow_class_number(self.d);
            match self.unit_group().fundamental_unit_norm {
                Some(1) => narrow / 2,
                _ => narrow,
            }
        }
    }

    /// Generators of `I` when it is principal. Imaginary fields search
    /// exhaustively; real fields search elements with `t2x4` up to `bound`
    /// and report [`Error::SearchBoundExceeded`] if that window is too small
    /// to be conclusive.
    pub fn principal_generator(&self, i: &QuadIdeal, bound: i128) -> Result<Option<Elt>> {
        let n = i.norm();
        let (window, conclusive) = if self.d < 0 {
            (4 * n, true)
        } else {
            // Some generator has both embeddings of size at most sqrt(N eps).
            let eps = self
                .unit_group()
                .fundamental_unit
                .as_ref()
                .map(|e| big_elt_to_f64(self.d, e))
                .unwrap();
            let need = 8.0 * n as f64 * eps + 8.0;
            if need <= bound as f64 {
                (need.ceil() as i128, true)
            } else {
                (bound, false)
            }
        };
        let found = self
            .short_elements(i, window)
            .into_iter()
            .find(|&e| self.norm(e).abs() == n);
        match found {
            Some(e) => Ok(Some(e)),
            None if conclusive => Ok(None),
            None => Err(Error::SearchBoundExceeded {
                bound: bound as u64,
            }),
        }
    }

    pub fn class_group(&self) -> Result<(FiniteAbelianGroup, Vec<QuadIdeal>)> {
        let data = self.class_data()?;
        Ok((
            data.group.clone(),
            data.fb.ideals.iter().map(|f| f.ideal).collect(),
        ))
    }

    pub fn class_data(&self) -> Result<&ClassData> {
        if let Some(c) = self.class.get() {
            return Ok(c);
        }
        let data = ClassData::compute(self, self.minkowski_bound().max(CLASS_FB_MIN))?;
        Ok(self.class.get_or_init(|| data))
    }

    /// Norm bound below which prime ideals generate the class group.
    pub fn minkowski_bound(&self) -> u64 {
        let ad = self.d.unsigned_abs();
        if self.d < 0 {
            isqrt(ad / 3) + 1
        } else {
            isqrt(ad) / 2 + 1
        }
    }
}

/// Approximate real value of `x + y omega` under the embedding with
/// `sqrt d > 0`.
pub fn big_elt_to_f64(d: i64, e: &BigElt) -> f64 {
    let omega = (d as f64 + (d as f64).sqrt()) / 2.0;
    e.x.to_f64().unwrap() + e.y.to_f64().unwrap() * omega
}

/// Hermite normal form of a set of vectors in Z^2: the lattice is
/// `Z(n11, 0) + Z(n21, n22)` with `n22 >= 0`, `0 <= n21 < n11`.
fn hnf2(gens: &[Elt]) -> (i128, i128, i128) {
    let mut rows: Vec<(i128, i128)> = gens.iter().map(|e| (e.x, e.y)).collect();
    // clear the y column down to one row
    let mut top: Option<(i128, i128)> = None;
    let mut xs: Vec<i128> = Vec::new();
    for r in rows.drain(..) {
        let mut r = r;
        if let Some(mut t) = top {
            while r.1 != 0 {
                let q = t.1.div_euclid(r.1);
                t = (t.0 - q * r.0, t.1 - q * r.1);
                std::mem::swap(&mut t, &mut r);
            }
            xs.push(r.0);
            top = Some(t);
        } else if r.1 == 0 {
            xs.push(r.0);
        } else {
            top = Some(r);
        }
    }
    let n11 = xs.iter().fold(0i128, |g, &x| g.gcd(&x));
    let (mut n21, mut n22) = top.unwrap_or((0, 0));
    if n22 < 0 {
        n21 = -n21;
        n22 = -n22;
    }
    if n11 != 0 {
        n21 = n21.rem_euclid(n11);
    }
    (n11, n21, n22)
}

/// Fundamental unit `eps > 1` of the real quadratic order of discriminant
/// `d`, and its norm, from the continued fraction of `(delta + sqrt d)/2`.
pub fn fundamental_unit(d: i64) -> Result<(BigElt, i8)> {
    if d <= 0 || !arith::is_fundamental_discriminant(d) {
        return Err(Error::NotFundamental(d));
    }
    let delta = d.rem_euclid(2);
    let s = isqrt(d as u64) as i64;
    // x_k = (P + sqrt d)/Q
    let (mut p, mut q) = (delta, 2i64);
    let (mut h0, mut h1) = (BigInt::one(), BigInt::zero()); // p_{k-1}, p_{k-2}
    let (mut k0, mut k1) = (BigInt::zero(), BigInt::one()); // q_{k-1}, q_{k-2}
    let mut k = 0u64;
    loop {
        let a = (p + s).div_euclid(q);
        let hn = &h0 * a + &h1;
        let kn = &k0 * a + &k1;
        h1 = std::mem::replace(&mut h0, hn);
        k1 = std::mem::replace(&mut k0, kn);
        p = a * q - p;
        q = (d - p * p) / q;
        if q == 2 {
            break;
        }
        k += 1;
    }
    // eps = p_k - q_k * conj(omega0) = (p_k - q_k delta) + q_k omega0, and
    // omega0 = omega - (d - delta)/2.
    let shift = BigInt::from((d - delta) / 2);
    let y = k0.clone();
    let x = &h0 - &k0 * delta - &k0 * shift;
    let norm = if k.is_multiple_of(2) { -1 } else { 1 };
    Ok((BigElt { x, y }, norm))
}

fn reduced_form_count(d: i64) -> u64 {
    let ad = d.unsigned_abs() as i64;
    let mut h = 0;
    let mut a = 1i64;
    while 3 * a * a <= ad {
        for b in -a + 1..=a {
            if (b - d).rem_euclid(2) != 0 {
                continue;
            }
            let num = b * b - d;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a || (c == a && b < 0) {
                continue;
            }
            h += 1;
        }
        a += 1;
    }
    h
}

/// Number of cycles of reduced indefinite forms of discriminant `d`.
fn narrow_class_number(d: i64) -> u64 {
    let s = isqrt(d as u64) as i64;
    let is_reduced = |a: i64, b: i64| {
        let a2 = 2 * a.abs();
        b > 0 && b <= s && (a2 + b) * (a2 + b) > d && (a2 - b < 0 || (a2 - b) * (a2 - b) < d)
    };
    let mut forms = Vec::new();
    for b in 1..=s {
        if (b - d).rem_euclid(2) != 0 {
            continue;
        }
        let m = (d - b * b) / 4; // = -a c
        for (q, _) in divisors(m as u64).into_iter().map(|x| (x as i64, ())) {
            for a in [q, -q] {
                if is_reduced(a, b) {
                    forms.push((a, b, -m / a));
                }
            }
        }
    }
    let index: HashMap<(i64, i64), usize> = forms
        .iter()
        .enumerate()
        .map(|(i, &(a, b, _))| ((a, b), i))
        .collect();
    let rho = |(_, b, c): (i64, i64, i64)| {
        let m = 2 * c.abs();
        let k = (s + b).div_euclid(m);
        let b2 = -b + m * k;
        (c, b2, (b2 * b2 - d) / (4 * c))
    };
    let mut seen = vec![false; forms.len()];
    let mut cycles = 0;
    for i in 0..forms.len() {
        if seen[i] {
            continue;
        }
        cycles += 1;
        let mut f = forms[i];
        loop {
            let j = index[&(f.0, f.1)];
            if seen[j] {
                break;
            }
            seen[j] = true;
            f = rho(f);
        }
    }
    cycles
}

fn divisors(n: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for (p, e) in factor_u64(n) {
        let mut next = Vec::new();
        for &x in &out {
            let mut pk = 1;
            for _ in 0..=e {
                next.push(x * pk);
                pk *= p;
            }
        }
        out = next;
    }
    out.sort_unstable();
    out
}

/// A prime ideal in a factor base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FbIdeal {
    pub p: u64,
    pub kind: Splitting,
    /// `omega mod P` (unused for inert primes).
    pub root: u64,
    pub ideal: QuadIdeal,
    /// Index of the conjugate ideal in the same factor base.
    pub conj: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorBase {
    pub ideals: Vec<FbIdeal>,
    primes: Vec<u64>,
    by_prime: HashMap<u64, Vec<usize>>,
}

impl FactorBase {
    /// Prime ideals of norm at most `bound`, skipping primes dividing
    /// `exclude`. Inert primes are included only on request.
    pub fn new(k: &QuadraticField, bound: u64, exclude: u64, include_inert: bool) -> Self {
        let mut ideals = Vec::new();
        let mut by_prime: HashMap<u64, Vec<usize>> = HashMap::new();
        let mut primes = Vec::new();
        for &p in arith::small_primes() {
            if p > bound {
                break;
            }
            if exclude.is_multiple_of(p) {
                continue;
            }
            let kind = k.splitting(p);
            let start = ideals.len();
            match kind {
                Splitting::Inert => {
                    if !include_inert || p * p > bound {
                        continue;
                    }
                    ideals.push(FbIdeal {
                        p,
                        kind,
                        root: 0,
                        ideal: k.prime_ideal_above(p)[0],
                        conj: start,
                    });
                }
                Splitting::Ramified => {
                    let r = k.omega_roots(p)[0];
                    ideals.push(FbIdeal {
                        p,
                        kind,
                        root: r,
                        ideal: k.prime_ideal_above(p)[0],
                        conj: start,
                    });
                }
                Splitting::Split => {
                    let roots = k.omega_roots(p);
                    let pi = k.prime_ideal_above(p);
                    for (t, (&r, &id)) in roots.iter().zip(&pi).enumerate() {
                        ideals.push(FbIdeal {
                            p,
                            kind,
                            root: r,
                            ideal: id,
                            conj: start + 1 - t,
                        });
                    }
                }
            }
            primes.push(p);
            by_prime.insert(p, (start..ideals.len()).collect());
        }
        FactorBase {
            ideals,
            primes,
            by_prime,
        }
    }

    pub fn len(&self) -> usize {
        self.ideals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ideals.is_empty()
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn ideals_above(&self, p: u64) -> &[usize] {
        self.by_prime.get(&p).map_or(&[], Vec::as_slice)
    }

    /// Exponents of `(e)` on the factor base, or `None` if `(e)` does not
    /// factor over it.
    pub fn factor(&self, k: &QuadraticField, e: Elt) -> Option<Vec<(usize, i64)>> {
        let n = k.norm(e).unsigned_abs();
        if n == 0 {
            return None;
        }
        let mut rest = n;
        let mut out = Vec::new();
        for &p in &self.primes {
            let p128 = p as u128;
            if !rest.is_multiple_of(p128) {
                continue;
            }
            let mut v = 0i64;
            while rest.is_multiple_of(p128) {
                rest /= p128;
                v += 1;
            }
            let idx = self.ideals_above(p);
            match self.ideals[idx[0]].kind {
                Splitting::Ramified => out.push((idx[0], v)),
                Splitting::Inert => out.push((idx[0], v / 2)),
                Splitting::Split => {
                    let pi = p as i128;
                    let (mut x, mut y) = (e.x, e.y);
                    let mut t = 0;
                    while x % pi == 0 && y % pi == 0 {
                        x /= pi;
                        y /= pi;
                        t += 1;
                    }
                    let extra = v - 2 * t;
                    let first = &self.ideals[idx[0]];
                    let in_first = (x + y * first.root as i128).rem_euclid(pi) == 0;
                    let (va, vb) = if extra == 0 {
                        (t, t)
                    } else if in_first {
                        (t + extra, t)
                    } else {
                        (t, t + extra)
                    };
                    if va != 0 {
                        out.push((idx[0], va));
                    }
                    if vb != 0 {
                        out.push((idx[1], vb));
                    }
                }
            }
        }
        (rest == 1).then_some(out)
    }

    /// The ideal `P` as a product description (one-hot vector).
    pub fn unit_vector(&self, i: usize) -> Vec<i64> {
        let mut v = vec![0; self.len()];
        v[i] = 1;
        v
    }
}

/// Collect relations among factor-base ideals coming from short elements of
/// factor-base ideals and of products of pairs. `extra` receives each
/// element together with its exponent vector.
pub(crate) fn search_relations(
    k: &QuadraticField,
    fb: &FactorBase,
    round: u32,
    mut accept: impl FnMut(Elt, Vec<i64>),
) {
    let n = fb.len();
    let root_d = (k.d.unsigned_abs() as f64).sqrt();
    let lambda = 6.0 * (round as f64 + 1.0);
    let mut targets: Vec<QuadIdeal> = fb.ideals.iter().map(|f| f.ideal).collect();
    if round > 0 && n > 1 {
        for i in 0..n {
            let j = (i + round as usize) % n;
            targets.push(k.multiply(&fb.ideals[i].ideal, &fb.ideals[j].ideal));
        }
    }
    if round > 1 {
        targets.push(QuadIdeal::unit());
    }
    for id in targets {
        let bound = (id.norm() as f64 * root_d * 4.0 * lambda).ceil() as i128;
        for e in k.short_elements(&id, bound) {
            if arith::gcd(e.x as i64, e.y as i64) != 1 {
                continue;
            }
            if let Some(f) = fb.factor(k, e) {
                let mut row = vec![0i64; n];
                for (i, v) in f {
                    row[i] += v;
                }
                accept(e, row);
            }
        }
    }
}

/// Class group data: the factor base, a complete relation lattice on it and
/// the resulting group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassData {
    pub bound: u64,
    pub h: u64,
    pub fb: FactorBase,
    pub relations: Vec<Vec<i64>>,
    pub group: FiniteAbelianGroup,
}

const MAX_ROUNDS: u32 = 40;

/// Smallest factor-base bound used for class groups; tiny bases starve the
/// smoothness search.
pub const CLASS_FB_MIN: u64 = 30;

impl ClassData {
    pub fn compute(k: &QuadraticField, bound: u64) -> Result<Self> {
        let h = k.class_number();
        let fb = FactorBase::new(k, bound.max(2), 1, false);
        let n = fb.len();
        let mut lattice = ModularHnf::new(n, h);
        // (p) = P conj(P)
        for p in fb.primes() {
            let idx = fb.ideals_above(*p);
            let mut row = vec![0i64; n];
            for &i in idx {
                row[i] += if idx.len() == 1 { 2 } else { 1 };
            }
            lattice.insert(&row);
        }
        let mut round = 0;
        while lattice.index() > h as u128 {
            if round == MAX_ROUNDS {
                return Err(Error::Internal(format!(
                    "class relation search for d = {} did not close",
                    k.d
                )));
            }
            search_relations(k, &fb, round, |_, row| lattice.insert(&row));
            round += 1;
        }
        let relations = lattice.basis();
        let group = group_from_presentation(&Presentation {
            num_generators: n,
            relations: relations.clone(),
        })?;
        if group.order() != h {
            return Err(Error::Internal(format!(
                "class group order {} differs from h = {h} for d = {}",
                group.order(),
                k.d
            )));
        }
        Ok(ClassData {
            bound,
            h,
            fb,
            relations,
            group,
        })
    }

    /// True when the factor-base ideals coprime to `c` generate the class
    /// group.
    pub fn coprime_part_generates(&self, c: u64) -> bool {
        if self.h == 1 {
            return true;
        }
        let n = self.fb.len();
        let mut rel = self.relations.clone();
        for (i, f) in self.fb.ideals.iter().enumerate() {
            if !c.is_multiple_of(f.p) {
                rel.push(self.fb.unit_vector(i));
            }
        }
        let d = elementary_divisors(&to_big(&rel), n);
        d.len() == n && d.iter().all(|x| x.is_one())
    }
}

/// `(O/cO)^x` with a discrete-logarithm table.
///
/// The group is presented on `gens` with the lower-triangular `relations`;
/// `dlog` returns coordinates in that presentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidueUnitGroup {
    pub c: u64,
    pub d: i64,
    pub gens: Vec<Elt>,
    pub relations: Vec<Vec<i64>>,
    pub group: FiniteAbelianGroup,
    order: u64,
    // flat table: c*c entries of gens.len() coordinates
    table: Vec<i32>,
    unit: Vec<bool>,
}

impl ResidueUnitGroup {
    fn index(&self, e: Elt) -> usize {
        let c = self.c as i128;
        (e.x.rem_euclid(c) * c + e.y.rem_euclid(c)) as usize
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn is_unit(&self, e: Elt) -> bool {
        self.unit[self.index(e)]
    }

    pub fn dlog(&self, e: Elt) -> Option<Vec<i64>> {
        let i = self.index(e);
        if !self.unit[i] {
            return None;
        }
        let k = self.gens.len();
        Some(
            self.table[i * k..(i + 1) * k]
                .iter()
                .map(|&x| x as i64)
                .collect(),
        )
    }

    pub fn dlog_big(&self, e: &BigElt) -> Option<Vec<i64>> {
        let c = BigInt::from(self.c);
        let x = e.x.mod_floor(&c).to_i64().unwrap() as i128;
        let y = e.y.mod_floor(&c).to_i64().unwrap() as i128;
        self.dlog(Elt::new(x, y))
    }
}

/// Structure of `(O_K/cO_K)^x` by enumeration of all `c^2` residues.
pub fn residue_units(k: &QuadraticField, c: u64) -> ResidueUnitGroup {
    assert!(c >= 1);
    let cc = c as i128;
    let size = (c * c) as usize;
    let elt = |i: usize| Elt::new(i as i128 / cc, i as i128 % cc);
    let idx = |e: Elt| (e.x.rem_euclid(cc) * cc + e.y.rem_euclid(cc)) as usize;
    let mul = |a: usize, b: usize| idx(k.mul(elt(a), elt(b)));
    let unit: Vec<bool> = (0..size)
        .map(|i| c == 1 || arith::gcd((k.norm(elt(i)) % cc) as i64, c as i64) == 1)
        .collect();
    let order = unit.iter().filter(|&&u| u).count() as u64;
    let one = idx(Elt::new(1, 0));
    // coordinates of members of the subgroup built so far
    let mut coords: Vec<Option<Vec<i64>>> = vec![None; size];
    coords[one] = Some(Vec::new());
    let mut members = vec![one];
    let mut gens = Vec::new();
    let mut relations: Vec<Vec<i64>> = Vec::new();
    while (members.len() as u64) < order {
        let g = (0..size).find(|&i| unit[i] && coords[i].is_none()).unwrap();
        let kk = gens.len();
        // smallest m with g^m in the subgroup
        let mut m = 1i64;
        let mut pw = g;
        while coords[pw].is_none() {
            pw = mul(pw, g);
            m += 1;
        }
        let mut rel: Vec<i64> = coords[pw].as_ref().unwrap().iter().map(|&x| -x).collect();
        rel.resize(kk, 0);
        rel.push(m);
        for r in relations.iter_mut() {
            r.push(0);
        }
        relations.push(rel);
        for i in &members {
            coords[*i].as_mut().unwrap().push(0);
        }
        let old = members.clone();
        let mut pw = one;
        for j in 1..m {
            pw = mul(pw, g);
            for &h in &old {
                let e = mul(pw, h);
                let mut v = coords[h].clone().unwrap();
                v[kk] = j;
                debug_assert!(coords[e].is_none());
                coords[e] = Some(v);
                members.push(e);
            }
        }
        gens.push(elt(g));
    }
    let k_gens = gens.len();
    let mut table = vec![0i32; size * k_gens];
    for (i, v) in coords.iter().enumerate() {
        if let Some(v) = v {
            for (j, &x) in v.iter().enumerate() {
                table[i * k_gens + j] = x as i32;
            }
        }
    }
    let group = group_from_presentation(&Presentation {
        num_generators: k_gens,
        relations: relations.clone(),
    })
    .expect("finite residue ring");
    debug_assert_eq!(group.order(), order);
    ResidueUnitGroup {
        c,
        d: k.d,
        gens,
        relations,
        group,
        order,
        table,
        unit,
    }
}

/// `#(O_K/cO_K)^x` from the splitting of the primes dividing `c`.
pub fn residue_unit_count(k: &QuadraticField, c: u64) -> u64 {
    let mut n = c * c;
    for (p, _) in factor_u64(c) {
        n = match k.splitting(p) {
            Splitting::Split => n / (p * p) * (p - 1) * (p - 1),
            Splitting::Inert => n / (p * p) * (p * p - 1),
            Splitting::Ramified => n / p * (p - 1),
        };
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(d: i64) -> QuadraticField {
        QuadraticField::new(d).unwrap()
    }

    // Dirichlet: h(d) = -(w / 2|d|) * sum_{a=1}^{|d|} chi(a) a for d < 0.
    fn analytic_h_imag(d: i64) -> u64 {
        let n = d.abs();
        let s: i64 = (1..n).map(|a| kronecker(d, a) as i64 * a).sum();
        let w = match d {
            -3 => 6,
            -4 => 4,
            _ => 2,
        };
        (-s * w / (2 * n)) as u64
    }

    // h(d) log(eps) = -sum_{0<a<d/2} chi(a) log sin(pi a / d) for d > 0.
    fn analytic_h_real(d: i64) -> f64 {
        let s: f64 = (1..(d + 1) / 2)
            .map(|a| {
                kronecker(d, a) as f64 * (std::f64::consts::PI * a as f64 / d as f64).sin().ln()
            })
            .sum();
        let (eps, _) = fundamental_unit(d).unwrap();
        -s / big_elt_to_f64(d, &eps).ln()
    }

    #[test]
    fn class_group_examples() {
        assert_eq!(field(-23).class_group().unwrap().0.invariants, vec![3]);
        assert_eq!(field(-4).class_group().unwrap().0.order(), 1);
        assert_eq!(field(229).class_group().unwrap().0.invariants, vec![3]);
        assert_eq!(field(-84).class_group().unwrap().0.invariants, vec![2, 2]);
        assert_eq!(field(-3299).class_group().unwrap().0.invariants, vec![3, 9]);
        assert_eq!(field(-4027).class_group().unwrap().0.invariants, vec![3, 3]);
    }

    #[test]
    fn imaginary_class_numbers_match_dirichlet() {
        for d in arith::fundamental_discriminants(10_000, true) {
            let k = field(d);
            assert_eq!(k.class_number(), analytic_h_imag(d), "d = {d}");
            if d.abs() < 3000 {
                assert_eq!(k.class_group().unwrap().0.order(), analytic_h_imag(d));
            }
        }
    }

    #[test]
    fn real_class_numbers_match_analytic_formula() {
        for d in arith::fundamental_discriminants(5000, false) {
            let h = field(d).class_number() as f64;
            let a = analytic_h_real(d);
            assert!((h - a).abs() < 1e-6 * h.max(1.0), "d = {d}: {h} vs {a}");
        }
    }

    #[test]
    fn fundamental_unit_examples() {
        let (e, n) = fundamental_unit(5).unwrap();
        // (1 + sqrt5)/2 = omega - 2 for omega = (5 + sqrt5)/2
        assert_eq!((e.x, e.y, n), (BigInt::from(-2), BigInt::one(), -1));
        let (e, n) = fundamental_unit(8).unwrap();
        // 1 + sqrt2 = omega - 3 for omega = 4 + sqrt2
        assert_eq!((e.x, e.y, n), (BigInt::from(-3), BigInt::one(), -1));
        let (e, n) = fundamental_unit(12).unwrap();
        // 2 + sqrt3 = omega - 4 for omega = 6 + sqrt3
        assert_eq!((e.x, e.y, n), (BigInt::from(-4), BigInt::one(), 1));
    }

    // Oracle: smallest solution of u^2 - d v^2 = ±4 with v > 0, which gives
    // eps = (u + v sqrt d)/2.
    #[test]
    fn fundamental_unit_is_minimal() {
        for d in arith::fundamental_discriminants(400, false) {
            let (e, n) = fundamental_unit(d).unwrap();
            // convert to (u, v): x + y omega = (2x + yd + y sqrt d)/2
            let v = e.y.to_i64().unwrap();
            let u = 2 * e.x.to_i64().unwrap() + v * d;
            assert_eq!(u * u - d * v * v, 4 * n as i64, "d = {d}");
            assert!(u > 0 && v > 0);
            let mut best = None;
            'outer: for vv in 1..=v {
                for sign in [-4i64, 4] {
                    let t = d * vv * vv + sign;
                    if let Some(uu) = arith::perfect_square_root(t) {
                        if uu > 0 {
                            best = Some((uu as i64, vv));
                            break 'outer;
                        }
                    }
                }
            }
            assert_eq!(best, Some((u, v)), "d = {d}");
        }
    }

    #[test]
    fn prime_ideal_examples() {
        let k = field(-4);
        let p5 = k.prime_ideal_above(5);
        assert_eq!(p5.len(), 2);
        assert!(p5.iter().all(|i| i.norm() == 5));
        assert_eq!(k.conjugate(&p5[0]), p5[1]);
        let p7 = k.prime_ideal_above(7);
        assert_eq!(p7.len(), 1);
        assert_eq!(p7[0].norm(), 49);
    }

    #[test]
    fn principal_generator_examples() {
        let k = field(-23);
        let p2 = k.prime_ideal_above(2)[0];
        let cube = k.multiply(&k.multiply(&p2, &p2), &p2);
        let g = k.principal_generator(&cube, 0).unwrap().unwrap();
        assert_eq!(k.norm(g), 8);
        assert_eq!(k.principal_ideal(g), cube);
        assert_eq!(k.principal_generator(&p2, 0).unwrap(), None);
        let three = QuadIdeal {
            a: 1,
            b: 0,
            content: 3,
        };
        let g = k.principal_generator(&three, 0).unwrap().unwrap();
        assert_eq!(k.principal_ideal(g), three);
        assert_eq!(k.norm(g), 9);
    }

    #[test]
    fn principal_generator_real() {
        let k = field(229);
        let p3 = k.prime_ideal_above(3)[0];
        assert_eq!(k.principal_generator(&p3, 1 << 40).unwrap(), None);
        let cube = k.multiply(&k.multiply(&p3, &p3), &p3);
        let g = k.principal_generator(&cube, 1 << 40).unwrap().unwrap();
        assert_eq!(k.norm(g).abs(), 27);
        assert!(matches!(
            k.principal_generator(&p3, 10),
            Err(Error::SearchBoundExceeded { bound: 10 })
        ));
    }

    #[test]
    fn residue_unit_examples() {
        let r = residue_units(&field(-4), 3);
        assert_eq!(r.group.invariants, vec![8]);
        let r = residue_units(&field(-3), 2);
        assert_eq!(r.group.invariants, vec![3]);
        let r = residue_units(&field(-4), 5);
        assert_eq!(r.group.invariants, vec![4, 4]);
        assert_eq!(residue_units(&field(5), 1).order(), 1);
    }

    #[test]
    fn residue_unit_orders_match_local_factors() {
        for d in [-3, -4, -7, -8, -15, -23, 5, 8, 12, 13, 21, 229] {
            let k = field(d);
            for c in 1..=30 {
                assert_eq!(
                    residue_units(&k, c).order(),
                    residue_unit_count(&k, c),
                    "{d} {c}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn dlog_is_a_homomorphism(
            di in 0usize..8, c in 2u64..40,
            x1 in -500i128..500, y1 in -500i128..500,
            x2 in -500i128..500, y2 in -500i128..500,
        ) {
            let d = [-3, -4, -23, -84, 5, 12, 229, 40][di];
            let k = field(d);
            let r = residue_units(&k, c);
            let (a, b) = (Elt::new(x1, y1), Elt::new(x2, y2));
            if let (Some(la), Some(lb)) = (r.dlog(a), r.dlog(b)) {
                let lab = r.dlog(k.mul(a, b)).unwrap();
                let sum: Vec<i64> = la.iter().zip(&lb).map(|(p, q)| p + q).collect();
                prop_assert_eq!(r.group.coords(&sum), r.group.coords(&lab));
            }
        }

        #[test]
        fn ideal_products_respect_norms(
            di in 0usize..6, p in 0usize..12, q in 0usize..12, s in 0usize..2, t in 0usize..2
        ) {
            let d = [-3, -4, -23, -3299, 229, 1005][di];
            let k = field(d);
            let ps = arith::small_primes();
            let i = k.prime_ideal_above(ps[p]);
            let j = k.prime_ideal_above(ps[q]);
            let (i, j) = (i[s % i.len()], j[t % j.len()]);
            let ij = k.multiply(&i, &j);
            prop_assert_eq!(ij.norm(), i.norm() * j.norm());
            prop_assert_eq!(k.multiply(&j, &i), ij);
            prop_assert_eq!(k.conjugate(&k.conjugate(&ij)), ij);
            // I * conj(I) = (N(I))
            let n = k.multiply(&i, &k.conjugate(&i));
            prop_assert_eq!(n, QuadIdeal { a: 1, b: 0, content: i.norm() });
            let r = k.reduce(&ij);
            prop_assert!(r.norm() > 0);
        }

        #[test]
        fn factorization_recovers_principal_ideals(
            di in 0usize..6, x in -60i128..60, y in -60i128..60
        ) {
            let d = [-3, -4, -23, -3299, 229, 1005][di];
            let k = field(d);
            let e = Elt::new(x, y);
            prop_assume!(k.norm(e) != 0);
            let fb = FactorBase::new(&k, 1000, 1, true);
            if let Some(f) = fb.factor(&k, e) {
                let mut prod = QuadIdeal::unit();
                for (i, v) in f {
                    for _ in 0..v {
                        prod = k.multiply(&prod, &fb.ideals[i].ideal);
                    }
                }
                prop_assert_eq!(prod, k.principal_ideal(e));
            }
        }
    }
}
