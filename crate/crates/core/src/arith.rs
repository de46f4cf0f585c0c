//! Exact integer number theory shared by the rest of the crate.
//!
//! Everything here works on machine integers. Factorization is trial division
//! against a sieve of the primes below 10^6, which covers every input up to
//! 10^12.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIEVE_LIMIT: usize = 1_000_000;

/// Primes below `limit`, by the sieve of Eratosthenes.
pub fn primes_below(limit: usize) -> Vec<u64> {
    if limit < 3 {
        return Vec::new();
    }
    let mut composite = vec![false; limit];
    let mut primes = Vec::new();
    for n in 2..limit {
        if !composite[n] {
            primes.push(n as u64);
            let mut m = n * n;
            while m < limit {
                composite[m] = true;
                m += n;
            }
        }
    }
    primes
}

/// The shared prime table (all primes below 10^6).
pub fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_below(SIEVE_LIMIT))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub value: i64,
    /// `(prime, exponent)` pairs, primes strictly increasing.
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn exponent(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Product of `p^e`, i.e. `|value|`.
    pub fn recompose(&self) -> u64 {
        self.factors.iter().map(|&(p, e)| p.pow(e)).product()
    }
}

pub fn factorize(n: i64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::ZeroInput);
    }
    Ok(Factorization {
        value: n,
        factors: factor_u64(n.unsigned_abs()),
    })
}

/// Factor a positive integer below 10^12 (larger inputs fall back to a
/// slower odd trial division past the sieve).
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    for &p in small_primes() {
        if p * p > n {
            break;
        }
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
    }
    if n > 1 {
        let last = *small_primes().last().unwrap();
        if n > last * last {
            let mut q = last + 2;
            while q * q <= n {
                if n.is_multiple_of(q) {
                    let mut e = 0;
                    while n.is_multiple_of(q) {
                        n /= q;
                        e += 1;
                    }
                    out.push((q, e));
                }
                q += 2;
            }
        }
        if n > 1 {
            out.push((n, 1));
        }
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factor_u64(n) == [(n, 1)]
}

pub fn is_squarefree(n: u64) -> bool {
    n != 0 && factor_u64(n).iter().all(|&(_, e)| e == 1)
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(n: i64, p: u64) -> u32 {
    debug_assert!(n != 0 && p >= 2);
    let mut n = n.unsigned_abs();
    let mut v = 0;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

pub fn isqrt(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn isqrt_u128(n: u128) -> u128 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn perfect_square_root(n: i64) -> Option<u64> {
    if n < 0 {
        return None;
    }
    let r = isqrt(n as u64);
    (r * r == n as u64).then_some(r)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Non-negative residue.
pub fn modp(a: i64, m: i64) -> i64 {
    a.rem_euclid(m)
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: i64, m: i64) -> Option<i64> {
    let (mut r0, mut r1) = (modp(a, m), m);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| modp(s0, m))
}

/// True iff `d` is the discriminant of a quadratic field.
pub fn is_fundamental_discriminant(d: i64) -> bool {
    if d == 0 || d == 1 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => is_squarefree(d.unsigned_abs()),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && is_squarefree(m.unsigned_abs())
        }
        _ => false,
    }
}

/// Fundamental discriminants with `0 < sign*d < bound`, in order of |d|.
pub fn fundamental_discriminants(bound: u64, negative: bool) -> Vec<i64> {
    (1..bound as i64)
        .map(|n| if negative { -n } else { n })
        .filter(|&d| is_fundamental_discriminant(d))
        .collect()
}

/// The Kronecker symbol `(d / n)`.
pub fn kronecker(d: i64, n: i64) -> i8 {
    if n == 0 {
        return if d.abs() == 1 { 1 } else { 0 };
    }
    let mut result: i8 = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if d < 0 {
            result = -result;
        }
    }
    // factor out 2 from n
    let v = n.trailing_zeros();
    if v > 0 {
        if d % 2 == 0 {
            return 0;
        }
        if v % 2 == 1 && matches!(d.rem_euclid(8), 3 | 5) {
            result = -result;
        }
        n >>= v;
    }
    // Jacobi symbol (d / n) for odd positive n.
    let mut a = d.rem_euclid(n);
    let mut m = n;
    while a != 0 {
        let t = a.trailing_zeros();
        a >>= t;
        if t % 2 == 1 && matches!(m % 8, 3 | 5) {
            result = -result;
        }
        if a % 4 == 3 && m % 4 == 3 {
            result = -result;
        }
        (a, m) = (m % a, a);
    }
    if m == 1 {
        result
    } else {
        0
    }
}

/// A conductor together with the counts that appear in the average formulas.
///
/// `m1` counts primes `p | c` with `p ≡ 1 mod 3`; `mplus` counts primes
/// `p | c` with `p ≢ 2 mod 3`, so it includes 3 whenever `3 | c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConductorProfile {
    pub c: u64,
    pub factorization: Factorization,
    pub n: u32,
    pub m1: u32,
    pub mplus: u32,
    /// Exponent of 3 in `c`.
    pub k: u32,
    pub primes: BTreeSet<u64>,
    /// `c` or `c/9` is squarefree.
    pub admissible: bool,
}

pub fn conductor_profile(c: u64) -> ConductorProfile {
    assert!(c >= 1, "conductor must be positive");
    let factorization = factorize(c as i64).expect("c >= 1");
    let primes: BTreeSet<u64> = factorization.primes().collect();
    let m1 = primes.iter().filter(|&&p| p % 3 == 1).count() as u32;
    let k = factorization.exponent(3);
    let mplus = m1 + u32::from(k > 0);
    let admissible = is_squarefree(c) || (c.is_multiple_of(9) && is_squarefree(c / 9));
    ConductorProfile {
        c,
        n: primes.len() as u32,
        m1,
        mplus,
        k,
        primes,
        admissible,
        factorization,
    }
}

/// Split a cubic discriminant into `(d, f)` with `D = d f^2`.
///
/// Square discriminants (cyclic fields) give `(1, sqrt(D))`; otherwise `d`
/// is the unique fundamental discriminant with `D/d` a square.
pub fn decompose_discriminant(disc: i64) -> Result<(i64, u64)> {
    if disc == 0 {
        return Err(Error::NotCubicDiscriminant(disc));
    }
    if let Some(r) = perfect_square_root(disc) {
        return Ok((1, r));
    }
    let fac = factor_u64(disc.unsigned_abs());
    // enumerate all f with f^2 | D
    let mut squares: Vec<u64> = vec![1];
    for &(p, e) in &fac {
        let mut next = Vec::new();
        for &f in &squares {
            let mut pk = 1;
            for _ in 0..=e / 2 {
                next.push(f * pk);
                pk *= p;
            }
        }
        squares = next;
    }
    squares.sort_unstable_by(|a, b| b.cmp(a));
    for f in squares {
        let d = disc / (f * f) as i64;
        if is_fundamental_discriminant(d) {
            return Ok((d, f));
        }
    }
    Err(Error::NotCubicDiscriminant(disc))
}
