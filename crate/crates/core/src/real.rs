//! Binary fixed-point reals backed by `BigInt`, enough for the handful of
//! special-function values the density constants need.
//!
//! A [`Real`] is `m / 2^prec`. Operands of one expression share `prec`;
//! every operation truncates toward negative infinity, so callers carry a
//! few dozen guard bits over the precision they report.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Real {
    m: BigInt,
    prec: u32,
}

/// Bits needed for `digits` significant decimal digits plus guard bits.
pub fn bits_for_digits(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 48
}

impl Real {
    pub fn zero(prec: u32) -> Self {
        Real {
            m: BigInt::zero(),
            prec,
        }
    }

    pub fn from_int(n: impl Into<BigInt>, prec: u32) -> Self {
        Real {
            m: n.into() << prec,
            prec,
        }
    }

    pub fn from_ratio(n: i64, d: i64, prec: u32) -> Self {
        Real::from_int(n, prec) / &Real::from_int(d, prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        Real {
            m: (r.numer() << prec).div_floor_big(r.denom()),
            prec,
        }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.m
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        let m = if prec >= self.prec {
            &self.m << (prec - self.prec)
        } else {
            &self.m >> (self.prec - prec)
        };
        Real { m, prec }
    }

    pub fn is_negative(&self) -> bool {
        self.m.sign() == Sign::Minus
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    /// At most one unit in the last place.
    pub fn is_negligible(&self) -> bool {
        self.m.bits() <= 1
    }

    pub fn abs(&self) -> Self {
        Real {
            m: self.m.abs(),
            prec: self.prec,
        }
    }

    pub fn to_f64(&self) -> f64 {
        // keep 64 significant bits before converting
        let bits = self.m.bits() as i64;
        let shift = (bits - 64).max(0);
        let top = (&self.m >> shift as usize).to_f64().unwrap_or(f64::NAN);
        top * 2f64.powi((shift - self.prec as i64) as i32)
    }

    pub fn mul_int(&self, k: i64) -> Self {
        Real {
            m: &self.m * k,
            prec: self.prec,
        }
    }

    pub fn div_int(&self, k: i64) -> Self {
        Real {
            m: self.m.div_floor_big(&BigInt::from(k)),
            prec: self.prec,
        }
    }

    pub fn shl(&self, k: u32) -> Self {
        Real {
            m: &self.m << k,
            prec: self.prec,
        }
    }

    pub fn shr(&self, k: u32) -> Self {
        Real {
            m: &self.m >> k,
            prec: self.prec,
        }
    }

    pub fn recip(&self) -> Self {
        Real::from_int(1, self.prec) / self
    }

    pub fn sqrt(&self) -> Self {
        assert!(!self.is_negative(), "sqrt of a negative number");
        Real {
            m: (&self.m << self.prec).sqrt(),
            prec: self.prec,
        }
    }

    pub fn cbrt(&self) -> Self {
        let m = (&self.m << (2 * self.prec)).abs().cbrt();
        Real {
            m: if self.is_negative() { -m } else { m },
            prec: self.prec,
        }
    }

    pub fn powi(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Real::from_int(1, self.prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn pi(prec: u32) -> Self {
        // Machin: pi = 16 atan(1/5) - 4 atan(1/239)
        let w = prec + 32;
        let pi = atan_inv(5, w).mul_int(16) - atan_inv(239, w).mul_int(4);
        pi.with_prec(prec)
    }

    pub fn ln2(prec: u32) -> Self {
        let w = prec + 32;
        atanh_small(&Real::from_ratio(1, 3, w))
            .shl(1)
            .with_prec(prec)
    }

    pub fn exp(&self) -> Self {
        // halve until tiny, sum the Taylor series, square back
        let k = (self.m.bits() as i64 - self.prec as i64 + 8).max(0) as u32;
        let w = self.prec + k + 32;
        let r = self.with_prec(w).shr(k);
        let one = Real::from_int(1, w);
        let mut sum = one.clone();
        let mut term = one;
        let mut n = 1i64;
        loop {
            term = (&term * &r).div_int(n);
            if term.is_negligible() {
                break;
            }
            sum = &sum + &term;
            n += 1;
        }
        for _ in 0..k {
            sum = &sum * &sum;
        }
        sum.with_prec(self.prec)
    }

    pub fn ln(&self) -> Self {
        assert!(self.m.sign() == Sign::Plus, "ln of a non-positive number");
        let w = self.prec + 32;
        let x = self.with_prec(w);
        // x = y * 2^e with 1 <= y < 2
        let e = x.m.bits() as i64 - 1 - w as i64;
        let y = if e >= 0 {
            x.shr(e as u32)
        } else {
            x.shl((-e) as u32)
        };
        let one = Real::from_int(1, w);
        let z = (&y - &one) / &(&y + &one);
        let ln_y = atanh_small(&z).shl(1);
        (ln_y + Real::ln2(w).mul_int(e)).with_prec(self.prec)
    }

    /// `self^y` for `self > 0`.
    pub fn pow(&self, y: &Real) -> Self {
        (&self.ln() * y).exp()
    }

    /// Decimal rendering with `digits` digits after the point.
    pub fn to_decimal(&self, digits: usize) -> String {
        let scaled = (&self.m * BigInt::from(10).pow(digits as u32)) >> self.prec;
        // floor shifts toward -inf; render the magnitude of the truncation
        let neg = scaled.is_negative();
        let mag = if neg {
            ((-&self.m) * BigInt::from(10).pow(digits as u32)) >> self.prec
        } else {
            scaled
        };
        let s = mag.to_string();
        let s = format!("{s:0>width$}", width = digits + 1);
        let (int, frac) = s.split_at(s.len() - digits);
        let sign = if neg { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }

    /// Number of leading decimal digits on which `self` and `other` agree,
    /// measured relative to `self`.
    pub fn agreement_digits(&self, other: &Real) -> f64 {
        let diff = (self - other).abs();
        if diff.is_zero() {
            return self.prec as f64 / std::f64::consts::LOG2_10;
        }
        let rel = diff.m.bits() as f64 - self.m.abs().bits() as f64;
        -rel / std::f64::consts::LOG2_10
    }
}

trait DivFloorBig {
    fn div_floor_big(&self, d: &BigInt) -> BigInt;
}

impl DivFloorBig for BigInt {
    fn div_floor_big(&self, d: &BigInt) -> BigInt {
        num_integer::Integer::div_floor(self, d)
    }
}

/// `atan(1/n)` by its Taylor series.
fn atan_inv(n: i64, prec: u32) -> Real {
    let x = Real::from_ratio(1, n, prec);
    let x2 = &x * &x;
    let mut power = x.clone();
    let mut sum = x;
    let mut k = 1i64;
    loop {
        power = &power * &x2;
        let term = power.div_int(2 * k + 1);
        if term.is_negligible() {
            break;
        }
        sum = if k % 2 == 1 {
            &sum - &term
        } else {
            &sum + &term
        };
        k += 1;
    }
    sum
}

/// `atanh(z)` for `|z| <= 1/3`.
fn atanh_small(z: &Real) -> Real {
    let z2 = z * z;
    let mut power = z.clone();
    let mut sum = z.clone();
    let mut k = 1i64;
    loop {
        power = &power * &z2;
        let term = power.div_int(2 * k + 1);
        if term.is_negligible() {
            break;
        }
        sum = &sum + &term;
        k += 1;
    }
    sum
}

impl Add<&Real> for &Real {
    type Output = Real;
    fn add(self, o: &Real) -> Real {
        debug_assert_eq!(self.prec, o.prec);
        Real {
            m: &self.m + &o.m,
            prec: self.prec,
        }
    }
}

impl Add<Real> for Real {
    type Output = Real;
    fn add(self, o: Real) -> Real {
        &self + &o
    }
}

impl Add<&Real> for Real {
    type Output = Real;
    fn add(self, o: &Real) -> Real {
        &self + o
    }
}

impl Sub<&Real> for &Real {
    type Output = Real;
    fn sub(self, o: &Real) -> Real {
        debug_assert_eq!(self.prec, o.prec);
        Real {
            m: &self.m - &o.m,
            prec: self.prec,
        }
    }
}

impl Sub<Real> for Real {
    type Output = Real;
    fn sub(self, o: Real) -> Real {
        &self - &o
    }
}

impl Sub<&Real> for Real {
    type Output = Real;
    fn sub(self, o: &Real) -> Real {
        &self - o
    }
}

impl Mul<&Real> for &Real {
    type Output = Real;
    fn mul(self, o: &Real) -> Real {
        debug_assert_eq!(self.prec, o.prec);
        Real {
            m: (&self.m * &o.m) >> self.prec,
            prec: self.prec,
        }
    }
}

impl Mul<Real> for Real {
    type Output = Real;
    fn mul(self, o: Real) -> Real {
        &self * &o
    }
}

impl Mul<&Real> for Real {
    type Output = Real;
    fn mul(self, o: &Real) -> Real {
        &self * o
    }
}

impl Div<&Real> for &Real {
    type Output = Real;
    fn div(self, o: &Real) -> Real {
        debug_assert_eq!(self.prec, o.prec);
        assert!(!o.m.is_zero(), "division by zero");
        Real {
            m: (&self.m << self.prec).div_floor_big(&o.m),
            prec: self.prec,
        }
    }
}

impl Div<Real> for Real {
    type Output = Real;
    fn div(self, o: Real) -> Real {
        &self / &o
    }
}

impl Div<&Real> for Real {
    type Output = Real;
    fn div(self, o: &Real) -> Real {
        &self / o
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real {
            m: -&self.m,
            prec: self.prec,
        }
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        -&self
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, o: &Real) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Real {
    fn cmp(&self, o: &Real) -> Ordering {
        debug_assert_eq!(self.prec, o.prec);
        self.m.cmp(&o.m)
    }
}

/// Exact Bernoulli numbers `B_0..=B_n` (`B_1 = -1/2`).
pub fn bernoulli_numbers(n: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m == 0 {
            b.push(BigRational::one());
            continue;
        }
        // sum_{k=0}^{m} C(m+1, k) B_k = 0
        let mut acc = BigRational::zero();
        let mut binom = BigInt::one();
        for (k, bk) in b.iter().enumerate() {
            acc += bk * BigRational::from_integer(binom.clone());
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        b.push(-acc / BigRational::from_integer(BigInt::from(m + 1)));
    }
    b
}
