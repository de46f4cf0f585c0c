//! Cubic fields by discriminant, through reduced integral binary cubic forms.
//!
//! A cubic field of discriminant `D` corresponds to a `GL_2(Z)`-class of
//! irreducible forms `a x^3 + b x^2 y + c x y^2 + d y^3` whose ring is
//! maximal. Classes are represented by a canonical reduced form:
//!
//! * `D > 0`: the Hessian `(P, Q, R) = (b^2 - 3ac, bc - 9ad, c^2 - 3bd)` is
//!   positive definite and must be reduced, `|Q| <= P <= R`.
//! * `D < 0`: writing `F = (x - theta y) q(x, y)` with `theta` the real root,
//!   the positive definite quadratic `q = a x^2 + B xy + C y^2` must be
//!   reduced, `|B| <= a <= C`. Each inequality is a polynomial condition on
//!   the coefficients.
//!
//! Ties on the boundary are broken by taking the lexicographically smallest
//! reduced form among the images under the finitely many transformations
//! with entries in `{-1, 0, 1}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{decompose_discriminant, factor_u64, valuation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinaryCubicForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

/// Sign of the discriminant: totally real fields have `D > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubicSignature {
    Real,
    Imaginary,
}

impl CubicSignature {
    pub fn sign(self) -> i64 {
        match self {
            CubicSignature::Real => 1,
            CubicSignature::Imaginary => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CubicSignature::Real => "real",
            CubicSignature::Imaginary => "imaginary",
        }
    }
}

impl std::str::FromStr for CubicSignature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" | "+" | "positive" => Ok(CubicSignature::Real),
            "imaginary" | "imag" | "-" | "negative" | "complex" => Ok(CubicSignature::Imaginary),
            _ => Err(Error::InconsistentArguments(format!(
                "unknown signature {s}"
            ))),
        }
    }
}

/// The 3-adic part of a field, as far as the density formulas care.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum V3Class {
    /// 3 is not totally ramified.
    None,
    /// totally ramified, `81 ∤ D`
    Three,
    /// totally ramified, `81 | D`
    Nine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubicFieldRecord {
    pub disc: i64,
    pub form: BinaryCubicForm,
    pub cyclic: bool,
    /// Fundamental discriminant of the quadratic resolvent, `1` when cyclic.
    pub resolvent_d: i64,
    pub f: u64,
    pub ram_total: BTreeSet<u64>,
    pub v3class: V3Class,
}

fn cmp_records(x: &CubicFieldRecord, y: &CubicFieldRecord) -> std::cmp::Ordering {
    (x.disc.unsigned_abs(), x.disc < 0, x.form).cmp(&(y.disc.unsigned_abs(), y.disc < 0, y.form))
}

impl BinaryCubicForm {
    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        BinaryCubicForm { a, b, c, d }
    }

    pub fn coeffs(&self) -> [i64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn eval(&self, x: i128, y: i128) -> i128 {
        let (a, b, c, d) = self.wide();
        a * x * x * x + b * x * x * y + c * x * y * y + d * y * y * y
    }

    fn wide(&self) -> (i128, i128, i128, i128) {
        (
            self.a as i128,
            self.b as i128,
            self.c as i128,
            self.d as i128,
        )
    }

    pub fn hessian(&self) -> (i128, i128, i128) {
        let (a, b, c, d) = self.wide();
        (b * b - 3 * a * c, b * c - 9 * a * d, c * c - 3 * b * d)
    }

    pub fn negate(&self) -> Self {
        BinaryCubicForm::new(-self.a, -self.b, -self.c, -self.d)
    }

    /// `F(alpha x + beta y, gamma x + delta y)`.
    pub fn substitute(&self, m: [i64; 4]) -> Self {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let [al, be, ga, de] = m;
        let na = a * al * al * al + b * al * al * ga + c * al * ga * ga + d * ga * ga * ga;
        let nd = a * be * be * be + b * be * be * de + c * be * de * de + d * de * de * de;
        let nb = 3 * a * al * al * be
            + b * (al * al * de + 2 * al * be * ga)
            + c * (2 * al * ga * de + be * ga * ga)
            + 3 * d * ga * ga * de;
        let nc = 3 * a * al * be * be
            + b * (2 * al * be * de + be * be * ga)
            + c * (al * de * de + 2 * be * ga * de)
            + 3 * d * ga * de * de;
        BinaryCubicForm::new(na, nb, nc, nd)
    }

    pub fn is_primitive(&self) -> bool {
        let g = [self.a, self.b, self.c, self.d]
            .iter()
            .fold(0i64, |g, &x| crate::arith::gcd(g, x));
        g == 1
    }

    /// No rational root on the projective line.
    pub fn is_irreducible(&self) -> bool {
        if self.a == 0 || self.d == 0 {
            return false;
        }
        let ys = divisors_abs(self.a);
        for t in real_roots(self) {
            for &y in &ys {
                let x = (t * y as f64).round() as i128;
                for dx in -1..=1 {
                    if self.eval(x + dx, y as i128) == 0 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn divisors_abs(n: i64) -> Vec<i64> {
    let mut out = vec![1i64];
    for (p, e) in factor_u64(n.unsigned_abs()) {
        let mut next = Vec::new();
        for &x in &out {
            let mut pk = 1i64;
            for _ in 0..=e {
                next.push(x * pk);
                pk *= p as i64;
            }
        }
        out = next;
    }
    out
}

/// Real roots of `F(t, 1)`, `a != 0`, located by bisection between the
/// critical points.
fn real_roots(f: &BinaryCubicForm) -> Vec<f64> {
    let (a, b, c, d) = (f.a as f64, f.b as f64, f.c as f64, f.d as f64);
    let g = |t: f64| ((a * t + b) * t + c) * t + d;
    let bound = 1.0
        + [b / a, c / a, d / a]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
    let mut cuts = vec![-bound];
    // derivative 3a t^2 + 2b t + c
    let disc = 4.0 * b * b - 12.0 * a * c;
    if disc > 0.0 {
        let s = disc.sqrt();
        let mut r = [(-2.0 * b - s) / (6.0 * a), (-2.0 * b + s) / (6.0 * a)];
        r.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.extend(r.iter().filter(|x| x.abs() < bound));
    }
    cuts.push(bound);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (g(lo), g(hi));
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

pub fn form_discriminant(f: &BinaryCubicForm) -> i128 {
    let (a, b, c, d) = f.wide();
    18 * a * b * c * d - 4 * b * b * b * d + b * b * c * c - 4 * a * c * c * c - 27 * a * a * d * d
}

/// The reduction conditions for the sign of `D` (non-strict; boundary ties
/// are resolved by [`canonical_form`]).
pub fn is_reduced(f: &BinaryCubicForm, sig: CubicSignature) -> bool {
    if f.a <= 0 {
        return false;
    }
    let (a, b, c, d) = f.wide();
    match sig {
        CubicSignature::Real => {
            let (p, q, r) = f.hessian();
            q.abs() <= p && p <= r
        }
        CubicSignature::Imaginary => {
            (a - b) * (a - b) + c * (a - b) + a * d >= 0
                && (a + b) * (a + b) + c * (a + b) - a * d >= 0
                && d * d - a * a + a * c - b * d >= 0
        }
    }
}

/// Matrices with entries in `{-1, 0, 1}` and determinant `±1`, one from
/// each `±` pair.
fn small_gl2() -> &'static [[i64; 4]] {
    static SET: std::sync::OnceLock<Vec<[i64; 4]>> = std::sync::OnceLock::new();
    SET.get_or_init(|| {
        let mut out = Vec::new();
        let r = [-1i64, 0, 1];
        for &al in &r {
            for &be in &r {
                for &ga in &r {
                    for &de in &r {
                        let det = al * de - be * ga;
                        let first = [al, be, ga, de].into_iter().find(|&x| x != 0);
                        if det.abs() == 1 && first == Some(1) {
                            out.push([al, be, ga, de]);
                        }
                    }
                }
            }
        }
        out
    })
}

/// Smallest reduced form among `±F∘γ` for the small transformations, if
/// any of them is reduced.
pub fn canonical_form(f: &BinaryCubicForm, sig: CubicSignature) -> Option<BinaryCubicForm> {
    let mut best: Option<BinaryCubicForm> = None;
    for &m in small_gl2() {
        let g = f.substitute(m);
        for h in [g, g.negate()] {
            if is_reduced(&h, sig) && best.is_none_or(|b| h < b) {
                best = Some(h);
            }
        }
    }
    best
}

fn is_canonical(f: &BinaryCubicForm, sig: CubicSignature) -> bool {
    for &m in small_gl2() {
        let g = f.substitute(m);
        for h in [g, g.negate()] {
            if h < *f && h.a > 0 && is_reduced(&h, sig) {
                return false;
            }
        }
    }
    true
}

/// A multiple root of `F` on the projective line over `F_p`, as a point
/// `(x, y)` with `0 <= x, y < p`.
fn multiple_root_mod_p(f: &BinaryCubicForm, p: u64) -> Option<(i128, i128)> {
    let p = p as i128;
    let (a, b, c, _) = f.wide();
    if a.rem_euclid(p) == 0 && b.rem_euclid(p) == 0 {
        return Some((1, 0));
    }
    for r in 0..p {
        let v = f.eval(r, 1);
        let dv = 3 * a * r * r + 2 * b * r + c;
        if v.rem_euclid(p) == 0 && dv.rem_euclid(p) == 0 {
            return Some((r, 1));
        }
    }
    None
}

fn is_zero_mod(f: &BinaryCubicForm, p: u64) -> bool {
    f.coeffs().iter().all(|&x| x.rem_euclid(p as i64) == 0)
}

/// Maximality at `p` by the local shape of `F`: the ring is non-maximal
/// exactly when `F ≡ 0` or `F` has a multiple root mod `p` at which its
/// value is divisible by `p^2`.
pub fn is_maximal_local(f: &BinaryCubicForm, p: u64) -> bool {
    if is_zero_mod(f, p) {
        return false;
    }
    let pp = (p * p) as i128;
    match multiple_root_mod_p(f, p) {
        None => true,
        Some((1, 0)) => (f.a as i128).rem_euclid(pp) != 0,
        Some((r, _)) => f.eval(r, 1).rem_euclid(pp) != 0,
    }
}

/// Maximality at `p` by Dedekind's criterion on the monic model
/// `t^3 + b t^2 + a c t + a^2 d`, after moving to a form with `p ∤ a`.
pub fn is_maximal_dedekind(f: &BinaryCubicForm, p: u64) -> bool {
    let pi = p as i64;
    // find a value of F prime to p and move it to the leading coefficient
    let mut g = None;
    if f.a.rem_euclid(pi) != 0 {
        g = Some(*f);
    } else if f.d.rem_euclid(pi) != 0 {
        g = Some(f.substitute([0, -1, 1, 0]));
    } else {
        for t in 1..pi {
            if f.eval(1, t as i128).rem_euclid(p as i128) != 0 {
                g = Some(f.substitute([1, 0, t, 1]));
                break;
            }
        }
    }
    let Some(g) = g else {
        // F vanishes on all of P^1(F_p): zero mod p, or xy(x+y) mod 2
        return !is_zero_mod(f, p);
    };
    let (a, b, c, d) = g.wide();
    let poly = [1i128, b, a * c, a * a * d]; // t^3 + ... (high to low)
    let pw = p as i128;
    let ev = |q: &[i128; 4], t: i128| ((q[0] * t + q[1]) * t + q[2]) * t + q[3];
    let roots: Vec<i128> = (0..pw)
        .filter(|&t| ev(&poly, t).rem_euclid(pw) == 0)
        .collect();
    // multiplicities from the reduction of the derivative
    let dpoly = |t: i128| 3 * t * t + 2 * poly[1] * t + poly[2];
    let Some(&r) = roots.iter().find(|&&t| dpoly(t).rem_euclid(pw) == 0) else {
        return true;
    };
    let dd = |t: i128| 6 * t + 2 * poly[1];
    // lift of the factorization mod p: (t - r)^2 (t - s)
    let s = if dd(r).rem_euclid(pw) == 0 && (pw != 2 && pw != 3) {
        r
    } else {
        // remaining root from the coefficient of t^2: 2r + s ≡ -b
        (-poly[1] - 2 * r).rem_euclid(pw)
    };
    let lifted = [1i128, -(2 * r + s), r * r + 2 * r * s, -r * r * s];
    debug_assert!((0..4).all(|i| (poly[i] - lifted[i]).rem_euclid(pw) == 0));
    let f1: [i128; 4] = std::array::from_fn(|i| (poly[i] - lifted[i]) / pw);
    ev(&f1, r).rem_euclid(pw) != 0
}

/// Both maximality tests; disagreement is an internal error.
pub fn is_maximal_at(f: &BinaryCubicForm, p: u64) -> Result<bool> {
    let local = is_maximal_local(f, p);
    let dedekind = is_maximal_dedekind(f, p);
    if local != dedekind {
        return Err(Error::TestsDisagree {
            form: f.coeffs(),
            p,
        });
    }
    Ok(local)
}

fn is_maximal(f: &BinaryCubicForm, disc: i128) -> Result<bool> {
    for (p, e) in factor_u64(disc.unsigned_abs() as u64) {
        if e >= 2 && !is_maximal_at(f, p)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn classify(f: &BinaryCubicForm, disc: i64) -> Result<CubicFieldRecord> {
    let (d, ff) = decompose_discriminant(disc)?;
    let ram_total: BTreeSet<u64> = factor_u64(ff).into_iter().map(|(p, _)| p).collect();
    let v3 = valuation(disc, 3);
    let v3class = if !ram_total.contains(&3) {
        V3Class::None
    } else if v3 >= 4 {
        V3Class::Nine
    } else {
        V3Class::Three
    };
    Ok(CubicFieldRecord {
        disc,
        form: *f,
        cyclic: d == 1,
        resolvent_d: d,
        f: ff,
        ram_total,
        v3class,
    })
}

/// Restriction of an enumeration to fields totally ramified at `p`
/// (`p != 3`), which lets the coefficient loops step by `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamifiedFilter {
    pub p: u64,
}

/// Integer `d` with `lo < D(d) < hi` lie in at most two intervals, since
/// `D` is a concave quadratic in `d`. Returned with a safety margin.
fn d_windows(a: i64, b: i64, c: i64, lo: f64, hi: f64) -> [(i64, i64); 2] {
    let (a, b, c) = (a as f64, b as f64, c as f64);
    let qa = -27.0 * a * a;
    let qb = 18.0 * a * b * c - 4.0 * b * b * b;
    let qc = b * b * c * c - 4.0 * a * c * c * c;
    let roots = |level: f64| -> Option<(f64, f64)> {
        let disc = qb * qb - 4.0 * qa * (qc - level);
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let (r1, r2) = ((-qb + s) / (2.0 * qa), (-qb - s) / (2.0 * qa));
        Some((r1.min(r2), r1.max(r2)))
    };
    let empty = [(1, 0), (1, 0)];
    let Some((u1, u2)) = roots(lo) else {
        return empty;
    };
    let (u1, u2) = (u1.floor() as i64 - 1, u2.ceil() as i64 + 1);
    match roots(hi) {
        None => [(u1, u2), (1, 0)],
        Some((v1, v2)) => {
            let (v1, v2) = (v1.ceil() as i64 + 1, v2.floor() as i64 - 1);
            if v1 > v2 {
                [(u1, u2), (1, 0)]
            } else {
                [(u1, v1), (v2, u2)]
            }
        }
    }
}

struct Sweep {
    sig: CubicSignature,
    x: u64,
    filter: Option<RamifiedFilter>,
}

impl Sweep {
    fn a_max(&self) -> i64 {
        let x = self.x as f64;
        let bound = match self.sig {
            // 27 D a^2 <= 4 P^3 and P <= sqrt(D)
            CubicSignature::Real => (4.0 * x.sqrt() / 27.0).sqrt(),
            CubicSignature::Imaginary => (16.0 * x / 27.0).powf(0.25),
        };
        bound.floor() as i64 + 1
    }

    fn b_max(&self, a: i64) -> i64 {
        let x4 = (self.x as f64).powf(0.25);
        match self.sig {
            CubicSignature::Real => (1.2 * x4).ceil() as i64 + 2,
            CubicSignature::Imaginary => {
                (1.5 * a as f64 + (self.x as f64 / 3.0).powf(0.25)).ceil() as i64 + 1
            }
        }
    }

    fn c_range(&self, a: i64, b: i64) -> (i64, i64) {
        let x = self.x as f64;
        let (af, bf) = (a as f64, b as f64);
        match self.sig {
            CubicSignature::Real => {
                // 1 <= P = b^2 - 3ac <= sqrt(X)
                let lo = ((bf * bf - x.sqrt()) / (3.0 * af)).floor() as i64 - 1;
                let hi = (b * b - 1).div_euclid(3 * a);
                (lo, hi)
            }
            CubicSignature::Imaginary => {
                let lo = (-(af * af + bf * bf) / af).floor() as i64 - 1;
                let cmax = (af * af + (16.0 * af * af * x).cbrt()) / (4.0 * af);
                let hi = (cmax + af / 2.0 + (x / 3.0).powf(0.25)).ceil() as i64 + 1;
                (lo, hi)
            }
        }
    }

    /// `d` interval from the reduction conditions.
    fn d_range(&self, a: i64, b: i64, c: i64) -> Option<(i64, i64)> {
        match self.sig {
            CubicSignature::Real => {
                let p = b * b - 3 * a * c;
                if p < 1 || (p as i128) * (p as i128) > self.x as i128 {
                    return None;
                }
                // |bc - 9ad| <= P
                let lo = (b * c - p + 9 * a - 1).div_euclid(9 * a);
                let hi = (b * c + p).div_euclid(9 * a);
                Some((lo, hi))
            }
            CubicSignature::Imaginary => {
                let lo_num = -((a - b) * (a - b) + c * (a - b));
                let hi_num = (a + b) * (a + b) + c * (a + b);
                let lo = (lo_num + a - 1).div_euclid(a);
                let hi = hi_num.div_euclid(a);
                Some((lo, hi))
            }
        }
    }

    /// Admissible `d` residues for the ramification filter, as
    /// `(residue, modulus)`, or `None` when `(a, b, c)` cannot pass.
    fn d_congruence(&self, a: i64, b: i64, c: i64) -> Option<(i64, i64)> {
        let Some(RamifiedFilter { p }) = self.filter else {
            return Some((0, 1));
        };
        let p = p as i64;
        let am = a.rem_euclid(p);
        if am == 0 {
            // F ≡ d y^3
            if b.rem_euclid(p) != 0 || c.rem_euclid(p) != 0 {
                return None;
            }
            return Some((0, 1)); // d ≢ 0 is checked in `visit`
        }
        // F ≡ a (x - r y)^3
        let inv = crate::arith::inv_mod(3 * am, p)?;
        let r = (-b * inv).rem_euclid(p);
        if (c - 3 * a * r * r).rem_euclid(p) != 0 {
            return None;
        }
        Some(((-a * r * r * r).rem_euclid(p), p))
    }

    fn run_ab(&self, a: i64, b: i64, out: &mut Vec<CubicFieldRecord>) -> Result<()> {
        self.for_each_reduced(a, b, |f, disc| self.visit(f, disc, out))
    }

    /// Call `visit` on every reduced form with leading coefficients `(a, b)`
    /// and discriminant in range, together with its discriminant.
    fn for_each_reduced(
        &self,
        a: i64,
        b: i64,
        mut visit: impl FnMut(BinaryCubicForm, i128) -> Result<()>,
    ) -> Result<()> {
        let (lo, hi) = match self.sig {
            CubicSignature::Real => (0.0, self.x as f64),
            CubicSignature::Imaginary => (-(self.x as f64), 0.0),
        };
        let (c_lo, c_hi) = self.c_range(a, b);
        for c in c_lo..=c_hi {
            let Some((d_lo, d_hi)) = self.d_range(a, b, c) else {
                continue;
            };
            if d_lo > d_hi {
                continue;
            }
            let Some((res, modulus)) = self.d_congruence(a, b, c) else {
                continue;
            };
            for (w_lo, w_hi) in d_windows(a, b, c, lo, hi) {
                let from = d_lo.max(w_lo);
                let to = d_hi.min(w_hi);
                if from > to {
                    continue;
                }
                let mut d = from + (res - from).rem_euclid(modulus);
                while d <= to {
                    let f = BinaryCubicForm::new(a, b, c, d);
                    let disc = form_discriminant(&f);
                    if self.in_range(disc) && is_reduced(&f, self.sig) {
                        visit(f, disc)?;
                    }
                    d += modulus;
                }
            }
        }
        Ok(())
    }

    fn in_range(&self, disc: i128) -> bool {
        let x = self.x as i128;
        match self.sig {
            CubicSignature::Real => disc > 0 && disc < x,
            CubicSignature::Imaginary => disc < 0 && -disc < x,
        }
    }

    fn visit(&self, f: BinaryCubicForm, disc: i128, out: &mut Vec<CubicFieldRecord>) -> Result<()> {
        if let Some(RamifiedFilter { p }) = self.filter {
            if f.d.rem_euclid(p as i64) == 0 && f.a.rem_euclid(p as i64) == 0 {
                return Ok(());
            }
            if valuation(disc as i64, p) < 2 {
                return Ok(());
            }
        }
        if !f.is_primitive() || !is_maximal(&f, disc)? || !f.is_irreducible() {
            return Ok(());
        }
        if !is_canonical(&f, self.sig) {
            return Ok(());
        }
        let record = classify(&f, disc as i64)?;
        if let Some(RamifiedFilter { p }) = self.filter {
            if !record.ram_total.contains(&p) {
                return Ok(());
            }
        }
        out.push(record);
        Ok(())
    }
}

/// All cubic fields with `0 < ±D < X`, one record per isomorphism class,
/// sorted by `(|D|, sign, form)`.
pub fn enumerate_cubic_fields(x: u64, sig: CubicSignature) -> Result<Vec<CubicFieldRecord>> {
    enumerate_cubic_fields_filtered(x, sig, None)
}

pub fn enumerate_cubic_fields_filtered(
    x: u64,
    sig: CubicSignature,
    filter: Option<RamifiedFilter>,
) -> Result<Vec<CubicFieldRecord>> {
    if let Some(RamifiedFilter { p }) = filter {
        if p == 3 || !crate::arith::is_prime(p) {
            return Err(Error::Unsupported(format!(
                "ramification filter needs a prime other than 3, got {p}"
            )));
        }
    }
    let sweep = Sweep { sig, x, filter };
    let jobs: Vec<(i64, i64)> = (1..=sweep.a_max())
        .flat_map(|a| {
            let bm = sweep.b_max(a);
            (-bm..=bm).map(move |b| (a, b))
        })
        .collect();
    let parts: Vec<Result<Vec<CubicFieldRecord>>> = jobs
        .par_iter()
        .map(|&(a, b)| {
            let mut out = Vec::new();
            sweep.run_ab(a, b, &mut out)?;
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    all.sort_by(cmp_records);
    Ok(all)
}

/// Outcome of running both maximality tests on every reduced form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MaximalityAudit {
    /// reduced forms with discriminant in range
    pub forms: u64,
    /// `(form, p)` pairs with `p² | D` on which both tests ran
    pub checks: u64,
    pub disagreements: Vec<([i64; 4], u64)>,
}

/// Run the form-local and Dedekind maximality tests on every reduced form
/// with `0 < ±D < X` at every `p` with `p² | D`, recording disagreements
/// instead of stopping at the first.
pub fn maximality_audit(x: u64, sig: CubicSignature) -> Result<MaximalityAudit> {
    let sweep = Sweep {
        sig,
        x,
        filter: None,
    };
    let jobs: Vec<(i64, i64)> = (1..=sweep.a_max())
        .flat_map(|a| {
            let bm = sweep.b_max(a);
            (-bm..=bm).map(move |b| (a, b))
        })
        .collect();
    let parts: Vec<Result<MaximalityAudit>> = jobs
        .par_iter()
        .map(|&(a, b)| {
            let mut audit = MaximalityAudit::default();
            sweep.for_each_reduced(a, b, |f, disc| {
                audit.forms += 1;
                for (p, e) in factor_u64(disc.unsigned_abs() as u64) {
                    if e >= 2 {
                        audit.checks += 1;
                        if is_maximal_local(&f, p) != is_maximal_dedekind(&f, p) {
                            audit.disagreements.push((f.coeffs(), p));
                        }
                    }
                }
                Ok(())
            })?;
            Ok(audit)
        })
        .collect();
    let mut total = MaximalityAudit::default();
    for part in parts {
        let part = part?;
        total.forms += part.forms;
        total.checks += part.checks;
        total.disagreements.extend(part.disagreements);
    }
    total.disagreements.sort();
    Ok(total)
}

/// `R` is `c`-valid, optionally with a prescribed resolvent.
pub fn is_c_valid(r: &CubicFieldRecord, c: u64, resolvent_filter: Option<i64>) -> bool {
    if r.cyclic {
        (c as u128 * c as u128).is_multiple_of(r.disc as u128)
    } else {
        c.is_multiple_of(r.f) && resolvent_filter.is_none_or(|d| d == r.resolvent_d)
    }
}

/// A census of cubic fields of one signature with `|D| < bound`, possibly
/// restricted to fields totally ramified at one prime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Census {
    pub signature: CubicSignature,
    pub bound: u64,
    pub filter: Option<RamifiedFilter>,
    pub records: Vec<CubicFieldRecord>,
    #[serde(skip)]
    by_resolvent: HashMap<i64, Vec<usize>>,
}

const CACHE_VERSION: u32 = 1;

impl Census {
    pub fn new(
        signature: CubicSignature,
        bound: u64,
        filter: Option<RamifiedFilter>,
        records: Vec<CubicFieldRecord>,
    ) -> Self {
        let mut c = Census {
            signature,
            bound,
            filter,
            records,
            by_resolvent: HashMap::new(),
        };
        c.reindex();
        c
    }

    pub fn enumerate(
        signature: CubicSignature,
        bound: u64,
        filter: Option<RamifiedFilter>,
    ) -> Result<Self> {
        let records = enumerate_cubic_fields_filtered(bound, signature, filter)?;
        Ok(Census::new(signature, bound, filter, records))
    }

    fn reindex(&mut self) {
        self.by_resolvent.clear();
        for (i, r) in self.records.iter().enumerate() {
            self.by_resolvent.entry(r.resolvent_d).or_default().push(i);
        }
    }

    pub fn with_resolvent(&self, d: i64) -> impl Iterator<Item = &CubicFieldRecord> {
        self.by_resolvent
            .get(&d)
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    pub fn cyclic(&self) -> impl Iterator<Item = &CubicFieldRecord> {
        self.with_resolvent(1)
    }

    /// Keep only the records with `|D| < bound`.
    pub fn truncate(&self, bound: u64) -> Census {
        let records = self
            .records
            .iter()
            .filter(|r| r.disc.unsigned_abs() < bound)
            .cloned()
            .collect();
        Census::new(self.signature, bound.min(self.bound), self.filter, records)
    }

    pub fn to_cache_string(&self) -> String {
        let mut s = String::new();
        let filter = self.filter.map_or("none".to_string(), |f| f.p.to_string());
        writeln!(
            s,
            "# cubic-census v{CACHE_VERSION} signature={} bound={} filter={filter}",
            self.signature.name(),
            self.bound
        )
        .unwrap();
        for r in &self.records {
            let ram: Vec<String> = r.ram_total.iter().map(u64::to_string).collect();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.disc,
                r.form.a,
                r.form.b,
                r.form.c,
                r.form.d,
                u8::from(r.cyclic),
                r.resolvent_d,
                r.f,
                ram.join(";")
            )
            .unwrap();
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let mut file = std::fs::File::create(&tmp).map_err(|e| Error::Cache(e.to_string()))?;
        file.write_all(self.to_cache_string().as_bytes())
            .and_then(|()| file.sync_all())
            .map_err(|e| Error::Cache(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::Cache(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Cache(e.to_string()))?;
        Census::parse(BufReader::new(file))
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::Cache(format!("line {line}: {what}"));
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad(1, "empty file"))?
            .map_err(|e| Error::Cache(e.to_string()))?;
        let fields: HashMap<&str, &str> = header
            .strip_prefix(&format!("# cubic-census v{CACHE_VERSION} "))
            .ok_or_else(|| bad(1, "unrecognised header"))?
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let signature: CubicSignature = fields
            .get("signature")
            .ok_or_else(|| bad(1, "missing signature"))?
            .parse()?;
        let bound: u64 = fields
            .get("bound")
            .and_then(|b| b.parse().ok())
            .ok_or_else(|| bad(1, "missing bound"))?;
        let filter = match fields.get("filter").copied() {
            None | Some("none") => None,
            Some(p) => Some(RamifiedFilter {
                p: p.parse().map_err(|_| bad(1, "bad filter"))?,
            }),
        };
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let line = line.map_err(|e| Error::Cache(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 9 {
                return Err(bad(n, "expected 9 fields"));
            }
            let num = |s: &str| s.trim().parse::<i64>().map_err(|_| bad(n, "bad integer"));
            let disc = num(parts[0])?;
            let form = BinaryCubicForm::new(
                num(parts[1])?,
                num(parts[2])?,
                num(parts[3])?,
                num(parts[4])?,
            );
            if form_discriminant(&form) != disc as i128 {
                return Err(bad(n, "discriminant does not match form"));
            }
            let record = classify(&form, disc).map_err(|_| bad(n, "bad discriminant"))?;
            let ram: BTreeSet<u64> = parts[8]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<u64>().map_err(|_| bad(n, "bad prime")))
                .collect::<Result<_>>()?;
            if record.cyclic != (num(parts[5])? == 1)
                || record.resolvent_d != num(parts[6])?
                || record.f != num(parts[7])? as u64
                || record.ram_total != ram
            {
                return Err(bad(n, "stored invariants disagree with the form"));
            }
            records.push(record);
        }
        Ok(Census::new(signature, bound, filter, records))
    }

    /// Load a cached census covering `bound`, or enumerate and store one.
    pub fn load_or_enumerate(
        dir: &Path,
        signature: CubicSignature,
        bound: u64,
        filter: Option<RamifiedFilter>,
    ) -> Result<Self> {
        let name = format!(
            "census-{}-{}.csv",
            signature.name(),
            filter.map_or("all".to_string(), |f| format!("ram{}", f.p))
        );
        let path = dir.join(name);
        if path.exists() {
            let cached = Census::load(&path)?;
            if cached.signature == signature && cached.filter == filter && cached.bound >= bound {
                return Ok(cached.truncate(bound));
            }
        }
        let census = Census::enumerate(signature, bound, filter)?;
        std::fs::create_dir_all(dir).map_err(|e| Error::Cache(e.to_string()))?;
        census.save(&path)?;
        Ok(census)
    }

    /// Discriminant multiset.
    pub fn discriminant_counts(&self) -> BTreeMap<i64, usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.disc).or_insert(0) += 1;
        }
        m
    }
}

/// Slow independent tabulation: characteristic polynomials of small
/// elements (Hunter's bound guarantees every field has one with trace 0 or
/// 1 and small `T_2`), field discriminants by index removal driven by
/// Dedekind's criterion, and isomorphism classes told apart by their
/// splitting at small primes.
pub mod oracle {
    use super::*;

    /// Field discriminant of the ring of a primitive irreducible form, by
    /// removing `p`-power index one step at a time.
    pub fn field_discriminant(f: &BinaryCubicForm) -> i128 {
        maximal_model(f).1
    }

    /// A form for the maximal order together with its discriminant.
    pub fn maximal_model(f: &BinaryCubicForm) -> (BinaryCubicForm, i128) {
        let mut f = *f;
        let mut disc = form_discriminant(&f);
        'outer: loop {
            for (p, e) in factor_u64(disc.unsigned_abs() as u64) {
                if e < 2 || is_maximal_dedekind(&f, p) {
                    continue;
                }
                let pi = p as i64;
                // overring: move the multiple root to infinity, then divide
                let g = if is_zero_mod(&f, p) {
                    BinaryCubicForm::new(f.a / pi, f.b / pi, f.c / pi, f.d / pi)
                } else {
                    let (r, y) = multiple_root_mod_p(&f, p).expect("non-maximal");
                    let g = if y == 0 {
                        f
                    } else {
                        f.substitute([r as i64, -1, 1, 0])
                    };
                    assert!(g.a % (pi * pi) == 0 && g.b % pi == 0);
                    BinaryCubicForm::new(g.a / (pi * pi), g.b / pi, g.c, g.d * pi)
                };
                f = g;
                disc = form_discriminant(&f);
                continue 'outer;
            }
            return (f, disc);
        }
    }

    fn splitting_signature(f: &BinaryCubicForm, disc: i128) -> Vec<u8> {
        crate::arith::small_primes()[..80]
            .iter()
            .filter(|&&q| disc % q as i128 != 0)
            .map(|&q| {
                let q = q as i128;
                let finite = (0..q).filter(|&t| f.eval(t, 1).rem_euclid(q) == 0).count();
                (finite + usize::from(f.a as i128 % q == 0)) as u8
            })
            .collect()
    }

    /// Number of cubic fields for each discriminant with `0 < |D| <= bound`.
    pub fn discriminant_counts(bound: u64) -> BTreeMap<i64, usize> {
        let t2 = 1.0 / 3.0 + (4.0f64 / 3.0).sqrt() * (bound as f64 / 3.0).sqrt();
        let s2 = t2.floor() as i64;
        let s3 = (t2 / 3.0).powf(1.5).floor() as i64;
        let mut seen: BTreeMap<i64, BTreeSet<Vec<u8>>> = BTreeMap::new();
        for trace in [0i64, 1] {
            for c in -s2..=s2 {
                for d in -s3..=s3 {
                    // x^3 - trace x^2 + c x - d
                    let f = BinaryCubicForm::new(1, -trace, c, -d);
                    if !f.is_irreducible() {
                        continue;
                    }
                    let (f, disc) = maximal_model(&f);
                    if disc.unsigned_abs() as u64 > bound {
                        continue;
                    }
                    seen.entry(disc as i64)
                        .or_default()
                        .insert(splitting_signature(&f, disc));
                }
            }
        }
        seen.into_iter().map(|(d, s)| (d, s.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F588: BinaryCubicForm = BinaryCubicForm::new(1, -1, 5, 1);

    #[test]
    fn discriminant_examples() {
        assert_eq!(form_discriminant(&F588), -588);
        assert_eq!(form_discriminant(&BinaryCubicForm::new(1, 1, -2, -1)), 49);
        assert_eq!(form_discriminant(&BinaryCubicForm::new(1, 0, -1, -1)), -23);
    }

    #[test]
    fn enumeration_examples() {
        let discs = |x, s| -> Vec<i64> {
            enumerate_cubic_fields(x, s)
                .unwrap()
                .iter()
                .map(|r| r.disc)
                .collect()
        };
        assert_eq!(discs(25, CubicSignature::Imaginary), vec![-23]);
        assert_eq!(discs(50, CubicSignature::Imaginary), vec![-23, -31, -44]);
        assert_eq!(discs(100, CubicSignature::Real), vec![49, 81]);
        let real = enumerate_cubic_fields(100, CubicSignature::Real).unwrap();
        assert!(real.iter().all(|r| r.cyclic));
    }

    #[test]
    fn maximality_examples() {
        assert_eq!(is_maximal_at(&F588, 2), Ok(true));
        assert_eq!(
            is_maximal_at(&BinaryCubicForm::new(1, 0, 0, -4), 2),
            Ok(false)
        );
        assert_eq!(
            is_maximal_at(&BinaryCubicForm::new(1, 0, -1, -1), 23),
            Ok(true)
        );
        assert_eq!(
            oracle::field_discriminant(&BinaryCubicForm::new(1, 0, 0, -4)),
            -108
        );
    }

    #[test]
    fn classify_examples() {
        let r = classify(&F588, -588).unwrap();
        assert_eq!((r.resolvent_d, r.f, r.cyclic), (-3, 14, false));
        assert_eq!(r.ram_total, BTreeSet::from([2, 7]));
        let r = classify(&BinaryCubicForm::new(1, 1, -2, -1), 49).unwrap();
        assert_eq!((r.resolvent_d, r.f, r.cyclic), (1, 7, true));
        assert_eq!(r.ram_total, BTreeSet::from([7]));
        let r = classify(&BinaryCubicForm::new(1, 0, -1, -1), -23).unwrap();
        assert!(r.ram_total.is_empty());
    }

    #[test]
    fn validity_examples() {
        let k49 = classify(&BinaryCubicForm::new(1, 1, -2, -1), 49).unwrap();
        assert!(is_c_valid(&k49, 7, None));
        let k588 = classify(&F588, -588).unwrap();
        assert!(!is_c_valid(&k588, 7, None));
        assert!(is_c_valid(&k588, 14, Some(-3)));
        let k23 = classify(&BinaryCubicForm::new(1, 0, -1, -1), -23).unwrap();
        assert!(is_c_valid(&k23, 1, Some(-23)));
        assert!(!is_c_valid(&k23, 1, Some(-31)));
    }

    #[test]
    fn matches_monic_oracle() {
        let oracle = oracle::discriminant_counts(2000);
        let mut ours = BTreeMap::new();
        for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
            for r in enumerate_cubic_fields(2001, sig).unwrap() {
                *ours.entry(r.disc).or_insert(0usize) += 1;
            }
        }
        assert_eq!(ours, oracle);
    }

    #[test]
    fn maximality_audit_small() {
        for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
            let audit = maximality_audit(20_000, sig).unwrap();
            assert!(audit.disagreements.is_empty());
            assert!(audit.checks > 0);
            assert!(audit.forms >= enumerate_cubic_fields(20_000, sig).unwrap().len() as u64);
        }
    }

    #[test]
    fn census_invariants() {
        for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
            let recs = enumerate_cubic_fields(200_000, sig).unwrap();
            let mut forms = BTreeSet::new();
            for r in &recs {
                assert!(forms.insert(r.form));
                assert_ne!(valuation(r.disc, 3), 2, "{r:?}");
                assert_eq!(r.disc, r.resolvent_d * (r.f * r.f) as i64);
                if r.cyclic {
                    // f = 3^e * product of primes ≡ 1 mod 3, e in {0, 2}
                    let fac = factor_u64(r.f);
                    for (p, e) in fac {
                        if p == 3 {
                            assert_eq!(e, 2);
                        } else {
                            assert_eq!((p % 3, e), (1, 1));
                        }
                    }
                }
                assert_eq!(canonical_form(&r.form, sig), Some(r.form));
            }
        }
    }

    #[test]
    fn filtered_enumeration_matches_full() {
        for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
            for p in [2u64, 5, 7] {
                let full: Vec<_> = enumerate_cubic_fields(300_000, sig)
                    .unwrap()
                    .into_iter()
                    .filter(|r| r.ram_total.contains(&p))
                    .collect();
                let filtered =
                    enumerate_cubic_fields_filtered(300_000, sig, Some(RamifiedFilter { p }))
                        .unwrap();
                let fs: BTreeSet<_> = full.iter().map(|r| (r.disc, r.form)).collect();
                let gs: BTreeSet<_> = filtered.iter().map(|r| (r.disc, r.form)).collect();
                assert_eq!(
                    fs.difference(&gs).take(5).collect::<Vec<_>>(),
                    gs.difference(&fs).take(5).collect::<Vec<_>>(),
                    "{sig:?} p = {p}"
                );
                assert_eq!(full, filtered);
            }
        }
    }

    #[test]
    fn cache_roundtrip() {
        let census = Census::enumerate(CubicSignature::Imaginary, 3000, None).unwrap();
        let text = census.to_cache_string();
        let back = Census::parse(text.as_bytes()).unwrap();
        assert_eq!(back.records, census.records);
        assert_eq!(back.bound, 3000);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut parts: Vec<String> = lines[1].split(',').map(String::from).collect();
        parts[5] = "1".into();
        lines[1] = parts.join(",");
        assert!(Census::parse(lines.join("\n").as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn maximality_tests_agree(
            a in -30i64..30, b in -30i64..30, c in -30i64..30, d in -30i64..30,
            pi in 0usize..6
        ) {
            let f = BinaryCubicForm::new(a, b, c, d);
            prop_assume!(form_discriminant(&f) != 0);
            let p = [2u64, 3, 5, 7, 11, 13][pi];
            prop_assert_eq!(is_maximal_local(&f, p), is_maximal_dedekind(&f, p));
        }

        #[test]
        fn discriminant_is_invariant(
            a in -20i64..20, b in -20i64..20, c in -20i64..20, d in -20i64..20,
            m in 0usize..20
        ) {
            let f = BinaryCubicForm::new(a, b, c, d);
            let g = small_gl2()[m % small_gl2().len()];
            prop_assert_eq!(form_discriminant(&f.substitute(g)), form_discriminant(&f));
        }
    }
}
