//! Closed-form densities and averages for 3-torsion in ray class groups,
//! and the constants of the `X^{5/6}` correction.
//!
//! First-term quantities are exact rationals; a density such as `3/π²` is
//! carried as [`OverPiSquared`] so that identities between them stay exact.
//! The correction constants use [`Real`] and are computed along two
//! independent routes that must agree.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::arith::{conductor_profile, primes_below, valuation};
use crate::cubicenum::CubicSignature;
use crate::error::{Error, Result};
use crate::rayclass::cl3_plus_closed_form;
use crate::real::{bernoulli_numbers, bits_for_digits, Real};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn qi(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `|Aut(R^3)| = 6` for totally real fields, `|Aut(R ⊕ C)| = 2` otherwise.
pub fn n_i(sig: CubicSignature) -> i64 {
    match sig {
        CubicSignature::Real => 6,
        CubicSignature::Imaginary => 2,
    }
}

/// Local condition on a cubic étale algebra over `Z_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LocalConditionClass {
    /// not totally ramified
    Ntr,
    /// totally ramified
    Tr,
    /// unramified
    Ur,
    /// totally ramified at 3, `81 ∤ Disc`
    Tr3Not81,
    /// totally ramified at 3, `81 | Disc`
    Tr3With81,
    /// totally ramified at 3 with `Disc_3 = 81`
    Disc81,
}

impl LocalConditionClass {
    pub fn tag(self) -> &'static str {
        match self {
            LocalConditionClass::Ntr => "ntr",
            LocalConditionClass::Tr => "tr",
            LocalConditionClass::Ur => "ur",
            LocalConditionClass::Tr3Not81 => "(3)",
            LocalConditionClass::Tr3With81 => "(9)",
            LocalConditionClass::Disc81 => "(81)",
        }
    }

    pub fn is_three_special(self) -> bool {
        matches!(
            self,
            LocalConditionClass::Tr3Not81
                | LocalConditionClass::Tr3With81
                | LocalConditionClass::Disc81
        )
    }
}

/// `sum 1/Disc_p(R) * 1/#Aut(R)` over the algebras in the class.
pub fn local_mass(p: u64, cls: LocalConditionClass) -> Result<BigRational> {
    if cls.is_three_special() != (p == 3 && cls.is_three_special()) {
        return Err(Error::InvalidLocalClass { p, tag: cls.tag() });
    }
    let p = p as i64;
    Ok(match cls {
        LocalConditionClass::Ntr => q(p + 1, p),
        LocalConditionClass::Tr => q(1, p * p),
        LocalConditionClass::Ur => qi(1),
        LocalConditionClass::Tr3Not81 => q(2, 27),
        LocalConditionClass::Tr3With81 => q(1, 27),
        LocalConditionClass::Disc81 => q(2, 81),
    })
}

/// A real number `coeff / π²`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverPiSquared {
    #[serde(serialize_with = "ser_rational")]
    pub coeff: BigRational,
}

fn ser_rational<S: serde::Serializer>(
    r: &BigRational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

impl OverPiSquared {
    pub fn to_f64(&self) -> f64 {
        self.coeff.to_f64().unwrap_or(f64::NAN) / (std::f64::consts::PI * std::f64::consts::PI)
    }
}

impl fmt::Display for OverPiSquared {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})/π²", self.coeff)
    }
}

fn check_sets(
    s: &BTreeSet<u64>,
    s0: &BTreeSet<u64>,
    cls3: Option<LocalConditionClass>,
) -> Result<()> {
    if !s.is_subset(s0) {
        return Err(Error::InconsistentArguments(
            "S must be contained in S0".into(),
        ));
    }
    if let Some(cls) = cls3 {
        if !cls.is_three_special() {
            return Err(Error::InvalidLocalClass {
                p: 3,
                tag: cls.tag(),
            });
        }
        if !s.contains(&3) {
            return Err(Error::InconsistentArguments(
                "a 3-adic class needs 3 in S".into(),
            ));
        }
    }
    Ok(())
}

/// Density of cubic fields totally ramified exactly at `S`, unramified at
/// `S0 \ S`, with an optional finer 3-adic condition, in closed form.
pub fn first_term_density(
    sig: CubicSignature,
    s: &BTreeSet<u64>,
    s0: &BTreeSet<u64>,
    cls3: Option<LocalConditionClass>,
) -> Result<OverPiSquared> {
    check_sets(s, s0, cls3)?;
    let lead = match cls3 {
        None => qi(3),
        Some(LocalConditionClass::Tr3Not81) => qi(2),
        Some(LocalConditionClass::Tr3With81) => qi(1),
        Some(_) => q(2, 3),
    };
    let mut coeff = lead / qi(n_i(sig));
    for &p in s0.difference(s) {
        coeff *= q(p as i64, p as i64 + 1);
    }
    for &p in s {
        coeff *= q(1, p as i64 * (p as i64 + 1));
    }
    Ok(OverPiSquared { coeff })
}

/// The same density from the local mass formula
/// `1/(2 n_i) * prod_p ((p-1)/p * mass_p)`, after dividing each local
/// factor by the generic one `1 - p^{-2}` whose product is `6/π²`.
pub fn mass_formula_density(
    sig: CubicSignature,
    s: &BTreeSet<u64>,
    s0: &BTreeSet<u64>,
    cls3: Option<LocalConditionClass>,
) -> Result<OverPiSquared> {
    check_sets(s, s0, cls3)?;
    let mut coeff = q(6, 2 * n_i(sig));
    for &p in s0 {
        let cls = if !s.contains(&p) {
            LocalConditionClass::Ur
        } else if p == 3 && cls3.is_some() {
            cls3.unwrap()
        } else {
            LocalConditionClass::Tr
        };
        let pi = p as i64;
        let local = q(pi - 1, pi) * local_mass(p, cls)?;
        let generic = q(pi - 1, pi) * local_mass(p, LocalConditionClass::Ntr)?;
        coeff *= local / generic;
    }
    Ok(OverPiSquared { coeff })
}

/// Density of fundamental discriminants of one sign coprime to `c`.
pub fn coprime_field_density(c: u64) -> OverPiSquared {
    let mut coeff = qi(3);
    for p in conductor_profile(c).primes {
        coeff *= q(p as i64, p as i64 + 1);
    }
    OverPiSquared { coeff }
}

fn conductor_product(c: u64) -> BigRational {
    conductor_profile(c)
        .primes
        .iter()
        .map(|&p| qi(1) + q(p as i64, p as i64 + 1))
        .fold(qi(1), |a, b| a * b)
}

/// Average size of the minus part over all quadratic fields of one sign.
pub fn avg_minus(sig: CubicSignature, c: u64) -> BigRational {
    let n = n_i(sig);
    let coeff = match valuation(c as i64, 3) {
        0 => q(2, n),
        1 => q(12, 7 * n),
        _ => q(30, 7 * n),
    };
    qi(1) + coeff * conductor_product(c)
}

/// Average of `#Cl_3(K, c)`: the constant plus part times the minus average.
pub fn avg_total(sig: CubicSignature, c: u64) -> BigRational {
    qi(cl3_plus_closed_form(&conductor_profile(c)) as i64) * avg_minus(sig, c)
}

/// The three-case display for the average of `#Cl_3(K, c)`, evaluated as
/// printed, with `m` counting the primes `≡ 1 mod 3`.
pub fn avg_total_display(sig: CubicSignature, c: u64) -> BigRational {
    let prof = conductor_profile(c);
    let m = prof.m1;
    let real = sig == CubicSignature::Real;
    let (power, coeff) = match prof.k {
        0 => (m, if real { q(1, 3) } else { qi(1) }),
        1 => (m, if real { q(2, 7) } else { q(6, 7) }),
        _ => (m + 1, if real { q(5, 7) } else { q(15, 7) }),
    };
    qi(3i64.pow(power)) * (qi(1) + coeff * conductor_product(c))
}

/// Average of `#Cl_3(K, c)` over fields with discriminant coprime to `c`:
/// plus part times the coprime minus average.
pub fn avg_total_coprime(sig: CubicSignature, c: u64) -> BigRational {
    let prof = conductor_profile(c);
    let two_n = qi(1i64 << prof.n);
    let n = qi(n_i(sig));
    let minus = match prof.k {
        0 => qi(1) + qi(2) * two_n / n,
        1 => qi(1) + two_n / n,
        _ => qi(1) + qi(3) * two_n / n,
    };
    qi(cl3_plus_closed_form(&prof) as i64) * minus
}

/// The three-case display for the coprime average, evaluated as printed.
pub fn avg_total_coprime_display(sig: CubicSignature, c: u64) -> BigRational {
    let prof = conductor_profile(c);
    let (m, n) = (prof.m1, prof.n as i64);
    let pow2 = |e: i64| if e >= 0 { qi(1i64 << e) } else { q(1, 2) };
    let real = sig == CubicSignature::Real;
    match (prof.k, real) {
        (0, true) => qi(3i64.pow(m)) * (qi(1) + pow2(n) / qi(3)),
        (1, true) => qi(3i64.pow(m)) * (qi(1) + pow2(n - 1) / qi(3)),
        (_, true) => qi(3i64.pow(m + 1)) * (qi(1) + pow2(n - 1)),
        (0, false) => qi(3i64.pow(m)) * (qi(1) + pow2(n)),
        (1, false) => qi(3i64.pow(m)) * (qi(1) + pow2(n - 1)),
        (_, false) => qi(3i64.pow(m + 1)) * (qi(1) + qi(3) * pow2(n - 1)),
    }
}

/// Lower bound for the proportion of fields with trivial `Cl_3(K, c)`,
/// from `avg >= P + 3(1 - P)`.
pub fn proportion_lower_bound(sig: CubicSignature, c: u64) -> Result<BigRational> {
    if valuation(c as i64, 3) >= 2 {
        return Err(Error::Unsupported(format!(
            "proportion bound needs 9 ∤ c, got c = {c}"
        )));
    }
    Ok((qi(3) - avg_total_display(sig, c)) / qi(2))
}

/// `ζ(2/3)`, `Γ(1/3)`, `Γ(2/3)`, `(2π)^{1/3}` and the two leading
/// coefficients of the `X^{5/6}` term.
#[derive(Debug, Clone)]
pub struct SecondTermConstants {
    pub digits: u32,
    pub zeta23: Real,
    pub gamma13: Real,
    pub gamma23: Real,
    pub twopi13: Real,
    pub c2_real: Real,
    pub c2_imag: Real,
    /// Decimal digits on which the two evaluation routes agree (minimum
    /// over all the constants).
    pub route_agreement: f64,
}

impl SecondTermConstants {
    pub fn c2(&self, sig: CubicSignature) -> &Real {
        match sig {
            CubicSignature::Real => &self.c2_real,
            CubicSignature::Imaginary => &self.c2_imag,
        }
    }

    pub fn prec(&self) -> u32 {
        self.zeta23.prec()
    }

    /// `ζ(2) = π²/6`.
    pub fn zeta2(&self) -> Real {
        let pi = Real::pi(self.prec());
        (&pi * &pi).div_int(6)
    }
}

/// `ζ(s)`, `0 < s < 1`, from the alternating series `η(s)` summed with
/// the Cohen–Rodriguez Villegas–Zagier weights and `ζ = η / (1 - 2^{1-s})`.
pub fn zeta_via_eta(s: &Real) -> Real {
    let prec = s.prec();
    let n = (prec as f64 * std::f64::consts::LN_2 / (3.0 + 8f64.sqrt()).ln()).ceil() as i64 + 4;
    let one = Real::from_int(1, prec);
    let base = &Real::from_int(3, prec) + &Real::from_int(8, prec).sqrt();
    let d = base.powi(n as u32);
    let d = (&d + &d.recip()).shr(1);
    let mut b = BigInt::from(-1);
    let mut c = -&d;
    let mut sum = Real::zero(prec);
    for k in 0..n {
        c = &Real::from_int(b.clone(), prec) - &c;
        let a_k = (-(s * &Real::from_int(k + 1, prec).ln())).exp();
        sum = &sum + &(&c * &a_k);
        // b_{k+1} = 2 (k+n)(k-n) b_k / ((2k+1)(k+1)), always an integer
        let num = &b * BigInt::from(2 * (k + n) * (k - n));
        let den = BigInt::from((2 * k + 1) * (k + 1));
        debug_assert!((&num % &den).is_zero());
        b = num / den;
    }
    let eta = &sum / &d;
    let two = Real::from_int(2, prec);
    let factor = &one - &two.pow(&(&one - s));
    &eta / &factor
}

/// `ζ(s)`, `s ≠ 1`, by Euler–Maclaurin summation.
pub fn zeta_euler_maclaurin(s: &Real, digits: u32) -> Real {
    let prec = s.prec();
    let k_max = digits as usize + 10;
    let n = k_max as i64 + 10;
    let one = Real::from_int(1, prec);
    let bern = bernoulli_numbers(2 * k_max);
    let npow = |k: i64, e: &Real| Real::from_int(k, prec).pow(e);
    let neg_s = -s;
    let mut sum = Real::zero(prec);
    for k in 1..n {
        sum = &sum + &npow(k, &neg_s);
    }
    let big_n = Real::from_int(n, prec);
    let n_neg_s = npow(n, &neg_s);
    sum = &sum + &(&(&n_neg_s * &big_n) / &(s - &one));
    sum = &sum + &n_neg_s.shr(1);
    // rising factorial s (s+1) ... (s+2k-2) over (2k)!, times N^{-s-2k+1}
    let mut rising = s.clone();
    let mut fact = BigInt::from(2);
    let mut npower = &n_neg_s / &big_n;
    let n2 = &big_n * &big_n;
    for k in 1..=k_max {
        let b2k = Real::from_rational(&bern[2 * k], prec);
        let term = &(&b2k * &rising) * &npower;
        sum = &sum + &(&term / &Real::from_int(fact.clone(), prec));
        let kk = k as i64;
        rising = &rising * &(s + &Real::from_int(2 * kk - 1, prec));
        rising = &rising * &(s + &Real::from_int(2 * kk, prec));
        fact *= BigInt::from((2 * kk + 1) * (2 * kk + 2));
        npower = &npower / &n2;
    }
    sum
}

/// `Γ(x)`, `x > 0`, by Stirling's series after shifting the argument up.
pub fn gamma_stirling(x: &Real) -> Real {
    let prec = x.prec();
    let shift = (prec / 6 + 10) as i64;
    let w = x + &Real::from_int(shift, prec);
    let bern = bernoulli_numbers(2 * (3 * shift as usize + 10));
    let half = Real::from_ratio(1, 2, prec);
    let ln_w = w.ln();
    let two_pi = Real::pi(prec).shl(1);
    let mut lg = &(&(&w - &half) * &ln_w) - &w;
    lg = &lg + &two_pi.ln().shr(1);
    let w2 = &w * &w;
    let mut wpow = w.clone();
    for k in 1..bern.len() / 2 {
        let coeff = &bern[2 * k] / BigRational::from_integer(BigInt::from(2 * k * (2 * k - 1)));
        let term = &Real::from_rational(&coeff, prec) / &wpow;
        if term.is_negligible() {
            break;
        }
        lg = &lg + &term;
        wpow = &wpow * &w2;
    }
    let mut denom = Real::from_int(1, prec);
    for j in 0..shift {
        denom = &denom * &(x + &Real::from_int(j, prec));
    }
    &lg.exp() / &denom
}

/// `Γ(s)`, `0 < s <= 1`, from Kummer's series for the lower incomplete
/// gamma function at a point `T` where the upper tail is negligible.
pub fn gamma_kummer(s: &Real) -> Real {
    let prec = s.prec();
    let t_val = ((prec + 16) as f64 * std::f64::consts::LN_2).ceil() as i64 + 2;
    let work = prec + (t_val as f64 * std::f64::consts::LOG2_E).ceil() as u32 + 32;
    let s_w = s.with_prec(work);
    let t = Real::from_int(t_val, work);
    let mut term = Real::from_int(1, work) / &s_w;
    let mut sum = term.clone();
    let mut k = 1i64;
    loop {
        term = &(&term * &t) / &(&s_w + &Real::from_int(k, work));
        sum = &sum + &term;
        if k > t_val && term.is_negligible() {
            break;
        }
        k += 1;
    }
    let prefactor = (&(&s_w * &t.ln()) - &t).exp();
    (&prefactor * &sum).with_prec(prec)
}

fn c2_from(zeta: &Real, g13: &Real, g23: &Real, twopi13: &Real) -> (Real, Real) {
    let prec = zeta.prec();
    let core = &(&(zeta * g13) * twopi13) / g23;
    let sqrt3 = Real::from_int(3, prec).sqrt();
    ((&sqrt3 * &core).div_int(30), core.div_int(10))
}

/// Evaluate the correction constants to `digits` significant digits.
pub fn second_term_constants(digits: u32) -> Result<SecondTermConstants> {
    if digits < 10 {
        return Err(Error::InconsistentArguments(format!(
            "precision must be at least 10 digits, got {digits}"
        )));
    }
    let prec = bits_for_digits(digits + 8);
    let s = Real::from_ratio(2, 3, prec);
    let third = Real::from_ratio(1, 3, prec);
    let zeta_a = zeta_via_eta(&s);
    let zeta_b = zeta_euler_maclaurin(&s, digits + 8);
    let g13_a = gamma_stirling(&third);
    let g13_b = gamma_kummer(&third);
    let g23_a = gamma_stirling(&s);
    let g23_b = gamma_kummer(&s);
    let twopi13 = Real::pi(prec).shl(1).cbrt();
    let (c2r_a, c2i_a) = c2_from(&zeta_a, &g13_a, &g23_a, &twopi13);
    let (c2r_b, c2i_b) = c2_from(&zeta_b, &g13_b, &g23_b, &twopi13);
    let agreement = [
        zeta_a.agreement_digits(&zeta_b),
        g13_a.agreement_digits(&g13_b),
        g23_a.agreement_digits(&g23_b),
        c2r_a.agreement_digits(&c2r_b),
        c2i_a.agreement_digits(&c2i_b),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    if agreement < digits as f64 {
        return Err(Error::PrecisionNotReached {
            requested: digits,
            achieved: agreement.floor().max(0.0) as u32,
        });
    }
    Ok(SecondTermConstants {
        digits,
        zeta23: zeta_a,
        gamma13: g13_a,
        gamma23: g23_a,
        twopi13,
        c2_real: c2r_a,
        c2_imag: c2i_a,
        route_agreement: agreement,
    })
}

/// `prod_{p <= cutoff} (1 - (p^{1/3} + 1)/(p(p+1)))` with a bound on the
/// relative error of truncating.
#[derive(Debug, Clone)]
pub struct EulerProduct {
    pub cutoff: u64,
    pub value: Real,
    /// `exp(3 cutoff^{-2/3}) - 1`, from `|log prod_{p > P}| <= sum_{n > P}
    /// 2 n^{-5/3} <= 3 P^{-2/3}`.
    pub tail_bound: f64,
}

pub fn second_term_euler_product(cutoff: u64, prec: u32) -> EulerProduct {
    let one = Real::from_int(1, prec);
    let mut value = one.clone();
    for p in primes_below(cutoff as usize + 1) {
        let pi = p as i64;
        let cube = Real::from_int(pi, prec).cbrt();
        let local = &one - &(&(&cube + &one) / &Real::from_int(pi * (pi + 1), prec));
        value = &value * &local;
    }
    let tail_bound = (3.0 * (cutoff as f64).powf(-2.0 / 3.0)).exp_m1();
    EulerProduct {
        cutoff,
        value,
        tail_bound,
    }
}

/// Per-prime conductor factor as written for the average:
/// `1 + p(1 - p^{1/3}) / (1 - p(p+1)/(p^{1/3} + 1))`.
pub fn conductor_factor_direct(p: u64, prec: u32) -> Real {
    let one = Real::from_int(1, prec);
    let pi = p as i64;
    let r = Real::from_int(pi, prec).cbrt();
    let num = Real::from_int(pi, prec) * (&one - &r);
    let den = &one - &(&Real::from_int(pi * (pi + 1), prec) / &(&r + &one));
    &one + &(&num / &den)
}

/// The same factor as a sum over `S ⊆ {p}` of the per-set correction
/// coefficients scaled by `p^{5/3}`:
/// `1 + p^{5/3} / (p(p+1)) * (1 - p^{-2/3}) / (1 - (p^{1/3}+1)/(p(p+1)))`.
pub fn conductor_factor_subset(p: u64, prec: u32) -> Real {
    let one = Real::from_int(1, prec);
    let pi = p as i64;
    let r = Real::from_int(pi, prec).cbrt();
    let pp1 = Real::from_int(pi * (pi + 1), prec);
    let p53 = &Real::from_int(pi, prec) * &(&r * &r);
    let inner = &(&one - &(&r * &r).recip()) / &(&one - &(&(&r + &one) / &pp1));
    &one + &(&(&p53 / &pp1) * &inner)
}

/// Per-set coefficient `1/(p(p+1)) * (1 - p^{-2/3}) / (1 - (p^{1/3}+1)/(p(p+1)))`.
fn ramified_correction(p: u64, prec: u32) -> Real {
    let one = Real::from_int(1, prec);
    let pi = p as i64;
    let r = Real::from_int(pi, prec).cbrt();
    let pp1 = Real::from_int(pi * (pi + 1), prec);
    let inner = &(&one - &(&r * &r).recip()) / &(&one - &(&(&r + &one) / &pp1));
    &inner / &pp1
}

#[derive(Debug, Clone)]
pub struct SecondTermValue {
    pub value: Real,
    pub tail_bound: f64,
}

/// `X^{5/6}` coefficient of `sum #Cl_3^-(K, c)` per unit of the factor 2:
/// `c2/ζ(2) * prod_p (...) * prod_{p | c} factor(p)`, for `3 ∤ c`.
pub fn second_term_total(
    sig: CubicSignature,
    c: u64,
    cutoff: u64,
    tolerance: f64,
    consts: &SecondTermConstants,
) -> Result<SecondTermValue> {
    if c.is_multiple_of(3) {
        return Err(Error::Unsupported(format!(
            "the correction term needs 3 ∤ c, got c = {c}"
        )));
    }
    if cutoff < 100 {
        return Err(Error::InconsistentArguments(format!(
            "prime cutoff must be at least 100, got {cutoff}"
        )));
    }
    let prec = consts.prec();
    let euler = second_term_euler_product(cutoff, prec);
    if euler.tail_bound > tolerance {
        return Err(Error::TailBoundExceeded {
            bound: euler.tail_bound,
            tolerance,
        });
    }
    let mut value = &(consts.c2(sig) / &consts.zeta2()) * &euler.value;
    for p in conductor_profile(c).primes {
        let direct = conductor_factor_direct(p, prec);
        let subset = conductor_factor_subset(p, prec);
        if direct.agreement_digits(&subset) < 12.0 {
            return Err(Error::Internal(format!(
                "conductor factor forms disagree at p = {p}"
            )));
        }
        value = &value * &direct;
    }
    Ok(SecondTermValue {
        value,
        tail_bound: euler.tail_bound,
    })
}

/// Both main terms for the number of fields totally ramified exactly at
/// `S` (`3 ∉ S`) with `0 < ±Disc < X`.
pub fn predicted_count(
    sig: CubicSignature,
    s: &BTreeSet<u64>,
    x: f64,
    consts: &SecondTermConstants,
    euler: &EulerProduct,
) -> Result<(f64, f64)> {
    if s.contains(&3) {
        return Err(Error::InconsistentArguments(
            "the two-term count needs 3 ∉ S".into(),
        ));
    }
    let first = first_term_density(sig, s, s, None)?.to_f64() * x;
    let prec = consts.prec();
    let mut coeff = &(consts.c2(sig) / &consts.zeta2()) * &euler.value.with_prec(prec);
    for &p in s {
        coeff = &coeff * &ramified_correction(p, prec);
    }
    Ok((first, coeff.to_f64() * x.powf(5.0 / 6.0)))
}

/// Predicted average of `#Cl_3(K, c)` over the `count` fundamental
/// discriminants `0 < ±d < X`, with and without the correction term
/// (`3 ∤ c`).
pub fn predicted_average(
    sig: CubicSignature,
    c: u64,
    x: f64,
    count: u64,
    second: &SecondTermValue,
) -> (f64, f64) {
    let plus = cl3_plus_closed_form(&conductor_profile(c)) as f64;
    let first = avg_total(sig, c).to_f64().unwrap_or(f64::NAN);
    let correction = plus * 2.0 * second.value.to_f64() * x.powf(5.0 / 6.0) / count as f64;
    (first, first + correction)
}

/// Render a rational together with its decimal value.
pub fn describe_rational(r: &BigRational) -> String {
    let approx = r.to_f64().unwrap_or(f64::NAN);
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{r} ≈ {approx:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use CubicSignature::{Imaginary, Real as R};

    fn set(ps: &[u64]) -> BTreeSet<u64> {
        ps.iter().copied().collect()
    }

    #[test]
    fn local_mass_table() {
        assert_eq!(local_mass(2, LocalConditionClass::Ntr).unwrap(), q(3, 2));
        assert_eq!(local_mass(5, LocalConditionClass::Tr).unwrap(), q(1, 25));
        assert_eq!(
            local_mass(3, LocalConditionClass::Disc81).unwrap(),
            q(2, 81)
        );
        assert!(local_mass(5, LocalConditionClass::Tr3Not81).is_err());
    }

    #[test]
    fn first_term_examples() {
        let d = first_term_density(Imaginary, &set(&[]), &set(&[]), None).unwrap();
        assert_eq!(d.coeff, q(3, 2));
        let d = first_term_density(R, &set(&[7]), &set(&[7]), None).unwrap();
        assert_eq!(d.coeff, q(1, 112));
        let d = first_term_density(
            Imaginary,
            &set(&[3]),
            &set(&[3]),
            Some(LocalConditionClass::Tr3Not81),
        )
        .unwrap();
        assert_eq!(d.coeff, q(1, 12));
        assert!(first_term_density(R, &set(&[5]), &set(&[]), None).is_err());
        assert!(first_term_density(
            R,
            &set(&[5]),
            &set(&[5]),
            Some(LocalConditionClass::Tr3With81)
        )
        .is_err());
    }

    #[test]
    fn average_examples() {
        assert_eq!(avg_minus(Imaginary, 1), qi(2));
        assert_eq!(avg_minus(R, 1), q(4, 3));
        assert_eq!(avg_minus(Imaginary, 3), q(5, 2));
        assert_eq!(avg_total(R, 1), q(4, 3));
        assert_eq!(avg_total(Imaginary, 1), qi(2));
        assert_eq!(avg_total(Imaginary, 7), q(69, 8));
        assert_eq!(avg_total(Imaginary, 9), q(57, 4));
        assert_eq!(avg_total_coprime(R, 5), q(5, 3));
        assert_eq!(avg_total_coprime(Imaginary, 5), qi(3));
        assert_eq!(avg_total_coprime(R, 35), qi(7));
    }

    #[test]
    fn density_and_proportion_examples() {
        assert_eq!(coprime_field_density(1).coeff, qi(3));
        assert_eq!(coprime_field_density(2).coeff, qi(2));
        assert_eq!(coprime_field_density(6).coeff, q(3, 2));
        assert_eq!(proportion_lower_bound(R, 2).unwrap(), q(13, 18));
        assert_eq!(proportion_lower_bound(Imaginary, 2).unwrap(), q(1, 6));
        assert_eq!(proportion_lower_bound(R, 3).unwrap(), q(3, 4));
        assert!(proportion_lower_bound(R, 9).is_err());
        for p in [2u64, 5, 11, 17] {
            assert!(proportion_lower_bound(R, p).unwrap() >= q(1, 2));
            assert!(proportion_lower_bound(R, 3 * p).unwrap() >= q(1, 2));
        }
    }

    #[test]
    fn averages_match_displays() {
        for c in 1..=200u64 {
            for sig in [R, Imaginary] {
                assert_eq!(avg_total(sig, c), avg_total_display(sig, c), "c = {c}");
                if c <= 100 {
                    assert_eq!(
                        avg_total_coprime(sig, c),
                        avg_total_coprime_display(sig, c),
                        "c = {c}"
                    );
                }
            }
        }
    }

    /// Minus average rebuilt as a subset sum of field densities, each
    /// scaled by the discriminant stretch `prod p^2` (and 9 for the `(9)`
    /// class), over the density of fundamental discriminants.
    fn avg_minus_from_densities(sig: CubicSignature, c: u64) -> BigRational {
        let prof = conductor_profile(c);
        let others: Vec<u64> = prof.primes.iter().copied().filter(|&p| p != 3).collect();
        let mut total = BigRational::zero();
        for mask in 0..(1u32 << others.len()) {
            let s: BTreeSet<u64> = (0..others.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| others[i])
                .collect();
            let stretch = s.iter().fold(qi(1), |a, &p| a * qi((p * p) as i64));
            total += first_term_density(sig, &s, &s, None).unwrap().coeff * &stretch;
            if prof.k >= 1 {
                let mut s3 = s.clone();
                s3.insert(3);
                let stretch3 = &stretch * qi(9);
                let d =
                    first_term_density(sig, &s3, &s3, Some(LocalConditionClass::Tr3Not81)).unwrap();
                total += d.coeff * &stretch3;
                if prof.k >= 2 {
                    let d = first_term_density(sig, &s3, &s3, Some(LocalConditionClass::Tr3With81))
                        .unwrap();
                    total += d.coeff * &stretch3 * qi(9);
                }
            }
        }
        qi(1) + qi(2) * total / qi(3)
    }

    #[test]
    fn minus_average_from_densities() {
        for c in 1..=120u64 {
            for sig in [R, Imaginary] {
                assert_eq!(
                    avg_minus(sig, c),
                    avg_minus_from_densities(sig, c),
                    "c = {c}"
                );
            }
        }
    }

    #[test]
    fn second_term_constant_routes() {
        let k = second_term_constants(30).unwrap();
        assert!(k.route_agreement >= 30.0, "{}", k.route_agreement);
        assert!(k.zeta23.is_negative());
        assert!(k.c2_imag.is_negative() && k.c2_real.is_negative());
        assert!(k.gamma13.to_decimal(15).starts_with("2.678938534707747"));
        assert!(k.gamma23.to_decimal(15).starts_with("1.354117939426400"));
        let sqrt3_over3 = Real::from_int(3, k.prec()).sqrt().div_int(3);
        assert!((&k.c2_real / &k.c2_imag).agreement_digits(&sqrt3_over3) > 30.0);
        // reflection: Γ(1/3) Γ(2/3) = 2π/√3
        let prec = k.prec();
        let refl = &Real::pi(prec).shl(1) / &Real::from_int(3, prec).sqrt();
        assert!((&k.gamma13 * &k.gamma23).agreement_digits(&refl) > 30.0);
        // ζ(2) from the Euler–Maclaurin route
        let z2 = zeta_euler_maclaurin(&Real::from_int(2, prec), 30);
        assert!(z2.agreement_digits(&k.zeta2()) > 30.0);
        assert!(second_term_constants(5).is_err());
    }

    #[test]
    fn conductor_factor_forms_agree() {
        let prec = bits_for_digits(30);
        for p in [2u64, 5, 7, 11, 13] {
            let a = conductor_factor_direct(p, prec);
            let b = conductor_factor_subset(p, prec);
            assert!(a.agreement_digits(&b) >= 12.0, "p = {p}");
        }
    }

    #[test]
    fn euler_product_converges() {
        let prec = bits_for_digits(20);
        let small = second_term_euler_product(100, prec);
        let large = second_term_euler_product(10_000, prec);
        let rel = ((&small.value - &large.value).abs() / large.value.clone()).to_f64();
        assert!(rel <= small.tail_bound, "{rel} > {}", small.tail_bound);
        assert!(large.tail_bound < small.tail_bound);
    }

    #[test]
    fn second_term_and_predictions() {
        let k = second_term_constants(20).unwrap();
        let base = second_term_total(Imaginary, 1, 1000, 1.0, &k).unwrap();
        let euler = second_term_euler_product(1000, k.prec());
        let plain = &(&k.c2_imag / &k.zeta2()) * &euler.value;
        assert!(base.value.agreement_digits(&plain) > 20.0);
        assert!(second_term_total(Imaginary, 3, 1000, 1.0, &k).is_err());
        assert!(matches!(
            second_term_total(Imaginary, 1, 1000, 1e-9, &k),
            Err(Error::TailBoundExceeded { .. })
        ));
        let (first, _) = predicted_count(Imaginary, &set(&[]), 1e6, &k, &euler).unwrap();
        let want = 3.0e6 / (2.0 * std::f64::consts::PI.powi(2));
        assert!((first - want).abs() < 1e-6);
        assert_eq!(
            predicted_count(R, &set(&[5]), 0.0, &k, &euler).unwrap(),
            (0.0, 0.0)
        );
        for s in [set(&[]), set(&[2]), set(&[5, 7]), set(&[2, 11, 13])] {
            for sig in [R, Imaginary] {
                let (_, second) = predicted_count(sig, &s, 1e6, &k, &euler).unwrap();
                assert!(second < 0.0);
            }
        }
        assert!(predicted_count(R, &set(&[3]), 1e6, &k, &euler).is_err());
    }

    fn arb_config() -> impl Strategy<
        Value = (
            CubicSignature,
            BTreeSet<u64>,
            BTreeSet<u64>,
            Option<LocalConditionClass>,
        ),
    > {
        let primes = [2u64, 3, 5, 7, 11, 13];
        (
            any::<bool>(),
            proptest::collection::vec(0usize..6, 0..4),
            proptest::collection::vec(0usize..6, 0..4),
            0usize..4,
        )
            .prop_map(move |(real, s, extra, tag)| {
                let sig = if real { R } else { Imaginary };
                let s: BTreeSet<u64> = s.into_iter().map(|i| primes[i]).collect();
                let mut s0 = s.clone();
                s0.extend(extra.into_iter().map(|i| primes[i]));
                let cls3 = if s.contains(&3) {
                    [
                        None,
                        Some(LocalConditionClass::Tr3Not81),
                        Some(LocalConditionClass::Tr3With81),
                        Some(LocalConditionClass::Disc81),
                    ][tag]
                } else {
                    None
                };
                (sig, s, s0, cls3)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn mass_formula_matches_closed_forms((sig, s, s0, cls3) in arb_config()) {
            prop_assert_eq!(
                first_term_density(sig, &s, &s0, cls3).unwrap(),
                mass_formula_density(sig, &s, &s0, cls3).unwrap()
            );
        }
    }
}
