//! Counting `c`-valid cubic fields against 3-torsion of ray class groups.
//!
//! For a quadratic field of discriminant `d` and conductor `c`, `A` counts
//! cyclic cubic fields with discriminant dividing `c²` and `B` counts
//! non-cyclic cubic fields with discriminant `d f²`, `f | c`. The ray class
//! side then satisfies `#Cl_3^+ = 2A + 1` and `#Cl_3^- = 2B + 1`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{conductor_profile, fundamental_discriminants, gcd};
use crate::cubicenum::{Census, CubicFieldRecord, CubicSignature};
use crate::error::{Error, Result};
use crate::quadfield::QuadraticField;
use crate::rayclass::{cl3_plus_closed_form, ray_class_group};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidityCount {
    pub d: i64,
    pub c: u64,
    /// cyclic `c`-valid fields
    pub a: u64,
    /// non-cyclic `c`-valid fields with resolvent discriminant `d`
    pub b: u64,
}

/// Several censuses consulted together: full ones per signature and ones
/// restricted to fields totally ramified at a given prime, which reach
/// much further for the same effort.
#[derive(Debug, Default)]
pub struct CensusSet {
    pub censuses: Vec<Census>,
}

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|k| n.is_multiple_of(*k)).collect()
}

impl CensusSet {
    pub fn new(censuses: Vec<Census>) -> Self {
        CensusSet { censuses }
    }

    pub fn push(&mut self, census: Census) {
        self.censuses.push(census);
    }

    /// Best census holding every field of the given sign with `|D| < need`
    /// whose `f` is a multiple of `f`.
    fn covering(&self, sig: CubicSignature, f: u64, need: u64) -> Result<&Census> {
        let usable =
            |c: &&Census| c.signature == sig && c.filter.is_none_or(|r| f.is_multiple_of(r.p));
        self.censuses
            .iter()
            .filter(usable)
            .filter(|c| c.bound >= need)
            .min_by_key(|c| c.records.len())
            .ok_or_else(|| Error::CensusBoundInsufficient {
                required: need,
                covered: self
                    .censuses
                    .iter()
                    .filter(usable)
                    .map(|c| c.bound)
                    .max()
                    .unwrap_or(0),
            })
    }

    /// Cyclic fields with discriminant dividing `c²`. All of them are
    /// totally real with discriminant at most `c²`.
    pub fn count_cyclic(&self, c: u64) -> Result<u64> {
        let need = c * c + 1;
        let census = self
            .censuses
            .iter()
            .filter(|k| k.signature == CubicSignature::Real && k.filter.is_none())
            .find(|k| k.bound >= need)
            .ok_or_else(|| Error::CensusBoundInsufficient {
                required: need,
                covered: self
                    .censuses
                    .iter()
                    .filter(|k| k.signature == CubicSignature::Real && k.filter.is_none())
                    .map(|k| k.bound)
                    .max()
                    .unwrap_or(0),
            })?;
        Ok(census
            .cyclic()
            .filter(|r| (c as u128 * c as u128).is_multiple_of(r.disc as u128))
            .count() as u64)
    }

    /// Records with resolvent `d` and `f | c`, each taken from a census
    /// that is complete for its `f`.
    pub fn valid_noncyclic(&self, d: i64, c: u64) -> Result<Vec<&CubicFieldRecord>> {
        let sig = signature_of(d);
        let mut out = Vec::new();
        for f in divisors(c) {
            let need = d.unsigned_abs() * f * f + 1;
            let census = self.covering(sig, f, need)?;
            out.extend(census.with_resolvent(d).filter(|r| r.f == f));
        }
        Ok(out)
    }

    /// `B(d)` for every fundamental `d` of one sign with `|d| <= x` and
    /// `B(d) > 0`, read off the censuses in one pass per divisor of `c`.
    pub fn minus_counts(&self, sig: CubicSignature, x: u64, c: u64) -> Result<BTreeMap<i64, u64>> {
        let mut counts = BTreeMap::new();
        for f in divisors(c) {
            let census = self.covering(sig, f, x * f * f + 1)?;
            for r in &census.records {
                if !r.cyclic && r.f == f && r.resolvent_d.unsigned_abs() <= x {
                    *counts.entry(r.resolvent_d).or_insert(0) += 1;
                }
            }
        }
        Ok(counts)
    }
}

pub fn signature_of(d: i64) -> CubicSignature {
    if d > 0 {
        CubicSignature::Real
    } else {
        CubicSignature::Imaginary
    }
}

pub fn count_c_valid(d: i64, c: u64, set: &CensusSet) -> Result<ValidityCount> {
    if c == 0 {
        return Err(Error::ZeroInput);
    }
    if !crate::arith::is_fundamental_discriminant(d) {
        return Err(Error::NotFundamental(d));
    }
    let a = set.count_cyclic(c)?;
    let b = set.valid_noncyclic(d, c)?.len() as u64;
    Ok(ValidityCount { d, c, a, b })
}

/// Ray class invariants next to the cubic field counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub d: i64,
    pub c: u64,
    pub h: u64,
    pub invariants: Vec<u64>,
    pub cl3: u64,
    pub cl3_plus: u64,
    pub cl3_minus: u64,
    pub a: u64,
    pub b: u64,
    pub pass: bool,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "d,c,h,invariants,cl3,cl3_plus,cl3_minus,A,B,pass";

    pub fn to_csv(&self) -> String {
        let inv: Vec<String> = self.invariants.iter().map(u64::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.d,
            self.c,
            self.h,
            inv.join(";"),
            self.cl3,
            self.cl3_plus,
            self.cl3_minus,
            self.a,
            self.b,
            self.pass
        )
    }
}

/// Check `#Cl_3^+ = 2A+1`, `#Cl_3^- = 2B+1` and `#Cl_3 = (2A+1)(2B+1)`.
/// A mismatch is reported in the row, not as an error.
pub fn verify_field(d: i64, c: u64, set: &CensusSet) -> Result<SweepRow> {
    let count = count_c_valid(d, c, set)?;
    let k = QuadraticField::new(d)?;
    let report = ray_class_group(&k, c)?;
    let (a, b) = (count.a, count.b);
    let pass = report.cl3_plus == 2 * a + 1
        && report.cl3_minus == 2 * b + 1
        && report.cl3 == (2 * a + 1) * (2 * b + 1);
    Ok(SweepRow {
        d,
        c,
        h: k.class_number(),
        invariants: report.group.invariants.clone(),
        cl3: report.cl3,
        cl3_plus: report.cl3_plus,
        cl3_minus: report.cl3_minus,
        a,
        b,
        pass,
    })
}

/// Non-trivial `c`-valid pairs, each pair with both members non-trivial
/// counted twice, so that `2 * pairs + 1 = (2A+1)(2B+1)`.
pub fn pair_count(a: u64, b: u64) -> u64 {
    2 * a * b + a + b
}

/// Fundamental discriminants of one sign with `|d| <= x`, optionally only
/// those coprime to `c`.
pub fn discriminants_in_range(sig: CubicSignature, x: u64, c: u64, coprime: bool) -> Vec<i64> {
    fundamental_discriminants(x + 1, sig == CubicSignature::Imaginary)
        .into_iter()
        .filter(|&d| !coprime || gcd(d, c as i64) == 1)
        .collect()
}

/// `verify_field` over a range of discriminants, in order of `|d|`.
pub fn sweep(
    sig: CubicSignature,
    x: u64,
    c: u64,
    coprime: bool,
    set: &CensusSet,
) -> Result<Vec<SweepRow>> {
    discriminants_in_range(sig, x, c, coprime)
        .into_par_iter()
        .map(|d| verify_field(d, c, set))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub x: u64,
    pub fields: u64,
    pub average: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub signature: CubicSignature,
    pub c: u64,
    pub bound: u64,
    pub coprime: bool,
    pub fields: u64,
    pub total_cl3: u64,
    pub trivial: u64,
    #[serde(serialize_with = "ser_rational")]
    pub average: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub prediction: BigRational,
    pub average_f64: f64,
    pub prediction_f64: f64,
    pub all_pass: bool,
    pub trajectory: Vec<TrajectoryPoint>,
}

fn ser_rational<S: serde::Serializer>(
    r: &BigRational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn to_f64(r: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

fn ratio(n: u64, d: u64) -> BigRational {
    if d == 0 {
        return BigRational::from_integer(0.into());
    }
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Prediction for the sweep average: all fields, or only coprime ones.
pub fn predicted_sweep_average(sig: CubicSignature, c: u64, coprime: bool) -> BigRational {
    if coprime {
        crate::densities::avg_total_coprime(sig, c)
    } else {
        crate::densities::avg_total(sig, c)
    }
}

/// Trajectory checkpoints: powers of ten below `x`, then `x` itself; the
/// point at `m` averages over `|d| <= m`.
fn checkpoints(x: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 10u64;
    while p < x {
        out.push(p);
        p = p.saturating_mul(10);
    }
    out.push(x);
    out
}

fn summarize<I>(
    sig: CubicSignature,
    x: u64,
    c: u64,
    coprime: bool,
    rows: I,
    all_pass: bool,
) -> SweepSummary
where
    I: IntoIterator<Item = (i64, u64)>,
{
    let marks = checkpoints(x);
    let mut next = 0;
    let (mut fields, mut total, mut trivial) = (0u64, 0u64, 0u64);
    let mut trajectory = Vec::new();
    for (d, cl3) in rows {
        while next < marks.len() && d.unsigned_abs() > marks[next] {
            trajectory.push(TrajectoryPoint {
                x: marks[next],
                fields,
                average: total as f64 / fields.max(1) as f64,
            });
            next += 1;
        }
        fields += 1;
        total += cl3;
        trivial += (cl3 == 1) as u64;
    }
    for &m in &marks[next..] {
        trajectory.push(TrajectoryPoint {
            x: m,
            fields,
            average: total as f64 / fields.max(1) as f64,
        });
    }
    let average = ratio(total, fields);
    let prediction = predicted_sweep_average(sig, c, coprime);
    SweepSummary {
        signature: sig,
        c,
        bound: x,
        coprime,
        fields,
        total_cl3: total,
        trivial,
        average_f64: to_f64(&average),
        prediction_f64: to_f64(&prediction),
        average,
        prediction,
        all_pass,
        trajectory,
    }
}

/// Summary of exact per-field rows (sorted by `|d|`).
pub fn summarize_rows(
    sig: CubicSignature,
    x: u64,
    c: u64,
    coprime: bool,
    rows: &[SweepRow],
) -> SweepSummary {
    let all_pass = rows.iter().all(|r| r.pass);
    summarize(
        sig,
        x,
        c,
        coprime,
        rows.iter().map(|r| (r.d, r.cl3)),
        all_pass,
    )
}

/// Summary of the same sweep computed from the censuses alone, taking
/// `#Cl_3 = #Cl_3^+ (2B + 1)` with the closed-form plus part. This scales
/// to bounds where computing every ray class group is out of reach.
pub fn census_sweep_summary(
    sig: CubicSignature,
    x: u64,
    c: u64,
    coprime: bool,
    set: &CensusSet,
) -> Result<SweepSummary> {
    let plus = cl3_plus_closed_form(&conductor_profile(c));
    let minus = set.minus_counts(sig, x, c)?;
    let rows = discriminants_in_range(sig, x, c, coprime)
        .into_iter()
        .map(|d| (d, plus * (2 * minus.get(&d).copied().unwrap_or(0) + 1)));
    Ok(summarize(sig, x, c, coprime, rows, true))
}

/// `sum_{0 < ±d <= x} (2B(d) + 1)`, and the same quantity as the number of
/// discriminants plus twice the number of contributing census records.
pub fn minus_sum_two_ways(
    sig: CubicSignature,
    x: u64,
    c: u64,
    set: &CensusSet,
) -> Result<(u64, u64)> {
    let ds = discriminants_in_range(sig, x, c, false);
    let mut per_field = 0u64;
    for &d in &ds {
        per_field += 2 * set.valid_noncyclic(d, c)?.len() as u64 + 1;
    }
    let records: u64 = set.minus_counts(sig, x, c)?.values().sum();
    Ok((per_field, ds.len() as u64 + 2 * records))
}

/// Exact mean of the `cl3` column.
pub fn mean_cl3(rows: &[SweepRow]) -> BigRational {
    let total: u64 = rows.iter().map(|r| r.cl3).sum();
    ratio(total, rows.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_set(bound: u64) -> CensusSet {
        CensusSet::new(vec![
            Census::enumerate(CubicSignature::Real, bound, None).unwrap(),
            Census::enumerate(CubicSignature::Imaginary, bound, None).unwrap(),
        ])
    }

    #[test]
    fn validity_examples() {
        let set = small_set(60_000);
        let v = count_c_valid(-23, 1, &set).unwrap();
        assert_eq!((v.a, v.b), (0, 1));
        let v = count_c_valid(-3, 7, &set).unwrap();
        assert_eq!((v.a, v.b), (1, 0));
        let v = count_c_valid(-4, 1, &set).unwrap();
        assert_eq!((v.a, v.b), (0, 0));
        assert!(matches!(
            count_c_valid(-2999, 7, &set),
            Err(Error::CensusBoundInsufficient {
                required: 146_952,
                covered: 60_000
            })
        ));
        assert!(count_c_valid(-12, 1, &set).is_err());
    }

    #[test]
    fn verify_examples() {
        let set = small_set(60_000);
        for (d, c, cl3) in [(-23, 1, 3), (-3, 7, 3), (5, 1, 1), (-4, 1, 1)] {
            let row = verify_field(d, c, &set).unwrap();
            assert!(row.pass, "{row:?}");
            assert_eq!(row.cl3, cl3);
        }
    }

    #[test]
    fn pair_count_examples() {
        assert_eq!(pair_count(0, 1), 1);
        assert_eq!(pair_count(1, 1), 4);
        assert_eq!(pair_count(0, 0), 0);
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(2 * pair_count(a, b) + 1, (2 * a + 1) * (2 * b + 1));
            }
        }
    }

    #[test]
    fn small_sweeps_pass() {
        let set = small_set(200_000);
        for c in [1u64, 2, 3, 5, 7] {
            for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
                let rows = sweep(sig, 300, c, false, &set).unwrap();
                assert!(rows.iter().all(|r| r.pass), "c = {c}");
                let a = rows[0].a;
                assert!(rows.iter().all(|r| r.a == a));
                let summary = summarize_rows(sig, 300, c, false, &rows);
                assert_eq!(summary.average, mean_cl3(&rows));
                let census = census_sweep_summary(sig, 300, c, false, &set).unwrap();
                assert_eq!(census.average, summary.average);
                assert_eq!(census.trivial, summary.trivial);
            }
        }
    }

    #[test]
    fn sweep_edge_cases() {
        let set = small_set(1000);
        let rows = sweep(CubicSignature::Imaginary, 3, 1, false, &set).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].d, -3);
        assert_eq!(mean_cl3(&rows), ratio(1, 1));
        assert!(sweep(CubicSignature::Real, 4, 1, false, &set)
            .unwrap()
            .is_empty());
        assert_eq!(
            sweep(CubicSignature::Real, 5, 1, false, &set)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn reaggregation_identity() {
        let set = small_set(100_000);
        for c in [1u64, 2, 5, 6] {
            for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
                let (a, b) = minus_sum_two_ways(sig, 2000, c, &set).unwrap();
                assert_eq!(a, b, "c = {c}");
            }
        }
    }

    #[test]
    fn filtered_census_substitutes_for_full() {
        let full = small_set(300_000);
        let mut mixed = small_set(20_000);
        for p in [5u64, 7] {
            for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
                mixed.push(
                    Census::enumerate(
                        sig,
                        20_000 * p * p,
                        Some(crate::cubicenum::RamifiedFilter { p }),
                    )
                    .unwrap(),
                );
            }
        }
        for c in [5u64, 7] {
            for sig in [CubicSignature::Real, CubicSignature::Imaginary] {
                assert_eq!(
                    full.minus_counts(sig, 6000, c).unwrap(),
                    mixed.minus_counts(sig, 6000, c).unwrap()
                );
            }
        }
    }
}
