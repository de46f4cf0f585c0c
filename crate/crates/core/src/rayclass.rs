//! Ray class groups `Cl(K, c)` of quadratic fields with trivial infinite
//! modulus, together with the action of complex conjugation / the
//! nontrivial automorphism.
//!
//! The presentation follows the exact sequence
//! `O^x -> (O/c)^x -> Cl(K, c) -> Cl(K) -> 1`: generators are the residue
//! unit generators and the factor-base prime ideals coprime to `c`. Its
//! expected order `h * #(O/c)^x / #image(O^x)` is computed separately, and
//! relations are gathered until the presentation reaches it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::abgroup::{
    group_from_presentation, involution_eigenspace_ranks, FiniteAbelianGroup, Involution,
    ModularHnf, Presentation, RelationAccumulator,
};
use crate::arith::ConductorProfile;
use crate::error::{Error, Result};
use crate::quadfield::{
    residue_units, search_relations, ClassData, Elt, FactorBase, QuadraticField, ResidueUnitGroup,
    Splitting,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayClassReport {
    pub d: i64,
    pub c: u64,
    pub group: FiniteAbelianGroup,
    pub sigma: Involution,
    pub cl3: u64,
    pub cl3_plus: u64,
    pub cl3_minus: u64,
}

/// `#Cl_3^+(K, c)`, which does not depend on `K`.
pub fn cl3_plus_closed_form(profile: &ConductorProfile) -> u64 {
    let m = profile.mplus;
    if matches!(profile.c % 9, 3 | 6) {
        3u64.pow(m - 1)
    } else {
        3u64.pow(m)
    }
}

/// Size of the image of the global units in `(O/c)^x`, by closure.
fn unit_image_size(k: &QuadraticField, c: u64, units: &[Elt]) -> u64 {
    let cc = c as i128;
    let reduce = |e: Elt| Elt::new(e.x.rem_euclid(cc), e.y.rem_euclid(cc));
    let one = reduce(Elt::new(1, 0));
    let mut seen = HashSet::from([one]);
    let mut frontier = vec![one];
    while let Some(x) = frontier.pop() {
        for &u in units {
            let y = reduce(k.mul(x, u));
            if seen.insert(y) {
                frontier.push(y);
            }
        }
    }
    seen.len() as u64
}

/// Generators of `O^x` reduced mod `c`.
fn unit_generators_mod(k: &QuadraticField, c: u64) -> Vec<Elt> {
    let units = k.unit_group();
    let mut out = vec![Elt::new(-1, 0), units.torsion_generator];
    if let Some(eps) = &units.fundamental_unit {
        let cb = num_bigint::BigInt::from(c);
        let m = |x: &num_bigint::BigInt| {
            use num_integer::Integer;
            use num_traits::ToPrimitive;
            x.mod_floor(&cb).to_i64().unwrap() as i128
        };
        out.push(Elt::new(m(&eps.x), m(&eps.y)));
    }
    out
}

/// Class data whose factor base, with the primes dividing `c` removed,
/// still generates the class group.
fn class_data_for(k: &QuadraticField, c: u64) -> Result<std::borrow::Cow<'_, ClassData>> {
    let base = k.class_data()?;
    if base.coprime_part_generates(c) {
        return Ok(std::borrow::Cow::Borrowed(base));
    }
    let mut bound = base.bound.max(8);
    for _ in 0..12 {
        bound *= 2;
        let data = ClassData::compute(k, bound)?;
        if data.coprime_part_generates(c) {
            return Ok(std::borrow::Cow::Owned(data));
        }
    }
    Err(Error::Internal(format!(
        "no factor base coprime to {c} generates the class group of d = {}",
        k.d
    )))
}

const MAX_ROUNDS: u32 = 10;
const FB_ATTEMPTS: u32 = 5;
const RAY_FB_MIN: u64 = 50;

/// Relation lattice on residue generators and `fb`, or `None` if the
/// search stalls before reaching index `expected`.
fn ray_relations(
    k: &QuadraticField,
    c: u64,
    fb: &FactorBase,
    residues: &ResidueUnitGroup,
    units: &[Elt],
    expected: u64,
) -> Result<Option<ModularHnf>> {
    let r = residues.gens.len();
    let n = r + fb.len();
    let mut lattice = ModularHnf::new(n, expected);
    let dlog = |e: Elt| {
        residues
            .dlog(e)
            .ok_or_else(|| Error::Internal(format!("{e:?} is not a unit mod {c}")))
    };
    let row_with = |residue: &[i64], sign: i64, ideals: &[i64]| -> Vec<i64> {
        residue
            .iter()
            .map(|&x| sign * x)
            .chain(ideals.iter().copied())
            .collect()
    };

    for rel in &residues.relations {
        lattice.insert(&row_with(rel, 1, &vec![0; fb.len()]));
    }
    for &u in units {
        lattice.insert(&row_with(&dlog(u)?, 1, &vec![0; fb.len()]));
    }
    // (p) = P conj(P), and (p) maps to the residue class of p
    for &p in fb.primes() {
        let idx = fb.ideals_above(p);
        let mut ideals = vec![0i64; fb.len()];
        for &i in idx {
            ideals[i] += if fb.ideals[i].kind == Splitting::Ramified {
                2
            } else {
                1
            };
        }
        lattice.insert(&row_with(&dlog(Elt::new(p as i128, 0))?, -1, &ideals));
    }
    let mut round = 0;
    let mut failure = None;
    while lattice.index() > expected as u128 {
        if round == MAX_ROUNDS {
            return Ok(None);
        }
        search_relations(k, fb, round, |e, ideals| match residues.dlog(e) {
            Some(l) => lattice.insert(&row_with(&l, -1, &ideals)),
            None => failure = Some(e),
        });
        if let Some(e) = failure {
            return Err(Error::Internal(format!("{e:?} is not a unit mod {c}")));
        }
        round += 1;
    }
    Ok(Some(lattice))
}

/// The presentation of `Cl(K, c)` together with the data used to build it.
pub struct RayPresentation {
    pub residues: ResidueUnitGroup,
    pub fb: FactorBase,
    pub relations: Vec<Vec<i64>>,
    pub group: FiniteAbelianGroup,
    pub expected_order: u64,
}

impl RayPresentation {
    pub fn num_generators(&self) -> usize {
        self.residues.gens.len() + self.fb.len()
    }
}

pub fn ray_class_presentation(k: &QuadraticField, c: u64) -> Result<RayPresentation> {
    if c == 0 {
        return Err(Error::InconsistentArguments(
            "conductor must be positive".into(),
        ));
    }
    let data = class_data_for(k, c)?;
    let residues = residue_units(k, c);
    let units = unit_generators_mod(k, c);
    let image = unit_image_size(k, c, &units);
    let expected = data.h * residues.order() / image;
    if !(data.h * residues.order()).is_multiple_of(image) {
        return Err(Error::Internal("unit image size does not divide".into()));
    }

    let mut fb_bound = data.bound.max(RAY_FB_MIN);
    let mut attempt = 0;
    let (fb, lattice) = loop {
        let fb = FactorBase::new(k, fb_bound, c, false);
        if let Some(lattice) = ray_relations(k, c, &fb, &residues, &units, expected)? {
            break (fb, lattice);
        }
        attempt += 1;
        if attempt == FB_ATTEMPTS {
            return Err(Error::Internal(format!(
                "ray relation search for d = {}, c = {c} did not close",
                k.d
            )));
        }
        // sparse factor bases rarely yield smooth elements; widen and retry
        fb_bound *= 2;
    };
    let r = residues.gens.len();
    let n = r + fb.len();
    if lattice.index() < expected as u128 {
        return Err(Error::Internal(format!(
            "ray class presentation for d = {}, c = {c} is smaller than expected",
            k.d
        )));
    }
    let relations = lattice.basis();
    let group = group_from_presentation(&Presentation {
        num_generators: n,
        relations: relations.clone(),
    })?;
    if group.order() != expected {
        return Err(Error::Internal(format!(
            "order formula gives {expected}, presentation gives {}",
            group.order()
        )));
    }
    Ok(RayPresentation {
        residues,
        fb,
        relations,
        group,
        expected_order: expected,
    })
}

/// The nontrivial automorphism on the presentation generators.
fn sigma_action(k: &QuadraticField, pres: &RayPresentation) -> Vec<Vec<i64>> {
    let r = pres.residues.gens.len();
    let n = pres.num_generators();
    let mut rows = Vec::with_capacity(n);
    for &g in &pres.residues.gens {
        let mut row = pres.residues.dlog(k.conj(g)).expect("conjugate of a unit");
        row.resize(n, 0);
        rows.push(row);
    }
    for f in &pres.fb.ideals {
        let mut row = vec![0i64; n];
        row[r + f.conj] = 1;
        rows.push(row);
    }
    rows
}

pub fn ray_class_group(k: &QuadraticField, c: u64) -> Result<RayClassReport> {
    let pres = ray_class_presentation(k, c)?;
    let sigma = Involution::from_presentation_action(&pres.group, &sigma_action(k, &pres));
    let (rp, rm) = involution_eigenspace_ranks(&pres.group, &sigma)?;
    let cl3 = crate::abgroup::p_torsion_size(&pres.group, 3);
    let (cl3_plus, cl3_minus) = (3u64.pow(rp), 3u64.pow(rm));
    debug_assert_eq!(cl3, cl3_plus * cl3_minus);
    Ok(RayClassReport {
        d: k.d,
        c,
        group: pres.group,
        sigma,
        cl3,
        cl3_plus,
        cl3_minus,
    })
}

/// `Cl(K, c)` rebuilt from scratch: prime ideals of norm at most
/// `norm_bound` coprime to `c` modulo the ideals `(alpha)` with
/// `alpha = 1 mod cO`, found by enumerating elements.
///
/// Enumeration radii grow until two successive rounds give the same finite
/// group.
pub fn brute_force_ray_class_oracle(
    k: &QuadraticField,
    c: u64,
    norm_bound: u64,
) -> Result<FiniteAbelianGroup> {
    let fb = FactorBase::new(k, norm_bound, c, true);
    let n = fb.len();
    let cc = c as i128;
    let mut rows = RelationAccumulator::new(n);
    let mut previous: Option<Vec<u64>> = None;
    let targets_for = |round: usize| {
        let mut t = vec![crate::quadfield::QuadIdeal::unit()];
        t.extend(fb.ideals.iter().map(|f| f.ideal));
        if round > 0 {
            for i in 0..n {
                let j = (i + round) % n.max(1);
                if j < n {
                    t.push(k.multiply(&fb.ideals[i].ideal, &fb.ideals[j].ideal));
                }
            }
        }
        t
    };
    for round in 0..8usize {
        let radius = 2 + 2 * round as i128;
        for id in targets_for(round) {
            let [v1, v2] = id.basis();
            // alpha0 in I with alpha0 = 1 mod c
            let mut alpha0 = None;
            'search: for s in 0..cc {
                for t in 0..cc {
                    let e = Elt::new(s * v1.x + t * v2.x, s * v1.y + t * v2.y);
                    if (e.x - 1).rem_euclid(cc) == 0 && e.y.rem_euclid(cc) == 0 {
                        alpha0 = Some(e);
                        break 'search;
                    }
                }
            }
            let alpha0 = alpha0.expect("ideal coprime to c");
            let ci = crate::quadfield::QuadIdeal {
                content: id.content * cc,
                ..id
            };
            let [w1, w2] = k.reduced_basis(&ci);
            // move alpha0 near the origin
            let det = (w1.x * w2.y - w1.y * w2.x) as f64;
            let a = ((alpha0.x * w2.y - alpha0.y * w2.x) as f64 / det).round() as i128;
            let b = ((w1.x * alpha0.y - w1.y * alpha0.x) as f64 / det).round() as i128;
            let base = Elt::new(
                alpha0.x - a * w1.x - b * w2.x,
                alpha0.y - a * w1.y - b * w2.y,
            );
            for i in -radius..=radius {
                for j in -radius..=radius {
                    let e = Elt::new(base.x + i * w1.x + j * w2.x, base.y + i * w1.y + j * w2.y);
                    if k.norm(e) == 0 {
                        continue;
                    }
                    debug_assert!((e.x - 1).rem_euclid(cc) == 0 && e.y.rem_euclid(cc) == 0);
                    if let Some(f) = fb.factor(k, e) {
                        let mut row = vec![0i64; n];
                        for (idx, v) in f {
                            row[idx] += v;
                        }
                        if row.iter().any(|&x| x != 0) {
                            rows.insert(&row);
                        }
                    }
                }
            }
        }
        if let Some(g) = rows.group() {
            if previous.as_ref() == Some(&g.invariants) && round >= 2 {
                return Ok(g);
            }
            previous = Some(g.invariants.clone());
        } else {
            previous = None;
        }
    }
    Err(Error::GeneratorBoundTooSmall { bound: norm_bound })
}
