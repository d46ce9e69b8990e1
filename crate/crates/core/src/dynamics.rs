//! Quasi-fixed points of polynomial self-maps of `A^n` over `F_p`.
//!
//! A point `a` over `F_{p^s}` is quasi-fixed when `Φ(a) = Fr^m(a)` for some
//! `m >= 1`. Since `Fr^s` fixes `F_{p^s}`, only `1 <= m <= s` is searched, and
//! for a point of exact degree `s` at most one such `m` exists.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{FqElement, FqField, GfError, DEFAULT_FIELD_CAP};
use crate::poly::{MPoly, PolyError, PolyMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error("enumerating {p}^{exponent} points exceeds the cap {cap}")]
    CapExceeded { p: u64, exponent: u64, cap: u64 },
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("variety and map disagree on variables or characteristic")]
    Incompatible,
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Field(#[from] GfError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// `Φ(point) = Fr^m(point)` with every coordinate in `F_{p^s}`, `s` minimal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuasiFixedWitness {
    pub point: Vec<FqElement>,
    pub m: u32,
    pub field_degree: u32,
}

/// Serialized witness: coefficient vectors in the conventional basis of
/// `F_{p^s}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub p: u64,
    pub s: u32,
    pub m: u32,
    pub point: Vec<Vec<u64>>,
}

impl QuasiFixedWitness {
    /// Re-checks the defining identity and the degree bookkeeping.
    pub fn is_valid(&self, map: &PolyMap) -> Result<bool> {
        if self.m == 0 || self.m > self.field_degree {
            return Ok(false);
        }
        let image = map.eval(&self.point)?;
        Ok(image
            .iter()
            .zip(&self.point)
            .all(|(f, a)| *f == a.frobenius(self.m)))
    }

    pub fn to_record(&self) -> WitnessRecord {
        let f = self.point[0].field();
        WitnessRecord {
            p: f.characteristic(),
            s: f.degree(),
            m: self.m,
            point: self.point.iter().map(|a| a.coeffs().to_vec()).collect(),
        }
    }

    pub fn from_record(rec: &WitnessRecord) -> Result<QuasiFixedWitness> {
        let field = FqField::new(rec.p, rec.s)?;
        let point = rec
            .point
            .iter()
            .map(|c| field.element(c.clone()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(QuasiFixedWitness { point, m: rec.m, field_degree: rec.s })
    }
}

/// A closed subvariety of `A^n` given by defining polynomials. No
/// polynomials means all of `A^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarietySpec {
    nvars: usize,
    p: u64,
    polys: Vec<MPoly>,
}

impl VarietySpec {
    pub fn new(nvars: usize, p: u64, polys: Vec<MPoly>) -> Result<VarietySpec> {
        if polys.iter().any(|f| f.nvars() != nvars || f.characteristic() != p) {
            return Err(DynamicsError::Incompatible);
        }
        Ok(VarietySpec { nvars, p, polys })
    }

    pub fn whole(nvars: usize, p: u64) -> VarietySpec {
        VarietySpec { nvars, p, polys: Vec::new() }
    }

    /// Comma or semicolon separated polynomials; blank text is `A^n`.
    pub fn parse(text: &str, nvars: usize, p: u64) -> Result<VarietySpec> {
        let polys = crate::poly::split_list(text)
            .map(|t| MPoly::parse(t, nvars, p))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        VarietySpec::new(nvars, p, polys)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn polys(&self) -> &[MPoly] {
        &self.polys
    }

    pub fn contains(&self, point: &[FqElement]) -> Result<bool> {
        variety_membership(self, point)
    }
}

pub fn variety_membership(v: &VarietySpec, point: &[FqElement]) -> Result<bool> {
    if point.len() != v.nvars {
        return Err(DynamicsError::Dimension { expected: v.nvars, got: point.len() });
    }
    for f in &v.polys {
        if !f.eval(point)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_cap(p: u64, exponent: u64, cap: u64) -> Result<()> {
    let fits = u32::try_from(exponent)
        .ok()
        .and_then(|e| p.checked_pow(e))
        .is_some_and(|count| count <= cap);
    if fits {
        Ok(())
    } else {
        Err(DynamicsError::CapExceeded { p, exponent, cap })
    }
}

/// Every point of `F^n` in lexicographic order, first coordinate most
/// significant.
fn points(field: &Arc<FqField>, n: usize) -> impl Iterator<Item = Vec<FqElement>> + '_ {
    let q = field.order();
    let total = q.pow(n as u32);
    (0..total).map(move |mut idx| {
        let mut coords = vec![field.zero(); n];
        for slot in coords.iter_mut().rev() {
            *slot = field.from_index(idx % q).expect("index below field order");
            idx /= q;
        }
        coords
    })
}

fn lcm(a: u32, b: u32) -> u32 {
    a / num_integer::gcd(a, b) * b
}

/// Witnesses of exact field degree `s`, sorted by `(m, point)`.
fn witnesses_of_degree(map: &PolyMap, s: u32, cap: u64) -> Result<Vec<QuasiFixedWitness>> {
    let field = FqField::with_cap(map.characteristic(), s, cap)?;
    let degree_of: Vec<u32> = field.elements().map(|a| a.minimal_degree()).collect();
    let mut out = Vec::new();
    for point in points(&field, map.nvars()) {
        let deg = point
            .iter()
            .fold(1, |d, a| lcm(d, degree_of[a.index() as usize]));
        if deg != s {
            continue;
        }
        let image = map.eval(&point)?;
        let mut fr = point.clone();
        for m in 1..=s {
            fr = fr.iter().map(|a| a.frobenius(1)).collect();
            if fr == image {
                out.push(QuasiFixedWitness { point: point.clone(), m, field_degree: s });
                break;
            }
        }
    }
    out.sort_by(|x, y| (x.m, &x.point).cmp(&(y.m, &y.point)));
    Ok(out)
}

/// All witnesses with `field_degree <= s_max`, ordered by
/// `(field_degree, m, point)`. Field degrees are processed in parallel.
pub fn enumerate_quasi_fixed(map: &PolyMap, s_max: u32, cap: u64) -> Result<Vec<QuasiFixedWitness>> {
    check_cap(map.characteristic(), s_max as u64 * map.nvars() as u64, cap)?;
    let parts = (1..=s_max)
        .into_par_iter()
        .map(|s| witnesses_of_degree(map, s, cap))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// [`enumerate_quasi_fixed`] with the default cap.
pub fn quasi_fixed_points(map: &PolyMap, s_max: u32) -> Result<Vec<QuasiFixedWitness>> {
    enumerate_quasi_fixed(map, s_max, DEFAULT_FIELD_CAP)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainmentReport {
    pub checked: usize,
    pub violations: Vec<QuasiFixedWitness>,
}

impl ContainmentReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every quasi-fixed point up to `s_max` lies on `v`.
pub fn containment_check(map: &PolyMap, v: &VarietySpec, s_max: u32, cap: u64) -> Result<ContainmentReport> {
    if v.nvars != map.nvars() || v.p != map.characteristic() {
        return Err(DynamicsError::Incompatible);
    }
    let all = enumerate_quasi_fixed(map, s_max, cap)?;
    let mut violations = Vec::new();
    for wit in &all {
        if !variety_membership(v, &wit.point)? {
            violations.push(wit.clone());
        }
    }
    Ok(ContainmentReport { checked: all.len(), violations })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DensityOutcome {
    Found(QuasiFixedWitness),
    /// Every field degree up to `searched_degree` was exhausted.
    NotFound { searched_degree: u32, witnesses_seen: usize },
}

/// First witness in enumeration order on `v` where `w_spec` does not vanish.
/// Field degrees are searched lazily, so the cap applies per degree.
pub fn find_quasi_fixed_avoiding(
    map: &PolyMap,
    v: &VarietySpec,
    w_spec: &MPoly,
    s_max: u32,
    cap: u64,
) -> Result<DensityOutcome> {
    if v.nvars != map.nvars()
        || v.p != map.characteristic()
        || w_spec.nvars() != map.nvars()
        || w_spec.characteristic() != map.characteristic()
    {
        return Err(DynamicsError::Incompatible);
    }
    let mut seen = 0;
    for s in 1..=s_max {
        check_cap(map.characteristic(), s as u64 * map.nvars() as u64, cap)?;
        for wit in witnesses_of_degree(map, s, cap)? {
            seen += 1;
            if variety_membership(v, &wit.point)? && !w_spec.eval(&wit.point)?.is_zero() {
                return Ok(DensityOutcome::Found(wit));
            }
        }
    }
    Ok(DensityOutcome::NotFound { searched_degree: s_max, witnesses_seen: seen })
}

/// The rational points of `Φ^iterations(A^n(F_q))`.
pub fn image_point_sample(
    map: &PolyMap,
    iterations: u32,
    field: &Arc<FqField>,
    cap: u64,
) -> Result<BTreeSet<Vec<FqElement>>> {
    if field.characteristic() != map.characteristic() {
        return Err(DynamicsError::Incompatible);
    }
    let n = map.nvars() as u32;
    let fits = field.order().checked_pow(n).is_some_and(|c| c <= cap);
    if !fits {
        return Err(DynamicsError::CapExceeded {
            p: field.characteristic(),
            exponent: field.degree() as u64 * n as u64,
            cap,
        });
    }
    let mut current: BTreeSet<Vec<FqElement>> = points(field, map.nvars()).collect();
    for _ in 0..iterations {
        current = current
            .iter()
            .map(|x| map.eval(x))
            .collect::<std::result::Result<_, _>>()?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(text: &str, n: usize, p: u64) -> PolyMap {
        PolyMap::parse(text, n, p).unwrap()
    }

    fn poly(text: &str, n: usize, p: u64) -> MPoly {
        MPoly::parse(text, n, p).unwrap()
    }

    const CAP: u64 = DEFAULT_FIELD_CAP;

    #[test]
    fn identity_map_over_f2() {
        let id = map("x1", 1, 2);
        let wits = enumerate_quasi_fixed(&id, 3, CAP).unwrap();
        // each point of exact degree s appears once, with m = s
        assert_eq!(wits.len(), 2 + 2 + 6);
        for w in &wits {
            assert_eq!(w.m, w.field_degree);
            assert!(w.is_valid(&id).unwrap());
        }
        let mut seen = BTreeSet::new();
        for w in &wits {
            assert!(seen.insert((w.field_degree, w.point.clone())));
        }
    }

    #[test]
    fn frobenius_map_has_m_one() {
        for p in [2u64, 3] {
            let fr = map(&format!("x1^{p}"), 1, p);
            let wits = enumerate_quasi_fixed(&fr, 3, CAP).unwrap();
            let expected: u64 = (1..=3u32)
                .map(|s| {
                    // points of exact degree s, by Möbius over divisors of s <= 3
                    match s {
                        1 => p,
                        2 => p * p - p,
                        _ => p * p * p - p,
                    }
                })
                .sum();
            assert_eq!(wits.len() as u64, expected);
            assert!(wits.iter().all(|w| w.m == 1));
        }
    }

    #[test]
    fn product_map_has_only_origin() {
        let f = map("x1*x2, 0", 2, 2);
        let wits = enumerate_quasi_fixed(&f, 3, CAP).unwrap();
        assert_eq!(wits.len(), 1);
        assert!(wits[0].point.iter().all(FqElement::is_zero));
        assert_eq!((wits[0].m, wits[0].field_degree), (1, 1));
    }

    #[test]
    fn order_is_degree_then_m_then_point() {
        let f = map("x1^2", 1, 3);
        let wits = enumerate_quasi_fixed(&f, 4, CAP).unwrap();
        let keys: Vec<_> = wits
            .iter()
            .map(|w| (w.field_degree, w.m, w.point.iter().map(|a| a.index()).collect::<Vec<_>>()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn cap_is_enforced() {
        let f = map("x1, x2", 2, 5);
        assert!(matches!(
            enumerate_quasi_fixed(&f, 3, 1000),
            Err(DynamicsError::CapExceeded { p: 5, exponent: 6, cap: 1000 })
        ));
    }

    #[test]
    fn membership_examples() {
        let f5 = FqField::new(5, 1).unwrap();
        let pt = |a: u64, b: u64| vec![f5.constant(a), f5.constant(b)];
        assert!(variety_membership(&VarietySpec::whole(2, 5), &pt(3, 4)).unwrap());
        let y = VarietySpec::parse("x2", 2, 5).unwrap();
        assert!(variety_membership(&y, &pt(0, 0)).unwrap());
        // 5 = 0 in F_5
        assert!(variety_membership(&y, &pt(5, 0)).unwrap());
        let v = VarietySpec::parse("x1^2, x2-1", 2, 5).unwrap();
        assert!(variety_membership(&v, &pt(0, 1)).unwrap());
        assert!(!variety_membership(&v, &pt(1, 1)).unwrap());
        assert!(matches!(
            variety_membership(&v, &[f5.one()]),
            Err(DynamicsError::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn containment_examples() {
        let f = map("x1*x2, 0", 2, 2);
        let v = VarietySpec::parse("x1, x2", 2, 2).unwrap();
        let rep = containment_check(&f, &v, 3, CAP).unwrap();
        assert!(rep.holds());
        assert_eq!(rep.checked, 1);

        let dom = map("x1+x2^2, x2", 2, 3);
        assert!(containment_check(&dom, &VarietySpec::whole(2, 3), 2, CAP).unwrap().holds());

        let id = map("x1", 1, 3);
        let wrong = VarietySpec::parse("x1-1", 1, 3).unwrap();
        let rep = containment_check(&id, &wrong, 2, CAP).unwrap();
        assert!(!rep.holds());
        assert!(rep.violations.iter().any(|w| w.point[0].is_zero()));
    }

    #[test]
    fn density_examples() {
        let id = map("x1", 1, 5);
        let whole = VarietySpec::whole(1, 5);
        match find_quasi_fixed_avoiding(&id, &whole, &poly("x1", 1, 5), 3, CAP).unwrap() {
            DensityOutcome::Found(w) => {
                assert!(w.point[0].is_one());
                assert_eq!((w.m, w.field_degree), (1, 1));
            }
            other => panic!("{other:?}"),
        }

        let sq = map("x1^2", 1, 3);
        let w_spec = poly("x1^2-x1", 1, 3);
        let whole = VarietySpec::whole(1, 3);
        let DensityOutcome::Found(w) = find_quasi_fixed_avoiding(&sq, &whole, &w_spec, 4, CAP).unwrap() else {
            panic!("no witness");
        };
        // a^2 = a^(3^m) needs an element whose order divides 3^m - 2; the first
        // such outside {0, 1} has order 5 in F_81 with m = 3
        assert_eq!((w.field_degree, w.m), (4, 3));
        assert_eq!(w.point[0].pow(5), w.point[0].field().one());
        assert!(w.is_valid(&sq).unwrap());
        // brute-force oracle over the smaller degrees
        for s in 1..=3u32 {
            let f = FqField::new(3, s).unwrap();
            for a in f.elements() {
                if a.is_zero() || a.is_one() {
                    continue;
                }
                for m in 1..=s {
                    assert_ne!(a.pow(2), a.pow(3u64.pow(m)), "{a} over degree {s}");
                }
            }
        }
        assert_eq!(
            find_quasi_fixed_avoiding(&sq, &whole, &w_spec, 3, CAP).unwrap(),
            DensityOutcome::NotFound { searched_degree: 3, witnesses_seen: 2 }
        );

        let fr = map("x1^2", 1, 2);
        let DensityOutcome::Found(w) =
            find_quasi_fixed_avoiding(&fr, &VarietySpec::whole(1, 2), &poly("x1", 1, 2), 2, CAP).unwrap()
        else {
            panic!("no witness");
        };
        assert_eq!(w.m, 1);
    }

    #[test]
    fn image_samples() {
        let f3 = FqField::new(3, 1).unwrap();
        assert_eq!(image_point_sample(&map("x1, x2", 2, 3), 3, &f3, CAP).unwrap().len(), 9);
        let img = image_point_sample(&map("x1*x2, 0", 2, 3), 2, &f3, CAP).unwrap();
        assert_eq!(img.len(), 1);
        assert!(img.iter().next().unwrap().iter().all(FqElement::is_zero));
        let konst = image_point_sample(&map("1, 2", 2, 3), 1, &f3, CAP).unwrap();
        assert_eq!(konst.len(), 1);
    }

    #[test]
    fn witnesses_are_valid_and_closed_under_frobenius() {
        let catalog = [
            ("x1^2+1", 1, 2),
            ("x1^3+x1", 1, 3),
            ("x1^2+2*x1", 1, 3),
            ("x1*x2+1, x1", 2, 2),
            ("x2^2, x1+x2", 2, 3),
            ("x1^2-x2, x1*x2", 2, 2),
        ];
        for (text, n, p) in catalog {
            let f = map(text, n, p);
            let wits = enumerate_quasi_fixed(&f, 3, CAP).unwrap();
            let set: BTreeSet<_> = wits.iter().map(|w| (w.m, w.point.clone())).collect();
            for w in &wits {
                assert!(w.is_valid(&f).unwrap());
                let conj: Vec<_> = w.point.iter().map(|a| a.frobenius(1)).collect();
                assert!(set.contains(&(w.m, conj)), "{text}");
            }
        }
    }

    #[test]
    fn bezout_bound_for_fixed_q() {
        for (text, p) in [("x1^2+1", 3u64), ("x1^3+x1+1", 2), ("x1^2", 5)] {
            let f = map(text, 1, p);
            let s_max = if p == 5 { 4 } else { 6 };
            let wits = enumerate_quasi_fixed(&f, s_max, CAP).unwrap();
            for m in 1..=3u32 {
                let q = p.pow(m);
                if q <= f.max_degree() as u64 {
                    continue;
                }
                let count = wits
                    .iter()
                    .filter(|w| (m - 1) % w.field_degree + 1 == w.m)
                    .count() as u64;
                assert!(count <= q, "{text}: {count} > {q}");
            }
        }
    }

    #[test]
    fn record_roundtrip() {
        let f = map("x1^2", 1, 3);
        for w in enumerate_quasi_fixed(&f, 4, CAP).unwrap() {
            let json = serde_json::to_string(&w.to_record()).unwrap();
            let back: WitnessRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(QuasiFixedWitness::from_record(&back).unwrap(), w);
        }
    }
}
