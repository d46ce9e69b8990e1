//! 2x2 matrices over `F_{p^m}` and the matrix-tuple dynamics of a free-group
//! endomorphism.
//!
//! [`pi_w`] evaluates a word with adjugates in place of inverses, which makes
//! it a polynomial map `M_2^k -> M_2` that agrees with word evaluation on
//! `SL_2`. [`phi_lift`] applies it coordinatewise to get the lift `Φ` of an
//! endomorphism to `M_2^k`, and [`pgl_dynamics_step`] is its descent to
//! `PGL_2^k` via [`proj_normalize`].

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::freegroup::{FreeEndo, FreeGroupError, GroupOps, Word};
use crate::gf::{FqElement, FqField, GfError};
use crate::poly::{MPoly, PolyMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrepError {
    #[error("matrix entries or tuple components live in different fields")]
    FieldMismatch,
    #[error("expected {expected} matrices, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("component {index} is singular")]
    Singular { index: usize },
    #[error("empty matrix tuple")]
    Empty,
    #[error(transparent)]
    Field(#[from] GfError),
    #[error(transparent)]
    FreeGroup(#[from] FreeGroupError),
}

pub type Result<T> = std::result::Result<T, MatrepError>;

/// `[[a, b], [c, d]]`, entries stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat2 {
    e: [FqElement; 4],
}

impl Mat2 {
    pub fn new(entries: [FqElement; 4]) -> Result<Mat2> {
        if entries.iter().any(|x| !x.same_field(&entries[0])) {
            return Err(MatrepError::FieldMismatch);
        }
        Ok(Mat2 { e: entries })
    }

    /// Builds a matrix from coefficient vectors, validating each entry.
    pub fn from_coeffs(field: &Arc<FqField>, entries: [Vec<u64>; 4]) -> Result<Mat2> {
        let [a, b, c, d] = entries;
        Ok(Mat2 {
            e: [field.element(a)?, field.element(b)?, field.element(c)?, field.element(d)?],
        })
    }

    pub fn identity(field: &Arc<FqField>) -> Mat2 {
        Mat2::scalar(&field.one())
    }

    pub fn scalar(c: &FqElement) -> Mat2 {
        let z = c.field().zero();
        Mat2 { e: [c.clone(), z.clone(), z, c.clone()] }
    }

    pub fn field(&self) -> &Arc<FqField> {
        self.e[0].field()
    }

    pub fn entries(&self) -> &[FqElement; 4] {
        &self.e
    }

    pub fn checked_mul(&self, o: &Mat2) -> Result<Mat2> {
        if !self.e[0].same_field(&o.e[0]) {
            return Err(MatrepError::FieldMismatch);
        }
        let [a, b, c, d] = &self.e;
        let [e, f, g, h] = &o.e;
        Ok(Mat2 {
            e: [
                &(a * e) + &(b * g),
                &(a * f) + &(b * h),
                &(c * e) + &(d * g),
                &(c * f) + &(d * h),
            ],
        })
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        self.checked_mul(o).expect("field mismatch in matrix product")
    }

    /// `adj([[a, b], [c, d]]) = [[d, -b], [-c, a]]`.
    pub fn adj(&self) -> Mat2 {
        let [a, b, c, d] = &self.e;
        Mat2 { e: [d.clone(), -b, -c, a.clone()] }
    }

    pub fn det(&self) -> FqElement {
        let [a, b, c, d] = &self.e;
        &(a * d) - &(b * c)
    }

    pub fn scale(&self, c: &FqElement) -> Mat2 {
        Mat2 { e: self.e.clone().map(|x| &x * c) }
    }

    pub fn is_invertible(&self) -> bool {
        !self.det().is_zero()
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        if det.is_zero() {
            return Err(MatrepError::Singular { index: 0 });
        }
        Ok(self.adj().scale(&det.inv()?))
    }

    /// Off-diagonal entries vanish and the diagonal entries agree.
    pub fn is_scalar(&self) -> bool {
        let [a, b, c, d] = &self.e;
        b.is_zero() && c.is_zero() && a == d
    }

    pub fn frobenius(&self, e: u32) -> Mat2 {
        Mat2 { e: self.e.clone().map(|x| x.frobenius(e)) }
    }

    /// Scales so the first nonzero entry (row-major) is 1. Invertibility is
    /// not required; only the zero matrix is rejected.
    pub fn normalized(&self) -> Result<Mat2> {
        let lead = self
            .e
            .iter()
            .find(|x| !x.is_zero())
            .ok_or(MatrepError::Singular { index: 0 })?;
        Ok(self.scale(&lead.inv()?))
    }

    pub fn is_normalized(&self) -> bool {
        self.e.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_one())
    }

    pub fn to_coeffs(&self) -> Vec<Vec<u64>> {
        self.e.iter().map(|x| x.coeffs().to_vec()).collect()
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = &self.e;
        write!(f, "[[{a}, {b}], [{c}, {d}]]")
    }
}

/// A point of `M_2^k`: `k` matrices over one field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MatTuple {
    mats: Vec<Mat2>,
}

impl MatTuple {
    pub fn new(mats: Vec<Mat2>) -> Result<MatTuple> {
        let first = mats.first().ok_or(MatrepError::Empty)?;
        if mats.iter().any(|m| !m.e[0].same_field(&first.e[0])) {
            return Err(MatrepError::FieldMismatch);
        }
        Ok(MatTuple { mats })
    }

    pub fn field(&self) -> &Arc<FqField> {
        self.mats[0].field()
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn mats(&self) -> &[Mat2] {
        &self.mats
    }

    /// Coordinates in `A^{4k}`: matrix `i` occupies slots `4i..4i+4`.
    pub fn flatten(&self) -> Vec<FqElement> {
        self.mats.iter().flat_map(|m| m.e.iter().cloned()).collect()
    }

    pub fn from_flat(coords: &[FqElement]) -> Result<MatTuple> {
        if coords.is_empty() || !coords.len().is_multiple_of(4) {
            return Err(MatrepError::Arity { expected: 4, got: coords.len() });
        }
        let mats = coords
            .chunks(4)
            .map(|c| Mat2::new([c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone()]))
            .collect::<Result<Vec<_>>>()?;
        MatTuple::new(mats)
    }
}

impl fmt::Debug for MatTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.mats).finish()
    }
}

/// A point of `PGL_2^k`: invertible components in scalar-canonical form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ProjPoint {
    tuple: MatTuple,
}

impl ProjPoint {
    pub fn tuple(&self) -> &MatTuple {
        &self.tuple
    }

    pub fn into_tuple(self) -> MatTuple {
        self.tuple
    }

    pub fn mats(&self) -> &[Mat2] {
        &self.tuple.mats
    }

    pub fn field(&self) -> &Arc<FqField> {
        self.tuple.field()
    }
}

impl fmt::Debug for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Proj{:?}", self.tuple)
    }
}

/// `w̄(A_1, ..., A_k)` with `adj(A_i)` substituted for `A_i^{-1}`.
pub fn pi_w(w: &Word, t: &MatTuple) -> Result<Mat2> {
    if w.rank() != t.len() {
        return Err(MatrepError::Arity { expected: w.rank(), got: t.len() });
    }
    pi_letters(w.letters(), t)
}

/// Like [`pi_w`] on an arbitrary letter sequence, without free reduction.
/// `pi_letters([1, -1], t) = det(A_1) Id`.
pub fn pi_letters(letters: &[i32], t: &MatTuple) -> Result<Mat2> {
    let mut acc = Mat2::identity(t.field());
    for &l in letters {
        let i = l.unsigned_abs() as usize;
        if l == 0 || i > t.len() {
            return Err(MatrepError::Arity { expected: t.len(), got: i });
        }
        let a = &t.mats[i - 1];
        acc = if l > 0 { acc.mul(a) } else { acc.mul(&a.adj()) };
    }
    Ok(acc)
}

/// The lift `Φ`: component `i` is `π_{w_i}(t)`.
pub fn phi_lift(phi: &FreeEndo, t: &MatTuple) -> Result<MatTuple> {
    if phi.rank() != t.len() {
        return Err(MatrepError::Arity { expected: phi.rank(), got: t.len() });
    }
    let mats = phi
        .images()
        .iter()
        .map(|w| pi_w(w, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(MatTuple { mats })
}

type SymMat = [MPoly; 4];

fn sym_mul(x: &SymMat, y: &SymMat) -> SymMat {
    let [a, b, c, d] = x;
    let [e, f, g, h] = y;
    [
        &(a * e) + &(b * g),
        &(a * f) + &(b * h),
        &(c * e) + &(d * g),
        &(c * f) + &(d * h),
    ]
}

/// `Φ` as a polynomial self-map of `A^{4k}` over `F_p`, in the coordinates
/// of [`MatTuple::flatten`].
pub fn phi_lift_polynomials(phi: &FreeEndo, p: u64) -> PolyMap {
    let k = phi.rank();
    let n = 4 * k;
    let vars: Vec<SymMat> = (0..k)
        .map(|i| std::array::from_fn(|j| MPoly::var(n, p, 4 * i + j)))
        .collect();
    let adjs: Vec<SymMat> = vars
        .iter()
        .map(|[a, b, c, d]| [d.clone(), -b, -c, a.clone()])
        .collect();
    let one = MPoly::constant(n, p, 1);
    let zero = MPoly::zero(n, p);
    let mut coords = Vec::with_capacity(n);
    for w in phi.images() {
        let mut acc: SymMat = [one.clone(), zero.clone(), zero.clone(), one.clone()];
        for &l in w.letters() {
            let i = l.unsigned_abs() as usize - 1;
            acc = sym_mul(&acc, if l > 0 { &vars[i] } else { &adjs[i] });
        }
        coords.extend(acc);
    }
    PolyMap::new(coords).expect("4k coordinates in 4k variables")
}

pub fn frobenius_tuple(t: &MatTuple, e: u32) -> MatTuple {
    MatTuple { mats: t.mats.iter().map(|m| m.frobenius(e)).collect() }
}

/// Scalar-canonical representative in `PGL_2^k`.
pub fn proj_normalize(t: &MatTuple) -> Result<ProjPoint> {
    let mats = t
        .mats
        .iter()
        .enumerate()
        .map(|(index, m)| {
            if m.is_invertible() {
                m.normalized()
            } else {
                Err(MatrepError::Singular { index })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjPoint { tuple: MatTuple { mats } })
}

/// One step of `φ_{PGL_2}`: `h -> [Φ(h)]`.
pub fn pgl_dynamics_step(phi: &FreeEndo, h: &ProjPoint) -> Result<ProjPoint> {
    proj_normalize(&phi_lift(phi, &h.tuple)?)
}

/// A point on a periodic cycle with its exact minimal period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicOrbit {
    pub point: ProjPoint,
    pub period: u64,
    /// Steps taken before the cycle closed.
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrbitError {
    #[error("orbit left PGL_2 at step {step}: component {index} singular")]
    Singular { step: u64, index: usize },
    #[error("no cycle closed within {0} steps")]
    BudgetExhausted(u64),
    #[error(transparent)]
    Matrep(#[from] MatrepError),
}

/// Default iteration budget for [`find_periodic_orbit`].
pub const DEFAULT_ORBIT_BUDGET: u64 = 10_000_000;

/// Brent's cycle detection on the orbit of `h0` under [`pgl_dynamics_step`].
pub fn find_periodic_orbit(
    phi: &FreeEndo,
    h0: &ProjPoint,
    budget: u64,
) -> std::result::Result<PeriodicOrbit, OrbitError> {
    let mut steps = 0u64;
    let mut advance = |h: &ProjPoint| -> std::result::Result<ProjPoint, OrbitError> {
        steps += 1;
        if steps > budget {
            return Err(OrbitError::BudgetExhausted(budget));
        }
        pgl_dynamics_step(phi, h).map_err(|e| match e {
            MatrepError::Singular { index } => OrbitError::Singular { step: steps, index },
            other => other.into(),
        })
    };
    let mut power = 1u64;
    let mut lam = 1u64;
    let mut tortoise = h0.clone();
    let mut hare = advance(h0)?;
    while tortoise != hare {
        if power == lam {
            tortoise = hare.clone();
            power *= 2;
            lam = 0;
        }
        hare = advance(&hare)?;
        lam += 1;
    }
    Ok(PeriodicOrbit { point: tortoise, period: lam, steps })
}

/// `PGL_2(F_q)` on scalar-canonical representatives.
pub struct Pgl2 {
    pub field: Arc<FqField>,
}

impl GroupOps for Pgl2 {
    type Elem = Mat2;
    fn identity(&self) -> Mat2 {
        Mat2::identity(&self.field)
    }
    fn mul(&self, a: &Mat2, b: &Mat2) -> Mat2 {
        a.mul(b).normalized().expect("product of invertible matrices")
    }
    fn inv(&self, a: &Mat2) -> Mat2 {
        a.inverse()
            .and_then(|m| m.normalized())
            .expect("PGL_2 elements are invertible")
    }
}

/// `GL_2(F_q)` with true inverses.
pub struct Gl2 {
    pub field: Arc<FqField>,
}

impl GroupOps for Gl2 {
    type Elem = Mat2;
    fn identity(&self) -> Mat2 {
        Mat2::identity(&self.field)
    }
    fn mul(&self, a: &Mat2, b: &Mat2) -> Mat2 {
        a.mul(b)
    }
    fn inv(&self, a: &Mat2) -> Mat2 {
        a.inverse().expect("GL_2 elements are invertible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::word_evaluate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(f: &Arc<FqField>, rng: &mut ChaCha8Rng) -> Mat2 {
        let q = f.order();
        Mat2::new(std::array::from_fn(|_| f.from_index(rng.gen_range(0..q)).unwrap())).unwrap()
    }

    fn random_invertible(f: &Arc<FqField>, rng: &mut ChaCha8Rng) -> Mat2 {
        loop {
            let m = random_mat(f, rng);
            if m.is_invertible() {
                return m;
            }
        }
    }

    fn random_sl2(f: &Arc<FqField>, rng: &mut ChaCha8Rng) -> Mat2 {
        loop {
            let m = random_invertible(f, rng);
            let det = m.det();
            // scale the first row by det^{-1}
            let inv = det.inv().unwrap();
            let [a, b, c, d] = m.entries().clone();
            let s = Mat2::new([&a * &inv, &b * &inv, c, d]).unwrap();
            if s.det().is_one() {
                return s;
            }
        }
    }

    fn tuple(mats: Vec<Mat2>) -> MatTuple {
        MatTuple::new(mats).unwrap()
    }

    fn w(s: &str, k: usize) -> Word {
        Word::parse(s, k).unwrap()
    }

    #[test]
    fn basic_matrix_identities() {
        let f5 = FqField::new(5, 1).unwrap();
        let id = Mat2::identity(&f5);
        assert_eq!(id.adj(), id);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = random_mat(&f5, &mut rng);
            let b = random_mat(&f5, &mut rng);
            assert_eq!(a.mul(&a.adj()), Mat2::scalar(&a.det()));
            assert_eq!(a.mul(&b).det(), &a.det() * &b.det());
        }
        let f7 = FqField::new(7, 1).unwrap();
        assert_eq!(id.checked_mul(&Mat2::identity(&f7)).unwrap_err(), MatrepError::FieldMismatch);
    }

    #[test]
    fn pi_w_examples() {
        let f5 = FqField::new(5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = tuple(vec![random_mat(&f5, &mut rng), random_mat(&f5, &mut rng)]);
        let a = &t.mats()[0];
        assert_eq!(pi_letters(&[1, -1], &t).unwrap(), Mat2::scalar(&a.det()));
        assert_eq!(pi_w(&w("aA", 2), &t).unwrap(), Mat2::identity(&f5));
        assert_eq!(pi_w(&w("a", 2), &t).unwrap(), t.mats()[0]);
        assert!(matches!(pi_w(&w("a", 1), &t), Err(MatrepError::Arity { .. })));

        let f7 = FqField::new(7, 1).unwrap();
        for _ in 0..30 {
            let t = tuple(vec![random_sl2(&f7, &mut rng), random_sl2(&f7, &mut rng)]);
            let direct = t.mats()[0].mul(&t.mats()[1]).mul(&t.mats()[0].inverse().unwrap());
            assert_eq!(pi_w(&w("abA", 2), &t).unwrap(), direct);
        }
    }

    #[test]
    fn pi_w_agrees_with_word_evaluation_on_sl2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [5u64, 7] {
            let f = FqField::new(p, 1).unwrap();
            let gl = Gl2 { field: f.clone() };
            for text in ["aBAb", "abbA", "BBa", "aaBaB"] {
                for _ in 0..10 {
                    let t = tuple(vec![random_sl2(&f, &mut rng), random_sl2(&f, &mut rng)]);
                    let word = w(text, 2);
                    assert_eq!(pi_w(&word, &t).unwrap(), word_evaluate(&word, t.mats(), &gl).unwrap());
                }
            }
        }
    }

    #[test]
    fn phi_lift_examples() {
        let f3 = FqField::new(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = tuple(vec![random_mat(&f3, &mut rng), random_mat(&f3, &mut rng)]);
        assert_eq!(phi_lift(&FreeEndo::identity(2), &t).unwrap(), t);
        let phi = FreeEndo::parse_images(&["ab", "ba"]).unwrap();
        let out = phi_lift(&phi, &t).unwrap();
        assert_eq!(out.mats()[0], t.mats()[0].mul(&t.mats()[1]));
        assert_eq!(out.mats()[1], t.mats()[1].mul(&t.mats()[0]));
        let sq = FreeEndo::parse_images(&["aa"]).unwrap();
        let one = tuple(vec![t.mats()[0].clone()]);
        assert_eq!(phi_lift(&sq, &one).unwrap().mats()[0], t.mats()[0].mul(&t.mats()[0]));
    }

    #[test]
    fn lift_polynomials_examples() {
        let id = phi_lift_polynomials(&FreeEndo::identity(1), 5);
        assert_eq!(id, PolyMap::identity(4, 5));
        let sq = phi_lift_polynomials(&FreeEndo::parse_images(&["aa"]).unwrap(), 5);
        let expect = PolyMap::parse(
            "x1^2+x2*x3, x1*x2+x2*x4, x1*x3+x3*x4, x2*x3+x4^2",
            4,
            5,
        )
        .unwrap();
        assert_eq!(sq, expect);
    }

    #[test]
    fn lift_polynomials_agree_with_pointwise_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f5 = FqField::new(5, 1).unwrap();
        for imgs in [vec!["ab", "ba"], vec!["aB", "bab"], vec!["aab", "B"]] {
            let phi = FreeEndo::parse_images(&imgs).unwrap();
            let map = phi_lift_polynomials(&phi, 5);
            for _ in 0..100 {
                let t = tuple(vec![random_mat(&f5, &mut rng), random_mat(&f5, &mut rng)]);
                let sym = map.eval(&t.flatten()).unwrap();
                assert_eq!(MatTuple::from_flat(&sym).unwrap(), phi_lift(&phi, &t).unwrap());
            }
        }
        // exhaustive over F_2 for k = 1
        let f2 = FqField::new(2, 1).unwrap();
        for imgs in [vec!["aa"], vec!["aaA"], vec!["aAa"], vec!["A"], vec!["aaa"]] {
            let phi = FreeEndo::parse_images(&imgs).unwrap();
            let map = phi_lift_polynomials(&phi, 2);
            for idx in 0..16u64 {
                let coords: Vec<_> = (0..4).map(|j| f2.from_index((idx >> j) & 1).unwrap()).collect();
                let t = MatTuple::from_flat(&coords).unwrap();
                let sym = map.eval(&coords).unwrap();
                assert_eq!(MatTuple::from_flat(&sym).unwrap(), phi_lift(&phi, &t).unwrap());
            }
        }
    }

    #[test]
    fn frobenius_equivariance_of_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (p, m) in [(2u64, 2u32), (3, 2)] {
            let f = FqField::new(p, m).unwrap();
            let phi = FreeEndo::parse_images(&["aBa", "ba"]).unwrap();
            for _ in 0..50 {
                let t = tuple(vec![random_mat(&f, &mut rng), random_mat(&f, &mut rng)]);
                let lhs = phi_lift(&phi, &frobenius_tuple(&t, 1)).unwrap();
                let rhs = frobenius_tuple(&phi_lift(&phi, &t).unwrap(), 1);
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn normalization() {
        let f5 = FqField::new(5, 1).unwrap();
        let two = Mat2::scalar(&f5.constant(2));
        let h = proj_normalize(&tuple(vec![two])).unwrap();
        assert_eq!(h.mats()[0], Mat2::identity(&f5));
        let t = tuple(vec![Mat2::identity(&f5)]);
        assert_eq!(frobenius_tuple(&t, 1), t);
        let singular = Mat2::from_coeffs(&f5, [vec![1], vec![2], vec![2], vec![4]]).unwrap();
        assert_eq!(
            proj_normalize(&tuple(vec![Mat2::identity(&f5), singular])).unwrap_err(),
            MatrepError::Singular { index: 1 }
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f9 = FqField::new(3, 2).unwrap();
        for _ in 0..50 {
            let t = tuple(vec![random_invertible(&f9, &mut rng), random_invertible(&f9, &mut rng)]);
            let h = proj_normalize(&t).unwrap();
            assert_eq!(proj_normalize(h.tuple()).unwrap(), h);
            assert!(h.mats().iter().all(Mat2::is_normalized));
        }
    }

    #[test]
    fn normalizing_commutes_with_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = FqField::new(7, 1).unwrap();
        let phi = FreeEndo::parse_images(&["aBa", "bA"]).unwrap();
        for _ in 0..50 {
            let t = tuple(vec![random_invertible(&f, &mut rng), random_invertible(&f, &mut rng)]);
            let direct = proj_normalize(&phi_lift(&phi, &t).unwrap()).unwrap();
            let via = pgl_dynamics_step(&phi, &proj_normalize(&t).unwrap()).unwrap();
            assert_eq!(direct, via);
        }
    }

    #[test]
    fn identity_endo_has_period_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = FqField::new(5, 1).unwrap();
        for _ in 0..10 {
            let h = proj_normalize(&tuple(vec![random_invertible(&f, &mut rng); 2])).unwrap();
            let orbit = find_periodic_orbit(&FreeEndo::identity(2), &h, 100).unwrap();
            assert_eq!(orbit.period, 1);
            assert_eq!(orbit.point, h);
        }
    }

    fn step_n(phi: &FreeEndo, h: &ProjPoint, n: u64) -> ProjPoint {
        (0..n).fold(h.clone(), |x, _| pgl_dynamics_step(phi, &x).unwrap())
    }

    #[test]
    fn squaring_orbit_over_f7() {
        let f7 = FqField::new(7, 1).unwrap();
        let d = Mat2::from_coeffs(&f7, [vec![3], vec![0], vec![0], vec![1]]).unwrap();
        let h = proj_normalize(&tuple(vec![d])).unwrap();
        let sq = FreeEndo::parse_images(&["aa"]).unwrap();
        let orbit = find_periodic_orbit(&sq, &h, 1000).unwrap();
        // diag(3,1) has order 6 in PGL_2(F_7); squaring sends it into the
        // order-3 subgroup, where x -> x^2 swaps diag(2,1) and diag(4,1)
        assert_eq!(orbit.period, 2);
        assert_eq!(step_n(&sq, &orbit.point, orbit.period), orbit.point);
        assert_ne!(step_n(&sq, &orbit.point, 1), orbit.point);
    }

    #[test]
    fn periods_are_exact_and_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = FqField::new(3, 2).unwrap();
        let phi = FreeEndo::parse_images(&["ab", "ba"]).unwrap();
        for _ in 0..10 {
            let h = proj_normalize(&tuple(vec![random_invertible(&f, &mut rng), random_invertible(&f, &mut rng)])).unwrap();
            let orbit = find_periodic_orbit(&phi, &h, DEFAULT_ORBIT_BUDGET).unwrap();
            let n = orbit.period;
            assert_eq!(step_n(&phi, &orbit.point, n), orbit.point);
            for d in 1..n {
                if n.is_multiple_of(d) {
                    assert_ne!(step_n(&phi, &orbit.point, d), orbit.point);
                }
            }
        }
    }

    #[test]
    fn budget_exhaustion() {
        let f = FqField::new(3, 2).unwrap();
        let g = f.generator();
        let m = Mat2::new([g.clone(), f.one(), f.zero(), f.one()]).unwrap();
        let h = proj_normalize(&tuple(vec![m.clone(), m])).unwrap();
        let phi = FreeEndo::parse_images(&["ab", "ba"]).unwrap();
        let full = find_periodic_orbit(&phi, &h, DEFAULT_ORBIT_BUDGET).unwrap();
        if full.steps > 1 {
            assert_eq!(
                find_periodic_orbit(&phi, &h, full.steps - 1).unwrap_err(),
                OrbitError::BudgetExhausted(full.steps - 1)
            );
        }
    }
}
