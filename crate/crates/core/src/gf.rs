//! Exact arithmetic in prime fields `F_p` and their extensions `F_{p^m}`.
//!
//! Elements are dense coefficient vectors in the polynomial basis
//! `1, t, ..., t^{m-1}` of `F_p[t]/(modulus)`. The modulus of every field is
//! the least monic irreducible polynomial of degree `m`, where polynomials are
//! ordered by the integer `c_0 + c_1 p + ... + c_{m-1} p^{m-1}` of their
//! non-leading coefficients. The same integer encoding orders elements, so
//! enumeration and modulus choice are both deterministic.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

/// Largest field order accepted unless a caller supplies its own cap.
pub const DEFAULT_FIELD_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("field order {p}^{degree} exceeds the cap {cap}")]
    CapExceeded { p: u64, degree: u32, cap: u64 },
    #[error("operands live in different fields")]
    FieldMismatch,
    #[error("inversion of zero")]
    DivisionByZero,
    #[error("cannot embed F_{{p^{from}}} into F_{{p^{to}}}: degree does not divide")]
    DegreeNotDivisible { from: u32, to: u32 },
    #[error("characteristic mismatch: {from} vs {to}")]
    CharacteristicMismatch { from: u64, to: u64 },
    #[error("coefficient vector has length {len}, expected {expected}")]
    BadLength { len: usize, expected: usize },
    #[error("coefficient {value} out of range for characteristic {p}")]
    BadCoefficient { value: u64, p: u64 },
    #[error("element index {0} out of range")]
    BadIndex(u64),
}

pub type Result<T> = std::result::Result<T, GfError>;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// Descriptor of `F_{p^m}`.
#[derive(Debug, Clone)]
pub struct FqField {
    p: u64,
    degree: u32,
    order: u64,
    /// Monic modulus, low-to-high, length `degree + 1`.
    modulus: Vec<u64>,
}

impl PartialEq for FqField {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.modulus == other.modulus
    }
}

impl Eq for FqField {}

impl FqField {
    pub fn new(p: u64, degree: u32) -> Result<Arc<FqField>> {
        Self::with_cap(p, degree, DEFAULT_FIELD_CAP)
    }

    pub fn with_cap(p: u64, degree: u32, cap: u64) -> Result<Arc<FqField>> {
        if !is_prime(p) {
            return Err(GfError::NotPrime(p));
        }
        if degree == 0 {
            return Err(GfError::ZeroDegree);
        }
        let order = checked_order(p, degree)
            .filter(|&q| q <= cap)
            .ok_or(GfError::CapExceeded { p, degree, cap })?;
        let modulus = least_irreducible(p, degree as usize);
        Ok(Arc::new(FqField { p, degree, order, modulus }))
    }

    pub fn characteristic(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    /// Monic modulus coefficients, constant term first.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    fn reduce(&self, mut prod: Vec<u64>) -> Vec<u64> {
        let m = self.degree as usize;
        let p = self.p;
        for i in (m..prod.len()).rev() {
            let c = prod[i];
            if c == 0 {
                continue;
            }
            prod[i] = 0;
            for j in 0..m {
                let idx = i - m + j;
                prod[idx] = (prod[idx] + (p - c) * self.modulus[j] % p) % p;
            }
        }
        prod.truncate(m);
        prod.resize(m, 0);
        prod
    }
}

fn checked_order(p: u64, degree: u32) -> Option<u64> {
    let mut q: u64 = 1;
    for _ in 0..degree {
        q = q.checked_mul(p)?;
    }
    Some(q)
}

impl FqField {
    pub fn zero(self: &Arc<Self>) -> FqElement {
        FqElement {
            field: Arc::clone(self),
            coeffs: vec![0; self.degree as usize],
        }
    }

    pub fn one(self: &Arc<Self>) -> FqElement {
        self.constant(1)
    }

    /// Prime-field element `c mod p`.
    pub fn constant(self: &Arc<Self>, c: u64) -> FqElement {
        let mut coeffs = vec![0; self.degree as usize];
        coeffs[0] = c % self.p;
        FqElement { field: Arc::clone(self), coeffs }
    }

    /// The class of `t` in `F_p[t]/(modulus)`.
    pub fn generator(self: &Arc<Self>) -> FqElement {
        let mut coeffs = vec![0; self.degree as usize + 1];
        coeffs[1] = 1;
        let coeffs = self.reduce(coeffs);
        FqElement { field: Arc::clone(self), coeffs }
    }

    pub fn element(self: &Arc<Self>, coeffs: Vec<u64>) -> Result<FqElement> {
        if coeffs.len() != self.degree as usize {
            return Err(GfError::BadLength {
                len: coeffs.len(),
                expected: self.degree as usize,
            });
        }
        if let Some(&value) = coeffs.iter().find(|&&c| c >= self.p) {
            return Err(GfError::BadCoefficient { value, p: self.p });
        }
        Ok(FqElement { field: Arc::clone(self), coeffs })
    }

    /// Element whose coefficients are the base-`p` digits of `index`.
    pub fn from_index(self: &Arc<Self>, index: u64) -> Result<FqElement> {
        if index >= self.order {
            return Err(GfError::BadIndex(index));
        }
        let mut rest = index;
        let coeffs = (0..self.degree)
            .map(|_| {
                let d = rest % self.p;
                rest /= self.p;
                d
            })
            .collect();
        Ok(FqElement { field: Arc::clone(self), coeffs })
    }

    /// All `p^m` elements in index order.
    pub fn elements(self: &Arc<Self>) -> Elements {
        Elements { field: Arc::clone(self), next: 0 }
    }
}

/// Iterator over every element of a field in index order.
pub struct Elements {
    field: Arc<FqField>,
    next: u64,
}

impl Iterator for Elements {
    type Item = FqElement;

    fn next(&mut self) -> Option<FqElement> {
        if self.next >= self.field.order {
            return None;
        }
        let e = self.field.from_index(self.next).ok();
        self.next += 1;
        e
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = (self.field.order - self.next) as usize;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for Elements {}

/// Element of `F_{p^m}`, always fully reduced.
#[derive(Clone)]
pub struct FqElement {
    field: Arc<FqField>,
    coeffs: Vec<u64>,
}

impl FqElement {
    pub fn field(&self) -> &Arc<FqField> {
        &self.field
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    /// Position of this element in [`FqField::elements`].
    pub fn index(&self) -> u64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0u64, |acc, &c| acc * self.field.p + c)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0] == 1 && self.coeffs[1..].iter().all(|&c| c == 0)
    }

    pub fn same_field(&self, other: &FqElement) -> bool {
        Arc::ptr_eq(&self.field, &other.field) || *self.field == *other.field
    }

    fn check(&self, other: &FqElement) -> Result<()> {
        if self.same_field(other) {
            Ok(())
        } else {
            Err(GfError::FieldMismatch)
        }
    }

    pub fn checked_add(&self, other: &FqElement) -> Result<FqElement> {
        self.check(other)?;
        let p = self.field.p;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a + b) % p)
            .collect();
        Ok(FqElement { field: Arc::clone(&self.field), coeffs })
    }

    pub fn checked_sub(&self, other: &FqElement) -> Result<FqElement> {
        self.check(other)?;
        let p = self.field.p;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a + p - b) % p)
            .collect();
        Ok(FqElement { field: Arc::clone(&self.field), coeffs })
    }

    pub fn checked_mul(&self, other: &FqElement) -> Result<FqElement> {
        self.check(other)?;
        let p = self.field.p;
        let m = self.coeffs.len();
        if m == 1 {
            let coeffs = vec![self.coeffs[0] * other.coeffs[0] % p];
            return Ok(FqElement { field: Arc::clone(&self.field), coeffs });
        }
        let mut prod = vec![0u64; 2 * m - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                prod[i + j] = (prod[i + j] + a * b) % p;
            }
        }
        Ok(FqElement {
            field: Arc::clone(&self.field),
            coeffs: self.field.reduce(prod),
        })
    }

    pub fn neg(&self) -> FqElement {
        let p = self.field.p;
        let coeffs = self.coeffs.iter().map(|&a| (p - a) % p).collect();
        FqElement { field: Arc::clone(&self.field), coeffs }
    }

    /// Multiplicative inverse, `a^(q-2)`.
    pub fn inv(&self) -> Result<FqElement> {
        if self.is_zero() {
            return Err(GfError::DivisionByZero);
        }
        Ok(self.pow(self.field.order - 2))
    }

    pub fn pow(&self, mut exp: u64) -> FqElement {
        let mut base = self.clone();
        let mut acc = self.field.one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = &acc * &base;
            }
            exp >>= 1;
            if exp > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// `a^(p^e)`; the identity when `m` divides `e`.
    pub fn frobenius(&self, e: u32) -> FqElement {
        let e = e % self.field.degree;
        let mut out = self.clone();
        for _ in 0..e {
            out = out.pow(self.field.p);
        }
        out
    }

    /// Smallest `d` with `a^(p^d) = a`; it divides the field degree.
    pub fn minimal_degree(&self) -> u32 {
        let m = self.field.degree;
        (1..=m)
            .filter(|d| m.is_multiple_of(*d))
            .find(|&d| self.frobenius(d) == *self)
            .unwrap_or(m)
    }
}

impl PartialEq for FqElement {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs && self.same_field(other)
    }
}

impl Eq for FqElement {}

impl Hash for FqElement {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coeffs.hash(state);
    }
}

impl PartialOrd for FqElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Index order, matching [`FqField::elements`].
impl Ord for FqElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coeffs
            .len()
            .cmp(&other.coeffs.len())
            .then_with(|| self.coeffs.iter().rev().cmp(other.coeffs.iter().rev()))
    }
}

impl fmt::Debug for FqElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for FqElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.len() == 1 {
            return write!(f, "{}", self.coeffs[0]);
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, "+")?;
            }
            first = false;
            match (i, c) {
                (0, _) => write!(f, "{c}")?,
                (1, 1) => write!(f, "t")?,
                (1, _) => write!(f, "{c}*t")?,
                (_, 1) => write!(f, "t^{i}")?,
                _ => write!(f, "{c}*t^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

// Operator forms panic on field mismatch; use the `checked_*` methods when
// operands come from untrusted input.
impl Add for &FqElement {
    type Output = FqElement;
    fn add(self, rhs: &FqElement) -> FqElement {
        self.checked_add(rhs).expect("field mismatch in add")
    }
}

impl Sub for &FqElement {
    type Output = FqElement;
    fn sub(self, rhs: &FqElement) -> FqElement {
        self.checked_sub(rhs).expect("field mismatch in sub")
    }
}

impl Mul for &FqElement {
    type Output = FqElement;
    fn mul(self, rhs: &FqElement) -> FqElement {
        self.checked_mul(rhs).expect("field mismatch in mul")
    }
}

impl Neg for &FqElement {
    type Output = FqElement;
    fn neg(self) -> FqElement {
        FqElement::neg(self)
    }
}

/// A fixed ring embedding `F_{p^d} -> F_{p^m}` for `d | m`, sending the
/// source generator to the least root (in index order) of the source modulus.
#[derive(Debug, Clone)]
pub struct Embedding {
    source: Arc<FqField>,
    target: Arc<FqField>,
    /// Images of `1, t, ..., t^{d-1}`.
    basis: Vec<FqElement>,
}

impl Embedding {
    pub fn new(source: &Arc<FqField>, target: &Arc<FqField>) -> Result<Embedding> {
        if source.p != target.p {
            return Err(GfError::CharacteristicMismatch {
                from: source.p,
                to: target.p,
            });
        }
        if !target.degree.is_multiple_of(source.degree) {
            return Err(GfError::DegreeNotDivisible {
                from: source.degree,
                to: target.degree,
            });
        }
        let root = target
            .elements()
            .find(|x| {
                let mut acc = target.zero();
                for &c in source.modulus.iter().rev() {
                    acc = &(&acc * x) + &target.constant(c);
                }
                acc.is_zero()
            })
            .expect("an irreducible of degree d | m splits in F_{p^m}");
        let mut basis = Vec::with_capacity(source.degree as usize);
        let mut power = target.one();
        for _ in 0..source.degree {
            basis.push(power.clone());
            power = &power * &root;
        }
        Ok(Embedding {
            source: Arc::clone(source),
            target: Arc::clone(target),
            basis,
        })
    }

    pub fn source(&self) -> &Arc<FqField> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FqField> {
        &self.target
    }

    pub fn apply(&self, a: &FqElement) -> Result<FqElement> {
        if *a.field != *self.source {
            return Err(GfError::FieldMismatch);
        }
        let mut out = self.target.zero();
        for (&c, b) in a.coeffs.iter().zip(&self.basis) {
            if c != 0 {
                out = &out + &(&self.target.constant(c) * b);
            }
        }
        Ok(out)
    }
}

/// One-shot form of [`Embedding::apply`].
pub fn embed(a: &FqElement, target: &Arc<FqField>) -> Result<FqElement> {
    Embedding::new(a.field(), target)?.apply(a)
}

// Dense univariate polynomials over F_p, low-to-high, used only for the
// modulus search.
mod upoly {
    pub fn trim(mut a: Vec<u64>) -> Vec<u64> {
        while a.last() == Some(&0) {
            a.pop();
        }
        a
    }

    fn inv_mod(a: u64, p: u64) -> u64 {
        let mut acc = 1u64;
        let mut base = a % p;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % p;
            }
            base = base * base % p;
            e >>= 1;
        }
        acc
    }

    pub fn rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let b = trim(b.to_vec());
        let mut r = trim(a.to_vec());
        let lead_inv = inv_mod(*b.last().expect("nonzero divisor"), p);
        while r.len() >= b.len() {
            let shift = r.len() - b.len();
            let c = r.last().unwrap() * lead_inv % p;
            for (j, &bj) in b.iter().enumerate() {
                r[shift + j] = (r[shift + j] + p - c * bj % p) % p;
            }
            r = trim(r);
        }
        r
    }

    pub fn mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut prod = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        rem(&prod, m, p)
    }

    pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let mut a = trim(a.to_vec());
        let mut b = trim(b.to_vec());
        while !b.is_empty() {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }

    /// Ben-Or: `f` of degree `m` is irreducible iff
    /// `gcd(x^(p^d) - x, f) = 1` for `1 <= d <= m/2`.
    pub fn is_irreducible(f: &[u64], p: u64) -> bool {
        let m = f.len() - 1;
        let x = rem(&[0, 1], f, p);
        let mut h = x.clone();
        for _ in 1..=m / 2 {
            let mut acc = vec![1u64];
            let mut base = h.clone();
            let mut e = p;
            while e > 0 {
                if e & 1 == 1 {
                    acc = mulmod(&acc, &base, f, p);
                }
                base = mulmod(&base, &base, f, p);
                e >>= 1;
            }
            h = acc;
            let mut diff = h.clone();
            diff.resize(diff.len().max(x.len()), 0);
            for (i, &xi) in x.iter().enumerate() {
                diff[i] = (diff[i] + p - xi) % p;
            }
            if gcd(f, &diff, p).len() > 1 {
                return false;
            }
        }
        true
    }
}

fn least_irreducible(p: u64, degree: usize) -> Vec<u64> {
    let mut index = 0u64;
    loop {
        let mut f = Vec::with_capacity(degree + 1);
        let mut rest = index;
        for _ in 0..degree {
            f.push(rest % p);
            rest /= p;
        }
        f.push(1);
        if upoly::is_irreducible(&f, p) {
            return f;
        }
        index += 1;
    }
}
