//! Multivariate polynomials with coefficients in the prime field `F_p`.
//!
//! Terms are stored sparsely in a `BTreeMap` keyed by dense exponent vectors,
//! so the map order is lexicographic with `x1` most significant. Zero
//! coefficients are never stored, which makes structural equality coincide
//! with polynomial equality.
//!
//! [`IqSystem`] realizes reduction modulo the ideal generated by
//! `f_i - x_i^Q`. When `Q` exceeds every `deg f_i`, the leading terms
//! `x_i^Q` are pairwise coprime, so rewriting `x_i^Q -> f_i` is confluent and
//! the normal form is unique.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::gf::{FqElement, GfError};

/// Default cap on the number of terms held during symbolic computations.
pub const DEFAULT_TERM_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("expected {expected} variables, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("characteristic mismatch: polynomial over F_{poly}, point over characteristic {point}")]
    CharacteristicMismatch { poly: u64, point: u64 },
    #[error("point coordinates lie in different fields")]
    MixedFields,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("symbolic computation exceeded the budget of {0} terms")]
    TermBudget(usize),
    #[error("invalid I_Q system: {0}")]
    InvalidSystem(String),
    #[error(transparent)]
    Field(#[from] GfError),
}

pub type Result<T> = std::result::Result<T, PolyError>;

fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    (a + b) % p
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Polynomial in `nvars` variables over `F_p`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MPoly {
    nvars: usize,
    p: u64,
    terms: BTreeMap<Vec<u32>, u64>,
}

impl MPoly {
    pub fn zero(nvars: usize, p: u64) -> MPoly {
        MPoly { nvars, p, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, p: u64, c: u64) -> MPoly {
        MPoly::monomial(nvars, p, vec![0; nvars], c)
    }

    /// The variable `x_{i+1}` (zero-based index `i`).
    pub fn var(nvars: usize, p: u64, i: usize) -> MPoly {
        assert!(i < nvars, "variable index out of range");
        let mut exps = vec![0; nvars];
        exps[i] = 1;
        MPoly::monomial(nvars, p, exps, 1)
    }

    pub fn monomial(nvars: usize, p: u64, exps: Vec<u32>, c: u64) -> MPoly {
        assert_eq!(exps.len(), nvars, "exponent vector length");
        let mut out = MPoly::zero(nvars, p);
        out.add_term(exps, c % p);
        out
    }

    pub fn from_terms<I>(nvars: usize, p: u64, terms: I) -> MPoly
    where
        I: IntoIterator<Item = (Vec<u32>, u64)>,
    {
        let mut out = MPoly::zero(nvars, p);
        for (exps, c) in terms {
            assert_eq!(exps.len(), nvars, "exponent vector length");
            out.add_term(exps, c % p);
        }
        out
    }

    fn add_term(&mut self, exps: Vec<u32>, c: u64) {
        if c == 0 {
            return;
        }
        let p = self.p;
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = add_mod(*o.get(), c, p);
                if s == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn characteristic(&self) -> u64 {
        self.p
    }

    /// Terms in increasing lexicographic order of exponent vectors.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Vec<u32>, u64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exps: &[u32]) -> u64 {
        self.terms.get(exps).copied().unwrap_or(0)
    }

    /// Total degree; `0` for the zero polynomial.
    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn max_exponent(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|e| e.iter().copied())
            .max()
            .unwrap_or(0)
    }

    fn same_ring(&self, other: &MPoly) {
        assert!(
            self.nvars == other.nvars && self.p == other.p,
            "polynomials over different rings"
        );
    }

    pub fn scale(&self, c: u64) -> MPoly {
        let c = c % self.p;
        MPoly::from_terms(
            self.nvars,
            self.p,
            self.terms.iter().map(|(e, &a)| (e.clone(), a * c % self.p)),
        )
    }

    fn mul_bounded(&self, other: &MPoly, budget: usize) -> Result<MPoly> {
        self.same_ring(other);
        let mut out = MPoly::zero(self.nvars, self.p);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let exps = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(exps, ca * cb % self.p);
            }
            if out.terms.len() > budget {
                return Err(PolyError::TermBudget(budget));
            }
        }
        Ok(out)
    }

    fn pow_bounded(&self, mut exp: u32, budget: usize) -> Result<MPoly> {
        let mut acc = MPoly::constant(self.nvars, self.p, 1);
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul_bounded(&base, budget)?;
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul_bounded(&base, budget)?;
            }
        }
        Ok(acc)
    }

    pub fn pow(&self, exp: u32) -> MPoly {
        self.pow_bounded(exp, usize::MAX).expect("unbounded")
    }

    /// Evaluates at a point over some `F_{p^s}`; coefficients are lifted from
    /// the prime field.
    pub fn eval(&self, point: &[FqElement]) -> Result<FqElement> {
        let field = check_point(self.nvars, self.p, point)?;
        let mut cache: Vec<BTreeMap<u32, FqElement>> = vec![BTreeMap::new(); self.nvars];
        let mut acc = field.zero();
        for (exps, &c) in &self.terms {
            let mut term = field.constant(c);
            for (i, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let pw = cache[i].entry(e).or_insert_with(|| point[i].pow(e as u64));
                term = &term * pw;
            }
            acc = &acc + &term;
        }
        Ok(acc)
    }

    /// Substitutes `inner` into `self`: `self(inner_1, ..., inner_n)`.
    pub fn compose(&self, inner: &PolyMap) -> Result<MPoly> {
        self.compose_bounded(inner, DEFAULT_TERM_BUDGET)
    }

    pub fn compose_bounded(&self, inner: &PolyMap, budget: usize) -> Result<MPoly> {
        if inner.coords.len() != self.nvars {
            return Err(PolyError::ArityMismatch {
                expected: self.nvars,
                got: inner.coords.len(),
            });
        }
        if inner.p != self.p {
            return Err(PolyError::CharacteristicMismatch { poly: self.p, point: inner.p });
        }
        let mut cache: Vec<BTreeMap<u32, MPoly>> = vec![BTreeMap::new(); self.nvars];
        let mut out = MPoly::zero(inner.nvars, self.p);
        for (exps, &c) in &self.terms {
            let mut term = MPoly::constant(inner.nvars, self.p, c);
            for (i, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !cache[i].contains_key(&e) {
                    let pw = inner.coords[i].pow_bounded(e, budget)?;
                    cache[i].insert(e, pw);
                }
                term = term.mul_bounded(&cache[i][&e], budget)?;
            }
            out = &out + &term;
            if out.terms.len() > budget {
                return Err(PolyError::TermBudget(budget));
            }
        }
        Ok(out)
    }

    /// `f^(p^e)`, computed termwise as `sum c^(p^e) x^(p^e * alpha)`.
    pub fn frobenius_twist(&self, e: u32) -> MPoly {
        let pe = self.p.pow(e);
        let factor = u32::try_from(pe).expect("frobenius exponent overflow");
        MPoly::from_terms(
            self.nvars,
            self.p,
            self.terms.iter().map(|(exps, &c)| {
                (exps.iter().map(|&x| x * factor).collect(), pow_mod(c, pe, self.p))
            }),
        )
    }

    /// Parses `c*x1^e1*...*xn^en` terms joined by `+` (or `-`).
    pub fn parse(text: &str, nvars: usize, p: u64) -> Result<MPoly> {
        Parser { bytes: text.as_bytes(), pos: 0, nvars, p }.poly()
    }
}

fn check_point(nvars: usize, p: u64, point: &[FqElement]) -> Result<&std::sync::Arc<crate::gf::FqField>> {
    if point.len() != nvars || point.is_empty() {
        return Err(PolyError::ArityMismatch { expected: nvars, got: point.len() });
    }
    let field = point[0].field();
    if field.characteristic() != p {
        return Err(PolyError::CharacteristicMismatch {
            poly: p,
            point: field.characteristic(),
        });
    }
    if point.iter().any(|a| !a.same_field(&point[0])) {
        return Err(PolyError::MixedFields);
    }
    Ok(field)
}

impl Add for &MPoly {
    type Output = MPoly;
    fn add(self, rhs: &MPoly) -> MPoly {
        self.same_ring(rhs);
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.add_term(e.clone(), c);
        }
        out
    }
}

impl Neg for &MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        self.scale(self.p - 1)
    }
}

impl Sub for &MPoly {
    type Output = MPoly;
    fn sub(self, rhs: &MPoly) -> MPoly {
        self + &(-rhs)
    }
}

impl Mul for &MPoly {
    type Output = MPoly;
    fn mul(self, rhs: &MPoly) -> MPoly {
        self.mul_bounded(rhs, usize::MAX).expect("unbounded")
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (exps, &c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                write!(f, "+")?;
            }
            let mut factors: Vec<String> = Vec::new();
            if c != 1 || exps.iter().all(|&e| e == 0) {
                factors.push(c.to_string());
            }
            for (i, &e) in exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", i + 1)),
                    _ => factors.push(format!("x{}^{}", i + 1, e)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MPoly[F_{}; {}]({})", self.p, self.nvars, self)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    nvars: usize,
    p: u64,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(PolyError::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a number");
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        match digits.parse::<u64>() {
            Ok(v) => Ok(v),
            Err(_) => self.err("number too large"),
        }
    }

    fn poly(mut self) -> Result<MPoly> {
        let mut out = MPoly::zero(self.nvars, self.p);
        if self.peek().is_none() {
            return self.err("empty polynomial");
        }
        let mut negate = false;
        if self.peek() == Some(b'-') {
            negate = true;
            self.pos += 1;
        }
        loop {
            let term = self.term()?;
            out = if negate { &out - &term } else { &out + &term };
            match self.peek() {
                None => return Ok(out),
                Some(b'+') => negate = false,
                Some(b'-') => negate = true,
                Some(c) => return self.err(format!("unexpected character {:?}", c as char)),
            }
            self.pos += 1;
        }
    }

    fn term(&mut self) -> Result<MPoly> {
        let mut coeff = 1u64;
        let mut exps = vec![0u32; self.nvars];
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() => {
                    coeff = coeff * (self.number()? % self.p) % self.p;
                }
                Some(b'x') => {
                    self.pos += 1;
                    let idx = self.number()? as usize;
                    if idx == 0 || idx > self.nvars {
                        return self.err(format!("variable x{idx} out of range 1..={}", self.nvars));
                    }
                    let mut e = 1u64;
                    if self.peek() == Some(b'^') {
                        self.pos += 1;
                        e = self.number()?;
                    }
                    let e = match u32::try_from(e) {
                        Ok(e) => e,
                        Err(_) => return self.err("exponent too large"),
                    };
                    exps[idx - 1] += e;
                }
                _ => return self.err("expected a coefficient or a variable"),
            }
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                return Ok(MPoly::monomial(self.nvars, self.p, exps, coeff));
            }
        }
    }
}

/// A polynomial self-map of affine `n`-space, `x -> (f_1(x), ..., f_n(x))`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyMap {
    nvars: usize,
    p: u64,
    coords: Vec<MPoly>,
}

impl PolyMap {
    pub fn new(coords: Vec<MPoly>) -> Result<PolyMap> {
        let first = coords
            .first()
            .ok_or(PolyError::ArityMismatch { expected: 1, got: 0 })?;
        let (nvars, p) = (first.nvars, first.p);
        if coords.len() != nvars {
            return Err(PolyError::ArityMismatch { expected: nvars, got: coords.len() });
        }
        for c in &coords {
            if c.nvars != nvars {
                return Err(PolyError::ArityMismatch { expected: nvars, got: c.nvars });
            }
            if c.p != p {
                return Err(PolyError::CharacteristicMismatch { poly: p, point: c.p });
            }
        }
        Ok(PolyMap { nvars, p, coords })
    }

    pub fn identity(nvars: usize, p: u64) -> PolyMap {
        PolyMap {
            nvars,
            p,
            coords: (0..nvars).map(|i| MPoly::var(nvars, p, i)).collect(),
        }
    }

    /// Comma-separated coordinate polynomials.
    pub fn parse(text: &str, nvars: usize, p: u64) -> Result<PolyMap> {
        let coords = split_list(text)
            .map(|part| MPoly::parse(part, nvars, p))
            .collect::<Result<Vec<_>>>()?;
        if coords.len() != nvars {
            return Err(PolyError::ArityMismatch { expected: nvars, got: coords.len() });
        }
        PolyMap::new(coords)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn characteristic(&self) -> u64 {
        self.p
    }

    pub fn coords(&self) -> &[MPoly] {
        &self.coords
    }

    pub fn max_degree(&self) -> u32 {
        self.coords.iter().map(MPoly::total_degree).max().unwrap_or(0)
    }

    pub fn eval(&self, point: &[FqElement]) -> Result<Vec<FqElement>> {
        self.coords.iter().map(|f| f.eval(point)).collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyMap) -> Result<PolyMap> {
        self.compose_bounded(inner, DEFAULT_TERM_BUDGET)
    }

    pub fn compose_bounded(&self, inner: &PolyMap, budget: usize) -> Result<PolyMap> {
        let coords = self
            .coords
            .iter()
            .map(|f| f.compose_bounded(inner, budget))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap { nvars: inner.nvars, p: self.p, coords })
    }

    /// The `k`-th composition power; `k = 0` gives the identity.
    pub fn iterate(&self, k: u32, budget: usize) -> Result<PolyMap> {
        let mut out = PolyMap::identity(self.nvars, self.p);
        for _ in 0..k {
            out = self.compose_bounded(&out, budget)?;
        }
        Ok(out)
    }
}

impl fmt::Display for PolyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Splits a comma- or semicolon-separated list, dropping empty entries.
pub fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split([',', ';']).map(str::trim).filter(|s| !s.is_empty())
}

/// The ideal `I_Q = (f_1 - x_1^Q, ..., f_n - x_n^Q)` over `F_p`.
#[derive(Clone, Debug)]
pub struct IqSystem {
    map: PolyMap,
    q: u64,
    budget: usize,
}

impl IqSystem {
    /// Requires `Q = p^e` with `e >= 1` and `Q > deg f_i` for all `i`.
    pub fn new(map: PolyMap, q: u64) -> Result<IqSystem> {
        let p = map.p;
        let mut r = q;
        while r > 1 && r.is_multiple_of(p) {
            r /= p;
        }
        if q < p || r != 1 {
            return Err(PolyError::InvalidSystem(format!("Q = {q} is not a power of p = {p}")));
        }
        if q > u32::MAX as u64 {
            return Err(PolyError::InvalidSystem(format!("Q = {q} too large")));
        }
        let deg = map.max_degree();
        if q <= deg as u64 {
            return Err(PolyError::InvalidSystem(format!(
                "Q = {q} must exceed the maximal degree {deg}"
            )));
        }
        Ok(IqSystem { map, q, budget: DEFAULT_TERM_BUDGET })
    }

    pub fn with_budget(mut self, budget: usize) -> IqSystem {
        self.budget = budget;
        self
    }

    pub fn map(&self) -> &PolyMap {
        &self.map
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Unique representative of `g + I_Q` with every exponent `< Q`.
    ///
    /// Always rewrites the lexicographically greatest reducible monomial, at
    /// its least variable with exponent `>= Q`.
    pub fn normal_form(&self, g: &MPoly) -> Result<MPoly> {
        if g.nvars != self.map.nvars || g.p != self.map.p {
            return Err(PolyError::ArityMismatch { expected: self.map.nvars, got: g.nvars });
        }
        let q = self.q as u32;
        let p = g.p;
        let mut reduced = MPoly::zero(g.nvars, p);
        let mut pending = MPoly::zero(g.nvars, p);
        for (e, &c) in &g.terms {
            if e.iter().any(|&x| x >= q) {
                pending.add_term(e.clone(), c);
            } else {
                reduced.add_term(e.clone(), c);
            }
        }
        while let Some((mut exps, c)) = pending.terms.pop_last() {
            let i = exps.iter().position(|&x| x >= q).expect("pending terms are reducible");
            exps[i] -= q;
            for (fe, &fc) in &self.map.coords[i].terms {
                let next: Vec<u32> = exps.iter().zip(fe).map(|(a, b)| a + b).collect();
                let nc = c * fc % p;
                if next.iter().any(|&x| x >= q) {
                    pending.add_term(next, nc);
                } else {
                    reduced.add_term(next, nc);
                }
            }
            if pending.terms.len() + reduced.terms.len() > self.budget {
                return Err(PolyError::TermBudget(self.budget));
            }
        }
        Ok(reduced)
    }

    /// Dimension of `F_p[x]/I_Q` over `F_p`.
    ///
    /// The standard monomials (all exponents `< Q`) are enumerated and each
    /// is confirmed to be its own normal form, while every generator leading
    /// monomial `x_i^Q` is confirmed to reduce. The leading monomials are
    /// pairwise coprime, so the standard monomials form a basis.
    pub fn quotient_dimension(&self) -> Result<u64> {
        let n = self.map.nvars;
        let q = self.q;
        let count = q
            .checked_pow(n as u32)
            .filter(|&c| c <= self.budget as u64)
            .ok_or(PolyError::TermBudget(self.budget))?;
        let p = self.map.p;
        let mut exps = vec![0u32; n];
        let mut basis = 0u64;
        loop {
            let m = MPoly::monomial(n, p, exps.clone(), 1);
            if self.normal_form(&m)? != m {
                return Err(PolyError::InvalidSystem(format!("standard monomial {m} reduced")));
            }
            basis += 1;
            // odometer over exponent vectors in [0, Q)^n
            let mut i = 0;
            while i < n {
                exps[i] += 1;
                if (exps[i] as u64) < q {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        for i in 0..n {
            let mut e = vec![0u32; n];
            e[i] = q as u32;
            let lead = MPoly::monomial(n, p, e, 1);
            if self.normal_form(&lead)? == lead {
                return Err(PolyError::InvalidSystem(format!("x{}^Q is irreducible", i + 1)));
            }
        }
        debug_assert_eq!(basis, count);
        Ok(basis)
    }

    /// Whether `f_i^(j) ≡ x_i^(Q^j)` modulo `I_Q` for every coordinate.
    pub fn iterate_congruence_check(&self, j: u32) -> Result<bool> {
        if j == 0 {
            return Err(PolyError::InvalidSystem("j must be at least 1".into()));
        }
        let qj = self
            .q
            .checked_pow(j)
            .and_then(|v| u32::try_from(v).ok())
            .ok_or(PolyError::TermBudget(self.budget))?;
        let iterate = self.map.iterate(j, self.budget)?;
        let n = self.map.nvars;
        for (i, fij) in iterate.coords.iter().enumerate() {
            let mut e = vec![0u32; n];
            e[i] = qj;
            let power = MPoly::monomial(n, self.map.p, e, 1);
            if self.normal_form(fij)? != self.normal_form(&power)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
