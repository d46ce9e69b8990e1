//! Reference arithmetic for integration tests. Shares no code with the
//! library: fields are built by trial division and polynomials are plain
//! term lists.

#![allow(dead_code)]

use std::collections::BTreeSet;

/// `F_p[t] / (modulus)` with the least monic irreducible modulus of degree
/// `s`, ordered by the integer code `sum c_i p^i` of its lower coefficients.
pub struct NaiveField {
    pub p: u64,
    pub s: usize,
    pub modulus: Vec<u64>,
}

fn poly_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    let lead_inv = (1..p).find(|x| x * m[dm] % p == 1).unwrap();
    while r.len() > dm {
        let top = *r.last().unwrap();
        if top != 0 {
            let f = top * lead_inv % p;
            let shift = r.len() - 1 - dm;
            for (i, &c) in m.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p * p - f * c % p) % p;
            }
        }
        r.pop();
    }
    r
}

fn digits(mut code: u64, p: u64, len: usize) -> Vec<u64> {
    (0..len)
        .map(|_| {
            let d = code % p;
            code /= p;
            d
        })
        .collect()
}

fn is_irreducible(f: &[u64], p: u64) -> bool {
    let deg = f.len() - 1;
    for d in 1..=deg / 2 {
        for code in 0..p.pow(d as u32) {
            let mut g = digits(code, p, d);
            g.push(1);
            if poly_rem(f, &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

impl NaiveField {
    pub fn new(p: u64, s: usize) -> NaiveField {
        for code in 0..p.pow(s as u32) {
            let mut f = digits(code, p, s);
            f.push(1);
            if is_irreducible(&f, p) {
                return NaiveField { p, s, modulus: f };
            }
        }
        unreachable!("irreducible polynomials exist in every degree")
    }

    pub fn size(&self) -> u64 {
        self.p.pow(self.s as u32)
    }

    pub fn nth(&self, idx: u64) -> Vec<u64> {
        digits(idx, self.p, self.s)
    }

    pub fn all(&self) -> Vec<Vec<u64>> {
        (0..self.size()).map(|i| self.nth(i)).collect()
    }

    pub fn constant(&self, c: u64) -> Vec<u64> {
        let mut v = vec![0; self.s];
        v[0] = c % self.p;
        v
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + y) % self.p).collect()
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut prod = vec![0u64; 2 * self.s];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % self.p;
            }
        }
        let mut r = poly_rem(&prod, &self.modulus, self.p);
        r.resize(self.s, 0);
        r
    }

    pub fn pow(&self, a: &[u64], e: u64) -> Vec<u64> {
        let mut acc = self.constant(1);
        for _ in 0..e {
            acc = self.mul(&acc, a);
        }
        acc
    }

    /// `a^(p^m)` by `m` successive `p`-th powers.
    pub fn frob(&self, a: &[u64], m: u32) -> Vec<u64> {
        let mut x = a.to_vec();
        for _ in 0..m {
            x = self.pow(&x, self.p);
        }
        x
    }

    pub fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&c| c == 0)
    }
}

/// A polynomial as `(exponents, coefficient)` terms.
pub type Terms = Vec<(Vec<u32>, u64)>;

pub fn eval(f: &NaiveField, poly: &Terms, point: &[Vec<u64>]) -> Vec<u64> {
    let mut acc = f.constant(0);
    for (exps, c) in poly {
        let mut t = f.constant(*c);
        for (a, &e) in point.iter().zip(exps) {
            t = f.mul(&t, &f.pow(a, e as u64));
        }
        acc = f.add(&acc, &t);
    }
    acc
}

pub fn points(f: &NaiveField, n: usize) -> Vec<Vec<Vec<u64>>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|pt: Vec<Vec<u64>>| {
                f.all().into_iter().map(move |a| {
                    let mut q = pt.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// `(s, m, point)` for every quasi-fixed point of exact degree `s <= s_max`,
/// by a double loop over points and Frobenius powers.
pub fn naive_quasi_fixed(map: &[Terms], p: u64, s_max: u32) -> BTreeSet<(u32, u32, Vec<Vec<u64>>)> {
    let n = map.len();
    let mut out = BTreeSet::new();
    for s in 1..=s_max {
        let f = NaiveField::new(p, s as usize);
        for pt in points(&f, n) {
            let min_deg = (1..=s)
                .find(|&d| pt.iter().all(|a| f.frob(a, d) == *a))
                .unwrap();
            if min_deg != s {
                continue;
            }
            let image: Vec<Vec<u64>> = map.iter().map(|g| eval(&f, g, &pt)).collect();
            for m in 1..=s {
                if pt.iter().zip(&image).all(|(a, b)| f.frob(a, m) == *b) {
                    out.insert((s, m, pt.clone()));
                }
            }
        }
    }
    out
}
