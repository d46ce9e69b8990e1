//! Finite-quotient certificates for mapping tori of free-group endomorphisms.
//!
//! A certificate for `(φ, w)` is a prime `p`, a degree `s`, and a tuple `h`
//! in `PGL_2(F_{p^s})^k` that is periodic under `φ_H` with `w(h) != 1`. Along
//! the orbit `h^(0), ..., h^(n-1)` the assignment `t -> c`,
//! `x_j -> y_j = (h_j^(0), ..., h_j^(n-1))` defines a homomorphism from the
//! mapping torus to `PGL_2(F_{p^s}) ≀ C_n` in which `w` survives.
//!
//! [`verify_certificate`] rebuilds everything from the serialized data: the
//! orbit through the adjugate lift, and the wreath relations through word
//! evaluation with true inverses.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freegroup::{
    sanov_generators, word_evaluate, FreeEndo, FreeGroupError, GroupOps, Word,
};
use crate::gf::{is_prime, next_prime, FqField, GfError, DEFAULT_FIELD_CAP};
use crate::matrep::{
    find_periodic_orbit, frobenius_tuple, pgl_dynamics_step, pi_w, proj_normalize, Mat2,
    MatTuple, MatrepError, OrbitError, Pgl2, ProjPoint, DEFAULT_ORBIT_BUDGET,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertifyError {
    #[error("the target word is trivial")]
    IdentityWord,
    #[error("endomorphism is not injective (override with allow_non_injective)")]
    NotInjective,
    #[error("rank mismatch: endomorphism {endo}, word {word}")]
    RankMismatch { endo: usize, word: usize },
    #[error("no prime in [{floor}, {cap}] keeps the Sanov image of the word non-scalar")]
    NoPrime { floor: u64, cap: u64 },
    #[error("no certificate found; searched primes {primes:?} with s <= {s_max}, {seeds} seeds each")]
    NotFound { primes: Vec<u64>, s_max: u32, seeds: u64 },
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error(transparent)]
    FreeGroup(#[from] FreeGroupError),
    #[error(transparent)]
    Matrep(#[from] MatrepError),
    #[error(transparent)]
    Field(#[from] GfError),
}

pub type Result<T> = std::result::Result<T, CertifyError>;

/// Matrix entries as coefficient vectors, row-major.
pub type MatrixData = Vec<Vec<u64>>;
/// One matrix per generator.
pub type TupleData = Vec<MatrixData>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub seed_index: u64,
    /// `m` with `Φ(h) = Fr^m(h)` projectively, when one exists in `1..=s`.
    pub frobenius_power: Option<u32>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub format_version: u32,
    pub rank: usize,
    pub images: Vec<String>,
    pub word: String,
    pub p: u64,
    pub s: u32,
    pub modulus: Vec<u64>,
    pub h: TupleData,
    pub period: u64,
    pub trace: Vec<TupleData>,
    pub metadata: Metadata,
}

impl Certificate {
    /// Pretty-printed JSON with keys sorted at every level, newline-terminated.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("certificate serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Certificate> {
        serde_json::from_str(text).map_err(|e| CertifyError::Malformed(e.to_string()))
    }
}

fn tuple_data(t: &MatTuple) -> TupleData {
    t.mats().iter().map(Mat2::to_coeffs).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifyConfig {
    pub s_max: u32,
    pub seeds_per_field: u64,
    pub orbit_budget: u64,
    pub prime_floor: u64,
    /// Admissible primes tried before giving up.
    pub prime_attempts: usize,
    pub prime_cap: u64,
    pub field_cap: u64,
    pub seed: u64,
    pub allow_non_injective: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            s_max: 6,
            seeds_per_field: 64,
            orbit_budget: DEFAULT_ORBIT_BUDGET,
            prime_floor: 2,
            prime_attempts: 4,
            prime_cap: 1 << 20,
            field_cap: DEFAULT_FIELD_CAP,
            seed: 0,
            allow_non_injective: false,
        }
    }
}

/// `SL_2(Z/p)` with adjugate inverses.
struct Sl2ModP {
    p: u64,
}

impl GroupOps for Sl2ModP {
    type Elem = [u64; 4];
    fn identity(&self) -> [u64; 4] {
        [1, 0, 0, 1]
    }
    fn mul(&self, x: &[u64; 4], y: &[u64; 4]) -> [u64; 4] {
        let p = self.p as u128;
        let f = |a: u64, b: u64, c: u64, d: u64| {
            ((a as u128 * b as u128 + c as u128 * d as u128) % p) as u64
        };
        [
            f(x[0], y[0], x[1], y[2]),
            f(x[0], y[1], x[1], y[3]),
            f(x[2], y[0], x[3], y[2]),
            f(x[2], y[1], x[3], y[3]),
        ]
    }
    fn inv(&self, x: &[u64; 4]) -> [u64; 4] {
        let p = self.p;
        [x[3], (p - x[1]) % p, (p - x[2]) % p, x[0]]
    }
}

/// Whether `γ(φ^{4k}(w))` stays non-scalar modulo `p`, computed entirely in
/// `SL_2(Z/p)`.
pub fn nonscalar_mod_p(phi: &FreeEndo, w: &Word, p: u64) -> Result<bool> {
    let ops = Sl2ModP { p };
    let pb = num_bigint::BigInt::from(p);
    let mut gens: Vec<[u64; 4]> = sanov_generators(phi.rank())
        .iter()
        .map(|m| {
            m.entries.clone().map(|x| {
                let r = ((x % &pb) + &pb) % &pb;
                u64::try_from(r).expect("reduced below p")
            })
        })
        .collect();
    for _ in 0..4 * phi.rank() {
        gens = phi
            .images()
            .iter()
            .map(|img| word_evaluate(img, &gens, &ops))
            .collect::<std::result::Result<Vec<_>, _>>()?;
    }
    let m = word_evaluate(w, &gens, &ops)?;
    Ok(!(m[1] == 0 && m[2] == 0 && m[0] == m[3]))
}

/// Least prime `p >= floor`, `p <= cap`, with `γ(φ^{4k}(w))` non-scalar mod `p`.
pub fn pick_prime(phi: &FreeEndo, w: &Word, floor: u64, cap: u64) -> Result<u64> {
    let mut p = next_prime(floor.max(2));
    while p <= cap {
        if nonscalar_mod_p(phi, w, p)? {
            return Ok(p);
        }
        p = next_prime(p + 1);
    }
    Err(CertifyError::NoPrime { floor, cap })
}

/// `m` in `1..=s` with `step(h) = [Fr^m(h)]`, if any.
pub fn frobenius_shortcut(phi: &FreeEndo, h: &ProjPoint) -> Result<Option<u32>> {
    let next = pgl_dynamics_step(phi, h)?;
    for m in 1..=h.field().degree() {
        if proj_normalize(&frobenius_tuple(h.tuple(), m))? == next {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

fn seed_rng(seed: u64, p: u64, s: u32, index: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    for (chunk, v) in bytes.chunks_mut(8).zip([seed, p, s as u64, index]) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Uniform point of `PGL_2(F_q)^k`.
pub fn random_pgl_point(field: &Arc<FqField>, k: usize, rng: &mut impl Rng) -> ProjPoint {
    let q = field.order();
    let mats = (0..k)
        .map(|_| loop {
            let m = Mat2::new(std::array::from_fn(|_| {
                field.from_index(rng.gen_range(0..q)).expect("index below order")
            }))
            .expect("common field");
            if m.is_invertible() {
                break m;
            }
        })
        .collect();
    proj_normalize(&MatTuple::new(mats).expect("k >= 1")).expect("invertible components")
}

/// Result of one seeded orbit walk.
struct SeedHit {
    point: ProjPoint,
    period: u64,
}

fn try_seed(
    phi: &FreeEndo,
    w: &Word,
    field: &Arc<FqField>,
    config: &CertifyConfig,
    index: u64,
) -> Result<Option<SeedHit>> {
    let mut rng = seed_rng(config.seed, field.characteristic(), field.degree(), index);
    let h0 = random_pgl_point(field, phi.rank(), &mut rng);
    let orbit = match find_periodic_orbit(phi, &h0, config.orbit_budget) {
        Ok(o) => o,
        Err(OrbitError::Matrep(e)) => return Err(e.into()),
        Err(_) => return Ok(None),
    };
    let mut point = orbit.point;
    for _ in 0..orbit.period {
        if !pi_w(w, point.tuple())?.is_scalar() {
            return Ok(Some(SeedHit { point, period: orbit.period }));
        }
        point = pgl_dynamics_step(phi, &point)?;
    }
    Ok(None)
}

fn assemble(
    phi: &FreeEndo,
    w: &Word,
    field: &Arc<FqField>,
    hit: SeedHit,
    seed: u64,
    seed_index: u64,
) -> Result<Certificate> {
    let mut trace = Vec::with_capacity(hit.period as usize);
    let mut x = hit.point.clone();
    for _ in 0..hit.period {
        trace.push(tuple_data(x.tuple()));
        x = pgl_dynamics_step(phi, &x)?;
    }
    let frobenius_power = frobenius_shortcut(phi, &hit.point)?;
    if frobenius_power.is_some() {
        // Φ commutes with Frobenius, so step^s(h) = Fr^{ms}(h) = h
        debug_assert_eq!(field.degree() as u64 % hit.period, 0);
    }
    Ok(Certificate {
        format_version: FORMAT_VERSION,
        rank: phi.rank(),
        images: phi.images().iter().map(Word::to_string).collect(),
        word: w.to_string(),
        p: field.characteristic(),
        s: field.degree(),
        modulus: field.modulus().to_vec(),
        h: tuple_data(hit.point.tuple()),
        period: hit.period,
        trace,
        metadata: Metadata {
            seed,
            seed_index,
            frobenius_power,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Searches primes from [`pick_prime`] upward, and for each prime the field
/// degrees `1..=s_max`, walking `seeds_per_field` seeded orbits in parallel.
/// The lowest successful seed index wins, so the result is deterministic.
pub fn search_certificate(phi: &FreeEndo, w: &Word, config: &CertifyConfig) -> Result<Certificate> {
    if w.rank() != phi.rank() {
        return Err(CertifyError::RankMismatch { endo: phi.rank(), word: w.rank() });
    }
    if w.is_identity() {
        return Err(CertifyError::IdentityWord);
    }
    if !config.allow_non_injective && !phi.is_injective() {
        return Err(CertifyError::NotInjective);
    }
    let mut primes = Vec::new();
    let mut floor = config.prime_floor;
    while primes.len() < config.prime_attempts {
        let p = match pick_prime(phi, w, floor, config.prime_cap) {
            Ok(p) => p,
            Err(e) if primes.is_empty() => return Err(e),
            Err(_) => break,
        };
        primes.push(p);
        floor = p + 1;
        for s in 1..=config.s_max {
            let field = match FqField::with_cap(p, s, config.field_cap) {
                Ok(f) => f,
                Err(GfError::CapExceeded { .. }) => break,
                Err(e) => return Err(e.into()),
            };
            // chunks run in parallel; a chunk is consulted only if every lower
            // index failed, so the winner is the least successful index
            let chunk = rayon::current_num_threads().max(1) as u64;
            let mut start = 0;
            while start < config.seeds_per_field {
                let end = (start + chunk).min(config.seeds_per_field);
                let hits = (start..end)
                    .into_par_iter()
                    .map(|idx| try_seed(phi, w, &field, config, idx))
                    .collect::<Result<Vec<_>>>()?;
                if let Some((idx, hit)) = (start..end).zip(hits).find_map(|(i, h)| h.map(|h| (i, h))) {
                    return assemble(phi, w, &field, hit, config.seed, idx);
                }
                start = end;
            }
        }
    }
    Err(CertifyError::NotFound {
        primes,
        s_max: config.s_max,
        seeds: config.seeds_per_field,
    })
}

/// `v · c^shift` in `H^n ⋊ C_n`, where `c` acts by
/// `(c v c^{-1})_i = v_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WreathElem {
    pub coords: Vec<Mat2>,
    pub shift: usize,
}

/// `PGL_2(F_q) ≀ C_n`.
pub struct Wreath {
    pub base: Pgl2,
    pub n: usize,
}

impl Wreath {
    fn shifted(&self, v: &[Mat2], a: usize) -> Vec<Mat2> {
        (0..self.n).map(|i| v[(i + a) % self.n].clone()).collect()
    }

    pub fn c(&self) -> WreathElem {
        WreathElem { coords: vec![self.base.identity(); self.n], shift: 1 % self.n }
    }
}

impl GroupOps for Wreath {
    type Elem = WreathElem;
    fn identity(&self) -> WreathElem {
        WreathElem { coords: vec![self.base.identity(); self.n], shift: 0 }
    }
    fn mul(&self, x: &WreathElem, y: &WreathElem) -> WreathElem {
        let u = self.shifted(&y.coords, x.shift);
        WreathElem {
            coords: x.coords.iter().zip(&u).map(|(a, b)| self.base.mul(a, b)).collect(),
            shift: (x.shift + y.shift) % self.n,
        }
    }
    fn inv(&self, x: &WreathElem) -> WreathElem {
        let vinv: Vec<Mat2> = x.coords.iter().map(|a| self.base.inv(a)).collect();
        let back = (self.n - x.shift) % self.n;
        WreathElem { coords: self.shifted(&vinv, back), shift: back }
    }
}

#[derive(Debug, Clone)]
pub struct WreathData {
    pub period: usize,
    pub ys: Vec<WreathElem>,
    pub c: WreathElem,
    /// `c y_j c^{-1} = w_j(y)` for each generator.
    pub relations: Vec<bool>,
    pub w_image: WreathElem,
    pub w_nontrivial: bool,
}

impl WreathData {
    pub fn relations_hold(&self) -> bool {
        self.relations.iter().all(|&r| r)
    }
}

/// Wreath data from a decoded orbit. The relation check uses only group
/// operations with true inverses.
pub fn wreath_from_orbit(
    phi: &FreeEndo,
    w: &Word,
    field: &Arc<FqField>,
    trace: &[MatTuple],
) -> Result<WreathData> {
    let n = trace.len();
    if n == 0 || trace.iter().any(|t| t.len() != phi.rank()) {
        return Err(CertifyError::Malformed("trace shape".into()));
    }
    let g = Wreath { base: Pgl2 { field: field.clone() }, n };
    let ys: Vec<WreathElem> = (0..phi.rank())
        .map(|j| WreathElem {
            coords: trace.iter().map(|t| t.mats()[j].clone()).collect(),
            shift: 0,
        })
        .collect();
    let c = g.c();
    let c_inv = g.inv(&c);
    let relations = phi
        .images()
        .iter()
        .zip(&ys)
        .map(|(wj, yj)| {
            let lhs = g.mul(&g.mul(&c, yj), &c_inv);
            Ok(lhs == word_evaluate(wj, &ys, &g)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let w_image = word_evaluate(w, &ys, &g)?;
    let w_nontrivial = w_image != g.identity();
    Ok(WreathData { period: n, ys, c, relations, w_image, w_nontrivial })
}

/// Decodes a certificate and assembles its wreath data.
pub fn build_wreath(cert: &Certificate) -> Result<WreathData> {
    let decoded = decode(cert)?;
    let trace = decoded.trace.map_err(CertifyError::Malformed)?;
    wreath_from_orbit(&decoded.phi, &decoded.w, &decoded.field, &trace)
}

struct Decoded {
    phi: FreeEndo,
    w: Word,
    field: Arc<FqField>,
    h: std::result::Result<MatTuple, String>,
    trace: std::result::Result<Vec<MatTuple>, String>,
}

fn decode_tuple(field: &Arc<FqField>, k: usize, data: &TupleData) -> std::result::Result<MatTuple, String> {
    if data.len() != k {
        return Err(format!("expected {k} matrices, found {}", data.len()));
    }
    let mats = data
        .iter()
        .map(|m| {
            let entries: [Vec<u64>; 4] = m
                .clone()
                .try_into()
                .map_err(|_| format!("matrix with {} entries", m.len()))?;
            Mat2::from_coeffs(field, entries).map_err(|e| e.to_string())
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    MatTuple::new(mats).map_err(|e| e.to_string())
}

/// Structural decoding. Errors in the field description are fatal; errors in
/// the matrix data are kept for the verdict.
fn decode(cert: &Certificate) -> Result<Decoded> {
    if cert.format_version != FORMAT_VERSION {
        return Err(CertifyError::Malformed(format!("format_version {}", cert.format_version)));
    }
    let phi = FreeEndo::parse_images(&cert.images)?;
    if phi.rank() != cert.rank {
        return Err(CertifyError::Malformed("rank disagrees with images".into()));
    }
    let w = Word::parse(&cert.word, cert.rank)?;
    let field = FqField::new(cert.p, cert.s)?;
    let h = decode_tuple(&field, cert.rank, &cert.h);
    let trace = cert
        .trace
        .iter()
        .map(|t| decode_tuple(&field, cert.rank, t))
        .collect();
    Ok(Decoded { phi, w, field, h, trace })
}

/// Verdict entry names.
pub const CHECK_FIELD: &str = "field";
pub const CHECK_MEMBERSHIP: &str = "membership";
pub const CHECK_I: &str = "condition_i";
pub const CHECK_II: &str = "condition_ii";
pub const CHECK_III: &str = "condition_iii";
pub const CHECK_WREATH: &str = "wreath";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        write!(f, "{}", if self.passed() { "VERIFIED" } else { "REJECTED" })
    }
}

/// Re-derives every claim of `cert` from its serialized data.
pub fn verify_certificate(cert: &Certificate) -> Result<Verdict> {
    let mut v = Verdict { checks: Vec::new() };
    let blocked = |v: &mut Verdict, names: &[&str], why: &str| {
        for n in names {
            v.push(n, false, format!("not evaluable: {why}"));
        }
    };

    if cert.format_version != FORMAT_VERSION {
        return Err(CertifyError::Malformed(format!("format_version {}", cert.format_version)));
    }
    let field_ok = is_prime(cert.p)
        && cert.s >= 1
        && FqField::new(cert.p, cert.s).is_ok_and(|f| f.modulus() == cert.modulus.as_slice());
    if !field_ok {
        v.push(CHECK_FIELD, false, format!("p = {}, s = {}, modulus {:?} does not name a field", cert.p, cert.s, cert.modulus));
        v.push(CHECK_I, true, "vacuous: free group has no relations");
        blocked(&mut v, &[CHECK_MEMBERSHIP, CHECK_II, CHECK_III, CHECK_WREATH], "field");
        return Ok(v);
    }
    let d = decode(cert)?;
    v.push(CHECK_FIELD, true, format!("F_{}^{}", cert.p, cert.s));

    let membership = (|| -> std::result::Result<(MatTuple, Vec<MatTuple>), String> {
        let h = d.h.clone()?;
        let trace = d.trace.clone()?;
        for (label, t) in std::iter::once(("h".to_string(), &h))
            .chain(trace.iter().enumerate().map(|(i, t)| (format!("trace[{i}]"), t)))
        {
            for (j, m) in t.mats().iter().enumerate() {
                if !m.is_invertible() {
                    return Err(format!("{label} component {j} is singular"));
                }
                if !m.is_normalized() {
                    return Err(format!("{label} component {j} is not scalar-canonical"));
                }
            }
        }
        Ok((h, trace))
    })();
    let (h, trace) = match membership {
        Ok(x) => x,
        Err(why) => {
            v.push(CHECK_MEMBERSHIP, false, why);
            v.push(CHECK_I, true, "vacuous: free group has no relations");
            blocked(&mut v, &[CHECK_II, CHECK_III, CHECK_WREATH], "membership");
            return Ok(v);
        }
    };
    v.push(CHECK_MEMBERSHIP, true, format!("{} tuples in PGL_2^{}", trace.len() + 1, cert.rank));
    v.push(CHECK_I, true, "vacuous: free group has no relations");

    // (ii): the trace is the φ_H-orbit of h and closes up after `period` steps
    let periodic = (|| -> std::result::Result<String, String> {
        let n = cert.period;
        if n == 0 {
            return Err("period 0".into());
        }
        if trace.len() as u64 != n {
            return Err(format!("trace has {} tuples, period claims {n}", trace.len()));
        }
        if trace[0] != h {
            return Err("trace does not start at h".into());
        }
        for i in 0..trace.len() {
            let x = proj_normalize(&trace[i]).map_err(|e| e.to_string())?;
            let next = pgl_dynamics_step(&d.phi, &x).map_err(|e| format!("step {i}: {e}"))?;
            let expect = &trace[(i + 1) % trace.len()];
            if next.tuple() != expect {
                return Err(format!("step from trace[{i}] does not reach trace[{}]", (i + 1) % trace.len()));
            }
        }
        Ok(format!("φ_H^{n}(h) = h"))
    })();
    match periodic {
        Ok(msg) => v.push(CHECK_II, true, msg),
        Err(msg) => v.push(CHECK_II, false, msg),
    }

    // (iii): two independent routes to w(h) != 1 in PGL_2
    let adj_route = pi_w(&d.w, &h).map(|m| !m.is_scalar());
    let pgl = Pgl2 { field: d.field.clone() };
    let inv_route = word_evaluate(&d.w, h.mats(), &pgl).map(|m| m != pgl.identity());
    match (adj_route, inv_route) {
        (Ok(true), Ok(true)) => v.push(CHECK_III, true, format!("w = {} is non-scalar at h", d.w)),
        (Ok(a), Ok(b)) if a == b => v.push(CHECK_III, false, format!("w = {} is scalar at h", d.w)),
        (Ok(a), Ok(b)) => v.push(CHECK_III, false, format!("routes disagree: adjugate {a}, inverse {b}")),
        (Err(e), _) => v.push(CHECK_III, false, e.to_string()),
        (_, Err(e)) => v.push(CHECK_III, false, e.to_string()),
    }

    match wreath_from_orbit(&d.phi, &d.w, &d.field, &trace) {
        Ok(wd) => {
            let failed: Vec<usize> = wd
                .relations
                .iter()
                .enumerate()
                .filter(|(_, ok)| !**ok)
                .map(|(j, _)| j + 1)
                .collect();
            let first = wd.w_image.coords[0] != pgl.identity();
            if failed.is_empty() && wd.w_nontrivial && first {
                v.push(CHECK_WREATH, true, format!("relations hold in PGL_2 ≀ C_{}; w survives", wd.period));
            } else if !failed.is_empty() {
                v.push(CHECK_WREATH, false, format!("relation t x_j t^-1 = w_j fails for j in {failed:?}"));
            } else {
                v.push(CHECK_WREATH, false, "image of w is trivial in the first coordinate");
            }
        }
        Err(e) => v.push(CHECK_WREATH, false, e.to_string()),
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::nonscalar_sanity_check;
    use num_integer::Integer;
    use num_traits::Zero;

    fn endo(imgs: &[&str]) -> FreeEndo {
        FreeEndo::parse_images(imgs).unwrap()
    }

    fn w(s: &str, k: usize) -> Word {
        Word::parse(s, k).unwrap()
    }

    /// Least prime `>= floor` not dividing the integer scalar defect.
    fn integer_route(phi: &FreeEndo, w: &Word, floor: u64) -> u64 {
        let (_, m) = nonscalar_sanity_check(phi, w, 4 * phi.rank() as u32, 1 << 20).unwrap();
        let defect = m.scalar_defect();
        assert!(!defect.is_zero());
        let mut p = next_prime(floor);
        while defect.is_multiple_of(&num_bigint::BigInt::from(p)) {
            p = next_prime(p + 1);
        }
        p
    }

    #[test]
    fn pick_prime_examples() {
        // γ(a^16) = [[1, 32], [0, 1]]
        assert_eq!(pick_prime(&endo(&["aa"]), &w("a", 1), 2, 1000).unwrap(), 3);
        assert_eq!(pick_prime(&endo(&["a"]), &w("a", 1), 2, 1000).unwrap(), 3);
        // 3 divides the scalar defect of γ(φ^8(a)) here
        assert_eq!(pick_prime(&endo(&["ab", "ba"]), &w("a", 2), 2, 1000).unwrap(), 5);
        assert_eq!(pick_prime(&endo(&["aa"]), &w("a", 1), 5, 1000).unwrap(), 5);
        // γ(a^2 b^3) = [[25, 4], [6, 1]]: defect gcd(4, 6, 24) = 2
        let id = FreeEndo::identity(2);
        assert_eq!(pick_prime(&id, &w("aabbb", 2), 2, 1000).unwrap(), 3);
    }

    #[test]
    fn pick_prime_matches_integer_route() {
        let cases = [
            (vec!["ab", "ba"], vec!["a", "b", "ab", "aB", "abAB"]),
            (vec!["aa"], vec!["a", "aaa"]),
            (vec!["aB", "b"], vec!["a", "ba"]),
            (vec!["b", "a"], vec!["ab", "aab"]),
            (vec!["ab", "b", "c"], vec!["c", "ac"]),
        ];
        for (imgs, words) in cases {
            let phi = endo(&imgs);
            for text in words {
                let word = w(text, phi.rank());
                for floor in [2, 3, 7] {
                    assert_eq!(
                        pick_prime(&phi, &word, floor, 10_000).unwrap(),
                        integer_route(&phi, &word, floor),
                        "{imgs:?} {text} {floor}"
                    );
                }
            }
        }
    }

    #[test]
    fn preconditions() {
        let phi = endo(&["aa"]);
        let cfg = CertifyConfig::default();
        assert_eq!(search_certificate(&phi, &Word::identity(1), &cfg).unwrap_err(), CertifyError::IdentityWord);
        assert_eq!(
            search_certificate(&endo(&["a", "a"]), &w("a", 2), &cfg).unwrap_err(),
            CertifyError::NotInjective
        );
        assert!(matches!(
            search_certificate(&phi, &w("a", 2), &cfg),
            Err(CertifyError::RankMismatch { .. })
        ));
    }

    fn small_config() -> CertifyConfig {
        CertifyConfig { s_max: 3, seeds_per_field: 16, ..CertifyConfig::default() }
    }

    #[test]
    fn squaring_certificate() {
        let phi = endo(&["aa"]);
        let cert = search_certificate(&phi, &w("a", 1), &small_config()).unwrap();
        assert_eq!(cert.p, 3);
        let verdict = verify_certificate(&cert).unwrap();
        assert!(verdict.passed(), "{verdict}");
        let wd = build_wreath(&cert).unwrap();
        assert!(wd.relations_hold());
        assert!(wd.w_nontrivial);
        // y_1 conjugated by c is y_1 squared coordinatewise
        let g = Wreath { base: Pgl2 { field: FqField::new(cert.p, cert.s).unwrap() }, n: wd.period };
        let lhs = g.mul(&g.mul(&wd.c, &wd.ys[0]), &g.inv(&wd.c));
        assert_eq!(lhs, g.mul(&wd.ys[0], &wd.ys[0]));
    }

    #[test]
    fn fixed_point_wreath_degenerates() {
        // the identity endomorphism fixes every tuple
        let phi = FreeEndo::identity(2);
        let cfg = CertifyConfig { allow_non_injective: false, ..small_config() };
        let cert = search_certificate(&phi, &w("ab", 2), &cfg).unwrap();
        assert_eq!(cert.period, 1);
        let wd = build_wreath(&cert).unwrap();
        assert_eq!(wd.c, Wreath { base: Pgl2 { field: FqField::new(cert.p, cert.s).unwrap() }, n: 1 }.identity());
        assert!(wd.relations_hold());
        assert!(verify_certificate(&cert).unwrap().passed());
    }

    #[test]
    fn wreath_group_laws() {
        let f = FqField::new(3, 1).unwrap();
        let g = Wreath { base: Pgl2 { field: f.clone() }, n: 3 };
        let mut rng = seed_rng(1, 2, 3, 4);
        let mut random = || WreathElem {
            coords: random_pgl_point(&f, 3, &mut rng).into_tuple().mats().to_vec(),
            shift: rng.gen_range(0..3),
        };
        for _ in 0..30 {
            let (x, y, z) = (random(), random(), random());
            assert_eq!(g.mul(&g.mul(&x, &y), &z), g.mul(&x, &g.mul(&y, &z)));
            assert_eq!(g.mul(&x, &g.inv(&x)), g.identity());
            assert_eq!(g.mul(&g.inv(&x), &x), g.identity());
        }
        let c = g.c();
        let v = WreathElem { coords: random().coords, shift: 0 };
        let conj = g.mul(&g.mul(&c, &v), &g.inv(&c));
        assert_eq!(conj.shift, 0);
        for i in 0..3 {
            assert_eq!(conj.coords[i], v.coords[(i + 1) % 3]);
        }
    }

    #[test]
    fn certificate_roundtrip_and_determinism() {
        let phi = endo(&["ab", "ba"]);
        let a = search_certificate(&phi, &w("a", 2), &small_config()).unwrap();
        let b = search_certificate(&phi, &w("a", 2), &small_config()).unwrap();
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
        let back = Certificate::from_json(&a.to_canonical_json()).unwrap();
        assert_eq!(back, a);
        assert!(verify_certificate(&back).unwrap().passed());
        let json = a.to_canonical_json();
        let keys: Vec<&str> = json
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    fn all_pgl(f: &Arc<FqField>) -> Vec<Mat2> {
        let q = f.order();
        let mut out = Vec::new();
        for idx in 0..q.pow(4) {
            let m = Mat2::new(std::array::from_fn(|j| f.from_index(idx / q.pow(j as u32) % q).unwrap())).unwrap();
            if m.is_invertible() && m.is_normalized() {
                out.push(m);
            }
        }
        out
    }

    #[test]
    fn frobenius_shortcut_agrees_with_orbit() {
        for (imgs, p, s) in [(vec!["aa"], 3u64, 2u32), (vec!["ab", "ba"], 3, 1), (vec!["aB", "ab"], 2, 2)] {
            let phi = endo(&imgs);
            let f = FqField::new(p, s).unwrap();
            let group = all_pgl(&f);
            assert_eq!(group.len() as u64, f.order() * (f.order() * f.order() - 1));
            let points: Vec<ProjPoint> = if phi.rank() == 1 {
                group.iter().map(|m| proj_normalize(&MatTuple::new(vec![m.clone()]).unwrap()).unwrap()).collect()
            } else {
                group
                    .iter()
                    .flat_map(|a| group.iter().map(move |b| (a, b)))
                    .map(|(a, b)| proj_normalize(&MatTuple::new(vec![a.clone(), b.clone()]).unwrap()).unwrap())
                    .collect()
            };
            let mut hits = 0;
            for h in &points {
                if frobenius_shortcut(&phi, h).unwrap().is_some() {
                    hits += 1;
                    let orbit = find_periodic_orbit(&phi, h, 1_000_000).unwrap();
                    // h lies on its own cycle and the period divides s
                    let mut x = h.clone();
                    for _ in 0..orbit.period {
                        x = pgl_dynamics_step(&phi, &x).unwrap();
                    }
                    assert_eq!(&x, h);
                    assert_eq!(s as u64 % orbit.period, 0);
                }
            }
            // the identity tuple is always quasi-fixed
            assert!(hits > 0, "{imgs:?}");
        }
    }

    #[test]
    fn tampering_is_detected() {
        let phi = endo(&["ab", "ba"]);
        let cert = search_certificate(&phi, &w("a", 2), &small_config()).unwrap();
        let mut bad = cert.clone();
        bad.period += 1;
        assert_eq!(verify_certificate(&bad).unwrap().failed(), vec![CHECK_II]);
        let mut bad = cert.clone();
        bad.word = "1".into();
        assert!(verify_certificate(&bad).unwrap().failed().contains(&CHECK_III));
        let mut bad = cert.clone();
        bad.format_version = 99;
        assert!(matches!(verify_certificate(&bad), Err(CertifyError::Malformed(_))));
    }
}
