//! Words in the free group `F_k`, endomorphisms, Stallings folding and the
//! Sanov representation into `SL_2(Z)`.
//!
//! A letter is a signed generator index: `+i` is `x_i`, `-i` is `x_i^{-1}`.
//! Every [`Word`] is kept freely reduced.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FreeGroupError {
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),
    #[error("generator index {index} exceeds rank {rank}")]
    RankExceeded { index: u32, rank: usize },
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("expected {expected} group elements, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("word length {len} exceeds the budget {budget}")]
    Budget { len: usize, budget: usize },
    #[error("malformed endomorphism: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, FreeGroupError>;

/// Cancels adjacent inverse pairs.
pub fn free_reduce(letters: &[i32]) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// A freely reduced word in `x_1^{±1}, ..., x_k^{±1}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    rank: usize,
    letters: Vec<i32>,
}

impl Word {
    pub fn new(rank: usize, letters: &[i32]) -> Result<Word> {
        if rank == 0 {
            return Err(FreeGroupError::ZeroRank);
        }
        for &l in letters {
            let index = l.unsigned_abs();
            if l == 0 || index as usize > rank {
                return Err(FreeGroupError::RankExceeded { index, rank });
            }
        }
        Ok(Word { rank, letters: free_reduce(letters) })
    }

    pub fn identity(rank: usize) -> Word {
        Word { rank, letters: Vec::new() }
    }

    /// The generator `x_i`, 1-based.
    pub fn generator(rank: usize, i: usize) -> Word {
        assert!(i >= 1 && i <= rank, "generator out of range");
        Word { rank, letters: vec![i as i32] }
    }

    /// Parses `abA`-style text (lowercase generators, uppercase inverses) or
    /// the indexed form `x1X2x3`. Empty text and `1` denote the identity.
    pub fn parse(text: &str, rank: usize) -> Result<Word> {
        let text: String = text.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
        if text.is_empty() || text == "1" {
            return Word::new(rank, &[]);
        }
        let mut letters = Vec::new();
        if text.chars().any(|c| c.is_ascii_digit()) {
            let bytes = text.as_bytes();
            let mut i = 0;
            while i < bytes.len() {
                let sign = match bytes[i] {
                    b'x' => 1,
                    b'X' => -1,
                    _ => return Err(FreeGroupError::UnknownGenerator(text[i..].to_string())),
                };
                let start = i + 1;
                let mut end = start;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                let index: u32 = text[start..end]
                    .parse()
                    .map_err(|_| FreeGroupError::UnknownGenerator(text[i..].to_string()))?;
                if index == 0 || index > i32::MAX as u32 {
                    return Err(FreeGroupError::UnknownGenerator(text[i..end].to_string()));
                }
                letters.push(sign * index as i32);
                i = end;
            }
        } else {
            for c in text.chars() {
                let l = match c {
                    'a'..='z' => (c as u8 - b'a' + 1) as i32,
                    'A'..='Z' => -((c as u8 - b'A' + 1) as i32),
                    _ => return Err(FreeGroupError::UnknownGenerator(c.to_string())),
                };
                letters.push(l);
            }
        }
        Word::new(rank, &letters)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn multiply(&self, other: &Word) -> Result<Word> {
        if self.rank != other.rank {
            return Err(FreeGroupError::RankMismatch(self.rank, other.rank));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(Word { rank: self.rank, letters: free_reduce(&letters) })
    }

    pub fn inverse(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| -l).collect(),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for &l in &self.letters {
            let i = l.unsigned_abs();
            if self.rank <= 26 {
                let base = if l > 0 { b'a' } else { b'A' };
                write!(f, "{}", (base + (i as u8) - 1) as char)?;
            } else {
                write!(f, "{}{}", if l > 0 { 'x' } else { 'X' }, i)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self)
    }
}

/// An endomorphism `x_i -> w_i` of `F_k`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FreeEndo {
    rank: usize,
    images: Vec<Word>,
}

/// On-disk form: `{"rank": k, "images": ["ab", "ba"]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct EndoFile {
    pub rank: usize,
    pub images: Vec<String>,
}

impl FreeEndo {
    pub fn new(images: Vec<Word>) -> Result<FreeEndo> {
        let rank = images.len();
        if rank == 0 {
            return Err(FreeGroupError::ZeroRank);
        }
        if let Some(w) = images.iter().find(|w| w.rank != rank) {
            return Err(FreeGroupError::RankMismatch(rank, w.rank));
        }
        Ok(FreeEndo { rank, images })
    }

    pub fn identity(rank: usize) -> FreeEndo {
        FreeEndo {
            rank,
            images: (1..=rank).map(|i| Word::generator(rank, i)).collect(),
        }
    }

    pub fn parse_images<S: AsRef<str>>(images: &[S]) -> Result<FreeEndo> {
        let rank = images.len();
        let words = images
            .iter()
            .map(|s| Word::parse(s.as_ref(), rank))
            .collect::<Result<Vec<_>>>()?;
        FreeEndo::new(words)
    }

    pub fn from_file(file: &EndoFile) -> Result<FreeEndo> {
        if file.images.len() != file.rank {
            return Err(FreeGroupError::Malformed(format!(
                "rank {} but {} images",
                file.rank,
                file.images.len()
            )));
        }
        FreeEndo::parse_images(&file.images)
    }

    pub fn from_json(text: &str) -> Result<FreeEndo> {
        let file: EndoFile =
            serde_json::from_str(text).map_err(|e| FreeGroupError::Malformed(e.to_string()))?;
        FreeEndo::from_file(&file)
    }

    pub fn to_file(&self) -> EndoFile {
        EndoFile {
            rank: self.rank,
            images: self.images.iter().map(|w| w.to_string()).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn apply(&self, w: &Word) -> Result<Word> {
        self.apply_bounded(w, usize::MAX)
    }

    pub fn apply_bounded(&self, w: &Word, budget: usize) -> Result<Word> {
        if w.rank != self.rank {
            return Err(FreeGroupError::RankMismatch(self.rank, w.rank));
        }
        let mut letters = Vec::new();
        for &l in &w.letters {
            let img = &self.images[l.unsigned_abs() as usize - 1];
            if l > 0 {
                letters.extend_from_slice(&img.letters);
            } else {
                letters.extend(img.letters.iter().rev().map(|x| -x));
            }
            if letters.len() > budget {
                letters = free_reduce(&letters);
                if letters.len() > budget {
                    return Err(FreeGroupError::Budget { len: letters.len(), budget });
                }
            }
        }
        Ok(Word { rank: self.rank, letters: free_reduce(&letters) })
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &FreeEndo) -> Result<FreeEndo> {
        if self.rank != other.rank {
            return Err(FreeGroupError::RankMismatch(self.rank, other.rank));
        }
        let images = other
            .images
            .iter()
            .map(|w| self.apply(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(FreeEndo { rank: self.rank, images })
    }

    pub fn power(&self, n: u32) -> FreeEndo {
        let mut out = FreeEndo::identity(self.rank);
        for _ in 0..n {
            out = self.compose(&out).expect("same rank");
        }
        out
    }

    /// Injective iff the images span a free subgroup of rank `k`.
    pub fn is_injective(&self) -> bool {
        StallingsGraph::fold(&self.images, self.rank).rank() == self.rank as i64
    }
}

impl fmt::Display for FreeEndo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .images
            .iter()
            .enumerate()
            .map(|(i, w)| format!("{} -> {}", Word::generator(self.rank, i + 1), w))
            .collect();
        write!(f, "{}", parts.join(", "))
    }
}

impl fmt::Debug for FreeEndo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FreeEndo({})", self)
    }
}

/// The three operations a target group must supply for word evaluation.
pub trait GroupOps {
    type Elem: Clone;
    fn identity(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;
}

/// `w(h_1, ..., h_k)` in the group described by `ops`.
pub fn word_evaluate<G: GroupOps>(w: &Word, elements: &[G::Elem], ops: &G) -> Result<G::Elem> {
    if elements.len() != w.rank {
        return Err(FreeGroupError::Arity { expected: w.rank, got: elements.len() });
    }
    let inverses: Vec<Option<G::Elem>> = (0..w.rank)
        .map(|i| w.letters.contains(&-(i as i32 + 1)).then(|| ops.inv(&elements[i])))
        .collect();
    let mut acc = ops.identity();
    for &l in &w.letters {
        let i = l.unsigned_abs() as usize - 1;
        let h = if l > 0 {
            &elements[i]
        } else {
            inverses[i].as_ref().expect("precomputed")
        };
        acc = ops.mul(&acc, h);
    }
    Ok(acc)
}

/// Folded (core) graph of a finitely generated subgroup.
///
/// Edges are `(source, label, target)` with positive labels; reading a
/// letter `-i` traverses an `i`-edge backwards. Vertex `0` is the basepoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StallingsGraph {
    vertices: usize,
    edges: Vec<(usize, u32, usize)>,
    folded: bool,
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

impl StallingsGraph {
    /// Unfolded wedge of one loop per nontrivial word.
    pub fn bouquet(words: &[Word]) -> StallingsGraph {
        let mut vertices = 1;
        let mut edges = Vec::new();
        for w in words.iter().filter(|w| !w.is_identity()) {
            let mut at = 0;
            for (pos, &l) in w.letters.iter().enumerate() {
                let next = if pos + 1 == w.len() {
                    0
                } else {
                    vertices += 1;
                    vertices - 1
                };
                let label = l.unsigned_abs();
                if l > 0 {
                    edges.push((at, label, next));
                } else {
                    edges.push((next, label, at));
                }
                at = next;
            }
        }
        StallingsGraph { vertices, edges, folded: false }
    }

    /// Folds and prunes to the core graph of `<words>`.
    pub fn fold(words: &[Word], _rank: usize) -> StallingsGraph {
        StallingsGraph::bouquet(words).folded()
    }

    pub fn folded(&self) -> StallingsGraph {
        let mut parent: Vec<usize> = (0..self.vertices).collect();
        let mut edges = self.edges.clone();
        loop {
            for e in edges.iter_mut() {
                e.0 = find(&mut parent, e.0);
                e.2 = find(&mut parent, e.2);
            }
            edges.sort_unstable();
            edges.dedup();
            let mut merge = None;
            let mut out: BTreeMap<(usize, u32), usize> = BTreeMap::new();
            let mut inc: BTreeMap<(usize, u32), usize> = BTreeMap::new();
            for &(s, l, t) in &edges {
                if let Some(&t2) = out.get(&(s, l)) {
                    merge = Some((t, t2));
                    break;
                }
                out.insert((s, l), t);
                if let Some(&s2) = inc.get(&(t, l)) {
                    merge = Some((s, s2));
                    break;
                }
                inc.insert((t, l), s);
            }
            match merge {
                Some((a, b)) => {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    // keep the basepoint's class representative at 0
                    let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    parent[drop] = keep;
                }
                None => break,
            }
        }
        // prune hanging trees, keeping the basepoint
        let root = find(&mut parent, 0);
        loop {
            let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
            for &(s, _, t) in &edges {
                *degree.entry(s).or_default() += 1;
                *degree.entry(t).or_default() += 1;
            }
            let before = edges.len();
            edges.retain(|&(s, _, t)| {
                let leaf = |v: usize| v != root && degree[&v] == 1;
                !(leaf(s) || leaf(t))
            });
            if edges.len() == before {
                break;
            }
        }
        // canonical labels: breadth-first from the basepoint, visiting
        // outgoing edges by label, then incoming edges by label
        let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
        relabel.insert(root, 0);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let mut next: Vec<(bool, u32, usize)> = edges
                .iter()
                .filter_map(|&(s, l, t)| {
                    if s == v {
                        Some((false, l, t))
                    } else if t == v {
                        Some((true, l, s))
                    } else {
                        None
                    }
                })
                .collect();
            next.sort_unstable();
            for (_, _, u) in next {
                if !relabel.contains_key(&u) {
                    relabel.insert(u, relabel.len());
                    queue.push_back(u);
                }
            }
        }
        let mut edges: Vec<_> = edges
            .into_iter()
            .map(|(s, l, t)| (relabel[&s], l, relabel[&t]))
            .collect();
        edges.sort_unstable();
        StallingsGraph { vertices: relabel.len(), edges, folded: true }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, u32, usize)] {
        &self.edges
    }

    pub fn is_folded(&self) -> bool {
        self.folded
    }

    /// `E - V + 1`; the subgroup rank once folded.
    pub fn rank(&self) -> i64 {
        self.edges.len() as i64 - self.vertices as i64 + 1
    }

    /// Whether the labelled graph accepts `w` as a closed path at the basepoint.
    pub fn accepts(&self, w: &Word) -> bool {
        let mut at = 0;
        for &l in &w.letters {
            let label = l.unsigned_abs();
            let next = if l > 0 {
                self.edges.iter().find(|e| e.0 == at && e.1 == label).map(|e| e.2)
            } else {
                self.edges.iter().find(|e| e.2 == at && e.1 == label).map(|e| e.0)
            };
            match next {
                Some(v) => at = v,
                None => return false,
            }
        }
        at == 0
    }
}

/// Rank of the subgroup generated by `words`.
pub fn subgroup_rank(words: &[Word]) -> i64 {
    StallingsGraph::bouquet(words).folded().rank()
}

/// 2x2 integer matrix `[[a, b], [c, d]]`, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix2 {
    pub entries: [BigInt; 4],
}

impl IntMatrix2 {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> IntMatrix2 {
        IntMatrix2 { entries: [a.into(), b.into(), c.into(), d.into()] }
    }

    pub fn identity() -> IntMatrix2 {
        IntMatrix2::new(1, 0, 0, 1)
    }

    pub fn mul(&self, o: &IntMatrix2) -> IntMatrix2 {
        let [a, b, c, d] = &self.entries;
        let [e, f, g, h] = &o.entries;
        IntMatrix2 {
            entries: [a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h],
        }
    }

    /// Adjugate; the inverse for determinant-1 matrices.
    pub fn adj(&self) -> IntMatrix2 {
        let [a, b, c, d] = &self.entries;
        IntMatrix2 { entries: [d.clone(), -b, -c, a.clone()] }
    }

    pub fn det(&self) -> BigInt {
        let [a, b, c, d] = &self.entries;
        a * d - b * c
    }

    pub fn is_scalar(&self) -> bool {
        let [a, b, c, d] = &self.entries;
        b.is_zero() && c.is_zero() && a == d
    }

    pub fn is_plus_minus_identity(&self) -> bool {
        self.is_scalar() && self.entries[0].abs().is_one()
    }

    /// `gcd(b, c, a - d)`: the matrix is scalar mod `p` iff `p` divides it.
    pub fn scalar_defect(&self) -> BigInt {
        use num_integer::Integer;
        let [a, b, c, d] = &self.entries;
        b.gcd(c).gcd(&(a - d))
    }

    pub fn max_bits(&self) -> u64 {
        self.entries.iter().map(|x| x.bits()).max().unwrap_or(0)
    }
}

impl fmt::Debug for IntMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = &self.entries;
        write!(f, "[[{a}, {b}], [{c}, {d}]]")
    }
}

/// `SL_2(Z)` with adjugate inverses.
pub struct Sl2Z;

impl GroupOps for Sl2Z {
    type Elem = IntMatrix2;
    fn identity(&self) -> IntMatrix2 {
        IntMatrix2::identity()
    }
    fn mul(&self, a: &IntMatrix2, b: &IntMatrix2) -> IntMatrix2 {
        a.mul(b)
    }
    fn inv(&self, a: &IntMatrix2) -> IntMatrix2 {
        a.adj()
    }
}

/// Images of the generators of `F_k` under the Sanov embedding.
///
/// For `k <= 2` these are `[[1,2],[0,1]]` and `[[1,0],[2,1]]`; for `k > 2`,
/// `x_i -> s1^i s2 s1^{-i}`, which embeds `F_k` in `F_2`.
pub fn sanov_generators(rank: usize) -> Vec<IntMatrix2> {
    let s2 = IntMatrix2::new(1, 0, 2, 1);
    if rank <= 2 {
        return [IntMatrix2::new(1, 2, 0, 1), s2].into_iter().take(rank).collect();
    }
    (1..=rank as i64)
        .map(|i| {
            let s1i = IntMatrix2::new(1, 2 * i, 0, 1);
            s1i.mul(&s2).mul(&s1i.adj())
        })
        .collect()
}

pub fn sanov_embed(w: &Word) -> IntMatrix2 {
    word_evaluate(w, &sanov_generators(w.rank), &Sl2Z).expect("arity matches rank")
}

/// Default cap on entry size (bits) in [`nonscalar_sanity_check`].
pub const DEFAULT_SANOV_BITS: u64 = 1 << 16;

/// `γ(φ^n(w))` over `Z` and whether it is non-scalar.
///
/// The matrices `γ(φ^j(x_i))` are advanced one power at a time, so the word
/// `φ^n(w)` is never expanded.
pub fn nonscalar_sanity_check(
    phi: &FreeEndo,
    w: &Word,
    n: u32,
    max_bits: u64,
) -> Result<(bool, IntMatrix2)> {
    if w.rank != phi.rank {
        return Err(FreeGroupError::RankMismatch(phi.rank, w.rank));
    }
    let mut gens = sanov_generators(phi.rank);
    for _ in 0..n {
        gens = phi
            .images
            .iter()
            .map(|img| word_evaluate(img, &gens, &Sl2Z))
            .collect::<Result<Vec<_>>>()?;
        let bits = gens.iter().map(IntMatrix2::max_bits).max().unwrap_or(0);
        if bits > max_bits {
            return Err(FreeGroupError::Budget { len: bits as usize, budget: max_bits as usize });
        }
    }
    let m = word_evaluate(w, &gens, &Sl2Z)?;
    Ok((!m.is_scalar(), m))
}
