//! Addresses of cells: words over a finite alphabet, the reduction to
//! canonical words over `S`, and neighborhood operators on word sets.
//!
//! Nothing here knows about geometry. Adjacency comes in through the
//! [`Adjacency`] trait.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite word `w = w_1 w_2 ... w_n`; the empty word has level 0.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn child(&self, letter: u8) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    pub fn prefix(&self, k: usize) -> Word {
        Word(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn parent(&self) -> Option<Word> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.prefix(self.0.len() - 1))
        }
    }
}

/// `v·w`.
pub fn concat(v: &Word, w: &Word) -> Word {
    v.concat(w)
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&l| l < 10) {
            for l in &self.0 {
                write!(f, "{l}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Digits (`"012"`) or dot-separated letters (`"10.3"`). `""` and `"-"` are the empty word.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "-" {
            return Ok(Word::empty());
        }
        let bad = || Error::InvalidInput(format!("cannot parse word '{s}'"));
        if s.contains('.') {
            s.split('.')
                .map(|p| p.parse::<u8>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()
                .map(Word)
        } else {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(bad))
                .collect::<Result<Vec<_>>>()
                .map(Word)
        }
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite group given by tables, acting on the letters of `S`.
///
/// Element 0 is the identity. `compose[g][s] = (ĝ, ŝ)` encodes
/// `g ∘ F_s = F_ŝ ∘ ĝ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTable {
    pub mult: Vec<Vec<usize>>,
    pub compose: Vec<Vec<(usize, u8)>>,
}

impl GroupTable {
    pub fn trivial(n_letters: usize) -> Self {
        GroupTable {
            mult: vec![vec![0]],
            compose: vec![(0..n_letters).map(|s| (0, s as u8)).collect()],
        }
    }

    /// Cyclic group `Z_k` acting on `S = {0..k-1}` by `g·s = s + g mod k`.
    pub fn cyclic_rotation(k: usize) -> Self {
        GroupTable {
            mult: (0..k).map(|a| (0..k).map(|b| (a + b) % k).collect()).collect(),
            compose: (0..k)
                .map(|g| (0..k).map(|s| (g, ((s + g) % k) as u8)).collect())
                .collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.mult.len()
    }
}

/// Index sets `W ⊇ S`, `I ⊆ Î`, radius `M`, and the isometry data for `W ∖ S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphabetSpec {
    /// `W = {0, .., w_size-1}`.
    pub w_size: usize,
    pub s: Vec<u8>,
    pub i: Vec<u8>,
    pub ihat: Vec<u8>,
    pub m: usize,
    /// For every letter of `W`: `(j(i), Ψ_i)`.
    pub isometry: Vec<(u8, usize)>,
    pub group: GroupTable,
}

impl AlphabetSpec {
    /// `W = S = {0..n-1}` with the trivial group.
    pub fn simple(n: usize, i: Vec<u8>, m: usize) -> Self {
        AlphabetSpec {
            w_size: n,
            s: (0..n as u8).collect(),
            ihat: i.clone(),
            i,
            m,
            isometry: (0..n as u8).map(|l| (l, 0)).collect(),
            group: GroupTable::trivial(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPreset(m.to_string()));
        let in_w = |l: &u8| (*l as usize) < self.w_size;
        if self.w_size == 0 || self.w_size > 255 {
            return bad("W must have between 1 and 255 letters");
        }
        if !self.s.iter().all(in_w) || !self.ihat.iter().all(in_w) {
            return bad("S and Î must be subsets of W");
        }
        if !self.i.iter().all(|l| self.ihat.contains(l)) {
            return bad("I must be a subset of Î");
        }
        if self.i.is_empty() || self.i.len() >= self.s.len() {
            return bad("need 0 < #I < #S");
        }
        if self.m == 0 {
            return bad("M must be positive");
        }
        if self.isometry.len() != self.w_size {
            return bad("isometry table must cover W");
        }
        let g = self.group.order();
        if g == 0 || self.group.mult.iter().any(|r| r.len() != g || r.iter().any(|&x| x >= g)) {
            return bad("group multiplication table malformed");
        }
        if self.group.compose.len() != g {
            return bad("composition table must cover the group");
        }
        for row in &self.group.compose {
            for &s in &self.s {
                match row.get(s as usize) {
                    Some(&(h, t)) if h < g && self.s.contains(&t) => {}
                    _ => return bad("composition table is not total on group × S"),
                }
            }
        }
        for (l, &(j, h)) in self.isometry.iter().enumerate() {
            if !self.s.contains(&j) || h >= g {
                return bad("isometry table entries must be (letter of S, group element)");
            }
            if self.s.contains(&(l as u8)) && (j != l as u8 || h != 0) {
                return bad("letters of S must map to themselves with the identity");
            }
        }
        Ok(())
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        match w.letters().iter().find(|&&l| l as usize >= self.w_size) {
            Some(&l) => Err(Error::LetterOutside { letter: l, alphabet: "W" }),
            None => Ok(()),
        }
    }

    pub fn check_word_over(&self, w: &Word, set: &[u8], name: &'static str) -> Result<()> {
        match w.letters().iter().find(|l| !set.contains(l)) {
            Some(&l) => Err(Error::LetterOutside { letter: l, alphabet: name }),
            None => Ok(()),
        }
    }

    /// Position of a letter inside `S` (used to index `S^n` numerically).
    pub fn s_pos(&self, letter: u8) -> Option<usize> {
        self.s.iter().position(|&x| x == letter)
    }

    pub fn i_pos(&self, letter: u8) -> Option<usize> {
        self.i.iter().position(|&x| x == letter)
    }
}

/// `(Φ(w), Ψ(w))` with `F_w = F_{Φ(w)} ∘ Ψ(w)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReducedAddress {
    pub canonical: Word,
    pub isometry: usize,
}

pub fn reduce(spec: &AlphabetSpec, w: &Word) -> Result<ReducedAddress> {
    spec.check_word(w)?;
    let mut canon = Vec::with_capacity(w.level());
    let mut psi = 0usize;
    for &i in w.letters() {
        let (j, psi_i) = spec.isometry[i as usize];
        let (psi_hat, i_hat) = spec.group.compose[psi][j as usize];
        canon.push(i_hat);
        psi = spec.group.mult[psi_hat][psi_i];
    }
    Ok(ReducedAddress { canonical: Word(canon), isometry: psi })
}

/// Geometric adjacency `v ∼ w` on words of one level.
pub trait Adjacency {
    /// All words of the same level as `w` whose cells meet `K_w`, including `w`.
    fn neighbors(&self, w: &Word) -> Result<Vec<Word>>;
}

/// `𝒩_k(A)`.
pub fn neighborhood<R: Adjacency + ?Sized>(
    a: &BTreeSet<Word>,
    k: usize,
    relation: &R,
) -> Result<BTreeSet<Word>> {
    let mut levels = a.iter().map(|w| w.level());
    if let Some(first) = levels.next() {
        if let Some(other) = levels.find(|&l| l != first) {
            return Err(Error::LevelMismatch(first, other));
        }
    }
    let mut current = a.clone();
    let mut frontier: Vec<Word> = a.iter().cloned().collect();
    for _ in 0..k {
        let mut next = Vec::new();
        for w in &frontier {
            for v in relation.neighbors(w)? {
                if current.insert(v.clone()) {
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(current)
}

/// All words of length `n` over `letters`, lexicographic in the given letter order.
pub fn all_words(letters: &[u8], n: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * letters.len());
        for w in &out {
            for &l in letters {
                next.push(w.child(l));
            }
        }
        out = next;
    }
    out
}

/// Index of a word in [`all_words`] order.
pub fn word_index(letters: &[u8], w: &Word) -> Option<usize> {
    let b = letters.len();
    let mut idx = 0usize;
    for l in w.letters() {
        idx = idx * b + letters.iter().position(|x| x == l)?;
    }
    Some(idx)
}

/// Inverse of [`word_index`].
pub fn word_at(letters: &[u8], n: usize, mut idx: usize) -> Word {
    let b = letters.len();
    let mut v = vec![0u8; n];
    for k in (0..n).rev() {
        v[k] = letters[idx % b];
        idx /= b;
    }
    Word(v)
}
