//! Finite strings over `{0,1}` and `{0,1,#}`, the prefix algebra on them, and
//! the Cantor pairing bijection.
//!
//! The natural [`Ord`] on [`FinString`] is lexicographic with `0 < 1 < #`, so a
//! string sorts immediately before all of its extensions and the extensions of
//! a string form a contiguous range in any ordered map keyed by strings. The
//! "least" string of the constructions is the length-lexicographic one; use
//! [`FinString::len_lex_cmp`] or [`LenLex`] for that order.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StringError {
    #[error("cannot concatenate a binary string with a ternary one")]
    AlphabetMismatch,
    #[error("invalid symbol {0:?} at position {1}")]
    InvalidSymbol(char, usize),
    #[error("symbol # is not allowed in a binary string")]
    HashInBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sym {
    Zero,
    One,
    Hash,
}

impl Sym {
    pub fn from_bit(bit: bool) -> Sym {
        if bit {
            Sym::One
        } else {
            Sym::Zero
        }
    }

    /// `Some(0)` / `Some(1)` for binary symbols, `None` for `#`.
    pub fn bit(self) -> Option<u8> {
        match self {
            Sym::Zero => Some(0),
            Sym::One => Some(1),
            Sym::Hash => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sym::Zero => '0',
            Sym::One => '1',
            Sym::Hash => '#',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    Binary,
    Ternary,
}

impl Alphabet {
    pub fn symbols(self) -> &'static [Sym] {
        match self {
            Alphabet::Binary => &[Sym::Zero, Sym::One],
            Alphabet::Ternary => &[Sym::Zero, Sym::One, Sym::Hash],
        }
    }

    pub fn admits(self, sym: Sym) -> bool {
        self == Alphabet::Ternary || sym != Sym::Hash
    }
}

/// A finite string. Identity, hashing and ordering look only at the symbols;
/// the alphabet is a typing flag that governs concatenation and which
/// symbols may be appended.
#[derive(Clone)]
pub struct FinString {
    syms: Vec<Sym>,
    alphabet: Alphabet,
}

impl FinString {
    pub fn empty(alphabet: Alphabet) -> Self {
        FinString {
            syms: Vec::new(),
            alphabet,
        }
    }

    pub fn binary_empty() -> Self {
        Self::empty(Alphabet::Binary)
    }

    pub fn from_syms(syms: Vec<Sym>, alphabet: Alphabet) -> Result<Self, StringError> {
        if alphabet == Alphabet::Binary && syms.contains(&Sym::Hash) {
            return Err(StringError::HashInBinary);
        }
        Ok(FinString { syms, alphabet })
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        FinString {
            syms: bits.into_iter().map(Sym::from_bit).collect(),
            alphabet: Alphabet::Binary,
        }
    }

    /// Parses `0`/`1`/`#` text; `ε` or the empty text is the empty string.
    /// The alphabet is ternary exactly when the text contains `#`.
    pub fn parse(text: &str) -> Result<Self, StringError> {
        let text = text.trim();
        if text == "ε" {
            return Ok(Self::binary_empty());
        }
        let mut syms = Vec::with_capacity(text.len());
        for (pos, c) in text.chars().enumerate() {
            syms.push(match c {
                '0' => Sym::Zero,
                '1' => Sym::One,
                '#' => Sym::Hash,
                other => return Err(StringError::InvalidSymbol(other, pos)),
            });
        }
        let alphabet = if syms.contains(&Sym::Hash) {
            Alphabet::Ternary
        } else {
            Alphabet::Binary
        };
        Ok(FinString { syms, alphabet })
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syms.is_empty()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn syms(&self) -> &[Sym] {
        &self.syms
    }

    pub fn get(&self, pos: usize) -> Option<Sym> {
        self.syms.get(pos).copied()
    }

    /// The bit at `pos`, or `None` when out of range or the symbol is `#`.
    pub fn bit(&self, pos: usize) -> Option<u8> {
        self.get(pos).and_then(Sym::bit)
    }

    pub fn last(&self) -> Option<Sym> {
        self.syms.last().copied()
    }

    pub fn with_alphabet(&self, alphabet: Alphabet) -> Result<Self, StringError> {
        Self::from_syms(self.syms.clone(), alphabet)
    }

    pub fn to_ternary(&self) -> Self {
        FinString {
            syms: self.syms.clone(),
            alphabet: Alphabet::Ternary,
        }
    }

    /// σ*τ. A ternary σ may absorb a binary τ; the reverse is rejected.
    pub fn concat(&self, other: &FinString) -> Result<Self, StringError> {
        let alphabet = match (self.alphabet, other.alphabet) {
            (Alphabet::Binary, Alphabet::Ternary) => return Err(StringError::AlphabetMismatch),
            (a, _) => a,
        };
        let mut syms = Vec::with_capacity(self.len() + other.len());
        syms.extend_from_slice(&self.syms);
        syms.extend_from_slice(&other.syms);
        Ok(FinString { syms, alphabet })
    }

    /// σ*i for a single symbol admitted by σ's alphabet.
    pub fn child(&self, sym: Sym) -> Self {
        debug_assert!(self.alphabet.admits(sym));
        let mut syms = Vec::with_capacity(self.len() + 1);
        syms.extend_from_slice(&self.syms);
        syms.push(sym);
        FinString {
            syms,
            alphabet: self.alphabet,
        }
    }

    pub fn prefix(&self, len: usize) -> Self {
        FinString {
            syms: self.syms[..len.min(self.len())].to_vec(),
            alphabet: self.alphabet,
        }
    }

    pub fn suffix_from(&self, start: usize) -> Self {
        FinString {
            syms: self.syms[start.min(self.len())..].to_vec(),
            alphabet: self.alphabet,
        }
    }

    /// `self ⊆ other`: self is an initial segment of other (equality included).
    pub fn is_prefix_of(&self, other: &FinString) -> bool {
        other.syms.starts_with(&self.syms)
    }

    pub fn is_proper_prefix_of(&self, other: &FinString) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    pub fn compatible(&self, other: &FinString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// Least position where the two strings carry different symbols.
    pub fn first_disagreement(&self, other: &FinString) -> Option<usize> {
        self.syms
            .iter()
            .zip(other.syms.iter())
            .position(|(a, b)| a != b)
    }

    /// Shorter strings first, then lexicographic with `0 < 1 < #`.
    pub fn len_lex_cmp(&self, other: &FinString) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.syms.cmp(&other.syms))
    }

    pub fn count(&self, sym: Sym) -> usize {
        self.syms.iter().filter(|&&s| s == sym).count()
    }
}

pub fn concat(sigma: &FinString, tau: &FinString) -> Result<FinString, StringError> {
    sigma.concat(tau)
}

pub fn compatible(sigma: &FinString, tau: &FinString) -> bool {
    sigma.compatible(tau)
}

impl PartialEq for FinString {
    fn eq(&self, other: &Self) -> bool {
        self.syms == other.syms
    }
}

impl Eq for FinString {}

impl Hash for FinString {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.syms.hash(state)
    }
}

impl PartialOrd for FinString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FinString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.syms.cmp(&other.syms)
    }
}

impl Borrow<[Sym]> for FinString {
    fn borrow(&self) -> &[Sym] {
        &self.syms
    }
}

impl fmt::Display for FinString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syms.is_empty() {
            return f.write_str("ε");
        }
        for s in &self.syms {
            fmt::Write::write_char(f, s.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for FinString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for FinString {
    type Err = StringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FinString::parse(s)
    }
}

impl Serialize for FinString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FinString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        FinString::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Orders strings length-lexicographically; use as a sort key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LenLex(pub FinString);

impl PartialOrd for LenLex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LenLex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len_lex_cmp(&other.0)
    }
}

/// All strings over `alphabet` of exactly length `len`, in lexicographic order.
pub fn all_strings(alphabet: Alphabet, len: usize) -> Vec<FinString> {
    let mut out = vec![FinString::empty(alphabet)];
    for _ in 0..len {
        out = out
            .iter()
            .flat_map(|s| alphabet.symbols().iter().map(move |&c| s.child(c)))
            .collect();
    }
    out
}

/// Cantor pairing ⟨i,j⟩ = (i+j)(i+j+1)/2 + j.
///
/// Panics on overflow of `u64`; use [`checked_pair`] near the boundary.
pub fn pair(i: u64, j: u64) -> u64 {
    checked_pair(i, j).expect("pairing overflow")
}

pub fn checked_pair(i: u64, j: u64) -> Option<u64> {
    let w = i.checked_add(j)?;
    let tri = (w as u128) * (w as u128 + 1) / 2;
    let code = tri + j as u128;
    u64::try_from(code).ok()
}

pub fn unpair(code: u64) -> (u64, u64) {
    // w = floor((sqrt(8k+1) - 1) / 2), computed exactly in u128
    let disc = 8 * code as u128 + 1;
    let w = ((disc.isqrt() - 1) / 2) as u64;
    let tri = (w as u128) * (w as u128 + 1) / 2;
    let j = (code as u128 - tri) as u64;
    (w - j, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCode {
    pub i: u64,
    pub j: u64,
    pub code: u64,
}

impl PairCode {
    pub fn encode(i: u64, j: u64) -> Self {
        PairCode {
            i,
            j,
            code: pair(i, j),
        }
    }

    pub fn decode(code: u64) -> Self {
        let (i, j) = unpair(code);
        PairCode { i, j, code }
    }
}
