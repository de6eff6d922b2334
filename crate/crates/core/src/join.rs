//! Finite and infinite joins of finite strings.
//!
//! A finite join interleaves `k` components at positions `k·i + j`. Only the
//! positions every component determines are produced: the output has length
//! `k · min |component|`. The infinite join places row `j`, position `x` at
//! the Cantor code `⟨j, x⟩`; a position is determined only when its row exists
//! and is long enough.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strings::{pair, unpair, Alphabet, FinString};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JoinError {
    #[error("a join needs at least one component")]
    NoComponents,
    #[error("arity must be at least 1")]
    ZeroArity,
    #[error("component {0} is not a binary string")]
    NotBinary(usize),
    #[error("position {0} of the join is undetermined")]
    Undetermined(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteJoinCode {
    pub arity: usize,
    pub components: Vec<FinString>,
}

impl FiniteJoinCode {
    pub fn new(components: Vec<FinString>) -> Result<Self, JoinError> {
        if components.is_empty() {
            return Err(JoinError::NoComponents);
        }
        Ok(FiniteJoinCode {
            arity: components.len(),
            components,
        })
    }

    pub fn encode(&self) -> Result<FinString, JoinError> {
        finite_join(&self.components)
    }
}

pub fn finite_join(components: &[FinString]) -> Result<FinString, JoinError> {
    if components.is_empty() {
        return Err(JoinError::NoComponents);
    }
    if let Some(k) = components
        .iter()
        .position(|c| c.alphabet() != Alphabet::Binary)
    {
        return Err(JoinError::NotBinary(k));
    }
    let m = components.iter().map(FinString::len).min().unwrap_or(0);
    let mut syms = Vec::with_capacity(m * components.len());
    for i in 0..m {
        for c in components {
            syms.push(c.syms()[i]);
        }
    }
    Ok(FinString::from_syms(syms, Alphabet::Binary).expect("binary components"))
}

/// Splits `joined` into `arity` components of length `⌊|joined| / arity⌋`.
pub fn finite_join_decode(joined: &FinString, arity: usize) -> Result<Vec<FinString>, JoinError> {
    if arity == 0 {
        return Err(JoinError::ZeroArity);
    }
    let m = joined.len() / arity;
    Ok((0..arity)
        .map(|j| {
            let syms = (0..m).map(|i| joined.syms()[arity * i + j]).collect();
            FinString::from_syms(syms, joined.alphabet()).expect("same alphabet")
        })
        .collect())
}

/// Finitely many rows of an infinite join; rows past the end are unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfiniteJoinOracle {
    rows: Vec<FinString>,
}

impl InfiniteJoinOracle {
    pub fn rows(&self) -> &[FinString] {
        &self.rows
    }

    /// The bit at join position `k`, if some row determines it.
    pub fn bit(&self, k: u64) -> Option<u8> {
        let (j, x) = unpair(k);
        let row = self.rows.get(usize::try_from(j).ok()?)?;
        row.bit(usize::try_from(x).ok()?)
    }

    /// Length of the longest initial segment with every position determined.
    pub fn determined_prefix_len(&self) -> u64 {
        // Positions in order walk the Cantor diagonals; the first gap is the
        // least code whose row is missing or too short, so a direct scan is
        // bounded by the triangle number of (rows + longest row).
        let mut k = 0u64;
        while self.bit(k).is_some() {
            k += 1;
        }
        k
    }

    pub fn first_undetermined(&self) -> u64 {
        self.determined_prefix_len()
    }

    pub fn oracle_string(&self, length: u64) -> Result<FinString, JoinError> {
        let mut bits = Vec::with_capacity(length as usize);
        for k in 0..length {
            match self.bit(k) {
                Some(b) => bits.push(b == 1),
                None => return Err(JoinError::Undetermined(k)),
            }
        }
        Ok(FinString::from_bits(bits))
    }

    /// The determined prefix as an oracle string.
    pub fn determined_string(&self) -> FinString {
        self.oracle_string(self.determined_prefix_len())
            .expect("prefix is determined")
    }
}

pub fn join_oracle(rows: Vec<FinString>) -> Result<InfiniteJoinOracle, JoinError> {
    if let Some(k) = rows.iter().position(|c| c.alphabet() != Alphabet::Binary) {
        return Err(JoinError::NotBinary(k));
    }
    Ok(InfiniteJoinOracle { rows })
}

pub fn oracle_string(oracle: &InfiniteJoinOracle, length: u64) -> Result<FinString, JoinError> {
    oracle.oracle_string(length)
}

/// The join of `rows` copies of `sigma`.
pub fn constant_join(sigma: &FinString, rows: usize) -> InfiniteJoinOracle {
    InfiniteJoinOracle {
        rows: vec![sigma.clone(); rows],
    }
}

/// The join of `|sigma|` copies of `sigma`.
pub fn constant_join_default(sigma: &FinString) -> InfiniteJoinOracle {
    constant_join(sigma, sigma.len())
}

/// Join position of row `j`, column `x`.
pub fn join_position(j: u64, x: u64) -> u64 {
    pair(j, x)
}
