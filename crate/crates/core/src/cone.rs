//! Subtree selection for cone avoidance at finite depth.
//!
//! Both procedures replace a jump oracle with step-bounded search: an
//! evaluation either converges within the budget or is reported as unknown.
//! A tree is read at its current stage; its members are the present nodes
//! that are not terminal.
//!
//! The lower-cone procedure finds the least pair of incompatible extendible
//! members, asks whether the functional converges at their first disagreement
//! on the join of the given rows, and keeps the side that disagrees with the
//! answer. The upper-cone procedure looks for the least `n` whose set
//! `U_n` (members on whose constant join the functional diverges or differs
//! from `X(n)`) reaches every length the tree reaches.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::join::{constant_join_default, join_oracle, JoinError};
use crate::machine::{EvalResult, Program};
use crate::strings::{Alphabet, FinString};
use crate::tree::{NodeStatus, StagedTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConeError {
    #[error("no two incompatible members extendible to depth {0}")]
    NoIncompatiblePair(usize),
    #[error("tree must be binary")]
    NotBinary,
    #[error("row {0} is not a member of the tree or a prefix of one")]
    RowNotInTree(usize),
    #[error("n = {n} is out of range for a target of length {len}")]
    TargetTooShort { n: u64, len: usize },
    #[error("the tree has no member of length {0}")]
    TooShallow(usize),
    #[error(transparent)]
    Join(#[from] JoinError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ConvergenceAnswer {
    Converged { value: u64 },
    Unknown { budget_spent: u64 },
}

impl ConvergenceAnswer {
    pub fn from_eval(r: EvalResult, budget: u64) -> Self {
        match r {
            EvalResult::Halted { value, .. } => ConvergenceAnswer::Converged { value },
            EvalResult::Running => ConvergenceAnswer::Unknown {
                budget_spent: budget,
            },
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, ConvergenceAnswer::Unknown { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Restriction {
    Unrestricted,
    /// Members compatible with `root`.
    CompatibleWith {
        root: FinString,
    },
    /// An explicit downward closed set of members.
    Members {
        strings: Vec<FinString>,
    },
}

impl Restriction {
    pub fn admits(&self, sigma: &FinString) -> bool {
        match self {
            Restriction::Unrestricted => true,
            Restriction::CompatibleWith { root } => root.compatible(sigma),
            Restriction::Members { strings } => {
                strings.binary_search_by(|s| s.len_lex_cmp(sigma)).is_ok()
            }
        }
    }
}

/// Evidence that every `U_n` misses some length: at length `m` every member
/// made the functional output `k = X(n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case1Witness {
    pub n: u64,
    pub m: usize,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub procedure: String,
    pub depth: usize,
    pub budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(FinString, FinString)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub answer: ConvergenceAnswer,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub case1: Vec<Case1Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtreeResult {
    pub selected: Restriction,
    pub diagnostics: Diagnostics,
}

impl SubtreeResult {
    /// Members of the tree admitted by the restriction, up to `depth`.
    pub fn members(&self, tree: &StagedTree, depth: usize) -> Vec<FinString> {
        members_up_to(tree, depth)
            .into_iter()
            .filter(|s| self.selected.admits(s))
            .collect()
    }
}

/// Members of the tree of length at most `depth`, in length-lex order.
pub fn members_up_to(tree: &StagedTree, depth: usize) -> Vec<FinString> {
    let stage = tree.stage();
    let mut out: Vec<FinString> = tree
        .nodes_at(stage)
        .filter(|(k, r)| k.len() <= depth && r.status_at(stage) == Some(NodeStatus::Alive))
        .map(|(k, _)| k.clone())
        .collect();
    out.sort_by(|a, b| a.len_lex_cmp(b));
    out
}

/// The least pair of incompatible members that extend to length `depth`,
/// and the first position where they disagree.
pub fn least_incompatible_extendibles(
    tree: &StagedTree,
    depth: usize,
) -> Result<(FinString, FinString, usize), ConeError> {
    let stage = tree.stage();
    let candidates: Vec<FinString> = members_up_to(tree, depth)
        .into_iter()
        .filter(|s| tree.extendible_to_depth(s, depth, stage))
        .collect();
    for (a, sigma) in candidates.iter().enumerate() {
        if let Some(tau) = candidates[a + 1..].iter().find(|t| !t.compatible(sigma)) {
            let n = sigma
                .first_disagreement(tau)
                .expect("incompatible strings disagree");
            return Ok((sigma.clone(), tau.clone(), n));
        }
    }
    Err(ConeError::NoIncompatiblePair(depth))
}

pub fn lower_cone_subtree(
    tree: &StagedTree,
    rows: &[FinString],
    j: &Program,
    budget: u64,
    depth: usize,
) -> Result<SubtreeResult, ConeError> {
    if tree.alphabet() != Alphabet::Binary {
        return Err(ConeError::NotBinary);
    }
    let stage = tree.stage();
    for (k, row) in rows.iter().enumerate() {
        // a member or a prefix of one
        if !tree.extendible_to_depth(row, 0, stage) {
            return Err(ConeError::RowNotInTree(k));
        }
    }
    let (sigma, tau, n) = least_incompatible_extendibles(tree, depth)?;
    let oracle = join_oracle(rows.to_vec())?.determined_string();
    let answer = ConvergenceAnswer::from_eval(j.eval(&oracle, n as u64, budget), budget);
    let selected = match answer {
        ConvergenceAnswer::Converged { value } => {
            let pick = if sigma.bit(n).map(u64::from) != Some(value) {
                sigma.clone()
            } else {
                tau.clone()
            };
            Restriction::CompatibleWith { root: pick }
        }
        ConvergenceAnswer::Unknown { .. } => Restriction::Unrestricted,
    };
    Ok(SubtreeResult {
        selected,
        diagnostics: Diagnostics {
            procedure: "lower".into(),
            depth,
            budget,
            pair: Some((sigma, tau)),
            n: Some(n as u64),
            answer,
            case1: Vec::new(),
            note: answer
                .is_unknown()
                .then(|| format!("no convergence within {budget} steps; tree left unrestricted")),
        },
    })
}

fn target_bit(x: &FinString, n: u64) -> Result<u64, ConeError> {
    usize::try_from(n)
        .ok()
        .and_then(|k| x.bit(k))
        .map(u64::from)
        .ok_or(ConeError::TargetTooShort { n, len: x.len() })
}

/// Whether `sigma` belongs to `U_n`, with the evaluation that decided it.
pub fn in_u_n(i: &Program, sigma: &FinString, xn: u64, n: u64, budget: u64) -> (bool, EvalResult) {
    let oracle = constant_join_default(sigma).determined_string();
    let r = i.eval(&oracle, n, budget);
    let member = match r {
        EvalResult::Running => true,
        EvalResult::Halted { value, .. } => value != xn,
    };
    (member, r)
}

/// `U_n` restricted to members of length at most `depth`, length-lex.
pub fn compute_u_n(
    tree: &StagedTree,
    i: &Program,
    x: &FinString,
    n: u64,
    depth: usize,
    budget: u64,
) -> Result<Vec<FinString>, ConeError> {
    let xn = target_bit(x, n)?;
    Ok(members_up_to(tree, depth)
        .into_iter()
        .filter(|s| in_u_n(i, s, xn, n, budget).0)
        .collect())
}

pub fn upper_cone_subtree(
    tree: &StagedTree,
    i: &Program,
    x: &FinString,
    depth: usize,
    budget: u64,
) -> Result<SubtreeResult, ConeError> {
    if tree.alphabet() != Alphabet::Binary {
        return Err(ConeError::NotBinary);
    }
    let members = members_up_to(tree, depth);
    let lengths: BTreeSet<usize> = members.iter().map(FinString::len).collect();
    if !lengths.contains(&depth) {
        return Err(ConeError::TooShallow(depth));
    }
    let mut witnesses = Vec::new();
    for n in 0..x.len() as u64 {
        let xn = target_bit(x, n)?;
        let mut hit: BTreeSet<usize> = BTreeSet::new();
        // lengths reached only through budget-bounded divergence
        let mut hit_halted: BTreeSet<usize> = BTreeSet::new();
        let mut u = Vec::new();
        for sigma in &members {
            let (member, r) = in_u_n(i, sigma, xn, n, budget);
            if member {
                hit.insert(sigma.len());
                if r.is_halted() {
                    hit_halted.insert(sigma.len());
                }
                u.push(sigma.clone());
            }
        }
        if hit == lengths {
            let certain = hit_halted == lengths;
            let answer = if certain {
                ConvergenceAnswer::Converged { value: xn }
            } else {
                ConvergenceAnswer::Unknown {
                    budget_spent: budget,
                }
            };
            return Ok(SubtreeResult {
                selected: Restriction::Members { strings: u },
                diagnostics: Diagnostics {
                    procedure: "upper".into(),
                    depth,
                    budget,
                    pair: None,
                    n: Some(n),
                    answer,
                    case1: witnesses,
                    note: (!certain).then(|| {
                        format!("U_{n} reaches some length only through computations still running after {budget} steps")
                    }),
                },
            });
        }
        let m = *lengths
            .iter()
            .find(|l| !hit.contains(l))
            .expect("some length is missed");
        witnesses.push(Case1Witness { n, m, k: xn });
    }
    Ok(SubtreeResult {
        selected: Restriction::Unrestricted,
        diagnostics: Diagnostics {
            procedure: "upper".into(),
            depth,
            budget,
            pair: None,
            n: None,
            answer: ConvergenceAnswer::Converged { value: 0 },
            case1: witnesses,
            note: Some(
                "every U_n misses a length: the functional computes the target below its length"
                    .into(),
            ),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::programs;
    use crate::strings::Sym;

    fn s(text: &str) -> FinString {
        FinString::parse(text).unwrap()
    }

    fn stem_tree(stem: &str, depth: usize) -> StagedTree {
        let stem = s(stem);
        let mut t = StagedTree::new(0, 0, Alphabet::Binary);
        for k in 1..=stem.len() {
            t.enumerate(stem.prefix(k), 0).unwrap();
        }
        let mut frontier = vec![stem.clone()];
        for _ in stem.len()..depth {
            let mut next = Vec::new();
            for f in frontier {
                for b in [Sym::Zero, Sym::One] {
                    let c = f.child(b);
                    t.enumerate(c.clone(), 0).unwrap();
                    next.push(c);
                }
            }
            frontier = next;
        }
        t
    }

    #[test]
    fn full_tree_pair() {
        let t = StagedTree::full(0, Alphabet::Binary, 6);
        assert_eq!(
            least_incompatible_extendibles(&t, 6).unwrap(),
            (s("0"), s("1"), 0)
        );
    }

    #[test]
    fn stem_tree_pair_disagrees_after_stem() {
        let t = stem_tree("01", 6);
        let (a, b, n) = least_incompatible_extendibles(&t, 6).unwrap();
        assert_eq!((a, b, n), (s("010"), s("011"), 2));
        let single = stem_tree("0110", 4);
        assert_eq!(
            least_incompatible_extendibles(&single, 4),
            Err(ConeError::NoIncompatiblePair(4))
        );
    }

    #[test]
    fn lower_cone_with_constant_zero_selects_one_side() {
        let t = StagedTree::full(0, Alphabet::Binary, 8);
        let r = lower_cone_subtree(&t, &[s("0101")], &programs::const_zero(), 20, 8).unwrap();
        assert_eq!(r.selected, Restriction::CompatibleWith { root: s("1") });
        assert_eq!(
            r.diagnostics.answer,
            ConvergenceAnswer::Converged { value: 0 }
        );
        for m in r.members(&t, 8) {
            if m.len() == 8 {
                assert_eq!(m.bit(0), Some(1));
            }
        }
    }

    #[test]
    fn lower_cone_with_divergence_is_unrestricted() {
        let t = StagedTree::full(0, Alphabet::Binary, 5);
        let r = lower_cone_subtree(&t, &[], &programs::diverge(), 50, 5).unwrap();
        assert_eq!(r.selected, Restriction::Unrestricted);
        assert!(r.diagnostics.answer.is_unknown());
    }

    #[test]
    fn lower_cone_rejects_foreign_rows() {
        let t = stem_tree("01", 4);
        assert_eq!(
            lower_cone_subtree(&t, &[s("1")], &programs::const_zero(), 5, 4),
            Err(ConeError::RowNotInTree(0))
        );
    }

    #[test]
    fn u_n_extremes() {
        let t = StagedTree::full(0, Alphabet::Binary, 4);
        let x = s("0110");
        let all = members_up_to(&t, 4);
        assert_eq!(
            compute_u_n(&t, &programs::diverge(), &x, 1, 4, 50).unwrap(),
            all
        );
        assert!(compute_u_n(&t, &programs::x_lookup(&x), &x, 2, 4, 50)
            .unwrap()
            .is_empty());
        assert_eq!(
            compute_u_n(&t, &programs::const_zero(), &x, 9, 4, 50),
            Err(ConeError::TargetTooShort { n: 9, len: 4 })
        );
    }

    #[test]
    fn upper_cone_cases() {
        let t = StagedTree::full(0, Alphabet::Binary, 5);
        let x = s("1101");
        let r = upper_cone_subtree(&t, &programs::diverge(), &x, 5, 40).unwrap();
        assert_eq!(r.diagnostics.n, Some(0));
        assert_eq!(r.members(&t, 5), members_up_to(&t, 5));

        let r = upper_cone_subtree(&t, &programs::x_lookup(&x), &x, 5, 40).unwrap();
        assert_eq!(r.selected, Restriction::Unrestricted);
        assert_eq!(r.diagnostics.case1.len(), 4);
        for w in &r.diagnostics.case1 {
            assert_eq!(Some(w.k), x.bit(w.n as usize).map(u64::from));
        }
    }
}
