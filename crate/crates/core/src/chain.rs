//! Coding the enumeration function of an r.e. set on a ternary tree while
//! grafting copies of a class above `#` markers, and iterating the
//! construction into a chain of classes.
//!
//! At stage `s+1` the tree `Υ` is extended one symbol along the string
//! `π_s = 1^{f_s(0)+1}# 1^{f_s(1)+1}# … 1^{f_s(s)+1}#` from every node already
//! present, and a node reached by `#` becomes a marker. Above each marker
//! `υ`, a node `υ*ρ` present at stage `s` gains the child `υ*ρ*i` whenever
//! `ρ*i` belongs to the class `Λ` being copied. A copy therefore grows one
//! level per stage after its marker appears.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::machine::{EvalResult, Program};
use crate::strings::{Alphabet, FinString, Sym};
use crate::tree::{ClosureTree, Stage, StagedTree, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("element {0} enters the table more than once")]
    DuplicateElement(u64),
    #[error("{blocks} blocks requested but f is known only for n < {known}")]
    TooManyBlocks { blocks: usize, known: usize },
    #[error("a chain needs at least one enumeration")]
    NoEnumerations,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("symbol {sym} at position {pos} cannot appear in a block")]
    WrongSymbol { pos: usize, sym: char },
    #[error("empty block ending at position {0}")]
    EmptyBlock(usize),
    #[error("block starting at position {0} has no terminator")]
    MissingTerminator(usize),
}

/// A staged enumeration `A_0 ⊆ A_1 ⊆ …` of a set of naturals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReEnumeration {
    /// `A_s = {n ≤ s : the program halts on n within s steps}`.
    Program { program: Program },
    /// `(stage, element)` pairs: the element belongs to `A_s` for `s ≥ stage`.
    Table { table: Vec<(Stage, u64)> },
}

impl ReEnumeration {
    pub fn table(entries: Vec<(Stage, u64)>) -> Result<Self, ChainError> {
        let e = ReEnumeration::Table { table: entries };
        e.validate()?;
        Ok(e)
    }

    pub fn empty() -> Self {
        ReEnumeration::Table { table: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if let ReEnumeration::Table { table } = self {
            let mut seen = BTreeSet::new();
            for &(_, x) in table {
                if !seen.insert(x) {
                    return Err(ChainError::DuplicateElement(x));
                }
            }
        }
        Ok(())
    }

    /// The stage at which `x` entered, if it has by stage `s`.
    pub fn entry_stage(&self, x: u64, s: Stage) -> Option<Stage> {
        match self {
            ReEnumeration::Table { table } => table
                .iter()
                .find(|&&(_, y)| y == x)
                .map(|&(t, _)| t)
                .filter(|&t| t <= s),
            ReEnumeration::Program { program } => {
                match program.eval(&FinString::binary_empty(), x, s) {
                    EvalResult::Halted { steps, .. } => Some(steps.max(x)),
                    EvalResult::Running => None,
                }
            }
        }
    }

    /// `A_s` restricted to elements below `bound`.
    pub fn members_below(&self, s: Stage, bound: u64) -> BTreeSet<u64> {
        match self {
            ReEnumeration::Table { table } => table
                .iter()
                .filter(|&&(t, x)| t <= s && x < bound)
                .map(|&(_, x)| x)
                .collect(),
            ReEnumeration::Program { .. } => (0..bound)
                .filter(|&x| self.entry_stage(x, s).is_some())
                .collect(),
        }
    }
}

/// `f_s(n)` for every `n ≤ s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumFnApprox {
    pub s: Stage,
    pub values: Vec<u64>,
}

/// `f_s(n)`: the least `s' ≤ s` with `A_{s'}↾n = A_s↾n`. The sets grow, so
/// this is the latest entry stage among elements below `n` present at `s`.
pub fn enum_fn(enumeration: &ReEnumeration, s: Stage, n: u64) -> u64 {
    (0..n)
        .filter_map(|x| enumeration.entry_stage(x, s))
        .max()
        .unwrap_or(0)
}

pub fn enum_fn_approx(enumeration: &ReEnumeration, s: Stage) -> EnumFnApprox {
    let mut values = Vec::with_capacity(s as usize + 1);
    let mut acc = 0;
    values.push(0);
    for x in 0..s {
        if let Some(t) = enumeration.entry_stage(x, s) {
            acc = acc.max(t);
        }
        values.push(acc);
    }
    EnumFnApprox { s, values }
}

/// The first `blocks` blocks `1^{f(n)+1}#`.
pub fn pi_strings(f: &EnumFnApprox, blocks: usize) -> Result<FinString, ChainError> {
    if blocks > f.values.len() {
        return Err(ChainError::TooManyBlocks {
            blocks,
            known: f.values.len(),
        });
    }
    let mut syms = Vec::new();
    for &v in &f.values[..blocks] {
        syms.extend(std::iter::repeat_n(Sym::One, v as usize + 1));
        syms.push(Sym::Hash);
    }
    Ok(FinString::from_syms(syms, Alphabet::Ternary).expect("ternary symbols"))
}

/// Inverts [`pi_strings`]: block lengths minus one.
pub fn decode_path(sigma: &FinString) -> Result<Vec<u64>, DecodeError> {
    let mut out = Vec::new();
    let mut run = 0u64;
    let mut start = 0;
    for (pos, &c) in sigma.syms().iter().enumerate() {
        match c {
            Sym::One => run += 1,
            Sym::Hash if run == 0 => return Err(DecodeError::EmptyBlock(pos)),
            Sym::Hash => {
                out.push(run - 1);
                run = 0;
                start = pos + 1;
            }
            Sym::Zero => {
                return Err(DecodeError::WrongSymbol {
                    pos,
                    sym: c.as_char(),
                })
            }
        }
    }
    if run > 0 {
        return Err(DecodeError::MissingTerminator(start));
    }
    Ok(out)
}

/// Decodes the complete blocks of `sigma`, ignoring a partial last block.
pub fn decode_complete_blocks(sigma: &FinString) -> Result<Vec<u64>, DecodeError> {
    let cut = sigma
        .syms()
        .iter()
        .rposition(|&c| c == Sym::Hash)
        .map_or(0, |p| p + 1);
    decode_path(&sigma.prefix(cut))
}

/// `{τ*σ : σ ∈ Λ, |σ| ≤ depth}`, length-lex.
pub fn copy(tau: &FinString, lambda: &ClosureTree, depth: usize) -> Vec<FinString> {
    let tau = tau.to_ternary();
    lambda
        .members_up_to(depth)
        .into_iter()
        .map(|sigma| tau.concat(&sigma).expect("ternary prefix"))
        .collect()
}

/// The tree whose paths are `0^ω` and the strings `0^a 1^ω`: a node ending in
/// 1 gains one child, a node ending in 0 (and the root) gains two. Nodes of
/// length `d` appear at stage `d`.
pub fn base_computable_class(stages: Stage) -> StagedTree {
    let mut t = StagedTree::new(0, 0, Alphabet::Binary);
    let mut frontier = vec![FinString::binary_empty()];
    for stage in 1..=stages {
        let mut next = Vec::new();
        for leaf in frontier {
            let syms: &[Sym] = match leaf.last() {
                Some(Sym::One) => &[Sym::One],
                _ => &[Sym::Zero, Sym::One],
            };
            for &c in syms {
                let child = leaf.child(c);
                t.enumerate(child.clone(), stage).expect("fresh node");
                next.push(child);
            }
        }
        frontier = next;
    }
    t.advance_to(stages).expect("monotone");
    t
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerEntry {
    pub marker: FinString,
    pub stage: Stage,
    /// Suffixes ρ for which `marker*ρ` was added by grafting.
    pub grafts: Vec<FinString>,
}

/// The ternary tree `Υ`, its markers and the grafting work still pending.
#[derive(Debug, Clone)]
pub struct QState {
    upsilon: StagedTree,
    markers: BTreeMap<FinString, Stage>,
    grafts: BTreeMap<FinString, BTreeSet<FinString>>,
    lambda: Arc<ClosureTree>,
    enumeration: ReEnumeration,
    pi: FinString,
    /// (node, marker) pairs to graft above at the next stage.
    pending: BTreeSet<(FinString, FinString)>,
}

impl QState {
    /// Stage 0: `Υ = {ε}`, no markers.
    pub fn new(
        index: usize,
        enumeration: ReEnumeration,
        lambda: Arc<ClosureTree>,
    ) -> Result<Self, ChainError> {
        enumeration.validate()?;
        Ok(QState {
            upsilon: StagedTree::new(index, 0, Alphabet::Ternary),
            markers: BTreeMap::new(),
            grafts: BTreeMap::new(),
            lambda,
            enumeration,
            pi: FinString::empty(Alphabet::Ternary),
            pending: BTreeSet::new(),
        })
    }

    /// Reassembles a finished level from its serialized parts. The result
    /// can be checked but not run further.
    pub fn from_parts(
        upsilon: StagedTree,
        markers: &[MarkerEntry],
        lambda: Arc<ClosureTree>,
        enumeration: ReEnumeration,
    ) -> Result<Self, ChainError> {
        enumeration.validate()?;
        let s = upsilon.stage();
        let pi = match s.checked_sub(1) {
            Some(prev) => pi_strings(&enum_fn_approx(&enumeration, prev), prev as usize + 1)?,
            None => FinString::empty(Alphabet::Ternary),
        };
        Ok(QState {
            upsilon,
            markers: markers
                .iter()
                .map(|m| (m.marker.clone(), m.stage))
                .collect(),
            grafts: markers
                .iter()
                .filter(|m| !m.grafts.is_empty())
                .map(|m| (m.marker.clone(), m.grafts.iter().cloned().collect()))
                .collect(),
            lambda,
            enumeration,
            pi,
            pending: BTreeSet::new(),
        })
    }

    pub fn stage(&self) -> Stage {
        self.upsilon.stage()
    }

    pub fn upsilon(&self) -> &StagedTree {
        &self.upsilon
    }

    pub fn markers(&self) -> &BTreeMap<FinString, Stage> {
        &self.markers
    }

    pub fn grafts(&self) -> &BTreeMap<FinString, BTreeSet<FinString>> {
        &self.grafts
    }

    pub fn lambda(&self) -> &ClosureTree {
        &self.lambda
    }

    pub fn enumeration(&self) -> &ReEnumeration {
        &self.enumeration
    }

    /// The coding string used at the last stage.
    pub fn pi(&self) -> &FinString {
        &self.pi
    }

    pub fn marker_entries(&self) -> Vec<MarkerEntry> {
        self.markers
            .iter()
            .map(|(m, &stage)| MarkerEntry {
                marker: m.clone(),
                stage,
                grafts: self
                    .grafts
                    .get(m)
                    .map(|g| {
                        let mut v: Vec<FinString> = g.iter().cloned().collect();
                        v.sort_by(|a, b| a.len_lex_cmp(b));
                        v
                    })
                    .unwrap_or_default(),
            })
            .collect()
    }

    fn in_lambda(&self, suffix: &[Sym]) -> bool {
        self.lambda.member(suffix)
    }

    /// Queues every (node, marker) pair involving a new node or marker.
    fn queue_pairs(&mut self, new_nodes: &[FinString], new_markers: &[FinString], stage: Stage) {
        for rho in new_nodes {
            // markers end in '#', so only those cut points can name one
            let cuts = (1..=rho.len()).filter(|&k| rho.syms()[k - 1] == Sym::Hash);
            for k in cuts {
                let head = &rho.syms()[..k];
                if self.markers.contains_key(head) && self.in_lambda(&rho.syms()[k..]) {
                    self.pending.insert((rho.clone(), rho.prefix(k)));
                }
            }
        }
        for m in new_markers {
            if new_nodes.contains(m) {
                continue;
            }
            let mut hits = vec![m.clone()];
            hits.extend(self.upsilon.extensions(m, stage).map(|(k, _)| k.clone()));
            for sigma in hits {
                if self.in_lambda(&sigma.syms()[m.len()..]) {
                    self.pending.insert((sigma, m.clone()));
                }
            }
        }
    }

    pub fn run_stage(&mut self) -> Result<(), ChainError> {
        let s = self.stage();
        let t = s + 1;
        let f = enum_fn_approx(&self.enumeration, s);
        let pi = pi_strings(&f, s as usize + 1)?;
        self.upsilon.advance_to(t)?;
        let mut new_nodes = Vec::new();
        let mut new_markers = Vec::new();

        // (i) one symbol along π_s from every node present at s
        for k in 1..=pi.len() {
            if !self.upsilon.is_enumerated(&pi.syms()[..k - 1], s) {
                break;
            }
            let rho = pi.prefix(k);
            if self.upsilon.enumerate(rho.clone(), t)? {
                new_nodes.push(rho.clone());
            }
            if rho.last() == Some(Sym::Hash) && !self.markers.contains_key(&rho) {
                self.markers.insert(rho.clone(), t);
                new_markers.push(rho);
            }
        }

        // (ii) grafting above markers
        let jobs = std::mem::take(&mut self.pending);
        let symbols = self.lambda.alphabet().symbols();
        for (sigma, marker) in jobs {
            let suffix = sigma.suffix_from(marker.len());
            for &c in symbols {
                let ext = suffix.child_any(c);
                if !self.in_lambda(ext.syms()) {
                    continue;
                }
                let node = sigma.child(c);
                if self.upsilon.enumerate(node.clone(), t)? {
                    new_nodes.push(node);
                }
                self.grafts.entry(marker.clone()).or_default().insert(ext);
            }
        }
        self.queue_pairs(&new_nodes, &new_markers, t);
        self.pi = pi;
        log::trace!(
            "chain level {} stage {t}: {} new nodes, {} markers",
            self.upsilon.index(),
            new_nodes.len(),
            self.markers.len()
        );
        Ok(())
    }

    pub fn run(&mut self, stages: u64) -> Result<(), ChainError> {
        for _ in 0..stages {
            self.run_stage()?;
        }
        Ok(())
    }

    /// The longest initial segment of `π_S` present in `Υ`, `S` the current
    /// stage.
    pub fn longest_coded_prefix(&self) -> FinString {
        let s = self.stage();
        let f = enum_fn_approx(&self.enumeration, s);
        let pi = pi_strings(&f, s as usize + 1).expect("s+1 blocks are known");
        let k = (0..=pi.len())
            .rev()
            .find(|&k| self.upsilon.is_enumerated(&pi.syms()[..k], s))
            .unwrap_or(0);
        pi.prefix(k)
    }

    /// f values recovered from the complete blocks of the coded prefix.
    pub fn decoded_values(&self) -> Vec<u64> {
        decode_complete_blocks(&self.longest_coded_prefix()).expect("π strings decode")
    }
}

trait ChildAny {
    fn child_any(&self, c: Sym) -> FinString;
}

impl ChildAny for FinString {
    /// σ*c, widening to ternary when needed.
    fn child_any(&self, c: Sym) -> FinString {
        if self.alphabet().admits(c) {
            self.child(c)
        } else {
            self.to_ternary().child(c)
        }
    }
}

pub fn build_q(
    enumeration: ReEnumeration,
    lambda: Arc<ClosureTree>,
    stages: u64,
) -> Result<QState, ChainError> {
    let mut q = QState::new(1, enumeration, lambda)?;
    q.run(stages)?;
    Ok(q)
}

/// Levels `P_1, P_2, …` and their union, tagged so it forms one tree.
#[derive(Debug, Clone)]
pub struct Chain {
    pub base: Arc<StagedTree>,
    pub levels: Vec<QState>,
}

impl Chain {
    /// The union of the base class (tag `1`) and every level `j` (tag
    /// `0^j 1`) as a single ternary tree.
    pub fn union_tree(&self) -> StagedTree {
        let mut entries: Vec<(Stage, FinString)> = Vec::new();
        let trees =
            std::iter::once(self.base.as_ref()).chain(self.levels.iter().map(|q| q.upsilon()));
        let mut max_stage = 0;
        for (j, tree) in trees.enumerate() {
            let mut tag = vec![Sym::Zero; j];
            tag.push(Sym::One);
            let tag = FinString::from_syms(tag, Alphabet::Ternary).expect("binary symbols");
            max_stage = max_stage.max(tree.stage());
            for (k, r) in tree.records() {
                entries.push((
                    r.enumerated_at,
                    tag.concat(&k.to_ternary()).expect("ternary"),
                ));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.len_lex_cmp(&b.1)));
        let mut union = StagedTree::new(0, 0, Alphabet::Ternary);
        let zeros = self.levels.len() + 1;
        for k in 1..=zeros {
            let z = FinString::from_syms(vec![Sym::Zero; k - 1], Alphabet::Ternary).expect("ok");
            union.enumerate(z, 0).expect("fresh");
        }
        for (stage, node) in entries {
            union.enumerate(node, stage).expect("sorted by stage");
        }
        union.advance_to(max_stage).expect("monotone");
        union
    }
}

/// `P_1` over the base class, then `P_{j+1}` over the closure of `P_j`,
/// each run for `stages` stages.
pub fn iterate_chain(enums: &[ReEnumeration], stages: u64) -> Result<Chain, ChainError> {
    if enums.is_empty() {
        return Err(ChainError::NoEnumerations);
    }
    let base = Arc::new(base_computable_class(stages));
    let mut lambda = Arc::new(ClosureTree::new(base.clone()));
    let mut levels = Vec::new();
    for (j, e) in enums.iter().enumerate() {
        let mut q = QState::new(j + 1, e.clone(), lambda)?;
        q.run(stages)?;
        lambda = Arc::new(ClosureTree::new(Arc::new(q.upsilon().clone())));
        levels.push(q);
    }
    Ok(Chain { base, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::programs;

    fn s(text: &str) -> FinString {
        FinString::parse(text).unwrap()
    }

    #[test]
    fn enum_fn_example() {
        let e = ReEnumeration::table(vec![(1, 3), (2, 1)]).unwrap();
        assert_eq!(enum_fn(&e, 2, 2), 2);
        assert_eq!(enum_fn(&e, 2, 1), 0);
        assert_eq!(enum_fn(&e, 1, 4), 1);
        for st in 0..10 {
            assert_eq!(enum_fn(&e, st, 0), 0);
        }
        assert_eq!(
            ReEnumeration::table(vec![(1, 3), (4, 3)]),
            Err(ChainError::DuplicateElement(3))
        );
    }

    #[test]
    fn approx_matches_pointwise() {
        let e = ReEnumeration::table(vec![(3, 0), (1, 5), (7, 2)]).unwrap();
        for st in 0..12 {
            let f = enum_fn_approx(&e, st);
            assert_eq!(f.values.len(), st as usize + 1);
            for n in 0..=st {
                assert_eq!(f.values[n as usize], enum_fn(&e, st, n));
            }
        }
    }

    #[test]
    fn program_enumeration_enters_once_halting() {
        // const_zero halts in one step on every input
        let e = ReEnumeration::Program {
            program: programs::const_zero(),
        };
        assert_eq!(e.entry_stage(0, 0), None);
        assert_eq!(e.entry_stage(0, 1), Some(1));
        assert_eq!(e.entry_stage(4, 3), None);
        assert_eq!(e.entry_stage(4, 9), Some(4));
        let d = ReEnumeration::Program {
            program: programs::diverge(),
        };
        assert!(d.members_below(50, 50).is_empty());
    }

    #[test]
    fn pi_and_decode() {
        let f = EnumFnApprox {
            s: 2,
            values: vec![0, 1, 1],
        };
        assert_eq!(
            pi_strings(&f, 0).unwrap(),
            FinString::empty(Alphabet::Ternary)
        );
        assert_eq!(pi_strings(&f, 2).unwrap(), s("1#11#"));
        assert!(pi_strings(&f, 4).is_err());
        assert_eq!(decode_path(&s("1#11#")).unwrap(), vec![0, 1]);
        assert_eq!(decode_path(&s("ε")).unwrap(), Vec::<u64>::new());
        assert_eq!(
            decode_path(&s("1#10#")),
            Err(DecodeError::WrongSymbol { pos: 3, sym: '0' })
        );
        assert_eq!(decode_path(&s("1##")), Err(DecodeError::EmptyBlock(2)));
        assert_eq!(
            decode_path(&s("1#11")),
            Err(DecodeError::MissingTerminator(2))
        );
        assert_eq!(decode_complete_blocks(&s("1#11")).unwrap(), vec![0]);
    }

    #[test]
    fn base_class_after_two_stages() {
        let t = base_computable_class(2);
        let mut got: Vec<String> = t.nodes_at(2).map(|(k, _)| k.to_string()).collect();
        got.sort();
        assert_eq!(got, vec!["0", "00", "01", "1", "11", "ε"]);
    }

    #[test]
    fn copy_examples() {
        let lambda = ClosureTree::from_tree(base_computable_class(3));
        let c = copy(&s("01"), &lambda, 1);
        assert_eq!(c, vec![s("01"), s("010"), s("011")]);
        assert_eq!(
            copy(&FinString::binary_empty(), &lambda, 2),
            lambda.members_up_to(2)
        );
    }

    #[test]
    fn empty_set_codes_all_zero_blocks() {
        let lambda = Arc::new(ClosureTree::from_tree(base_computable_class(30)));
        let q = build_q(ReEnumeration::empty(), lambda, 30).unwrap();
        let prefix = q.longest_coded_prefix();
        assert_eq!(prefix.len(), 30);
        assert_eq!(q.decoded_values(), vec![0; 15]);
        assert_eq!(q.markers().len(), 15);
        assert!(q.markers().keys().all(|m| m.last() == Some(Sym::Hash)));
        // the first marker is "1#", present from stage 2
        assert_eq!(q.markers().get(&s("1#")), Some(&2));
        for k in 0..=3 {
            for rho in lambda_members(&q, k) {
                let node = s("1#").concat(&rho.to_ternary()).unwrap();
                assert!(q.upsilon().is_enumerated(node.syms(), 30), "{node}");
            }
        }
    }

    fn lambda_members(q: &QState, depth: usize) -> Vec<FinString> {
        q.lambda().members_up_to(depth)
    }

    /// Stage rule applied literally: every node present at `s` against
    /// every marker present at `s`.
    fn literal_build(
        e: &ReEnumeration,
        lambda: &ClosureTree,
        stages: u64,
    ) -> BTreeSet<(FinString, Stage)> {
        let mut nodes: BTreeMap<FinString, Stage> = BTreeMap::new();
        let mut markers: BTreeMap<FinString, Stage> = BTreeMap::new();
        nodes.insert(FinString::empty(Alphabet::Ternary), 0);
        for st in 0..stages {
            let t = st + 1;
            let pi = pi_strings(&enum_fn_approx(e, st), st as usize + 1).unwrap();
            let mut add: Vec<FinString> = Vec::new();
            for k in 1..=pi.len() {
                if nodes.get(&pi.prefix(k - 1)).is_some_and(|&x| x <= st) {
                    add.push(pi.prefix(k));
                    if pi.syms()[k - 1] == Sym::Hash {
                        markers.entry(pi.prefix(k)).or_insert(t);
                    }
                }
            }
            for (sigma, &ts) in &nodes {
                if ts > st {
                    continue;
                }
                for (m, &tm) in &markers {
                    if tm > st || !m.is_prefix_of(sigma) {
                        continue;
                    }
                    let suffix = sigma.suffix_from(m.len());
                    for &c in lambda.alphabet().symbols() {
                        let mut ext = suffix.syms().to_vec();
                        ext.push(c);
                        if lambda.member(&ext) {
                            add.push(sigma.child(c));
                        }
                    }
                }
            }
            for a in add {
                nodes.entry(a).or_insert(t);
            }
        }
        nodes.into_iter().collect()
    }

    #[test]
    fn incremental_grafting_matches_literal_rule() {
        let lambda = Arc::new(ClosureTree::from_tree(base_computable_class(25)));
        let tables = [
            ReEnumeration::empty(),
            ReEnumeration::table(vec![(2, 1), (1, 3)]).unwrap(),
            ReEnumeration::table(vec![(5, 0), (3, 2), (9, 1)]).unwrap(),
        ];
        for e in &tables {
            let q = build_q(e.clone(), lambda.clone(), 25).unwrap();
            let got: BTreeSet<(FinString, Stage)> = q
                .upsilon()
                .records()
                .map(|(k, r)| (k.clone(), r.enumerated_at))
                .collect();
            assert_eq!(got, literal_build(e, &lambda, 25));
        }
    }

    #[test]
    fn incremental_matches_literal_over_ternary_lambda() {
        let base = Arc::new(ClosureTree::from_tree(base_computable_class(14)));
        let p1 = build_q(ReEnumeration::table(vec![(2, 0)]).unwrap(), base, 14).unwrap();
        let lambda = Arc::new(ClosureTree::from_tree(p1.upsilon().clone()));
        let e = ReEnumeration::table(vec![(3, 1)]).unwrap();
        let q = build_q(e.clone(), lambda.clone(), 14).unwrap();
        let got: BTreeSet<(FinString, Stage)> = q
            .upsilon()
            .records()
            .map(|(k, r)| (k.clone(), r.enumerated_at))
            .collect();
        assert_eq!(got, literal_build(&e, &lambda, 14));
    }

    #[test]
    fn chain_of_one_equals_build_q() {
        let c = iterate_chain(&[ReEnumeration::empty()], 12).unwrap();
        let lambda = Arc::new(ClosureTree::from_tree(base_computable_class(12)));
        let q = build_q(ReEnumeration::empty(), lambda, 12).unwrap();
        assert_eq!(c.levels.len(), 1);
        assert_eq!(
            c.levels[0].upsilon().to_snapshot(),
            q.upsilon().to_snapshot()
        );
        let u = c.union_tree();
        assert!(u.is_enumerated(s("1").syms(), 12));
        assert!(u.is_enumerated(s("01").syms(), 12));
        assert!(u.is_enumerated(s("011#").syms(), 12));
        assert!(iterate_chain(&[], 3).is_err());
    }
}
