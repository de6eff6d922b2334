//! The staged construction of a family of trees `T_0, T_1, …` and a set `D`
//! such that no finite join of paths through the trees computes `D`.
//!
//! Tree `i` is born at stage `i` holding only the empty string. At every later
//! stage the driver, in order:
//!
//! 1. for every born tree and every registered functional `e`, finds the
//!    least alive node `τ` of level `2e+1` lying on the computable prefix of
//!    functional `e` and kills the part of its predecessor's cone compatible
//!    with `τ`;
//! 2. registers new tuples of pairwise incompatible alive even-level strings,
//!    gives each a fresh follower, and for every registered tuple looks for
//!    alive extensions two levels up on which functional `e` outputs 0 at the
//!    follower; on success the follower enters `D` and every other extension
//!    of the tuple strings dies;
//! 3. extends every alive leaf of every tree born earlier by its two children.
//!
//! The functionals are the entries of a [`Registry`]; indices past its end
//! diverge. Growth stops at [`StageBudget::max_height`] so that long runs stay
//! finite; it must exceed every level a requirement can act on.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::join::finite_join;
use crate::machine::{computable_prefix, EvalResult, Program};
use crate::strings::{Alphabet, FinString, Sym};
use crate::tree::{PruneRule, Stage, StagedTree, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("tree {0} is not born at stage {1}")]
    TreeNotBorn(usize, Stage),
    #[error("tuple {0} is not registered")]
    UnregisteredTuple(String),
    #[error(
        "tuple {tuple} sits at level {level}, which belongs to functional {expected}, not {e}"
    )]
    WrongFunctional {
        tuple: String,
        level: usize,
        expected: usize,
        e: usize,
    },
    #[error("max height {max_height} must exceed {needed} for a registry of {len} functionals")]
    HeightTooSmall {
        max_height: usize,
        needed: usize,
        len: usize,
    },
    #[error("stage {0} has not been reached")]
    FutureStage(Stage),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    pub program: Program,
}

/// The functionals the construction diagonalizes against, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Registry {
    pub entries: Vec<RegistryEntry>,
}

impl Registry {
    pub fn new(entries: Vec<RegistryEntry>) -> Self {
        Registry { entries }
    }

    pub fn from_programs<I: IntoIterator<Item = (String, Program)>>(it: I) -> Self {
        Registry {
            entries: it
                .into_iter()
                .map(|(name, program)| RegistryEntry { name, program })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn program(&self, e: usize) -> Option<&Program> {
        self.entries.get(e).map(|r| &r.program)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBudget {
    /// New tuples registered per stage.
    pub tuples_per_stage: usize,
    /// Functional evaluations spent on follower searches per stage.
    pub evals_per_stage: usize,
    /// Leaves at this level are no longer extended.
    pub max_height: usize,
}

impl Default for StageBudget {
    fn default() -> Self {
        StageBudget {
            tuples_per_stage: 64,
            evals_per_stage: 4096,
            max_height: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TupleMember {
    pub tree: usize,
    pub string: FinString,
}

pub fn tuple_label(tuple: &[TupleMember]) -> String {
    let parts: Vec<String> = tuple
        .iter()
        .map(|m| format!("T{}:{}", m.tree, m.string))
        .collect();
    format!("<{}>", parts.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowerEntry {
    pub tuple: Vec<TupleMember>,
    pub level: usize,
    pub follower: u64,
    pub assigned_at: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonalized_at: Option<Stage>,
}

/// Tuple → follower assignments, in registration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowerTable {
    pub entries: Vec<FollowerEntry>,
    #[serde(skip)]
    by_tuple: BTreeMap<Vec<TupleMember>, usize>,
}

impl FollowerTable {
    pub fn from_entries(entries: Vec<FollowerEntry>) -> Self {
        let by_tuple = entries
            .iter()
            .enumerate()
            .map(|(k, e)| (e.tuple.clone(), k))
            .collect();
        FollowerTable { entries, by_tuple }
    }

    pub fn get(&self, tuple: &[TupleMember]) -> Option<&FollowerEntry> {
        self.by_tuple.get(tuple).map(|&k| &self.entries[k])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn insert(&mut self, entry: FollowerEntry) {
        self.by_tuple
            .insert(entry.tuple.clone(), self.entries.len());
        self.entries.push(entry);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    OddPrune {
        e: usize,
        tree: usize,
        tau: FinString,
        tau0: FinString,
        tau1: Option<FinString>,
        marked: usize,
    },
    FollowerAssign {
        tuple: Vec<TupleMember>,
        follower: u64,
    },
    DiagonalizeD {
        e: usize,
        tuple: Vec<TupleMember>,
        extensions: Vec<FinString>,
        follower: u64,
        marked: usize,
    },
    BudgetTruncated {
        what: String,
        detail: String,
    },
    LeafExtend {
        tree: usize,
        leaf: FinString,
    },
}

impl ActionKind {
    /// Position of the kind within a stage.
    pub fn rank(&self) -> u8 {
        match self {
            ActionKind::OddPrune { .. } => 0,
            ActionKind::FollowerAssign { .. } => 1,
            ActionKind::DiagonalizeD { .. } => 2,
            ActionKind::BudgetTruncated { .. } => 3,
            ActionKind::LeafExtend { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub stage: Stage,
    #[serde(flatten)]
    pub kind: ActionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "witness", rename_all = "lowercase")]
pub enum RequirementStatus {
    Satisfied,
    Pending(Vec<FinString>),
}

#[derive(Debug, Clone)]
pub struct ConstructionState {
    n_trees: usize,
    registry: Registry,
    budget: StageBudget,
    trees: Vec<StagedTree>,
    d: BTreeSet<u64>,
    followers: FollowerTable,
    next_follower: u64,
    stage: Stage,
    log: Vec<Action>,
    search_cursor: usize,
}

impl ConstructionState {
    /// The state after stage 0: tree 0 holds the empty string.
    pub fn new(
        n_trees: usize,
        registry: Registry,
        budget: StageBudget,
    ) -> Result<Self, ConstructionError> {
        let needed = 2 * registry.len();
        if budget.max_height <= needed {
            return Err(ConstructionError::HeightTooSmall {
                max_height: budget.max_height,
                needed,
                len: registry.len(),
            });
        }
        let mut trees = Vec::new();
        if n_trees > 0 {
            trees.push(StagedTree::new(0, 0, Alphabet::Binary));
        }
        Ok(ConstructionState {
            n_trees,
            registry,
            budget,
            trees,
            d: BTreeSet::new(),
            followers: FollowerTable::default(),
            next_follower: 0,
            stage: 0,
            log: Vec::new(),
            search_cursor: 0,
        })
    }

    /// Reassembles a state from its serialized parts, for checking.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n_trees: usize,
        registry: Registry,
        budget: StageBudget,
        trees: Vec<StagedTree>,
        d: BTreeSet<u64>,
        followers: FollowerTable,
        stage: Stage,
        log: Vec<Action>,
    ) -> Self {
        let next_follower = followers
            .entries
            .iter()
            .map(|e| e.follower + 1)
            .max()
            .unwrap_or(0);
        ConstructionState {
            n_trees,
            registry,
            budget,
            trees,
            d,
            followers,
            next_follower,
            stage,
            log,
            search_cursor: 0,
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn trees(&self) -> &[StagedTree] {
        &self.trees
    }

    pub fn tree(&self, i: usize) -> Option<&StagedTree> {
        self.trees.get(i)
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn budget(&self) -> StageBudget {
        self.budget
    }

    pub fn diagonal_set(&self) -> &BTreeSet<u64> {
        &self.d
    }

    pub fn followers(&self) -> &FollowerTable {
        &self.followers
    }

    pub fn log(&self) -> &[Action] {
        &self.log
    }

    fn push(&mut self, stage: Stage, kind: ActionKind) {
        self.log.push(Action { stage, kind });
    }

    /// Runs the next stage.
    pub fn run_stage(&mut self) -> Result<(), ConstructionError> {
        let s = self.stage + 1;
        if (s as usize) < self.n_trees {
            self.trees
                .push(StagedTree::new(s as usize, s, Alphabet::Binary));
        }
        for t in &mut self.trees {
            t.advance_to(s)?;
        }
        self.stage = s;
        let first = self.log.len();
        self.odd_requirements(s)?;
        self.register_tuples(s);
        self.diagonalize(s)?;
        self.extend_leaves(s)?;
        self.log[first..].sort_by_key(|a| a.kind.rank());
        Ok(())
    }

    pub fn run(&mut self, stages: u64) -> Result<(), ConstructionError> {
        for _ in 0..stages {
            self.run_stage()?;
        }
        Ok(())
    }

    fn odd_requirements(&mut self, s: Stage) -> Result<(), ConstructionError> {
        let prefixes: Vec<FinString> = self
            .registry
            .entries
            .iter()
            .map(|r| computable_prefix(&r.program, s))
            .collect();
        for i in 0..self.trees.len() {
            for (e, prefix) in prefixes.iter().enumerate() {
                let level = 2 * e + 1;
                let tree = &self.trees[i];
                let Some(tau) = least_alive_on_prefix(tree, level, prefix, s) else {
                    continue;
                };
                let tau0 = tree.immediate_predecessor(&tau, s)?;
                let tau1 = tree
                    .leaves(s, true)
                    .into_iter()
                    .filter(|l| tau0.is_proper_prefix_of(l) && !l.compatible(&tau))
                    .min_by(|a, b| a.len_lex_cmp(b));
                let cause = format!("stage {s}: odd requirement e={e} on tree {i}");
                let marked = self.trees[i].prune(
                    &tau0,
                    &PruneRule::CompatibleWith(tau.clone()),
                    s,
                    &cause,
                )?;
                log::debug!("stage {s}: prune {tau} in tree {i} for functional {e}");
                self.push(
                    s,
                    ActionKind::OddPrune {
                        e,
                        tree: i,
                        tau,
                        tau0,
                        tau1,
                        marked,
                    },
                );
            }
        }
        Ok(())
    }

    /// Alive even-level nodes eligible for tuples, grouped by level.
    fn eligible_by_level(&self, s: Stage) -> BTreeMap<usize, Vec<TupleMember>> {
        let mut out: BTreeMap<usize, Vec<TupleMember>> = BTreeMap::new();
        for (i, tree) in self.trees.iter().enumerate() {
            for (node, level) in tree.levels_at(s) {
                if level % 2 != 0 || level / 2 >= self.registry.len() {
                    continue;
                }
                if !tree.is_alive(node.syms(), s) {
                    continue;
                }
                out.entry(level).or_default().push(TupleMember {
                    tree: i,
                    string: node.clone(),
                });
            }
        }
        for v in out.values_mut() {
            v.sort_by(|a, b| a.string.len_lex_cmp(&b.string).then(a.tree.cmp(&b.tree)));
        }
        out
    }

    fn register_tuples(&mut self, s: Stage) {
        let budget = self.budget.tuples_per_stage;
        let eligible = self.eligible_by_level(s);
        let max_arity = eligible.values().map(Vec::len).max().unwrap_or(0);
        let mut fresh: Vec<(Vec<TupleMember>, usize)> = Vec::new();
        let mut truncated = false;
        'outer: for arity in 1..=max_arity {
            for (&level, elems) in &eligible {
                let mut stack: Vec<usize> = Vec::new();
                let mut out_of_budget = false;
                let followers = &self.followers;
                tuples_dfs(elems, arity, &mut stack, &mut |idx| {
                    let tuple: Vec<TupleMember> = idx.iter().map(|&k| elems[k].clone()).collect();
                    if followers.get(&tuple).is_some() {
                        return true;
                    }
                    if fresh.len() >= budget {
                        out_of_budget = true;
                        return false;
                    }
                    fresh.push((tuple, level));
                    true
                });
                if out_of_budget {
                    truncated = true;
                    break 'outer;
                }
            }
        }
        for (tuple, level) in fresh {
            while self.d.contains(&self.next_follower) {
                self.next_follower += 1;
            }
            let follower = self.next_follower;
            self.next_follower += 1;
            self.followers.insert(FollowerEntry {
                tuple: tuple.clone(),
                level,
                follower,
                assigned_at: s,
                diagonalized_at: None,
            });
            self.push(s, ActionKind::FollowerAssign { tuple, follower });
        }
        if truncated {
            self.push(
                s,
                ActionKind::BudgetTruncated {
                    what: "tuple registration".into(),
                    detail: format!("registered {budget} new tuples this stage"),
                },
            );
        }
    }

    /// Alive nodes of `tree` at `level` extending `sigma`, length-lex.
    fn alive_extensions_at_level(
        &self,
        tree: usize,
        sigma: &FinString,
        level: usize,
        s: Stage,
    ) -> Vec<FinString> {
        let t = &self.trees[tree];
        let base = t.level(sigma, s);
        let mut out: Vec<FinString> = Vec::new();
        // levels above sigma are counted along the path from sigma
        let mut stack: Vec<&FinString> = Vec::new();
        for (k, r) in t.extensions(sigma, s) {
            while stack.last().is_some_and(|top| !top.is_prefix_of(k)) {
                stack.pop();
            }
            let lvl = base + 1 + stack.len();
            if lvl == level && r.status_at(s) == Some(crate::tree::NodeStatus::Alive) {
                out.push(k.clone());
            }
            stack.push(k);
        }
        out.sort_by(|a, b| a.len_lex_cmp(b));
        out
    }

    fn diagonalize(&mut self, s: Stage) -> Result<(), ConstructionError> {
        let n = self.followers.len();
        if n == 0 {
            return Ok(());
        }
        let mut evals_left = self.budget.evals_per_stage;
        let start = self.search_cursor % n;
        let mut exhausted_at: Option<usize> = None;
        for step in 0..n {
            let k = (start + step) % n;
            let entry = self.followers.entries[k].clone();
            if entry.diagonalized_at.is_some() || self.d.contains(&entry.follower) {
                continue;
            }
            if entry.follower > s {
                continue;
            }
            if !entry
                .tuple
                .iter()
                .all(|m| self.trees[m.tree].is_alive(m.string.syms(), s))
            {
                continue;
            }
            let e = entry.level / 2;
            let Some(program) = self.registry.program(e).cloned() else {
                continue;
            };
            let candidates: Vec<Vec<FinString>> = entry
                .tuple
                .iter()
                .map(|m| self.alive_extensions_at_level(m.tree, &m.string, entry.level + 2, s))
                .collect();
            if candidates.iter().any(Vec::is_empty) {
                continue;
            }
            let mut found: Option<Vec<FinString>> = None;
            let mut out_of_budget = false;
            for_each_combination(&candidates, &mut |combo| {
                if evals_left == 0 {
                    out_of_budget = true;
                    return false;
                }
                evals_left -= 1;
                let joined = finite_join(combo).expect("binary tree strings");
                if let EvalResult::Halted { value: 0, .. } =
                    program.eval(&joined, entry.follower, s)
                {
                    found = Some(combo.to_vec());
                    return false;
                }
                true
            });
            if let Some(exts) = found {
                self.d.insert(entry.follower);
                let mut marked = 0;
                for (m, ext) in entry.tuple.iter().zip(&exts) {
                    let cause = format!(
                        "stage {s}: even requirement e={e}, follower {}",
                        entry.follower
                    );
                    marked += self.trees[m.tree].prune(
                        &m.string,
                        &PruneRule::IncompatibleWith(ext.clone()),
                        s,
                        &cause,
                    )?;
                }
                self.followers.entries[k].diagonalized_at = Some(s);
                log::debug!(
                    "stage {s}: follower {} enters D for {}",
                    entry.follower,
                    tuple_label(&entry.tuple)
                );
                self.push(
                    s,
                    ActionKind::DiagonalizeD {
                        e,
                        tuple: entry.tuple.clone(),
                        extensions: exts,
                        follower: entry.follower,
                        marked,
                    },
                );
            }
            if out_of_budget {
                exhausted_at = Some(k);
                break;
            }
        }
        if let Some(k) = exhausted_at {
            self.search_cursor = k;
            self.push(
                s,
                ActionKind::BudgetTruncated {
                    what: "follower search".into(),
                    detail: format!(
                        "spent {} evaluations; resuming at tuple {k}",
                        self.budget.evals_per_stage
                    ),
                },
            );
        } else {
            self.search_cursor = 0;
        }
        Ok(())
    }

    fn extend_leaves(&mut self, s: Stage) -> Result<(), ConstructionError> {
        let max_height = self.budget.max_height;
        let mut extended: Vec<(usize, FinString)> = Vec::new();
        for (i, tree) in self.trees.iter_mut().enumerate() {
            if tree.birth_stage() >= s {
                continue;
            }
            let leaves = tree.leaves(s, true);
            for leaf in leaves {
                if tree.level(&leaf, s) >= max_height {
                    continue;
                }
                tree.enumerate(leaf.child(Sym::Zero), s)?;
                tree.enumerate(leaf.child(Sym::One), s)?;
                extended.push((i, leaf));
            }
        }
        for (tree, leaf) in extended {
            self.push(s, ActionKind::LeafExtend { tree, leaf });
        }
        Ok(())
    }

    /// Odd requirement `e` on tree `i`, judged at stage `s`: pending while an
    /// alive level-`(2e+1)` node lies on the computable prefix of functional
    /// `e`.
    pub fn check_requirement_odd(
        &self,
        e: usize,
        i: usize,
        s: Stage,
    ) -> Result<RequirementStatus, ConstructionError> {
        if s > self.stage {
            return Err(ConstructionError::FutureStage(s));
        }
        let tree = self
            .trees
            .get(i)
            .filter(|t| t.birth_stage() <= s)
            .ok_or(ConstructionError::TreeNotBorn(i, s))?;
        let Some(program) = self.registry.program(e) else {
            return Ok(RequirementStatus::Satisfied);
        };
        let prefix = computable_prefix(program, s);
        Ok(match least_alive_on_prefix(tree, 2 * e + 1, &prefix, s) {
            Some(w) => RequirementStatus::Pending(vec![w]),
            None => RequirementStatus::Satisfied,
        })
    }

    /// Even requirement for a registered tuple, judged at stage `s`.
    pub fn check_requirement_even(
        &self,
        e: usize,
        tuple: &[TupleMember],
        s: Stage,
    ) -> Result<RequirementStatus, ConstructionError> {
        if s > self.stage {
            return Err(ConstructionError::FutureStage(s));
        }
        let entry = self
            .followers
            .get(tuple)
            .ok_or_else(|| ConstructionError::UnregisteredTuple(tuple_label(tuple)))?;
        if entry.level / 2 != e {
            return Err(ConstructionError::WrongFunctional {
                tuple: tuple_label(tuple),
                level: entry.level,
                expected: entry.level / 2,
                e,
            });
        }
        let Some(program) = self.registry.program(e) else {
            return Ok(RequirementStatus::Satisfied);
        };
        let x = entry.follower;
        let in_d = self.diagonalized_by(x).is_some_and(|st| st <= s);
        if in_d {
            let witnessed = self.log.iter().find_map(|a| match &a.kind {
                ActionKind::DiagonalizeD {
                    follower,
                    extensions,
                    tuple: t,
                    ..
                } if *follower == x && a.stage <= s => Some((t.clone(), extensions.clone())),
                _ => None,
            });
            if let Some((t, exts)) = witnessed {
                let alive = t
                    .iter()
                    .zip(&exts)
                    .all(|(m, ext)| self.trees[m.tree].is_alive(ext.syms(), s));
                let joined = finite_join(&exts).expect("binary");
                if alive && program.eval(&joined, x, s).value() == Some(0) {
                    return Ok(RequirementStatus::Satisfied);
                }
            }
        }
        let candidates: Vec<Vec<FinString>> = tuple
            .iter()
            .map(|m| self.alive_extensions_at_level(m.tree, &m.string, entry.level + 2, s))
            .collect();
        let mut threat: Option<Vec<FinString>> = None;
        if !candidates.iter().any(Vec::is_empty) {
            for_each_combination(&candidates, &mut |combo| {
                let joined = finite_join(combo).expect("binary");
                if program.eval(&joined, x, s).value() == Some(0) {
                    threat = Some(combo.to_vec());
                    return false;
                }
                true
            });
        }
        Ok(match threat {
            None => RequirementStatus::Satisfied,
            Some(_) if in_d => RequirementStatus::Satisfied,
            Some(w) => RequirementStatus::Pending(w),
        })
    }

    /// Stage at which follower `x` entered `D`.
    pub fn diagonalized_by(&self, x: u64) -> Option<Stage> {
        self.log.iter().find_map(|a| match a.kind {
            ActionKind::DiagonalizeD { follower, .. } if follower == x => Some(a.stage),
            _ => None,
        })
    }
}

/// Least alive node at `level` that is an initial segment of `prefix`.
fn least_alive_on_prefix(
    tree: &StagedTree,
    level: usize,
    prefix: &FinString,
    s: Stage,
) -> Option<FinString> {
    if prefix.len() < level {
        // nodes at this level have at least `level` symbols
        return None;
    }
    (0..=prefix.len())
        .map(|k| prefix.prefix(k))
        .filter(|p| tree.is_alive(p.syms(), s))
        .find(|p| tree.level(p, s) == level)
}

/// Visits every ordered tuple of `arity` distinct positions into `elems` whose
/// strings are pairwise incompatible, in lexicographic order of positions.
/// The visitor returns `false` to stop.
fn tuples_dfs(
    elems: &[TupleMember],
    arity: usize,
    stack: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if stack.len() == arity {
        return visit(stack);
    }
    for k in 0..elems.len() {
        if stack
            .iter()
            .any(|&j| elems[j].string.compatible(&elems[k].string))
        {
            continue;
        }
        stack.push(k);
        let go_on = tuples_dfs(elems, arity, stack, visit);
        stack.pop();
        if !go_on {
            return false;
        }
    }
    true
}

/// Visits the cartesian product of `lists` in lexicographic order. The
/// visitor returns `false` to stop.
fn for_each_combination(lists: &[Vec<FinString>], visit: &mut dyn FnMut(&[FinString]) -> bool) {
    let mut idx = vec![0usize; lists.len()];
    let mut combo: Vec<FinString> = lists.iter().map(|l| l[0].clone()).collect();
    loop {
        if !visit(&combo) {
            return;
        }
        let mut pos = lists.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < lists[pos].len() {
                combo[pos] = lists[pos][idx[pos]].clone();
                break;
            }
            idx[pos] = 0;
            combo[pos] = lists[pos][0].clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::programs;
    use crate::tree::NodeStatus;

    fn s(text: &str) -> FinString {
        FinString::parse(text).unwrap()
    }

    fn registry(progs: Vec<(&str, Program)>) -> Registry {
        Registry::from_programs(progs.into_iter().map(|(n, p)| (n.to_string(), p)))
    }

    fn seeded(n_trees: usize) -> ConstructionState {
        let reg = registry(vec![
            ("const0", programs::const_zero()),
            ("zero_after_query", programs::zero_after_query()),
        ]);
        ConstructionState::new(n_trees, reg, StageBudget::default()).unwrap()
    }

    #[test]
    fn stage_zero_has_only_the_root_of_tree_zero() {
        let st = seeded(3);
        assert_eq!(st.trees().len(), 1);
        let t0 = st.tree(0).unwrap();
        assert_eq!(t0.len(), 1);
        assert!(t0.is_enumerated(&[], 0));
    }

    #[test]
    fn quiet_stage_doubles_leaves() {
        let reg = registry(vec![("diverge", programs::diverge())]);
        let mut st = ConstructionState::new(1, reg, StageBudget::default()).unwrap();
        let mut prev = 1;
        for stage in 1..=8 {
            st.run_stage().unwrap();
            let leaves = st.tree(0).unwrap().leaves(stage, true).len();
            assert_eq!(leaves, 2 * prev);
            prev = leaves;
        }
        assert_eq!(prev, 1 << 8);
    }

    #[test]
    fn trees_are_born_on_schedule() {
        let mut st = seeded(4);
        for stage in 1..=6u64 {
            st.run_stage().unwrap();
            let born = (stage as usize + 1).min(4);
            assert_eq!(st.trees().len(), born);
            for t in st.trees() {
                assert_eq!(t.birth_stage(), t.index() as u64);
                assert!(t.records().all(|(_, r)| r.enumerated_at >= t.birth_stage()));
            }
        }
    }

    #[test]
    fn const_zero_kills_the_zero_node() {
        let mut st = seeded(1);
        st.run(4).unwrap();
        let t0 = st.tree(0).unwrap();
        assert_eq!(t0.status(s("0").syms(), 4), Some(NodeStatus::Terminal));
        let prune = st
            .log()
            .iter()
            .find(|a| matches!(a.kind, ActionKind::OddPrune { e: 0, tree: 0, .. }))
            .unwrap();
        match &prune.kind {
            ActionKind::OddPrune {
                tau, tau0, tau1, ..
            } => {
                assert_eq!(tau, &s("0"));
                assert_eq!(tau0, &s("ε"));
                assert_eq!(tau1.as_ref(), Some(&s("1")));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn odd_check_pending_then_satisfied() {
        let mut st = seeded(1);
        st.run(1).unwrap();
        // the level-1 node "0" appears at the end of stage 1 and lies on 0^ω
        assert_eq!(
            st.check_requirement_odd(0, 0, 1).unwrap(),
            RequirementStatus::Pending(vec![s("0")])
        );
        st.run(10).unwrap();
        for stage in 2..=11 {
            assert_eq!(
                st.check_requirement_odd(0, 0, stage).unwrap(),
                RequirementStatus::Satisfied
            );
        }
        assert_eq!(
            st.check_requirement_odd(1, 0, 11).unwrap(),
            RequirementStatus::Satisfied
        );
        assert!(matches!(
            st.check_requirement_odd(0, 3, 5),
            Err(ConstructionError::TreeNotBorn(3, 5))
        ));
    }

    #[test]
    fn diverging_registry_never_prunes() {
        let reg = registry(vec![("diverge", programs::diverge())]);
        let mut st = ConstructionState::new(2, reg, StageBudget::default()).unwrap();
        st.run(6).unwrap();
        for e in 0..1 {
            for i in 0..2 {
                assert_eq!(
                    st.check_requirement_odd(e, i, 6).unwrap(),
                    RequirementStatus::Satisfied
                );
            }
        }
        assert!(st.diagonal_set().is_empty());
        assert!(st.log().iter().all(|a| !matches!(
            a.kind,
            ActionKind::OddPrune { .. } | ActionKind::DiagonalizeD { .. }
        )));
    }

    #[test]
    fn zero_functional_fills_d_and_prunes_other_extensions() {
        let mut st = seeded(1);
        st.run(8).unwrap();
        let root = vec![TupleMember {
            tree: 0,
            string: s("ε"),
        }];
        let entry = st.followers().get(&root).unwrap().clone();
        assert!(st.diagonal_set().contains(&entry.follower));
        let diag_stage = st.diagonalized_by(entry.follower).unwrap();
        for stage in diag_stage..=8 {
            assert_eq!(
                st.check_requirement_even(0, &root, stage).unwrap(),
                RequirementStatus::Satisfied
            );
        }
        let exts = st
            .log()
            .iter()
            .find_map(|a| match &a.kind {
                ActionKind::DiagonalizeD {
                    follower,
                    extensions,
                    ..
                } if *follower == entry.follower => Some(extensions.clone()),
                _ => None,
            })
            .unwrap();
        let t0 = st.tree(0).unwrap();
        for (k, r) in t0.extensions(&s("ε"), diag_stage) {
            if !k.compatible(&exts[0]) {
                assert_eq!(r.status_at(diag_stage), Some(NodeStatus::Terminal), "{k}");
            }
        }
    }

    #[test]
    fn even_check_errors() {
        let st = seeded(1);
        let bogus = vec![TupleMember {
            tree: 0,
            string: s("0101"),
        }];
        assert!(matches!(
            st.check_requirement_even(0, &bogus, 0),
            Err(ConstructionError::UnregisteredTuple(_))
        ));
    }

    #[test]
    fn never_halting_functional_satisfies_even_check() {
        let reg = registry(vec![("diverge", programs::diverge())]);
        let mut st = ConstructionState::new(2, reg, StageBudget::default()).unwrap();
        let root = vec![TupleMember {
            tree: 0,
            string: s("ε"),
        }];
        for stage in 1..=6 {
            st.run_stage().unwrap();
            assert_eq!(
                st.check_requirement_even(0, &root, stage).unwrap(),
                RequirementStatus::Satisfied
            );
        }
    }

    #[test]
    fn run_splits_compose() {
        let mut a = seeded(3);
        a.run(12).unwrap();
        let mut b = seeded(3);
        b.run(5).unwrap();
        b.run(7).unwrap();
        assert_eq!(a.log(), b.log());
        assert_eq!(a.diagonal_set(), b.diagonal_set());
        for (x, y) in a.trees().iter().zip(b.trees()) {
            assert_eq!(x.to_snapshot(), y.to_snapshot());
        }
        let mut c = seeded(3);
        c.run(0).unwrap();
        assert_eq!(c.stage(), 0);
        assert!(c.log().is_empty());
    }

    #[test]
    fn height_must_exceed_requirement_levels() {
        let reg = registry(vec![
            ("a", programs::const_zero()),
            ("b", programs::const_zero()),
        ]);
        let budget = StageBudget {
            max_height: 4,
            ..StageBudget::default()
        };
        assert!(matches!(
            ConstructionState::new(1, reg, budget),
            Err(ConstructionError::HeightTooSmall { .. })
        ));
    }

    #[test]
    fn registration_budget_is_logged() {
        let reg = registry(vec![
            ("d0", programs::diverge()),
            ("d1", programs::diverge()),
            ("d2", programs::diverge()),
        ]);
        let budget = StageBudget {
            tuples_per_stage: 3,
            ..StageBudget::default()
        };
        let mut st = ConstructionState::new(1, reg, budget).unwrap();
        st.run(6).unwrap();
        assert!(st.log().iter().any(|a| matches!(
            &a.kind,
            ActionKind::BudgetTruncated { what, .. } if what == "tuple registration"
        )));
        let mut per_stage: BTreeMap<Stage, usize> = BTreeMap::new();
        for a in st.log() {
            if matches!(a.kind, ActionKind::FollowerAssign { .. }) {
                *per_stage.entry(a.stage).or_default() += 1;
            }
        }
        assert!(per_stage.values().all(|&n| n <= 3));
        let followers: BTreeSet<u64> = st.followers().entries.iter().map(|e| e.follower).collect();
        assert_eq!(followers.len(), st.followers().len());
    }

    #[test]
    fn tuple_enumeration_respects_incompatibility() {
        let elems: Vec<TupleMember> = ["00", "01", "0", "1"]
            .iter()
            .map(|x| TupleMember {
                tree: 0,
                string: s(x),
            })
            .collect();
        let mut seen = Vec::new();
        let mut stack = Vec::new();
        tuples_dfs(&elems, 2, &mut stack, &mut |idx| {
            seen.push(idx.to_vec());
            true
        });
        for t in &seen {
            assert!(!elems[t[0]].string.compatible(&elems[t[1]].string));
        }
        // 00|01, 00|1, 01|1, 0|1 in both orders
        assert_eq!(seen.len(), 8);
    }
}
