//! Stage-indexed enumerated trees and their computable downward closures.
//!
//! A [`StagedTree`] records, for every node, the stage at which it was
//! enumerated and the stage (if any) at which it was declared terminal. Every
//! historical snapshot can therefore be recovered from the final state, and
//! the serialized form is the full stage log.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strings::{Alphabet, FinString, Sym};

pub type Stage = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("string {0} is not enumerated in tree {1} at stage {2}")]
    NotFound(FinString, usize, Stage),
    #[error("string {0} has no immediate predecessor in tree {1}")]
    NoPredecessor(FinString, usize),
    #[error("cannot extend terminal node {terminal} with {child} in tree {tree}")]
    ExtendsTerminal {
        tree: usize,
        terminal: FinString,
        child: FinString,
    },
    #[error("stage {stage} is before stage {current} already reached by tree {tree}")]
    StageRegression {
        tree: usize,
        stage: Stage,
        current: Stage,
    },
    #[error("string {0} does not fit the alphabet of tree {1}")]
    WrongAlphabet(FinString, usize),
    #[error("malformed snapshot: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Alive,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub enumerated_at: Stage,
    pub status: NodeStatus,
    pub status_since: Stage,
    /// Which construction step made the node terminal, if it is terminal.
    pub cause: Option<String>,
}

impl NodeRecord {
    fn present_at(&self, stage: Stage) -> bool {
        self.enumerated_at <= stage
    }

    pub fn status_at(&self, stage: Stage) -> Option<NodeStatus> {
        if !self.present_at(stage) {
            return None;
        }
        match self.status {
            NodeStatus::Terminal if self.status_since <= stage => Some(NodeStatus::Terminal),
            _ => Some(NodeStatus::Alive),
        }
    }
}

/// Which extensions of a root string a pruning step kills.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PruneRule {
    /// Every proper extension.
    All,
    /// Proper extensions compatible with the target (the target's cone and
    /// the path leading to it).
    CompatibleWith(FinString),
    /// Proper extensions incompatible with the survivor.
    IncompatibleWith(FinString),
}

impl PruneRule {
    fn kills(&self, node: &FinString) -> bool {
        match self {
            PruneRule::All => true,
            PruneRule::CompatibleWith(t) => t.compatible(node),
            PruneRule::IncompatibleWith(keep) => !keep.compatible(node),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StagedTree {
    index: usize,
    birth_stage: Stage,
    alphabet: Alphabet,
    stage: Stage,
    nodes: BTreeMap<FinString, NodeRecord>,
    /// Nodes that are terminal at some stage, so `enumerate` can skip the
    /// prefix scan when there are none.
    terminals: BTreeSet<FinString>,
}

impl StagedTree {
    /// A tree born at `birth_stage`, holding only the empty string.
    pub fn new(index: usize, birth_stage: Stage, alphabet: Alphabet) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(
            FinString::empty(alphabet),
            NodeRecord {
                enumerated_at: birth_stage,
                status: NodeStatus::Alive,
                status_since: birth_stage,
                cause: None,
            },
        );
        StagedTree {
            index,
            birth_stage,
            alphabet,
            stage: birth_stage,
            nodes,
            terminals: BTreeSet::new(),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn birth_stage(&self) -> Stage {
        self.birth_stage
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// The latest stage this tree has been driven to.
    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn advance_to(&mut self, stage: Stage) -> Result<(), TreeError> {
        if stage < self.stage {
            return Err(TreeError::StageRegression {
                tree: self.index,
                stage,
                current: self.stage,
            });
        }
        self.stage = stage;
        Ok(())
    }

    pub fn record(&self, sigma: &[Sym]) -> Option<&NodeRecord> {
        self.nodes.get(sigma)
    }

    /// All node records, in lexicographic (preorder) order.
    pub fn records(&self) -> impl Iterator<Item = (&FinString, &NodeRecord)> {
        self.nodes.iter()
    }

    pub fn is_enumerated(&self, sigma: &[Sym], stage: Stage) -> bool {
        self.nodes.get(sigma).is_some_and(|r| r.present_at(stage))
    }

    pub fn status(&self, sigma: &[Sym], stage: Stage) -> Option<NodeStatus> {
        self.nodes.get(sigma).and_then(|r| r.status_at(stage))
    }

    pub fn is_alive(&self, sigma: &[Sym], stage: Stage) -> bool {
        self.status(sigma, stage) == Some(NodeStatus::Alive)
    }

    /// Enumerates `sigma` at `stage`. Returns `false` if it was already
    /// present. Refuses to extend a node that is terminal by `stage`.
    pub fn enumerate(&mut self, sigma: FinString, stage: Stage) -> Result<bool, TreeError> {
        if stage < self.stage {
            return Err(TreeError::StageRegression {
                tree: self.index,
                stage,
                current: self.stage,
            });
        }
        if !sigma.syms().iter().all(|&c| self.alphabet.admits(c)) {
            return Err(TreeError::WrongAlphabet(sigma, self.index));
        }
        if self.nodes.contains_key(sigma.syms()) {
            return Ok(false);
        }
        for k in (0..sigma.len()).filter(|_| !self.terminals.is_empty()) {
            let head = &sigma.syms()[..k];
            if self.terminals.contains(head)
                && self.status(head, stage) == Some(NodeStatus::Terminal)
            {
                return Err(TreeError::ExtendsTerminal {
                    tree: self.index,
                    terminal: sigma.prefix(k),
                    child: sigma,
                });
            }
        }
        self.stage = stage;
        let sigma = sigma
            .with_alphabet(self.alphabet)
            .expect("alphabet checked");
        self.nodes.insert(
            sigma,
            NodeRecord {
                enumerated_at: stage,
                status: NodeStatus::Alive,
                status_since: stage,
                cause: None,
            },
        );
        Ok(true)
    }

    /// Nodes present at `stage`, in lexicographic (preorder) order.
    pub fn nodes_at(&self, stage: Stage) -> impl Iterator<Item = (&FinString, &NodeRecord)> {
        self.nodes.iter().filter(move |(_, r)| r.present_at(stage))
    }

    /// Proper extensions of `sigma` present at `stage`, in preorder.
    pub fn extensions<'a>(
        &'a self,
        sigma: &'a FinString,
        stage: Stage,
    ) -> impl Iterator<Item = (&'a FinString, &'a NodeRecord)> + 'a {
        self.nodes
            .range::<[Sym], _>((Bound::Excluded(sigma.syms()), Bound::Unbounded))
            .take_while(move |(k, _)| sigma.is_prefix_of(k))
            .filter(move |(_, r)| r.present_at(stage))
    }

    /// Every node at `stage` paired with its level: the number of present
    /// proper prefixes.
    pub fn levels_at(&self, stage: Stage) -> Vec<(&FinString, usize)> {
        let mut stack: Vec<&FinString> = Vec::new();
        let mut out = Vec::new();
        for (k, _) in self.nodes_at(stage) {
            while stack.last().is_some_and(|top| !top.is_prefix_of(k)) {
                stack.pop();
            }
            out.push((k, stack.len()));
            stack.push(k);
        }
        out
    }

    pub fn level(&self, sigma: &FinString, stage: Stage) -> usize {
        (0..sigma.len())
            .filter(|&k| self.is_enumerated(&sigma.syms()[..k], stage))
            .count()
    }

    /// Nodes with no present proper extension at `stage`, in preorder.
    pub fn leaves(&self, stage: Stage, alive_only: bool) -> Vec<FinString> {
        if stage < self.birth_stage {
            return Vec::new();
        }
        let present: Vec<(&FinString, &NodeRecord)> = self.nodes_at(stage).collect();
        let mut out = Vec::new();
        for (pos, (k, r)) in present.iter().enumerate() {
            let has_ext = present
                .get(pos + 1)
                .is_some_and(|(next, _)| k.is_proper_prefix_of(next));
            if has_ext {
                continue;
            }
            if alive_only && r.status_at(stage) != Some(NodeStatus::Alive) {
                continue;
            }
            out.push((*k).clone());
        }
        out
    }

    pub fn is_leaf(&self, sigma: &FinString, stage: Stage) -> bool {
        self.is_enumerated(sigma.syms(), stage) && self.extensions(sigma, stage).next().is_none()
    }

    /// The longest present proper prefix of `sigma`.
    pub fn immediate_predecessor(
        &self,
        sigma: &FinString,
        stage: Stage,
    ) -> Result<FinString, TreeError> {
        if !self.is_enumerated(sigma.syms(), stage) {
            return Err(TreeError::NotFound(sigma.clone(), self.index, stage));
        }
        (0..sigma.len())
            .rev()
            .find(|&k| self.is_enumerated(&sigma.syms()[..k], stage))
            .map(|k| sigma.prefix(k))
            .ok_or_else(|| TreeError::NoPredecessor(sigma.clone(), self.index))
    }

    /// Marks terminal, at `stage`, every present proper extension of `root`
    /// selected by `rule`. Returns how many nodes changed status.
    pub fn prune(
        &mut self,
        root: &FinString,
        rule: &PruneRule,
        stage: Stage,
        cause: &str,
    ) -> Result<usize, TreeError> {
        if !self.is_enumerated(root.syms(), stage) {
            return Err(TreeError::NotFound(root.clone(), self.index, stage));
        }
        self.advance_to(stage)?;
        let mut marked = 0;
        let range = self
            .nodes
            .range_mut::<[Sym], _>((Bound::Excluded(root.syms()), Bound::Unbounded));
        for (k, r) in range {
            if !root.is_prefix_of(k) {
                break;
            }
            if !r.present_at(stage) || r.status == NodeStatus::Terminal || !rule.kills(k) {
                continue;
            }
            r.status = NodeStatus::Terminal;
            r.status_since = stage;
            r.cause = Some(cause.to_string());
            self.terminals.insert(k.clone());
            marked += 1;
        }
        Ok(marked)
    }

    /// Kills the extensions of `tau0` compatible with `prune_target` (all of
    /// them when no target is given). Nodes incompatible with the target stay
    /// alive.
    pub fn declare_terminal_cone(
        &mut self,
        tau0: &FinString,
        prune_target: Option<&FinString>,
        stage: Stage,
    ) -> Result<usize, TreeError> {
        let rule = match prune_target {
            Some(t) => PruneRule::CompatibleWith(t.clone()),
            None => PruneRule::All,
        };
        self.prune(tau0, &rule, stage, "terminal cone")
    }

    /// True iff some alive node of length at least `depth` extends `sigma`
    /// (itself included) at `stage`.
    pub fn extendible_to_depth(&self, sigma: &FinString, depth: usize, stage: Stage) -> bool {
        if self.is_alive(sigma.syms(), stage) && sigma.len() >= depth {
            return true;
        }
        self.extensions(sigma, stage)
            .any(|(k, r)| k.len() >= depth && r.status_at(stage) == Some(NodeStatus::Alive))
    }

    pub fn height(&self, stage: Stage) -> usize {
        self.levels_at(stage)
            .into_iter()
            .map(|(_, l)| l)
            .max()
            .unwrap_or(0)
    }

    pub fn snapshot(&self, stage: Stage) -> TreeSnapshot {
        let mut nodes: Vec<NodeEntry> = self
            .nodes_at(stage)
            .map(|(k, r)| {
                let status = r.status_at(stage).expect("present");
                NodeEntry {
                    string: k.clone(),
                    enumerated_at: r.enumerated_at,
                    status,
                    status_since: if status == NodeStatus::Terminal {
                        r.status_since
                    } else {
                        r.enumerated_at
                    },
                    cause: if status == NodeStatus::Terminal {
                        r.cause.clone()
                    } else {
                        None
                    },
                }
            })
            .collect();
        nodes.sort_by(|a, b| a.string.len_lex_cmp(&b.string));
        TreeSnapshot {
            index: self.index,
            birth_stage: self.birth_stage,
            stage,
            alphabet: self.alphabet,
            nodes,
        }
    }

    /// The full stage log.
    pub fn to_snapshot(&self) -> TreeSnapshot {
        self.snapshot(self.stage)
    }

    /// Rebuilds a tree from a snapshot. Only shape is validated here; the
    /// construction invariants are left to the checkers so that a corrupted
    /// log can still be loaded and diagnosed.
    pub fn from_snapshot(snap: &TreeSnapshot) -> Result<Self, TreeError> {
        let mut nodes = BTreeMap::new();
        for n in &snap.nodes {
            let string = n
                .string
                .with_alphabet(snap.alphabet)
                .map_err(|_| TreeError::WrongAlphabet(n.string.clone(), snap.index))?;
            if n.enumerated_at < snap.birth_stage || n.enumerated_at > snap.stage {
                return Err(TreeError::Malformed(format!(
                    "node {} enumerated at stage {} outside [{}, {}]",
                    n.string, n.enumerated_at, snap.birth_stage, snap.stage
                )));
            }
            if n.status_since < n.enumerated_at || n.status_since > snap.stage {
                return Err(TreeError::Malformed(format!(
                    "node {} has status_since {} outside [{}, {}]",
                    n.string, n.status_since, n.enumerated_at, snap.stage
                )));
            }
            let rec = NodeRecord {
                enumerated_at: n.enumerated_at,
                status: n.status,
                status_since: n.status_since,
                cause: n.cause.clone(),
            };
            if nodes.insert(string, rec).is_some() {
                return Err(TreeError::Malformed(format!("duplicate node {}", n.string)));
            }
        }
        match nodes.get(&[][..]) {
            Some(r) if r.enumerated_at == snap.birth_stage => {}
            _ => {
                return Err(TreeError::Malformed(
                    "the empty string must be enumerated at the birth stage".into(),
                ))
            }
        }
        let terminals = nodes
            .iter()
            .filter(|(_, r)| r.status == NodeStatus::Terminal)
            .map(|(k, _)| k.clone())
            .collect();
        Ok(StagedTree {
            index: snap.index,
            birth_stage: snap.birth_stage,
            alphabet: snap.alphabet,
            stage: snap.stage,
            nodes,
            terminals,
        })
    }

    /// Every string over the alphabet of length at most `depth`, all
    /// enumerated at stage `|σ|`. Handy as the unrestricted tree.
    pub fn full(index: usize, alphabet: Alphabet, depth: usize) -> Self {
        let mut t = StagedTree::new(index, 0, alphabet);
        let mut frontier = vec![FinString::empty(alphabet)];
        for d in 1..=depth {
            let mut next = Vec::new();
            for s in &frontier {
                for &c in alphabet.symbols() {
                    let child = s.child(c);
                    t.enumerate(child.clone(), d as Stage).expect("fresh node");
                    next.push(child);
                }
            }
            frontier = next;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub string: FinString,
    pub enumerated_at: Stage,
    pub status: NodeStatus,
    pub status_since: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

fn default_alphabet() -> Alphabet {
    Alphabet::Binary
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSnapshot {
    pub index: usize,
    pub birth_stage: Stage,
    pub stage: Stage,
    #[serde(default = "default_alphabet")]
    pub alphabet: Alphabet,
    pub nodes: Vec<NodeEntry>,
}

/// The downward closure Λ of a staged tree, decided by looking only at
/// bounded stages: σ ∈ Λ iff for every prefix ρ ⊆ σ some node extending ρ
/// was enumerated by stage `birth + |ρ|`.
///
/// For trees that grow by adding children to existing nodes this coincides
/// with "σ is a prefix of a node present at stage `birth + |σ|`", and the
/// prefix quantifier keeps Λ downward closed for arbitrary enumerations.
#[derive(Debug, Clone)]
pub struct ClosureTree {
    source: Arc<StagedTree>,
    /// For every prefix of every node: the least stage at which some node
    /// extending it appeared.
    earliest: BTreeMap<FinString, Stage>,
    members: BTreeSet<FinString>,
}

impl ClosureTree {
    pub fn new(source: Arc<StagedTree>) -> Self {
        let mut earliest: BTreeMap<FinString, Stage> = BTreeMap::new();
        for (k, r) in source.records() {
            for len in (0..=k.len()).rev() {
                let key = &k.syms()[..len];
                match earliest.get_mut(key) {
                    Some(s) if *s <= r.enumerated_at => break,
                    Some(s) => *s = r.enumerated_at,
                    None => {
                        earliest.insert(k.prefix(len), r.enumerated_at);
                    }
                }
            }
        }
        let birth = source.birth_stage();
        let mut members = BTreeSet::new();
        // preorder: every proper prefix is visited before its extensions
        for (k, &s) in &earliest {
            if s > birth + k.len() as Stage {
                continue;
            }
            let parent_ok = k.is_empty() || members.contains(&k.syms()[..k.len() - 1]);
            if parent_ok {
                members.insert(k.clone());
            }
        }
        ClosureTree {
            source,
            earliest,
            members,
        }
    }

    pub fn from_tree(tree: StagedTree) -> Self {
        Self::new(Arc::new(tree))
    }

    pub fn source(&self) -> &StagedTree {
        &self.source
    }

    pub fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    pub fn member(&self, sigma: &[Sym]) -> bool {
        self.members.contains(sigma)
    }

    /// The stage whose snapshot decides membership of a string of this length.
    pub fn cutoff_stage(&self, len: usize) -> Stage {
        self.source.birth_stage() + len as Stage
    }

    /// Whether the source tree has been run far enough for `member` on a
    /// string of this length to be final.
    pub fn is_determined(&self, len: usize) -> bool {
        self.cutoff_stage(len) <= self.source.stage()
    }

    pub fn earliest_extension_stage(&self, sigma: &[Sym]) -> Option<Stage> {
        self.earliest.get(sigma).copied()
    }

    /// Members of length at most `max_len`, length-lexicographic.
    pub fn members_up_to(&self, max_len: usize) -> Vec<FinString> {
        let mut v: Vec<FinString> = self
            .members
            .iter()
            .filter(|m| m.len() <= max_len)
            .cloned()
            .collect();
        v.sort_by(|a, b| a.len_lex_cmp(b));
        v
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }
}

pub fn closure_member(closure: &ClosureTree, sigma: &FinString) -> bool {
    closure.member(sigma.syms())
}

/// Sorts strings length-lexicographically in place.
pub fn sort_len_lex(v: &mut [FinString]) {
    v.sort_by(|a, b| a.len_lex_cmp(b));
}

/// Least string of an iterator under the length-lexicographic order.
pub fn least_len_lex<'a, I: IntoIterator<Item = &'a FinString>>(it: I) -> Option<&'a FinString> {
    it.into_iter().min_by(|a, b| a.len_lex_cmp(b))
}
