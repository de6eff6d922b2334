//! Invariant checkers over finished runs.
//!
//! Every checker returns the list of violations it found; an empty list
//! means the invariant held. A [`Violation`] names the module and invariant,
//! the stage where it failed when one applies, and a witness.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::{enum_fn_approx, pi_strings, Chain, QState};
use crate::construction::{ActionKind, ConstructionState, RequirementStatus};
use crate::join::finite_join;
use crate::strings::{Alphabet, FinString, Sym};
use crate::tree::{NodeStatus, Stage, StagedTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub module: String,
    pub invariant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub witness: String,
}

impl Violation {
    fn new(
        module: &str,
        invariant: &str,
        stage: Option<Stage>,
        witness: impl Into<String>,
    ) -> Self {
        Violation {
            module: module.to_string(),
            invariant: invariant.to_string(),
            stage,
            witness: witness.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} violated", self.module, self.invariant)?;
        if let Some(s) = self.stage {
            write!(f, " at stage {s}")?;
        }
        write!(f, ": {}", self.witness)
    }
}

/// Birth, monotone records, downward closure and terminal absorption.
pub fn check_tree_basics(module: &str, tree: &StagedTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let birth = tree.birth_stage();
    let label = format!("tree {}", tree.index());
    match tree.record(&[]) {
        Some(r) if r.enumerated_at == birth => {}
        _ => out.push(Violation::new(
            module,
            "root enumerated at birth",
            Some(birth),
            label.clone(),
        )),
    }
    let mut blocked: HashMap<&[Sym], Stage> = HashMap::new();
    for (k, r) in tree.records() {
        if r.enumerated_at < birth {
            out.push(Violation::new(
                module,
                "no node before birth",
                Some(r.enumerated_at),
                format!("{label}: {k}"),
            ));
        }
        if r.status_since < r.enumerated_at {
            out.push(Violation::new(
                module,
                "status after enumeration",
                Some(r.status_since),
                format!("{label}: {k}"),
            ));
        }
        if k.is_empty() {
            continue;
        }
        match tree.record(&k.syms()[..k.len() - 1]) {
            Some(p) if p.enumerated_at <= r.enumerated_at => {}
            _ => out.push(Violation::new(
                module,
                "downward closed",
                Some(r.enumerated_at),
                format!("{label}: parent of {k} missing when it appeared"),
            )),
        }
        // earliest stage at which some proper prefix turned terminal,
        // carried down from the parent in preorder
        let parent = &k.syms()[..k.len() - 1];
        let inherited = match (blocked.get(parent), tree.record(parent)) {
            (Some(&b), Some(p)) if p.status == NodeStatus::Terminal => b.min(p.status_since),
            (Some(&b), Some(_)) => b,
            _ => (0..k.len())
                .filter_map(|len| tree.record(&k.syms()[..len]))
                .filter(|p| p.status == NodeStatus::Terminal)
                .map(|p| p.status_since)
                .min()
                .unwrap_or(Stage::MAX),
        };
        blocked.insert(k.syms(), inherited);
        if r.enumerated_at < inherited {
            continue;
        }
        for len in 0..k.len() {
            if let Some(p) = tree.record(&k.syms()[..len]) {
                if p.status == NodeStatus::Terminal && r.enumerated_at >= p.status_since {
                    out.push(Violation::new(
                        module,
                        "terminal never extended",
                        Some(r.enumerated_at),
                        format!(
                            "{label}: {k} appeared after {} became terminal at stage {}",
                            k.prefix(len),
                            p.status_since
                        ),
                    ));
                }
            }
        }
    }
    out
}

/// A non-leaf node above one alive leaf sits above two incompatible ones.
pub fn check_leaf_pair_liveness(module: &str, tree: &StagedTree, stage: Stage) -> Vec<Violation> {
    let present: Vec<(&FinString, bool)> = tree
        .nodes_at(stage)
        .map(|(k, r)| (k, r.status_at(stage) == Some(NodeStatus::Alive)))
        .collect();
    let n = present.len();
    // alive leaves below each node, accumulated in reverse preorder
    let mut alive_leaves = vec![0usize; n];
    let mut is_leaf = vec![true; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut parent = vec![usize::MAX; n];
    for (pos, (k, _)) in present.iter().enumerate() {
        while stack
            .last()
            .is_some_and(|&top| !present[top].0.is_prefix_of(k))
        {
            stack.pop();
        }
        if let Some(&top) = stack.last() {
            parent[pos] = top;
            is_leaf[top] = false;
        }
        stack.push(pos);
    }
    for pos in (0..n).rev() {
        if is_leaf[pos] && present[pos].1 {
            alive_leaves[pos] += 1;
        }
        if parent[pos] != usize::MAX {
            alive_leaves[parent[pos]] += alive_leaves[pos];
        }
    }
    (0..n)
        .filter(|&p| !is_leaf[p] && alive_leaves[p] == 1)
        .map(|p| {
            Violation::new(
                module,
                "leaf-pair liveness",
                Some(stage),
                format!(
                    "tree {}: {} has a single alive leaf above it",
                    tree.index(),
                    present[p].0
                ),
            )
        })
        .collect()
}

/// Every check on a construction run.
pub fn check_construction(state: &ConstructionState) -> Vec<Violation> {
    let mut out = Vec::new();
    out.extend(check_dovetailing(state));
    for t in state.trees() {
        out.extend(check_tree_basics("construction", t));
        for s in t.birth_stage()..=state.stage() {
            out.extend(check_leaf_pair_liveness("construction", t, s));
        }
    }
    out.extend(check_log_order(state));
    out.extend(check_followers(state));
    out.extend(check_d_soundness(state));
    out.extend(check_prune_soundness(state));
    out.extend(check_odd_promptness(state));
    out
}

pub fn check_dovetailing(state: &ConstructionState) -> Vec<Violation> {
    let mut out = Vec::new();
    let expected = (state.stage() as usize + 1).min(state.n_trees());
    if state.trees().len() != expected {
        out.push(Violation::new(
            "construction",
            "dovetailing",
            Some(state.stage()),
            format!("{} trees born, expected {expected}", state.trees().len()),
        ));
    }
    for (i, t) in state.trees().iter().enumerate() {
        if t.index() != i || t.birth_stage() != i as Stage {
            out.push(Violation::new(
                "construction",
                "dovetailing",
                Some(t.birth_stage()),
                format!(
                    "tree {i} has index {} and birth {}",
                    t.index(),
                    t.birth_stage()
                ),
            ));
        }
        if let Some((k, r)) = t.records().find(|(_, r)| r.enumerated_at < i as Stage) {
            out.push(Violation::new(
                "construction",
                "dovetailing",
                Some(r.enumerated_at),
                format!("tree {i} holds {k} before stage {i}"),
            ));
        }
    }
    out
}

pub fn check_log_order(state: &ConstructionState) -> Vec<Violation> {
    state
        .log()
        .windows(2)
        .filter(|w| (w[0].stage, w[0].kind.rank()) > (w[1].stage, w[1].kind.rank()))
        .map(|w| {
            Violation::new(
                "construction",
                "log ordered by stage then kind",
                Some(w[1].stage),
                format!("{:?} after {:?}", w[1].kind, w[0].kind),
            )
        })
        .collect()
}

pub fn check_followers(state: &ConstructionState) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for e in &state.followers().entries {
        if !seen.insert(e.follower) {
            out.push(Violation::new(
                "construction",
                "followers distinct",
                Some(e.assigned_at),
                format!("follower {} assigned twice", e.follower),
            ));
        }
        if let Some(d) = state.diagonalized_by(e.follower) {
            if d < e.assigned_at {
                out.push(Violation::new(
                    "construction",
                    "follower not in D at assignment",
                    Some(e.assigned_at),
                    format!("follower {} entered D at stage {d}", e.follower),
                ));
            }
        }
        let strings: Vec<&FinString> = e.tuple.iter().map(|m| &m.string).collect();
        for a in 0..strings.len() {
            for b in a + 1..strings.len() {
                if strings[a].compatible(strings[b]) {
                    out.push(Violation::new(
                        "construction",
                        "tuple strings incompatible",
                        Some(e.assigned_at),
                        format!("{} and {}", strings[a], strings[b]),
                    ));
                }
            }
        }
    }
    out
}

pub fn check_d_soundness(state: &ConstructionState) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut actions: BTreeMap<u64, usize> = BTreeMap::new();
    for a in state.log() {
        let ActionKind::DiagonalizeD {
            e,
            tuple,
            extensions,
            follower,
            ..
        } = &a.kind
        else {
            continue;
        };
        *actions.entry(*follower).or_default() += 1;
        let fail = |why: String| {
            Violation::new(
                "construction",
                "D soundness",
                Some(a.stage),
                format!("follower {follower}: {why}"),
            )
        };
        let Some(program) = state.registry().program(*e) else {
            out.push(fail(format!("functional {e} is not registered")));
            continue;
        };
        if tuple.len() != extensions.len() {
            out.push(fail("tuple and extensions differ in length".into()));
            continue;
        }
        let level = state.followers().get(tuple).map(|f| f.level);
        for (m, ext) in tuple.iter().zip(extensions) {
            let Some(t) = state.tree(m.tree) else {
                out.push(fail(format!("tree {} missing", m.tree)));
                continue;
            };
            if !m.string.is_proper_prefix_of(ext) || !t.is_alive(ext.syms(), a.stage) {
                out.push(fail(format!(
                    "{ext} is not an alive extension of {}",
                    m.string
                )));
            }
            if level.is_some_and(|l| t.level(ext, a.stage) != l + 2) {
                out.push(fail(format!(
                    "{ext} is not two levels above its tuple string"
                )));
            }
        }
        match finite_join(extensions) {
            Ok(j) => {
                let r = program.eval(&j, *follower, a.stage);
                if r.value() != Some(0) {
                    out.push(fail(format!("re-evaluation gave {r:?}")));
                }
            }
            Err(err) => out.push(fail(err.to_string())),
        }
    }
    for x in state.diagonal_set() {
        match actions.get(x) {
            Some(1) => {}
            n => out.push(Violation::new(
                "construction",
                "D soundness",
                None,
                format!(
                    "{x} is in D with {} justifying actions",
                    n.copied().unwrap_or(0)
                ),
            )),
        }
    }
    for x in actions.keys() {
        if !state.diagonal_set().contains(x) {
            out.push(Violation::new(
                "construction",
                "D soundness",
                None,
                format!("follower {x} was diagonalized but is not in D"),
            ));
        }
    }
    out
}

pub fn check_prune_soundness(state: &ConstructionState) -> Vec<Violation> {
    let mut out = Vec::new();
    for a in state.log() {
        let s = a.stage;
        match &a.kind {
            ActionKind::OddPrune {
                tree,
                tau,
                tau0,
                tau1,
                ..
            } => {
                let Some(t) = state.tree(*tree) else { continue };
                if let Some(t1) = tau1 {
                    if !t.is_alive(t1.syms(), s) {
                        out.push(Violation::new(
                            "construction",
                            "prune soundness",
                            Some(s),
                            format!("tree {tree}: survivor {t1} is not alive"),
                        ));
                    }
                }
                for (k, r) in t.extensions(tau0, s) {
                    if k.compatible(tau) && r.status_at(s) != Some(NodeStatus::Terminal) {
                        out.push(Violation::new(
                            "construction",
                            "prune soundness",
                            Some(s),
                            format!("tree {tree}: {k} is compatible with {tau} but alive"),
                        ));
                    }
                }
            }
            ActionKind::DiagonalizeD {
                tuple, extensions, ..
            } => {
                for (m, ext) in tuple.iter().zip(extensions) {
                    let Some(t) = state.tree(m.tree) else {
                        continue;
                    };
                    for (k, r) in t.extensions(&m.string, s) {
                        if !k.compatible(ext) && r.status_at(s) != Some(NodeStatus::Terminal) {
                            out.push(Violation::new(
                                "construction",
                                "prune soundness",
                                Some(s),
                                format!(
                                    "tree {}: {k} is incompatible with witness {ext} but alive",
                                    m.tree
                                ),
                            ));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// A pending odd requirement is acted on at the next stage and stays
/// satisfied once acted on.
pub fn check_odd_promptness(state: &ConstructionState) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut prunes: BTreeMap<(usize, usize), Vec<(Stage, FinString)>> = BTreeMap::new();
    for a in state.log() {
        if let ActionKind::OddPrune { e, tree, tau, .. } = &a.kind {
            prunes
                .entry((*e, *tree))
                .or_default()
                .push((a.stage, tau.clone()));
        }
    }
    for (i, t) in state.trees().iter().enumerate() {
        for e in 0..state.registry().len() {
            let first_prune = prunes.get(&(e, i)).and_then(|v| v.first()).map(|p| p.0);
            for s in t.birth_stage()..=state.stage() {
                let status = match state.check_requirement_odd(e, i, s) {
                    Ok(st) => st,
                    Err(err) => {
                        out.push(Violation::new(
                            "construction",
                            "odd requirement",
                            Some(s),
                            err.to_string(),
                        ));
                        continue;
                    }
                };
                let RequirementStatus::Pending(w) = status else {
                    continue;
                };
                let w = &w[0];
                if first_prune.is_some_and(|p| p <= s) {
                    out.push(Violation::new(
                        "construction",
                        "odd requirement stays satisfied",
                        Some(s),
                        format!("tree {i}, functional {e}: {w} pending after a prune"),
                    ));
                }
                if s == state.stage() {
                    continue;
                }
                let acted = prunes
                    .get(&(e, i))
                    .is_some_and(|v| v.iter().any(|(st, tau)| *st == s + 1 && tau == w))
                    || t.status(w.syms(), s + 1) == Some(NodeStatus::Terminal);
                if !acted {
                    out.push(Violation::new(
                        "construction",
                        "odd requirement acted on within one stage",
                        Some(s + 1),
                        format!("tree {i}, functional {e}: {w} was pending at stage {s}"),
                    ));
                }
            }
        }
    }
    out
}

/// Base class: length-`d` nodes appear at stage `d`, are exactly the
/// strings `0^a 1^b`, and follow the one-child / two-children rule.
pub fn check_base_class(tree: &StagedTree, depth: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let v =
        |inv: &str, stage: Option<Stage>, w: String| Violation::new("base class", inv, stage, w);
    for (k, r) in tree.records() {
        if r.enumerated_at != k.len() as Stage {
            out.push(v(
                "stage rule",
                Some(r.enumerated_at),
                format!("{k} appeared at stage {}", r.enumerated_at),
            ));
        }
        let shape_ok = k
            .syms()
            .windows(2)
            .all(|w| !(w[0] == Sym::One && w[1] == Sym::Zero));
        if !shape_ok || k.count(Sym::Hash) > 0 {
            out.push(v("shape 0*1*", Some(r.enumerated_at), k.to_string()));
        }
    }
    for d in 0..=depth {
        let got: BTreeSet<FinString> = tree
            .nodes_at(tree.stage())
            .filter(|(k, _)| k.len() == d)
            .map(|(k, _)| k.clone())
            .collect();
        let want: BTreeSet<FinString> = (0..=d)
            .map(|a| FinString::from_bits((0..d).map(|p| p >= a)))
            .collect();
        if d as Stage <= tree.stage() && got != want {
            out.push(v(
                "depth strings",
                Some(d as Stage),
                format!("length {d}: {} strings, expected {}", got.len(), want.len()),
            ));
        }
        for sigma in &got {
            if (d as Stage) >= tree.stage() {
                continue;
            }
            let kids: Vec<Sym> = [Sym::Zero, Sym::One]
                .into_iter()
                .filter(|&c| tree.is_enumerated(sigma.child(c).syms(), tree.stage()))
                .collect();
            let expect: &[Sym] = if sigma.last() == Some(Sym::One) {
                &[Sym::One]
            } else {
                &[Sym::Zero, Sym::One]
            };
            if kids != expect {
                out.push(v(
                    "child rule",
                    Some(d as Stage + 1),
                    format!("{sigma} has children {kids:?}"),
                ));
            }
        }
    }
    out
}

/// Markers, grafts and the coded path of one chain level.
pub fn check_qstate(q: &QState) -> Vec<Violation> {
    let mut out = Vec::new();
    let final_stage = q.stage();
    let v = |inv: &str, stage: Option<Stage>, w: String| Violation::new("chain", inv, stage, w);
    let level = q.upsilon().index();
    out.extend(check_tree_basics("chain", q.upsilon()));
    for (m, &ms) in q.markers() {
        if m.last() != Some(Sym::Hash) {
            out.push(v(
                "marker ends with #",
                Some(ms),
                format!("level {level}: {m}"),
            ));
        }
        if !q.upsilon().is_enumerated(m.syms(), ms) {
            out.push(v(
                "marker enumerated",
                Some(ms),
                format!("level {level}: {m}"),
            ));
        }
        let pi = ms.checked_sub(1).map(|s| {
            pi_strings(&enum_fn_approx(q.enumeration(), s), s as usize + 1).expect("s+1 blocks")
        });
        if !pi.as_ref().is_some_and(|p| m.is_prefix_of(p)) {
            out.push(v(
                "marker from the coding rule",
                Some(ms),
                format!("level {level}: {m} is not on the coding string"),
            ));
        }
    }
    let lambda = q.lambda();
    for (m, suffixes) in q.grafts() {
        for rho in suffixes {
            if !lambda.member(rho.syms()) {
                out.push(v(
                    "graft soundness",
                    None,
                    format!("level {level}: {m} + {rho} outside the copied class"),
                ));
            }
        }
    }
    if lambda.alphabet() == Alphabet::Binary {
        for m in q.markers().keys() {
            for (k, r) in q.upsilon().extensions(m, final_stage) {
                let rho = &k.syms()[m.len()..];
                if rho.iter().all(|&c| c != Sym::Hash) && !lambda.member(rho) {
                    out.push(v(
                        "graft soundness",
                        Some(r.enumerated_at),
                        format!("level {level}: {k} above {m} leaves the copied class"),
                    ));
                }
            }
        }
    }
    for (m, &ms) in q.markers() {
        let room = final_stage.saturating_sub(ms) as usize;
        for rho in lambda.members_up_to(room) {
            let node = m.concat(&rho.to_ternary()).expect("ternary");
            if !q.upsilon().is_enumerated(node.syms(), final_stage) {
                out.push(v(
                    "graft completeness",
                    Some(final_stage),
                    format!("level {level}: {m} + {rho} missing (room {room})"),
                ));
                break;
            }
        }
    }
    let prefix = q.longest_coded_prefix();
    match crate::chain::decode_complete_blocks(&prefix) {
        Ok(vals) => {
            let f = enum_fn_approx(q.enumeration(), final_stage);
            if vals.as_slice() != &f.values[..vals.len().min(f.values.len())] {
                out.push(v(
                    "decode recovers f",
                    Some(final_stage),
                    format!("level {level}: decoded {vals:?}"),
                ));
            }
        }
        Err(e) => out.push(v(
            "decode recovers f",
            Some(final_stage),
            format!("level {level}: {e}"),
        )),
    }
    out
}

/// Every member of the copied class up to `depth` sits above some marker.
pub fn check_embedding(q: &QState, depth: usize) -> Vec<Violation> {
    let s = q.stage();
    q.lambda()
        .members_up_to(depth)
        .into_iter()
        .filter(|rho| {
            !q.markers().keys().any(|m| {
                let node = m.concat(&rho.to_ternary()).expect("ternary");
                q.upsilon().is_enumerated(node.syms(), s)
            })
        })
        .map(|rho| {
            Violation::new(
                "chain",
                "embedding",
                Some(s),
                format!(
                    "level {}: {rho} appears above no marker",
                    q.upsilon().index()
                ),
            )
        })
        .collect()
}

pub fn check_chain(chain: &Chain, embed_depth: usize) -> Vec<Violation> {
    let mut out = check_base_class(&chain.base, chain.base.stage() as usize);
    for q in &chain.levels {
        out.extend(check_qstate(q));
        out.extend(check_embedding(q, embed_depth));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{base_computable_class, iterate_chain, ReEnumeration};
    use crate::construction::{Registry, StageBudget};
    use crate::machine::programs;

    #[test]
    fn seeded_run_is_clean() {
        let reg = Registry::from_programs([
            ("c0".to_string(), programs::const_zero()),
            ("z".to_string(), programs::zero_after_query()),
        ]);
        let mut st = ConstructionState::new(3, reg, StageBudget::default()).unwrap();
        st.run(20).unwrap();
        let v = check_construction(&st);
        assert!(v.is_empty(), "{:#?}", v);
    }

    #[test]
    fn liveness_flags_lonely_leaf() {
        let mut t = StagedTree::new(0, 0, Alphabet::Binary);
        for x in ["0", "1", "00", "01"] {
            t.enumerate(FinString::parse(x).unwrap(), 1).unwrap();
        }
        t.prune(
            &FinString::parse("ε").unwrap(),
            &crate::tree::PruneRule::CompatibleWith(FinString::parse("0").unwrap()),
            2,
            "test",
        )
        .unwrap();
        assert!(check_leaf_pair_liveness("t", &t, 1).is_empty());
        let v = check_leaf_pair_liveness("t", &t, 2);
        assert_eq!(v.len(), 1);
        assert!(v[0].witness.contains("ε"));
    }

    #[test]
    fn tree_basics_flag_orphans() {
        let mut t = StagedTree::new(0, 0, Alphabet::Binary);
        t.enumerate(FinString::parse("01").unwrap(), 1).unwrap();
        let v = check_tree_basics("t", &t);
        assert!(v.iter().any(|x| x.invariant == "downward closed"));
    }

    #[test]
    fn base_class_and_chain_clean() {
        assert!(check_base_class(&base_computable_class(12), 12).is_empty());
        let chain = iterate_chain(
            &[
                ReEnumeration::empty(),
                ReEnumeration::table(vec![(2, 1), (1, 3)]).unwrap(),
            ],
            24,
        )
        .unwrap();
        let v = check_chain(&chain, 6);
        assert!(v.is_empty(), "{:#?}", v);
    }

    #[test]
    fn violation_display_names_everything() {
        let v = Violation::new("chain", "embedding", Some(4), "level 2: 01");
        assert_eq!(
            v.to_string(),
            "chain: embedding violated at stage 4: level 2: 01"
        );
    }
}
