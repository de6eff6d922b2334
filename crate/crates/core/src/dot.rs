//! Graphviz export of tree snapshots.
//!
//! Nodes are numbered in length-lexicographic order so the output diffs
//! cleanly between runs. Alive nodes are solid, terminal nodes dashed with
//! the stage and cause of their pruning in a tooltip. An edge joins each node
//! to its longest present proper prefix.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::tree::{NodeEntry, NodeStatus, TreeSnapshot};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_dot(snap: &TreeSnapshot) -> String {
    let mut nodes: Vec<&NodeEntry> = snap.nodes.iter().collect();
    nodes.sort_by(|a, b| a.string.len_lex_cmp(&b.string));
    let ids: BTreeMap<&crate::strings::FinString, usize> = nodes
        .iter()
        .enumerate()
        .map(|(k, n)| (&n.string, k))
        .collect();

    let mut out = String::new();
    writeln!(out, "digraph tree_{} {{", snap.index).unwrap();
    writeln!(out, "  node [shape=box, fontname=\"monospace\"];").unwrap();
    writeln!(
        out,
        "  label=\"tree {} at stage {}\";",
        snap.index, snap.stage
    )
    .unwrap();
    for (k, n) in nodes.iter().enumerate() {
        let mut attrs = format!("label=\"{}\"", escape(&n.string.to_string()));
        if n.status == NodeStatus::Terminal {
            let why = n.cause.as_deref().unwrap_or("pruned");
            write!(
                attrs,
                ", style=dashed, xlabel=\"x{}\", tooltip=\"{}\"",
                n.status_since,
                escape(why)
            )
            .unwrap();
        } else {
            attrs.push_str(", style=solid");
        }
        writeln!(out, "  n{k} [{attrs}];").unwrap();
    }
    for (k, n) in nodes.iter().enumerate() {
        let parent = (0..n.string.len())
            .rev()
            .find_map(|len| ids.get(&n.string.prefix(len)));
        if let Some(p) = parent {
            writeln!(out, "  n{p} -> n{k};").unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::base_computable_class;
    use crate::strings::{Alphabet, FinString};
    use crate::tree::{PruneRule, StagedTree};

    #[test]
    fn single_node() {
        let t = StagedTree::new(0, 0, Alphabet::Binary);
        let dot = export_dot(&t.to_snapshot());
        assert!(dot.contains("n0 [label=\"ε\", style=solid];"));
        assert!(!dot.contains("->"));
    }

    #[test]
    fn base_class_fan() {
        let dot = export_dot(&base_computable_class(3).to_snapshot());
        for label in ["ε", "0", "1", "00", "01", "11", "000", "001", "011", "111"] {
            assert!(dot.contains(&format!("label=\"{label}\"")), "{label}");
        }
        assert_eq!(dot.matches("->").count(), 9);
        assert!(!dot.contains("label=\"10\""));
    }

    #[test]
    fn terminal_nodes_are_dashed() {
        let mut t = StagedTree::full(0, Alphabet::Binary, 2);
        t.prune(
            &FinString::parse("ε").unwrap(),
            &PruneRule::CompatibleWith(FinString::parse("0").unwrap()),
            3,
            "test prune",
        )
        .unwrap();
        let dot = export_dot(&t.to_snapshot());
        let line = dot.lines().find(|l| l.contains("label=\"00\"")).unwrap();
        assert!(line.contains("style=dashed"));
        assert!(line.contains("test prune"));
        let line = dot.lines().find(|l| l.contains("label=\"1\"")).unwrap();
        assert!(line.contains("style=solid"));
    }
}
