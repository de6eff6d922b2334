//! A desk-scale workbench for effectively closed classes of strings.
//!
//! The crate runs stage-bounded versions of four constructions on trees of
//! binary and ternary strings and checks the structural invariants they rely
//! on:
//!
//! * [`construction`]: a family of trees and a diagonal set `D` such that no
//!   finite join of paths computes `D`, via odd requirements (no path is a
//!   computable set) and even requirements (followers).
//! * [`cone`]: lower and upper cone avoidance for infinite joins, with the
//!   jump oracle replaced by budgeted step search.
//! * [`chain`]: the ternary-tree construction that grafts copies of a class
//!   above `#` markers while coding the enumeration function of an r.e. set
//!   on a path, iterated into a chain.
//!
//! Supporting modules provide strings and pairing ([`strings`]), staged trees
//! and closures ([`tree`]), oracle register machines ([`machine`]), joins
//! ([`join`]), snapshot I/O ([`io`]), DOT export ([`dot`]) and the invariant
//! checkers ([`check`]).

pub mod chain;
pub mod check;
pub mod cone;
pub mod construction;
pub mod dot;
pub mod io;
pub mod join;
pub mod machine;
pub mod strings;
pub mod tree;

pub use strings::{pair, unpair, Alphabet, FinString, Sym};
pub use tree::{ClosureTree, NodeStatus, Stage, StagedTree};
