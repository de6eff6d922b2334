//! Oracle register machines: the effective list of Turing functionals.
//!
//! A program is a list of instructions over unboundedly many registers
//! holding naturals. The input `n` starts in `r0`, every other register
//! starts at 0. Instructions:
//!
//! | text            | effect                                                    |
//! |-----------------|-----------------------------------------------------------|
//! | `halt rK`       | stop with output `rK`                                     |
//! | `inc rK`        | `rK += 1`                                                 |
//! | `dec rK`        | `rK -= 1`, floored at 0                                   |
//! | `jz rK L`       | jump to instruction `L` if `rK == 0`                      |
//! | `query rA rD`   | `rD := oracle(rA)`; undefined if `rA` is past the oracle  |
//! | `diverge`       | loop forever                                              |
//!
//! Running off the end of the program (including a jump past it) diverges.
//!
//! # Numbering
//!
//! Index `e` is read through the bits `b` of `e + 1` written in binary with
//! its leading `1` dropped, so every natural number names exactly one bit
//! string. The bits are split into instructions: a 3-bit opcode (`000` halt,
//! `001` inc, `010` dec, `011` jz, `100` query, `101`/`110`/`111` diverge)
//! followed by its operands, each an Elias-gamma code of `operand + 1`. A
//! truncated instruction at the end, or an operand too large for `u64`,
//! decodes to `diverge` and ends the program. Decoding is therefore total,
//! and `Program::from_index(p.index()) == p` for every program.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strings::FinString;

pub type Reg = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instr {
    Halt(Reg),
    Inc(Reg),
    Dec(Reg),
    Jz(Reg, u64),
    Query { addr: Reg, dst: Reg },
    Diverge,
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instr::Halt(r) => write!(f, "halt r{r}"),
            Instr::Inc(r) => write!(f, "inc r{r}"),
            Instr::Dec(r) => write!(f, "dec r{r}"),
            Instr::Jz(r, l) => write!(f, "jz r{r} {l}"),
            Instr::Query { addr, dst } => write!(f, "query r{addr} r{dst}"),
            Instr::Diverge => f.write_str("diverge"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic {word:?}")]
    UnknownMnemonic { line: usize, word: String },
    #[error("line {line}: expected {expected} operand(s), found {found}")]
    Arity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: bad operand {word:?}")]
    BadOperand { line: usize, word: String },
    #[error("bad program index {0:?}")]
    BadIndex(String),
}

/// Outcome of a step-bounded evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum EvalResult {
    Halted {
        value: u64,
        /// One more than the largest oracle position read; 0 if none.
        #[serde(rename = "use")]
        use_: u64,
        steps: u64,
    },
    Running,
}

impl EvalResult {
    pub fn value(&self) -> Option<u64> {
        match self {
            EvalResult::Halted { value, .. } => Some(*value),
            EvalResult::Running => None,
        }
    }

    pub fn is_halted(&self) -> bool {
        matches!(self, EvalResult::Halted { .. })
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Halt(usize),
    Inc(usize),
    Dec(usize),
    Jz(usize, u64),
    Query(usize, usize),
    Diverge,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Program {
    instrs: Vec<Instr>,
}

impl Program {
    pub fn new(instrs: Vec<Instr>) -> Self {
        Program { instrs }
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn from_index(e: &BigUint) -> Program {
        let bits = index_bits(e);
        Program::from_bits(&bits)
    }

    pub fn from_u64(e: u64) -> Program {
        Program::from_index(&BigUint::from(e))
    }

    pub fn index(&self) -> BigUint {
        let mut bits = vec![true];
        for ins in &self.instrs {
            encode_instr(ins, &mut bits);
        }
        let mut e = BigUint::zero();
        for b in bits {
            e <<= 1u8;
            if b {
                e += 1u8;
            }
        }
        e - BigUint::one()
    }

    /// The index as a `u64`, if it fits.
    pub fn small_index(&self) -> Option<u64> {
        u64::try_from(self.index()).ok()
    }

    fn from_bits(bits: &[bool]) -> Program {
        let mut instrs = Vec::new();
        let mut r = BitReader { bits, pos: 0 };
        while r.remaining() > 0 {
            let Some(op) = r.take(3) else {
                instrs.push(Instr::Diverge);
                break;
            };
            let decoded = match op {
                0 => r.gamma().map(Instr::Halt),
                1 => r.gamma().map(Instr::Inc),
                2 => r.gamma().map(Instr::Dec),
                3 => r.gamma().and_then(|a| r.gamma().map(|l| Instr::Jz(a, l))),
                4 => r
                    .gamma()
                    .and_then(|a| r.gamma().map(|d| Instr::Query { addr: a, dst: d })),
                _ => Some(Instr::Diverge),
            };
            match decoded {
                Some(ins) => instrs.push(ins),
                None => {
                    instrs.push(Instr::Diverge);
                    break;
                }
            }
        }
        Program { instrs }
    }

    /// Assembles program text: one instruction per line, `;` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Program, AsmError> {
        let mut instrs = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.split(';').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let words: Vec<&str> = body.split_whitespace().collect();
            let ops = &words[1..];
            let want = |n: usize| -> Result<(), AsmError> {
                if ops.len() == n {
                    Ok(())
                } else {
                    Err(AsmError::Arity {
                        line,
                        expected: n,
                        found: ops.len(),
                    })
                }
            };
            let reg = |w: &str| -> Result<Reg, AsmError> {
                w.strip_prefix('r')
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| AsmError::BadOperand {
                        line,
                        word: w.to_string(),
                    })
            };
            let label = |w: &str| -> Result<u64, AsmError> {
                w.parse().map_err(|_| AsmError::BadOperand {
                    line,
                    word: w.to_string(),
                })
            };
            let ins = match words[0].to_ascii_lowercase().as_str() {
                "halt" => {
                    want(1)?;
                    Instr::Halt(reg(ops[0])?)
                }
                "inc" => {
                    want(1)?;
                    Instr::Inc(reg(ops[0])?)
                }
                "dec" => {
                    want(1)?;
                    Instr::Dec(reg(ops[0])?)
                }
                "jz" => {
                    want(2)?;
                    Instr::Jz(reg(ops[0])?, label(ops[1])?)
                }
                "query" => {
                    want(2)?;
                    Instr::Query {
                        addr: reg(ops[0])?,
                        dst: reg(ops[1])?,
                    }
                }
                "diverge" => {
                    want(0)?;
                    Instr::Diverge
                }
                other => {
                    return Err(AsmError::UnknownMnemonic {
                        line,
                        word: other.to_string(),
                    })
                }
            };
            instrs.push(ins);
        }
        Ok(Program { instrs })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ins in &self.instrs {
            out.push_str(&ins.to_string());
            out.push('\n');
        }
        out
    }

    fn compile(&self) -> (Vec<Op>, usize, usize) {
        let mut regs: BTreeSet<Reg> = BTreeSet::new();
        regs.insert(0);
        for ins in &self.instrs {
            match *ins {
                Instr::Halt(r) | Instr::Inc(r) | Instr::Dec(r) | Instr::Jz(r, _) => {
                    regs.insert(r);
                }
                Instr::Query { addr, dst } => {
                    regs.insert(addr);
                    regs.insert(dst);
                }
                Instr::Diverge => {}
            }
        }
        let regs: Vec<Reg> = regs.into_iter().collect();
        let slot = |r: Reg| regs.binary_search(&r).expect("register collected");
        let ops = self
            .instrs
            .iter()
            .map(|ins| match *ins {
                Instr::Halt(r) => Op::Halt(slot(r)),
                Instr::Inc(r) => Op::Inc(slot(r)),
                Instr::Dec(r) => Op::Dec(slot(r)),
                Instr::Jz(r, l) => Op::Jz(slot(r), l),
                Instr::Query { addr, dst } => Op::Query(slot(addr), slot(dst)),
                Instr::Diverge => Op::Diverge,
            })
            .collect();
        (ops, regs.len(), slot(0))
    }

    /// Runs the program on input `n` with the finite oracle `oracle` for at
    /// most `s` steps. By convention nothing converges on inputs `n > s`.
    pub fn eval(&self, oracle: &FinString, n: u64, s: u64) -> EvalResult {
        if n > s {
            return EvalResult::Running;
        }
        let (ops, nslots, input) = self.compile();
        let mut regs = vec![0u64; nslots];
        regs[input] = n;
        let mut pc: u64 = 0;
        let mut steps: u64 = 0;
        let mut use_: u64 = 0;
        while steps < s {
            let Some(op) = usize::try_from(pc).ok().and_then(|p| ops.get(p)) else {
                return EvalResult::Running;
            };
            steps += 1;
            match *op {
                Op::Halt(r) => {
                    return EvalResult::Halted {
                        value: regs[r],
                        use_,
                        steps,
                    }
                }
                Op::Inc(r) => {
                    regs[r] = regs[r].saturating_add(1);
                    pc += 1;
                }
                Op::Dec(r) => {
                    regs[r] = regs[r].saturating_sub(1);
                    pc += 1;
                }
                Op::Jz(r, l) => {
                    pc = if regs[r] == 0 { l } else { pc + 1 };
                }
                Op::Query(a, d) => {
                    let pos = regs[a];
                    let bit = usize::try_from(pos).ok().and_then(|p| oracle.bit(p));
                    match bit {
                        Some(b) => {
                            regs[d] = b as u64;
                            use_ = use_.max(pos + 1);
                            pc += 1;
                        }
                        None => return EvalResult::Running,
                    }
                }
                Op::Diverge => return EvalResult::Running,
            }
        }
        EvalResult::Running
    }
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.instrs.iter().map(|i| i.to_string()))
            .finish()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl BitReader<'_> {
    fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Option<u64> {
        if self.remaining() < n {
            self.pos = self.bits.len();
            return None;
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.bits[self.pos] as u64;
            self.pos += 1;
        }
        Some(v)
    }

    /// Elias gamma; yields the coded value minus one.
    fn gamma(&mut self) -> Option<u64> {
        let mut zeros = 0usize;
        loop {
            match self.bits.get(self.pos) {
                None => return None,
                Some(false) => {
                    zeros += 1;
                    self.pos += 1;
                }
                Some(true) => break,
            }
        }
        if zeros >= 64 {
            return None;
        }
        let v = self.take(zeros + 1)?;
        Some(v - 1)
    }
}

fn push_gamma(v: u64, out: &mut Vec<bool>) {
    let coded = v as u128 + 1;
    let width = 128 - coded.leading_zeros() as usize;
    out.extend(std::iter::repeat_n(false, width - 1));
    for k in (0..width).rev() {
        out.push((coded >> k) & 1 == 1);
    }
}

fn push_op(op: u8, out: &mut Vec<bool>) {
    for k in (0..3).rev() {
        out.push((op >> k) & 1 == 1);
    }
}

fn encode_instr(ins: &Instr, out: &mut Vec<bool>) {
    match *ins {
        Instr::Halt(r) => {
            push_op(0, out);
            push_gamma(r, out);
        }
        Instr::Inc(r) => {
            push_op(1, out);
            push_gamma(r, out);
        }
        Instr::Dec(r) => {
            push_op(2, out);
            push_gamma(r, out);
        }
        Instr::Jz(r, l) => {
            push_op(3, out);
            push_gamma(r, out);
            push_gamma(l, out);
        }
        Instr::Query { addr, dst } => {
            push_op(4, out);
            push_gamma(addr, out);
            push_gamma(dst, out);
        }
        Instr::Diverge => push_op(5, out),
    }
}

fn index_bits(e: &BigUint) -> Vec<bool> {
    let succ = e + BigUint::one();
    let text = succ.to_str_radix(2);
    text.chars().skip(1).map(|c| c == '1').collect()
}

pub fn parse_index(text: &str) -> Result<BigUint, AsmError> {
    text.trim()
        .parse::<BigUint>()
        .map_err(|_| AsmError::BadIndex(text.to_string()))
}

// Program is serialized as its assembler text.
impl serde::Serialize for Program {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> serde::Deserialize<'de> for Program {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = <String as serde::Deserialize>::deserialize(d)?;
        Program::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// `eval` on the program with index `e`.
pub fn eval(e: u64, oracle: &FinString, n: u64, s: u64) -> EvalResult {
    Program::from_u64(e).eval(oracle, n, s)
}

/// The longest binary string ρ with |ρ| ≤ s whose every bit `i` is the
/// output of the program on input `i` with the empty oracle, within `s`
/// steps.
pub fn computable_prefix(program: &Program, s: u64) -> FinString {
    let empty = FinString::binary_empty();
    let mut bits = Vec::new();
    for i in 0..s {
        match program.eval(&empty, i, s) {
            EvalResult::Halted {
                value: v @ (0 | 1), ..
            } => bits.push(v == 1),
            _ => break,
        }
    }
    FinString::from_bits(bits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaltingApprox {
    pub stage: u64,
    pub members: BTreeSet<u64>,
}

/// K_s: indices `e ≤ s` whose program halts on input `e`, with the empty
/// oracle, within `s` steps.
pub fn halting_approx(s: u64) -> HaltingApprox {
    let empty = FinString::binary_empty();
    let members = (0..=s)
        .filter(|&e| Program::from_u64(e).eval(&empty, e, s).is_halted())
        .collect();
    HaltingApprox { stage: s, members }
}

/// Hand-written programs used as seeds and test fixtures.
pub mod programs {
    use super::{Instr, Program};
    use crate::strings::FinString;

    /// The empty program; diverges everywhere. Its index is 0.
    pub fn diverge() -> Program {
        Program::new(vec![])
    }

    /// Outputs 0 on every input, reading no oracle bits. One step.
    pub fn const_zero() -> Program {
        Program::new(vec![Instr::Halt(1)])
    }

    /// Reads oracle bit 0, then outputs 0.
    pub fn zero_after_query() -> Program {
        Program::new(vec![Instr::Query { addr: 1, dst: 2 }, Instr::Halt(1)])
    }

    /// Outputs the oracle bit at position `n`.
    pub fn identity_oracle() -> Program {
        Program::new(vec![Instr::Query { addr: 0, dst: 1 }, Instr::Halt(1)])
    }

    /// Outputs `1 - oracle(n)`.
    pub fn bit_flip() -> Program {
        Program::new(vec![
            Instr::Query { addr: 0, dst: 1 },
            Instr::Jz(1, 3),
            Instr::Halt(2),
            Instr::Inc(2),
            Instr::Halt(2),
        ])
    }

    /// Outputs oracle bit 0 whatever the input.
    pub fn output_bit0() -> Program {
        Program::new(vec![Instr::Query { addr: 1, dst: 2 }, Instr::Halt(2)])
    }

    /// Outputs `x(n)` for `n < |x|` and 0 beyond, without oracle queries.
    /// Takes at most `2|x| + 3` steps.
    pub fn x_lookup(x: &FinString) -> Program {
        let len = x.len() as u64;
        // 0: inc r2; then pairs (jz r0 H, dec r0) for each position; then
        // halt r1; H0 = halt r1, H1 = halt r2
        let h0 = 1 + 2 * len + 1;
        let h1 = h0 + 1;
        let mut v = vec![Instr::Inc(2)];
        for i in 0..x.len() {
            let target = if x.bit(i) == Some(1) { h1 } else { h0 };
            v.push(Instr::Jz(0, target));
            v.push(Instr::Dec(0));
        }
        v.push(Instr::Halt(1));
        v.push(Instr::Halt(1));
        v.push(Instr::Halt(2));
        Program::new(v)
    }

    /// `program` followed by `k` unreachable instructions: a different index
    /// for the same partial function whenever `program` never runs off its
    /// end.
    pub fn padded(program: &Program, k: u64) -> Program {
        let mut v = program.instrs().to_vec();
        v.extend((0..k).map(|i| Instr::Inc(i + 7)));
        Program::new(v)
    }
}

#[cfg(test)]
mod tests {
    use super::programs::*;
    use super::*;

    fn s(text: &str) -> FinString {
        FinString::parse(text).unwrap()
    }

    #[test]
    fn const_zero_converges_everywhere_within_budget() {
        let c0 = const_zero();
        for len in 0..5 {
            for sigma in crate::strings::all_strings(crate::strings::Alphabet::Binary, len) {
                for st in 1..=30 {
                    for n in 0..=st {
                        assert_eq!(
                            c0.eval(&sigma, n, st),
                            EvalResult::Halted {
                                value: 0,
                                use_: 0,
                                steps: 1
                            }
                        );
                    }
                }
            }
        }
        assert_eq!(c0.eval(&s("ε"), 0, 0), EvalResult::Running);
    }

    #[test]
    fn inputs_above_stage_never_converge() {
        assert_eq!(const_zero().eval(&s("ε"), 6, 5), EvalResult::Running);
    }

    #[test]
    fn identity_oracle_reads_position() {
        assert_eq!(
            identity_oracle().eval(&s("0110"), 2, 100),
            EvalResult::Halted {
                value: 1,
                use_: 3,
                steps: 2
            }
        );
        assert_eq!(
            identity_oracle().eval(&s("0110"), 4, 100),
            EvalResult::Running
        );
    }

    #[test]
    fn bit_flip_and_lookup() {
        let bf = bit_flip();
        assert_eq!(bf.eval(&s("01"), 0, 10).value(), Some(1));
        assert_eq!(bf.eval(&s("01"), 1, 10).value(), Some(0));
        let x = s("1101001");
        let lk = x_lookup(&x);
        for n in 0..x.len() as u64 {
            let r = lk.eval(&s("ε"), n, 40);
            assert_eq!(r.value(), x.bit(n as usize).map(u64::from));
            if let EvalResult::Halted { use_, steps, .. } = r {
                assert_eq!(use_, 0);
                assert!(steps <= 2 * x.len() as u64 + 3);
            }
        }
    }

    #[test]
    fn numbering_round_trips_hand_programs() {
        for p in [
            diverge(),
            const_zero(),
            identity_oracle(),
            bit_flip(),
            zero_after_query(),
            x_lookup(&s("10110")),
        ] {
            assert_eq!(Program::from_index(&p.index()), p);
        }
        assert_eq!(diverge().index(), BigUint::zero());
        // halt r1 = 000 + gamma(2) = 000010; index = 0b1000010 - 1
        assert_eq!(const_zero().small_index(), Some(65));
    }

    #[test]
    fn every_small_index_decodes_and_reencodes_to_same_program() {
        for e in 0..5000u64 {
            let p = Program::from_u64(e);
            let again = Program::from_index(&p.index());
            assert_eq!(again, p, "index {e}");
        }
    }

    #[test]
    fn truncated_bits_become_diverge() {
        // e = 1: bits "0" -> truncated opcode
        assert_eq!(Program::from_u64(1).instrs(), &[Instr::Diverge]);
        // bits "101" -> diverge opcode
        assert_eq!(Program::from_u64(0b1101 - 1).instrs(), &[Instr::Diverge]);
    }

    #[test]
    fn assembler_round_trip_and_errors() {
        let p = bit_flip();
        assert_eq!(Program::parse(&p.to_text()).unwrap(), p);
        let src = "; flip\nquery r0 r1 ; read\njz r1 3\nhalt r2\ninc r2\nhalt r2\n";
        assert_eq!(Program::parse(src).unwrap(), p);
        assert!(matches!(
            Program::parse("jump r0"),
            Err(AsmError::UnknownMnemonic { line: 1, .. })
        ));
        assert!(matches!(
            Program::parse("halt"),
            Err(AsmError::Arity { .. })
        ));
        assert!(matches!(
            Program::parse("halt x1"),
            Err(AsmError::BadOperand { .. })
        ));
    }

    #[test]
    fn falling_off_the_end_diverges() {
        let p = Program::parse("inc r1").unwrap();
        assert_eq!(p.eval(&s("ε"), 0, 50), EvalResult::Running);
        let p = Program::parse("jz r0 9").unwrap();
        assert_eq!(p.eval(&s("ε"), 0, 50), EvalResult::Running);
    }

    #[test]
    fn computable_prefix_examples() {
        assert_eq!(computable_prefix(&diverge(), 50), s("ε"));
        let c0 = computable_prefix(&const_zero(), 10);
        assert_eq!(c0, s("0000000000"));
        let mut prev = s("ε");
        for st in 0..60 {
            let cur = computable_prefix(&x_lookup(&s("0110101")), st);
            assert!(prev.is_prefix_of(&cur));
            prev = cur;
        }
    }

    #[test]
    fn halting_approx_small_stages() {
        assert!(halting_approx(0).members.is_empty());
        let e0 = const_zero().small_index().unwrap();
        assert!(halting_approx(e0).members.contains(&e0));
        assert!(!halting_approx(e0 - 1).members.contains(&e0));
        let mut prev = halting_approx(0).members;
        for st in 1..=150 {
            let cur = halting_approx(st).members;
            assert!(prev.is_subset(&cur));
            prev = cur;
        }
    }

    #[test]
    fn padding_gives_distinct_equivalent_indices() {
        for p in [const_zero(), identity_oracle(), bit_flip()] {
            let mut seen = BTreeSet::new();
            seen.insert(p.index());
            for k in 1..=5 {
                let q = padded(&p, k);
                assert!(seen.insert(q.index()));
                for sigma in ["ε", "0", "1", "0110", "1011"] {
                    for n in 0..6 {
                        assert_eq!(p.eval(&s(sigma), n, 20), q.eval(&s(sigma), n, 20));
                    }
                }
            }
        }
    }
}
