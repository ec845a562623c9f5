//! Shared domain types: system parameters, processors, binary values, grades,
//! committee trees, messages, execution traces, and complexity reports.
//!
//! All threshold comparisons in this crate use exact rational arithmetic
//! (`Rational = Ratio<i64>`) so that strict/non-strict inequality boundaries
//! are never perturbed by floating point.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = Ratio<i64>;

/// Serialize rationals as "p/q" strings so artifacts stay exact and diff-able.
pub mod rat_serde {
    use super::Rational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(de::Error::custom)
    }

    pub fn parse_rational(s: &str) -> Result<Rational, String> {
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let n: i64 = num.trim().parse().map_err(|e| format!("bad numerator {num:?}: {e}"))?;
        let d: i64 = den.trim().parse().map_err(|e| format!("bad denominator {den:?}: {e}"))?;
        if d == 0 {
            return Err("zero denominator".into());
        }
        Ok(Rational::new(n, d))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("epsilon must lie strictly in (0, 1/3), got {0}")]
    EpsilonOutOfRange(Rational),
    #[error("fault budget violates f < n(1/3 - epsilon): f={f}, n={n}, epsilon={epsilon}")]
    FaultBudget { n: usize, f: usize, epsilon: Rational },
    #[error("sample size k must be at least 1")]
    ZeroK,
    #[error("processor count n must be at least 1")]
    ZeroN,
    #[error("cannot partition a committee of size {0}")]
    Partition(usize),
    #[error("value must be 0 or 1, got {0}")]
    BadValue(u8),
    #[error("grade must be 0, 1 or 2, got {0}")]
    BadGrade(u8),
}

/// Global protocol parameters `(n, f, epsilon, k)`.
///
/// Construction enforces the resilience constraint `f < n(1/3 - epsilon)` in
/// exact rational arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub f: usize,
    #[serde(with = "rat_serde")]
    pub epsilon: Rational,
    pub k: usize,
}

impl SystemParams {
    pub fn new(n: usize, f: usize, epsilon: Rational, k: usize) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::ZeroN);
        }
        if k == 0 {
            return Err(CoreError::ZeroK);
        }
        if epsilon <= Rational::new(0, 1) || epsilon >= Rational::new(1, 3) {
            return Err(CoreError::EpsilonOutOfRange(epsilon));
        }
        let bound = Rational::from_integer(n as i64) * (Rational::new(1, 3) - epsilon);
        if Rational::from_integer(f as i64) >= bound {
            return Err(CoreError::FaultBudget { n, f, epsilon });
        }
        Ok(SystemParams { n, f, epsilon, k })
    }

    /// Construct without the resilience check. Experiments that deliberately
    /// probe beyond-threshold regimes (where the protocol guarantees may
    /// fail) use this; epsilon and k sanity are still enforced.
    pub fn new_unchecked(n: usize, f: usize, epsilon: Rational, k: usize) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::ZeroN);
        }
        if k == 0 {
            return Err(CoreError::ZeroK);
        }
        if epsilon <= Rational::new(0, 1) || epsilon >= Rational::new(1, 3) {
            return Err(CoreError::EpsilonOutOfRange(epsilon));
        }
        Ok(SystemParams { n, f, epsilon, k })
    }

    /// Does `(n, f, epsilon)` satisfy the resilience bound `f < n(1/3 - epsilon)`?
    pub fn resilience_holds(&self) -> bool {
        let bound =
            Rational::from_integer(self.n as i64) * (Rational::new(1, 3) - self.epsilon);
        Rational::from_integer(self.f as i64) < bound
    }

    /// All processor ids `0..n`.
    pub fn processors(&self) -> impl Iterator<Item = ProcessorId> {
        (0..self.n as u32).map(ProcessorId)
    }
}

/// 0-based processor identifier; total order is numeric.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ProcessorId(pub u32);

impl ProcessorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A binary protocol value.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub struct Value(u8);

impl Value {
    pub const ZERO: Value = Value(0);
    pub const ONE: Value = Value(1);

    pub fn from_bit(bit: u8) -> Result<Value, CoreError> {
        match bit {
            0 | 1 => Ok(Value(bit)),
            other => Err(CoreError::BadValue(other)),
        }
    }

    pub fn bit(self) -> u8 {
        self.0
    }

    pub fn flip(self) -> Value {
        Value(1 - self.0)
    }

    pub fn both() -> [Value; 2] {
        [Value::ZERO, Value::ONE]
    }
}

impl TryFrom<u8> for Value {
    type Error = CoreError;
    fn try_from(bit: u8) -> Result<Self, CoreError> {
        Value::from_bit(bit)
    }
}

impl From<Value> for u8 {
    fn from(v: Value) -> u8 {
        v.0
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Gradecast confidence grade in `{0, 1, 2}`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub struct Grade(u8);

impl Grade {
    pub const G0: Grade = Grade(0);
    pub const G1: Grade = Grade(1);
    pub const G2: Grade = Grade(2);

    pub fn new(level: u8) -> Result<Grade, CoreError> {
        match level {
            0..=2 => Ok(Grade(level)),
            other => Err(CoreError::BadGrade(other)),
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Grade {
    type Error = CoreError;
    fn try_from(level: u8) -> Result<Self, CoreError> {
        Grade::new(level)
    }
}

impl From<Grade> for u8 {
    fn from(g: Grade) -> u8 {
        g.0
    }
}

/// A node of the committee recursion tree. The root has the empty path and
/// holds every processor; children split the parent by id, lower half first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitteeNode {
    /// Sequence over {1, 2}; empty for the root.
    pub path: Vec<u8>,
    /// Sorted, duplicate-free member ids.
    pub members: Vec<ProcessorId>,
}

impl CommitteeNode {
    pub fn root(n: usize) -> CommitteeNode {
        CommitteeNode {
            path: Vec::new(),
            members: (0..n as u32).map(ProcessorId).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Split a committee into children differing in size by at most one:
/// child 1 takes the lowest `ceil(m/2)` ids, child 2 the rest.
pub fn partition_committees(
    node: &CommitteeNode,
) -> Result<(CommitteeNode, CommitteeNode), CoreError> {
    let m = node.members.len();
    if m < 2 {
        return Err(CoreError::Partition(m));
    }
    let half = m.div_ceil(2);
    let mut p1 = node.path.clone();
    p1.push(1);
    let mut p2 = node.path.clone();
    p2.push(2);
    Ok((
        CommitteeNode { path: p1, members: node.members[..half].to_vec() },
        CommitteeNode { path: p2, members: node.members[half..].to_vec() },
    ))
}

/// Majority over a binary tally; every tie, including the empty tally, breaks
/// to value 0.
pub fn majority_value(tally: &BTreeMap<Value, usize>) -> Value {
    let zeros = tally.get(&Value::ZERO).copied().unwrap_or(0);
    let ones = tally.get(&Value::ONE).copied().unwrap_or(0);
    if ones > zeros {
        Value::ONE
    } else {
        Value::ZERO
    }
}

/// Convenience form of [`majority_value`] over an iterator of observations.
pub fn majority_of(values: impl IntoIterator<Item = Value>) -> Value {
    let mut tally = BTreeMap::new();
    for v in values {
        *tally.entry(v).or_insert(0) += 1;
    }
    majority_value(&tally)
}

/// Default bit cost charged per signature endorsement.
pub const DEFAULT_SIG_BITS: u64 = 256;

/// A point-to-point message. `payload` is an opaque byte string; `signatures`
/// lists the endorsement chain, outermost last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub sender: ProcessorId,
    pub receiver: ProcessorId,
    pub slot: usize,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signatures: Vec<ProcessorId>,
}

mod hex_bytes {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        let mut out = String::with_capacity(bytes.len() * 2);
        for b in bytes {
            out.push_str(&format!("{b:02x}"));
        }
        s.serialize_str(&out)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() % 2 != 0 {
            return Err(de::Error::custom("odd-length hex string"));
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(de::Error::custom))
            .collect()
    }
}

impl Message {
    pub fn unsigned(sender: ProcessorId, receiver: ProcessorId, slot: usize, payload: Vec<u8>) -> Message {
        Message { sender, receiver, slot, payload, signatures: Vec::new() }
    }

    pub fn is_self_addressed(&self) -> bool {
        self.sender == self.receiver
    }

    /// Bit size: 8 per payload byte plus `sig_bits` per endorsement.
    /// Self-addressed messages cost nothing.
    pub fn bit_size(&self, sig_bits: u64) -> u64 {
        if self.is_self_addressed() {
            return 0;
        }
        8 * self.payload.len() as u64 + sig_bits * self.signatures.len() as u64
    }
}

/// Fault status of a single processor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    Correct,
    Byzantine,
    /// Follows the protocol until the given slot; at that slot it sends an
    /// adversary-chosen subset of its instructed messages, then nothing.
    Crash(usize),
    Omission,
}

impl Fault {
    pub fn is_correct(self) -> bool {
        matches!(self, Fault::Correct)
    }
}

/// Output record for one processor: the value, the grade where the protocol
/// defines one, and the slot at which the output was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<Grade>,
    pub slot: usize,
}

/// A complete record of one execution: inputs, per-slot sent messages, and
/// outputs. `slots[t]` holds every message sent at slot `t` (delivered at
/// `t + 1`). Truncating `slots` yields a well-formed t-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub params: SystemParams,
    pub fault_assignment: BTreeMap<ProcessorId, Fault>,
    pub inputs: BTreeMap<ProcessorId, Value>,
    pub slots: Vec<Vec<Message>>,
    pub outputs: BTreeMap<ProcessorId, OutputRecord>,
}

impl ExecutionTrace {
    pub fn fault_of(&self, p: ProcessorId) -> Fault {
        self.fault_assignment.get(&p).copied().unwrap_or(Fault::Correct)
    }

    pub fn is_correct(&self, p: ProcessorId) -> bool {
        self.fault_of(p).is_correct()
    }

    pub fn correct_processors(&self) -> Vec<ProcessorId> {
        self.params.processors().filter(|p| self.is_correct(*p)).collect()
    }

    /// Messages delivered to `p` at `slot` (i.e. sent at `slot - 1`).
    pub fn inbox_of(&self, p: ProcessorId, slot: usize) -> Vec<&Message> {
        if slot == 0 {
            return Vec::new();
        }
        match self.slots.get(slot - 1) {
            Some(sent) => sent.iter().filter(|m| m.receiver == p).collect(),
            None => Vec::new(),
        }
    }

    /// The t-run prefix: messages at slots `< t` and outputs produced before `t`.
    pub fn prefix(&self, t: usize) -> ExecutionTrace {
        ExecutionTrace {
            params: self.params,
            fault_assignment: self.fault_assignment.clone(),
            inputs: self.inputs.clone(),
            slots: self.slots.iter().take(t).cloned().collect(),
            outputs: self
                .outputs
                .iter()
                .filter(|(_, o)| o.slot < t)
                .map(|(p, o)| (*p, *o))
                .collect(),
        }
    }
}

/// Message/bit totals over correct senders, broken down by recursion depth.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub total_messages: u64,
    pub total_bits: u64,
    pub per_depth: BTreeMap<usize, (u64, u64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[u32]) -> Vec<ProcessorId> {
        xs.iter().map(|&i| ProcessorId(i)).collect()
    }

    #[test]
    fn params_enforce_resilience_bound_exactly() {
        // f < n(1/3 - eps): n=12, eps=1/4 gives bound 1, so f=0 ok, f=1 not.
        let eps = Rational::new(1, 4);
        assert!(SystemParams::new(12, 0, eps, 1).is_ok());
        assert!(matches!(
            SystemParams::new(12, 1, eps, 1),
            Err(CoreError::FaultBudget { .. })
        ));
        // n=13, eps=1/4: bound 13/12, f=1 is strictly below.
        assert!(SystemParams::new(13, 1, eps, 1).is_ok());
        assert!(SystemParams::new(4, 0, Rational::new(1, 3), 1).is_err());
        assert!(SystemParams::new(4, 0, Rational::new(0, 1), 1).is_err());
    }

    #[test]
    fn partition_even_split() {
        let node = CommitteeNode { path: vec![], members: ids(&[0, 1, 2, 3]) };
        let (c1, c2) = partition_committees(&node).unwrap();
        assert_eq!(c1.members, ids(&[0, 1]));
        assert_eq!(c2.members, ids(&[2, 3]));
        assert_eq!(c1.path, vec![1]);
        assert_eq!(c2.path, vec![2]);
    }

    #[test]
    fn partition_odd_split() {
        let node = CommitteeNode { path: vec![2], members: ids(&[0, 1, 2, 3, 4]) };
        let (c1, c2) = partition_committees(&node).unwrap();
        assert_eq!(c1.members, ids(&[0, 1, 2]));
        assert_eq!(c2.members, ids(&[3, 4]));
        assert_eq!(c1.path, vec![2, 1]);
    }

    #[test]
    fn partition_non_contiguous_ids() {
        let node = CommitteeNode { path: vec![], members: ids(&[5, 7, 9]) };
        let (c1, c2) = partition_committees(&node).unwrap();
        assert_eq!(c1.members, ids(&[5, 7]));
        assert_eq!(c2.members, ids(&[9]));
    }

    #[test]
    fn partition_rejects_singletons() {
        let node = CommitteeNode { path: vec![], members: ids(&[3]) };
        assert_eq!(partition_committees(&node), Err(CoreError::Partition(1)));
        let empty = CommitteeNode { path: vec![], members: vec![] };
        assert_eq!(partition_committees(&empty), Err(CoreError::Partition(0)));
    }

    #[test]
    fn committee_tree_depth_is_log2() {
        for n in 2..=64usize {
            let mut frontier = vec![CommitteeNode::root(n)];
            let mut depth = 0;
            while frontier.iter().any(|c| c.size() > 1) {
                frontier = frontier
                    .into_iter()
                    .flat_map(|c| {
                        if c.size() > 1 {
                            let (a, b) = partition_committees(&c).unwrap();
                            vec![a, b]
                        } else {
                            vec![c]
                        }
                    })
                    .collect();
                depth += 1;
            }
            assert_eq!(depth, (n as f64).log2().ceil() as usize, "n={n}");
        }
    }

    #[test]
    fn one_child_has_low_faulty_fraction() {
        // Pigeonhole: for every fault assignment with <= f faults, one child of
        // the root has faulty fraction <= f/n. Enumerate all assignments, n <= 10.
        for n in 2..=10usize {
            for f in 0..=n / 3 {
                let root = CommitteeNode::root(n);
                let (c1, c2) = partition_committees(&root).unwrap();
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize > f {
                        continue;
                    }
                    let frac = |c: &CommitteeNode| {
                        let faulty =
                            c.members.iter().filter(|p| mask >> p.0 & 1 == 1).count();
                        Rational::new(faulty as i64, c.size() as i64)
                    };
                    let bound = Rational::new(f as i64, n as i64);
                    assert!(
                        frac(&c1) <= bound || frac(&c2) <= bound,
                        "n={n} f={f} mask={mask:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn majority_examples() {
        let tally: BTreeMap<Value, usize> =
            [(Value::ZERO, 3), (Value::ONE, 5)].into_iter().collect();
        assert_eq!(majority_value(&tally), Value::ONE);
        let tie: BTreeMap<Value, usize> =
            [(Value::ZERO, 4), (Value::ONE, 4)].into_iter().collect();
        assert_eq!(majority_value(&tie), Value::ZERO);
        assert_eq!(majority_value(&BTreeMap::new()), Value::ZERO);
    }

    #[test]
    fn majority_is_insertion_order_invariant() {
        let a = majority_of([Value::ONE, Value::ZERO, Value::ONE]);
        let b = majority_of([Value::ZERO, Value::ONE, Value::ONE]);
        assert_eq!(a, b);
        assert_eq!(a, Value::ONE);
    }

    #[test]
    fn message_bit_size() {
        let m = Message::unsigned(ProcessorId(0), ProcessorId(1), 0, vec![1]);
        assert_eq!(m.bit_size(DEFAULT_SIG_BITS), 8);
        let signed = Message {
            signatures: vec![ProcessorId(0)],
            ..Message::unsigned(ProcessorId(0), ProcessorId(1), 0, vec![1])
        };
        assert_eq!(signed.bit_size(DEFAULT_SIG_BITS), 8 + 256);
        let selfie = Message::unsigned(ProcessorId(2), ProcessorId(2), 0, vec![1, 2, 3]);
        assert_eq!(selfie.bit_size(DEFAULT_SIG_BITS), 0);
    }

    #[test]
    fn rational_round_trip() {
        let r = rat_serde::parse_rational("1/4").unwrap();
        assert_eq!(r, Rational::new(1, 4));
        assert_eq!(rat_serde::parse_rational("3").unwrap(), Rational::from_integer(3));
        assert!(rat_serde::parse_rational("1/0").is_err());
    }
}
