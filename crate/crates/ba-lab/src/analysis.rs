//! Analysis tooling: finitized Byzantine behavior spaces with exhaustive
//! enumeration, epsilon-agreement and epsilon-validity checkers, the valency
//! checker over protocol continuations, the two-execution dissemination
//! lower-bound scenario, and a library of named adversary strategies.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    ExecutionTrace, Fault, Message, ProcessorId, Rational, SystemParams, Value,
};
use crate::netsim::{
    run_lockstep, AdversaryStrategy, AdversaryView, FaultAssignment, ProtocolMachine,
    SimError,
};
use crate::protocols::wire;

/// Default cap on enumerated adversary behaviors.
pub const DEFAULT_ENUMERATION_GUARD: u64 = 1 << 24;

/// The enumeration guard, overridable through `BA_LAB_GUARD`.
pub fn enumeration_guard() -> u64 {
    std::env::var("BA_LAB_GUARD")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_ENUMERATION_GUARD)
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("behavior space holds {count} behaviors, over the guard {guard}")]
    EnumerationTooLarge { count: u128, guard: u64 },
    #[error("trace lacks outputs for correct processors {0:?}")]
    Incomplete(Vec<ProcessorId>),
    #[error("unknown adversary strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Factory producing a fresh machine per processor; enumeration re-simulates
/// from slot 0 for every behavior, so machines must be reconstructible.
pub type MachineFactory<'a> = dyn Fn(ProcessorId, Value) -> Box<dyn ProtocolMachine> + 'a;

// ---------------------------------------------------------------------------
// Behavior spaces
// ---------------------------------------------------------------------------

/// A finitized space of Byzantine behaviors: per Byzantine processor, per
/// enumerated slot, per receiver channel, one letter from the alphabet
/// (a 1-byte payload, or silence). After the enumerated slots the processor
/// is silent. Correct-side decisions in this crate depend only on per-sender
/// values in {0, 1, bot, silence}, so these alphabets exhaust the
/// distinguishable behaviors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryBehaviorSpace {
    pub byzantine: Vec<ProcessorId>,
    pub receivers: Vec<ProcessorId>,
    pub slots: usize,
    /// Letters: `Some(byte)` sends that payload, `None` is silence.
    pub alphabet: Vec<Option<u8>>,
}

impl AdversaryBehaviorSpace {
    /// The default value alphabet {0, 1, silence}.
    pub fn values(
        byzantine: impl IntoIterator<Item = ProcessorId>,
        receivers: impl IntoIterator<Item = ProcessorId>,
        slots: usize,
    ) -> AdversaryBehaviorSpace {
        AdversaryBehaviorSpace {
            byzantine: byzantine.into_iter().collect(),
            receivers: receivers.into_iter().collect(),
            slots,
            alphabet: vec![Some(0), Some(1), None],
        }
    }

    /// The response alphabet {0, 1, bot, silence} for sampled response slots.
    pub fn with_bot(mut self) -> AdversaryBehaviorSpace {
        self.alphabet = vec![Some(0), Some(1), Some(wire::BOT), None];
        self
    }

    fn channels(&self) -> u32 {
        (self.byzantine.len() * self.receivers.len() * self.slots) as u32
    }

    /// Saturates at `u128::MAX`, which any sane guard rejects.
    pub fn count(&self) -> u128 {
        (self.alphabet.len() as u128)
            .checked_pow(self.channels())
            .unwrap_or(u128::MAX)
    }

    pub fn check_guard(&self, guard: u64) -> Result<u64, AnalysisError> {
        let count = self.count();
        if count > guard as u128 {
            return Err(AnalysisError::EnumerationTooLarge { count, guard });
        }
        Ok(count as u64)
    }

    /// The letter for behavior `index` on channel `(byz, slot, receiver)`.
    fn letter(&self, index: u64, byz: usize, slot: usize, receiver: usize) -> Option<u8> {
        let r = self.receivers.len();
        let channel = (byz * self.slots + slot) * r + receiver;
        let mut rem = index as u128;
        for _ in 0..channel {
            rem /= self.alphabet.len() as u128;
        }
        self.alphabet[(rem % self.alphabet.len() as u128) as usize]
    }
}

/// Plays one behavior of an [`AdversaryBehaviorSpace`].
pub struct EnumeratedAdversary<'a> {
    pub space: &'a AdversaryBehaviorSpace,
    pub index: u64,
}

impl AdversaryStrategy for EnumeratedAdversary<'_> {
    fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
        let Some(b) = self.space.byzantine.iter().position(|p| *p == byz) else {
            return Vec::new();
        };
        if view.slot >= self.space.slots {
            return Vec::new();
        }
        let mut sends = Vec::new();
        for (r, receiver) in self.space.receivers.iter().enumerate() {
            if let Some(byte) = self.space.letter(self.index, b, view.slot, r) {
                sends.push(Message::unsigned(byz, *receiver, view.slot, vec![byte]));
            }
        }
        sends
    }
}

/// Lazily yields one execution per behavior, in lexicographic behavior order.
pub struct ExecutionEnumerator<'a> {
    params: SystemParams,
    factory: &'a MachineFactory<'a>,
    inputs: BTreeMap<ProcessorId, Value>,
    faults: FaultAssignment,
    space: &'a AdversaryBehaviorSpace,
    max_slots: usize,
    count: u64,
    next: u64,
    reverse: bool,
}

impl<'a> ExecutionEnumerator<'a> {
    pub fn run_index(&self, index: u64) -> Result<ExecutionTrace, SimError> {
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
        for p in self.params.processors() {
            if self.faults.status(p) != Fault::Byzantine {
                machines.insert(p, (self.factory)(p, self.inputs[&p]));
            }
        }
        let mut adversary = EnumeratedAdversary { space: self.space, index };
        run_lockstep(
            &self.params,
            &mut machines,
            &self.inputs,
            &self.faults,
            &mut adversary,
            self.max_slots,
        )
    }
}

impl Iterator for ExecutionEnumerator<'_> {
    type Item = Result<ExecutionTrace, SimError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let index =
            if self.reverse { self.count - 1 - self.next } else { self.next };
        self.next += 1;
        Some(self.run_index(index))
    }
}

pub fn enumerate_adversary_executions<'a>(
    params: &SystemParams,
    factory: &'a MachineFactory<'a>,
    inputs: &BTreeMap<ProcessorId, Value>,
    faults: &FaultAssignment,
    space: &'a AdversaryBehaviorSpace,
    max_slots: usize,
    guard: u64,
) -> Result<ExecutionEnumerator<'a>, AnalysisError> {
    let count = space.check_guard(guard)?;
    Ok(ExecutionEnumerator {
        params: *params,
        factory,
        inputs: inputs.clone(),
        faults: faults.clone(),
        space,
        max_slots,
        count,
        next: 0,
        reverse: false,
    })
}

// ---------------------------------------------------------------------------
// Epsilon checkers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementVerdict {
    pub holds: bool,
    pub common: Value,
    pub dissenters: BTreeSet<ProcessorId>,
}

/// Epsilon-agreement: some value v must be output by all correct processors
/// outside a set X with |X| < n epsilon, strictly. On an exact tie both
/// candidates are evaluated and either may witness the bound.
pub fn check_epsilon_agreement(
    trace: &ExecutionTrace,
    params: &SystemParams,
) -> Result<AgreementVerdict, AnalysisError> {
    let correct = trace.correct_processors();
    let missing: Vec<ProcessorId> = correct
        .iter()
        .copied()
        .filter(|p| !trace.outputs.contains_key(p))
        .collect();
    if !missing.is_empty() {
        return Err(AnalysisError::Incomplete(missing));
    }
    let bound = Rational::from_integer(params.n as i64) * params.epsilon;
    let verdict_for = |v: Value| {
        let dissenters: BTreeSet<ProcessorId> = correct
            .iter()
            .copied()
            .filter(|p| trace.outputs[p].value != v)
            .collect();
        let holds = Rational::from_integer(dissenters.len() as i64) < bound;
        AgreementVerdict { holds, common: v, dissenters }
    };
    let ones = correct.iter().filter(|p| trace.outputs[*p].value == Value::ONE).count();
    let zeros = correct.len() - ones;
    if ones == zeros {
        let zero = verdict_for(Value::ZERO);
        if zero.holds {
            return Ok(zero);
        }
        return Ok(verdict_for(Value::ONE));
    }
    Ok(verdict_for(if ones > zeros { Value::ONE } else { Value::ZERO }))
}

/// Epsilon-validity: if fewer than n epsilon correct processors have input
/// other than x, the common value must be x; vacuously true otherwise.
pub fn check_epsilon_validity(
    trace: &ExecutionTrace,
    params: &SystemParams,
    v: Value,
) -> bool {
    let correct = trace.correct_processors();
    let bound = Rational::from_integer(params.n as i64) * params.epsilon;
    for x in Value::both() {
        let others = correct.iter().filter(|p| trace.inputs[*p] != x).count();
        let triggered = Rational::from_integer(others as i64) < bound;
        if triggered && v != x {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Valency
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Valency {
    ZeroValent,
    OneValent,
    Bivalent,
}

/// Replays the Byzantine sends recorded in a trace prefix, then hands
/// control to an enumerated continuation behavior (whose slot 0 is the slot
/// right after the prefix).
pub struct ReplayAdversary<'a> {
    pub prefix: &'a ExecutionTrace,
    pub continuation: EnumeratedAdversary<'a>,
}

impl AdversaryStrategy for ReplayAdversary<'_> {
    fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
        if let Some(sent) = self.prefix.slots.get(view.slot) {
            return sent.iter().filter(|m| m.sender == byz).cloned().collect();
        }
        let offset_view = AdversaryView {
            slot: view.slot - self.prefix.slots.len(),
            ..*view
        };
        self.continuation.byzantine_sends(&offset_view, byz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraversalOrder {
    Forward,
    Reverse,
}

/// Decide the valency of a run prefix: enumerate every continuation behavior,
/// re-simulate the full run with the prefix's Byzantine sends replayed, and
/// classify by the correct outputs across all extensions. The prefix's fault
/// assignment carries over; extension machines are rebuilt from the factory.
#[allow(clippy::too_many_arguments)]
pub fn compute_valency(
    params: &SystemParams,
    factory: &MachineFactory,
    prefix: &ExecutionTrace,
    faults: &FaultAssignment,
    continuation: &AdversaryBehaviorSpace,
    max_slots: usize,
    guard: u64,
    order: TraversalOrder,
) -> Result<Valency, AnalysisError> {
    let count = continuation.check_guard(guard)?;
    let mut seen_zero = false;
    let mut seen_one = false;
    for i in 0..count {
        let index = match order {
            TraversalOrder::Forward => i,
            TraversalOrder::Reverse => count - 1 - i,
        };
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
        for p in params.processors() {
            if faults.status(p) != Fault::Byzantine {
                machines.insert(p, factory(p, prefix.inputs[&p]));
            }
        }
        let mut adversary = ReplayAdversary {
            prefix,
            continuation: EnumeratedAdversary { space: continuation, index },
        };
        let trace = run_lockstep(
            params,
            &mut machines,
            &prefix.inputs,
            faults,
            &mut adversary,
            max_slots,
        )?;
        for p in trace.correct_processors() {
            match trace.outputs[&p].value {
                Value::ZERO => seen_zero = true,
                _ => seen_one = true,
            }
        }
        if seen_zero && seen_one {
            return Ok(Valency::Bivalent);
        }
    }
    Ok(match (seen_zero, seen_one) {
        (true, false) => Valency::ZeroValent,
        (false, true) => Valency::OneValent,
        // No correct processors at all; vacuously univalent toward 0.
        _ => Valency::ZeroValent,
    })
}

// ---------------------------------------------------------------------------
// Dissemination lower-bound scenario
// ---------------------------------------------------------------------------

/// Omission semantics of the scenario: members of `p1` receive nothing at all
/// and never send to each other; members of `withhold` drop their sends to
/// the distinguished processor.
struct ScenarioAdversary {
    p1: BTreeSet<ProcessorId>,
    withhold: BTreeSet<ProcessorId>,
    target: Option<ProcessorId>,
}

impl AdversaryStrategy for ScenarioAdversary {
    fn byzantine_sends(&mut self, _view: &AdversaryView, _byz: ProcessorId) -> Vec<Message> {
        Vec::new()
    }

    fn omission_incoming(
        &mut self,
        _view: &AdversaryView,
        p: ProcessorId,
        inbox: &[Message],
    ) -> Vec<Message> {
        if self.p1.contains(&p) {
            Vec::new()
        } else {
            inbox.to_vec()
        }
    }

    fn omission_outgoing(
        &mut self,
        _view: &AdversaryView,
        p: ProcessorId,
        instructed: &[Message],
    ) -> Vec<Message> {
        instructed
            .iter()
            .filter(|m| {
                if self.p1.contains(&p) && self.p1.contains(&m.receiver) && m.receiver != p {
                    return false;
                }
                if self.withhold.contains(&p) && Some(m.receiver) == self.target {
                    return false;
                }
                true
            })
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioCase {
    /// Every faulty-set member received at least ceil(f/2) messages from the
    /// rest: the combined count certifies the quadratic dissemination cost.
    AllReceive {
        per_member: BTreeMap<ProcessorId, usize>,
        combined: usize,
        floor_bound: usize,
    },
    /// Some member received at most floor(f/2) messages, so a second
    /// execution exists in which it is correct yet receives nothing.
    Silenced {
        p: ProcessorId,
        withheld_senders: BTreeSet<ProcessorId>,
        e2_received: usize,
        p2_views_identical: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub p1: BTreeSet<ProcessorId>,
    pub case: ScenarioCase,
}

fn received_from(
    trace: &ExecutionTrace,
    receiver: ProcessorId,
    senders: &BTreeSet<ProcessorId>,
) -> usize {
    trace
        .slots
        .iter()
        .flatten()
        .filter(|m| m.receiver == receiver && senders.contains(&m.sender) && !m.is_self_addressed())
        .count()
}

/// Construct the two-execution scenario: E1 makes `p1_subset` (of size
/// ceil(f/2)) omission-faulty processors that neither talk to each other nor
/// listen to anyone; if some member nevertheless receives at most floor(f/2)
/// messages from the outside, E2 makes it correct while at most floor(f/2)
/// outside processors withhold their messages to it, and the outside
/// correct processors cannot tell the executions apart.
pub fn silencing_scenario(
    params: &SystemParams,
    factory: &MachineFactory,
    inputs: &BTreeMap<ProcessorId, Value>,
    p1_subset: &BTreeSet<ProcessorId>,
    max_slots: usize,
) -> Result<(ExecutionTrace, Option<ExecutionTrace>, ScenarioReport), AnalysisError> {
    assert!(params.f >= 1 && params.f < params.n - 1, "scenario needs 1 <= f < n-1");
    assert_eq!(p1_subset.len(), params.f.div_ceil(2), "|P1| must be ceil(f/2)");
    let p2: BTreeSet<ProcessorId> =
        params.processors().filter(|p| !p1_subset.contains(p)).collect();

    let build = |faults: &FaultAssignment,
                 adversary: &mut ScenarioAdversary|
     -> Result<ExecutionTrace, SimError> {
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
        for p in params.processors() {
            machines.insert(p, factory(p, inputs[&p]));
        }
        run_lockstep(params, &mut machines, inputs, faults, adversary, max_slots)
    };

    let e1_faults = FaultAssignment {
        omission: p1_subset.clone(),
        ..Default::default()
    };
    let mut e1_adversary = ScenarioAdversary {
        p1: p1_subset.clone(),
        withhold: BTreeSet::new(),
        target: None,
    };
    let e1 = build(&e1_faults, &mut e1_adversary)?;

    let floor_half = params.f / 2;
    let poorly_served = p1_subset
        .iter()
        .copied()
        .find(|p| received_from(&e1, *p, &p2) <= floor_half);

    let Some(p) = poorly_served else {
        let per_member: BTreeMap<ProcessorId, usize> = p1_subset
            .iter()
            .map(|q| (*q, received_from(&e1, *q, &p2)))
            .collect();
        let combined = per_member.values().sum();
        let report = ScenarioReport {
            p1: p1_subset.clone(),
            case: ScenarioCase::AllReceive {
                per_member,
                combined,
                floor_bound: (params.f / 2) * (params.f / 2),
            },
        };
        return Ok((e1, None, report));
    };

    // The outside processors that sent to p in E1 must withhold in E2.
    let withheld_senders: BTreeSet<ProcessorId> = e1
        .slots
        .iter()
        .flatten()
        .filter(|m| m.receiver == p && p2.contains(&m.sender))
        .map(|m| m.sender)
        .collect();
    assert!(withheld_senders.len() <= floor_half);

    let mut remaining_p1 = p1_subset.clone();
    remaining_p1.remove(&p);
    let e2_faults = FaultAssignment {
        omission: remaining_p1.iter().chain(withheld_senders.iter()).copied().collect(),
        ..Default::default()
    };
    let mut e2_adversary = ScenarioAdversary {
        p1: remaining_p1,
        withhold: withheld_senders.clone(),
        target: Some(p),
    };
    let e2 = build(&e2_faults, &mut e2_adversary)?;

    let e2_received = received_from(&e2, p, &p2);
    // Indistinguishability: every processor outside P1 that is correct in E2
    // sees identical inboxes, slot by slot, in both executions.
    let slots = e1.slots.len().max(e2.slots.len());
    let p2_views_identical = p2
        .iter()
        .filter(|q| e2.is_correct(**q))
        .all(|q| (0..=slots).all(|t| e1.inbox_of(*q, t) == e2.inbox_of(*q, t)));

    let report = ScenarioReport {
        p1: p1_subset.clone(),
        case: ScenarioCase::Silenced { p, withheld_senders, e2_received, p2_views_identical },
    };
    Ok((e1, Some(e2), report))
}

// ---------------------------------------------------------------------------
// Named strategies
// ---------------------------------------------------------------------------

pub const STRATEGY_NAMES: &[&str] =
    &["silent", "crash-at", "equivocate-per-receiver", "flip-majority", "mirror"];

struct EquivocatePerReceiver;

impl AdversaryStrategy for EquivocatePerReceiver {
    fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
        let n = view.params.n as u32;
        (0..n)
            .map(|r| {
                let bit = if r < n / 2 { 0 } else { 1 };
                Message::unsigned(byz, ProcessorId(r), view.slot, vec![bit])
            })
            .collect()
    }
}

struct FlipMajority;

impl AdversaryStrategy for FlipMajority {
    fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
        // Complement of the majority value among the correct sends the
        // rushing adversary observes this slot.
        let mut ones = 0usize;
        let mut zeros = 0usize;
        for m in view.pending_outboxes {
            match m.payload[..] {
                [0] => zeros += 1,
                [1] => ones += 1,
                _ => {}
            }
        }
        let flipped = if ones > zeros { 0 } else { 1 };
        (0..view.params.n as u32)
            .map(|r| Message::unsigned(byz, ProcessorId(r), view.slot, vec![flipped]))
            .collect()
    }
}

struct Mirror;

impl AdversaryStrategy for Mirror {
    fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
        let mut last: BTreeMap<ProcessorId, Vec<u8>> = BTreeMap::new();
        for sent in view.history {
            for m in sent {
                if m.receiver == byz && m.sender != byz {
                    last.insert(m.sender, m.payload.clone());
                }
            }
        }
        last.into_iter()
            .map(|(r, payload)| Message::unsigned(byz, r, view.slot, payload))
            .collect()
    }
}

/// Follows the protocol faithfully until `crash_slot`, then goes silent; the
/// pre-crash behavior is produced by privately running the processor's own
/// machine on its delivered inboxes.
struct CrashAt<'a> {
    crash_slot: usize,
    factory: &'a MachineFactory<'a>,
    machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>>,
}

impl AdversaryStrategy for CrashAt<'_> {
    fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
        if view.slot >= self.crash_slot {
            return Vec::new();
        }
        let machine = self
            .machines
            .entry(byz)
            .or_insert_with(|| (self.factory)(byz, view.inputs[&byz]));
        let inbox: Vec<Message> = view.inbox_of(byz).into_iter().cloned().collect();
        let mut sends = machine.on_slot(view.slot, &inbox);
        for m in &mut sends {
            m.sender = byz;
            m.slot = view.slot;
        }
        sends
    }
}

/// Look up a named strategy. `crash-at` takes its slot as `crash-at:T`
/// (default 1) and emulates the protocol with `factory` until then.
pub fn strategy<'a>(
    name: &str,
    factory: &'a MachineFactory<'a>,
) -> Result<Box<dyn AdversaryStrategy + 'a>, AnalysisError> {
    if let Some(rest) = name.strip_prefix("crash-at") {
        let crash_slot = match rest.strip_prefix(':') {
            None if rest.is_empty() => 1,
            Some(t) => t
                .parse()
                .map_err(|_| AnalysisError::UnknownStrategy(name.into()))?,
            _ => return Err(AnalysisError::UnknownStrategy(name.into())),
        };
        return Ok(Box::new(CrashAt { crash_slot, factory, machines: BTreeMap::new() }));
    }
    match name {
        "silent" => Ok(Box::new(crate::netsim::SilentAdversary)),
        "equivocate-per-receiver" => Ok(Box::new(EquivocatePerReceiver)),
        "flip-majority" => Ok(Box::new(FlipMajority)),
        "mirror" => Ok(Box::new(Mirror)),
        other => Err(AnalysisError::UnknownStrategy(other.into())),
    }
}
