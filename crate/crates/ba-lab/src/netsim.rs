//! Deterministic lock-step synchronous network.
//!
//! A simulation drives one [`ProtocolMachine`] per protocol-following
//! processor against an [`AdversaryStrategy`] controlling the faulty ones.
//! Messages sent at slot `t` are delivered at slot `t + 1`. The adversary is
//! rushing: within a slot it sees the protocol-following outboxes before
//! choosing the Byzantine sends for that slot.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::core::{
    ComplexityReport, ExecutionTrace, Fault, Message, OutputRecord, ProcessorId,
    SystemParams, Value,
};
use crate::core::Grade;

/// A deterministic per-processor state machine. Implementations must be pure:
/// identical `(state, slot, inbox)` yields identical `(outbox, state')`, and
/// the output, once set, never changes.
pub trait ProtocolMachine {
    /// Slot budget t*: the machine outputs strictly before this many slots.
    fn slot_budget(&self) -> usize;

    /// Process the inbox delivered at `slot` and return the messages to send
    /// at `slot`.
    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message>;

    fn output(&self) -> Option<(Value, Option<Grade>)>;
}

/// Static assignment of fault classes; classes are pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultAssignment {
    pub byzantine: BTreeSet<ProcessorId>,
    pub crash: BTreeMap<ProcessorId, usize>,
    pub omission: BTreeSet<ProcessorId>,
}

impl FaultAssignment {
    pub fn all_correct() -> FaultAssignment {
        FaultAssignment::default()
    }

    pub fn byzantine_only(ids: impl IntoIterator<Item = ProcessorId>) -> FaultAssignment {
        FaultAssignment { byzantine: ids.into_iter().collect(), ..Default::default() }
    }

    pub fn total_faulty(&self) -> usize {
        self.byzantine.len() + self.crash.len() + self.omission.len()
    }

    pub fn status(&self, p: ProcessorId) -> Fault {
        if self.byzantine.contains(&p) {
            Fault::Byzantine
        } else if let Some(&t) = self.crash.get(&p) {
            Fault::Crash(t)
        } else if self.omission.contains(&p) {
            Fault::Omission
        } else {
            Fault::Correct
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), SimError> {
        let mut seen = BTreeSet::new();
        for p in self
            .byzantine
            .iter()
            .chain(self.crash.keys())
            .chain(self.omission.iter())
        {
            if !seen.insert(*p) {
                return Err(SimError::OverlappingFaultClasses(*p));
            }
        }
        if self.total_faulty() > params.f {
            return Err(SimError::TooManyFaults {
                assigned: self.total_faulty(),
                budget: params.f,
            });
        }
        Ok(())
    }

    pub fn to_map(&self, params: &SystemParams) -> BTreeMap<ProcessorId, Fault> {
        params.processors().map(|p| (p, self.status(p))).collect()
    }
}

/// Append-only record of observed signature endorsements. An endorsement is
/// `(signer, payload, context)` where `context` is the chain of prior
/// signatures on the same payload.
#[derive(Debug, Clone, Default)]
pub struct SignatureRegistry {
    records: BTreeSet<(ProcessorId, Vec<u8>, Vec<ProcessorId>)>,
}

impl SignatureRegistry {
    pub fn new() -> SignatureRegistry {
        SignatureRegistry::default()
    }

    /// Record an endorsement. Idempotent.
    pub fn sign(&mut self, signer: ProcessorId, payload: &[u8], context: &[ProcessorId]) {
        self.records.insert((signer, payload.to_vec(), context.to_vec()));
    }

    pub fn verify(&self, signer: ProcessorId, payload: &[u8], context: &[ProcessorId]) -> bool {
        self.records
            .contains(&(signer, payload.to_vec(), context.to_vec()))
    }

    /// A message verifies when every endorsement in its chain was previously
    /// observed, or the endorsement's signer is the message's own sender.
    pub fn verify_message(&self, m: &Message) -> bool {
        m.signatures.iter().enumerate().all(|(i, signer)| {
            *signer == m.sender || self.verify(*signer, &m.payload, &m.signatures[..i])
        })
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("processor {0} appears in more than one fault class")]
    OverlappingFaultClasses(ProcessorId),
    #[error("{assigned} faulty processors assigned but budget is {budget}")]
    TooManyFaults { assigned: usize, budget: usize },
    #[error("no machine supplied for protocol-following processor {0}")]
    MissingMachine(ProcessorId),
    #[error("adversary emitted a message with an unverifiable endorsement by {signer} at slot {slot}")]
    ForgeryAttempt { signer: ProcessorId, slot: usize },
    #[error("correct processors {missing:?} lack outputs after {max_slots} slots")]
    NonTermination { missing: Vec<ProcessorId>, max_slots: usize },
}

/// What the adversary sees when making a decision: the trace so far, and
/// (for Byzantine sends) the protocol-following outboxes of the current slot.
pub struct AdversaryView<'a> {
    pub params: &'a SystemParams,
    pub slot: usize,
    /// Messages sent at each completed slot `< slot`.
    pub history: &'a [Vec<Message>],
    /// Pending sends of protocol-following processors for the current slot.
    pub pending_outboxes: &'a [Message],
    pub registry: &'a SignatureRegistry,
    pub inputs: &'a BTreeMap<ProcessorId, Value>,
}

impl AdversaryView<'_> {
    /// Messages delivered to `p` at the current slot.
    pub fn inbox_of(&self, p: ProcessorId) -> Vec<&Message> {
        if self.slot == 0 {
            return Vec::new();
        }
        match self.history.get(self.slot - 1) {
            Some(sent) => sent.iter().filter(|m| m.receiver == p).collect(),
            None => Vec::new(),
        }
    }
}

/// Full-information adversary. Default crash/omission behaviour is benign
/// (send everything, drop nothing); implementations override as needed.
pub trait AdversaryStrategy {
    fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message>;

    /// Subset of `instructed` actually sent by `p` at its crash slot.
    fn crash_subset(
        &mut self,
        _view: &AdversaryView,
        _p: ProcessorId,
        instructed: &[Message],
    ) -> Vec<Message> {
        instructed.to_vec()
    }

    fn omission_outgoing(
        &mut self,
        _view: &AdversaryView,
        _p: ProcessorId,
        instructed: &[Message],
    ) -> Vec<Message> {
        instructed.to_vec()
    }

    fn omission_incoming(
        &mut self,
        _view: &AdversaryView,
        _p: ProcessorId,
        inbox: &[Message],
    ) -> Vec<Message> {
        inbox.to_vec()
    }
}

/// Sends nothing, drops everything it may drop.
#[derive(Debug, Clone, Default)]
pub struct SilentAdversary;

impl AdversaryStrategy for SilentAdversary {
    fn byzantine_sends(&mut self, _view: &AdversaryView, _byz: ProcessorId) -> Vec<Message> {
        Vec::new()
    }

    fn crash_subset(
        &mut self,
        _view: &AdversaryView,
        _p: ProcessorId,
        _instructed: &[Message],
    ) -> Vec<Message> {
        Vec::new()
    }
}

/// Drive the machines in lock step until every correct processor has output
/// or `max_slots` is exhausted.
pub fn run_lockstep(
    params: &SystemParams,
    machines: &mut BTreeMap<ProcessorId, Box<dyn ProtocolMachine>>,
    inputs: &BTreeMap<ProcessorId, Value>,
    faults: &FaultAssignment,
    adversary: &mut dyn AdversaryStrategy,
    max_slots: usize,
) -> Result<ExecutionTrace, SimError> {
    faults.validate(params)?;
    for p in params.processors() {
        if faults.status(p) != Fault::Byzantine && !machines.contains_key(&p) {
            return Err(SimError::MissingMachine(p));
        }
    }

    let mut registry = SignatureRegistry::new();
    let mut history: Vec<Vec<Message>> = Vec::new();
    let mut outputs: BTreeMap<ProcessorId, OutputRecord> = BTreeMap::new();
    // Crash processors freeze after their crash slot.
    let mut frozen: BTreeSet<ProcessorId> = BTreeSet::new();

    let correct: Vec<ProcessorId> = params
        .processors()
        .filter(|p| faults.status(*p) == Fault::Correct)
        .collect();

    for slot in 0..max_slots {
        if correct.iter().all(|p| outputs.contains_key(p)) {
            break;
        }

        let mut pending: Vec<Message> = Vec::new();
        // Pre-filtered inboxes and machine outboxes for protocol followers.
        for p in params.processors() {
            let status = faults.status(p);
            if status == Fault::Byzantine || frozen.contains(&p) {
                continue;
            }
            let mut inbox: Vec<Message> = history
                .get(slot.wrapping_sub(1))
                .map(|sent| {
                    sent.iter().filter(|m| m.receiver == p).cloned().collect()
                })
                .unwrap_or_default();
            if slot == 0 {
                inbox.clear();
            }
            if status == Fault::Omission {
                let view = AdversaryView {
                    params,
                    slot,
                    history: &history,
                    pending_outboxes: &[],
                    registry: &registry,
                    inputs,
                };
                inbox = adversary.omission_incoming(&view, p, &inbox);
            }
            let machine = machines.get_mut(&p).expect("checked above");
            let mut outbox = machine.on_slot(slot, &inbox);
            for m in &mut outbox {
                m.sender = p;
                m.slot = slot;
            }
            match status {
                Fault::Crash(t) if t == slot => {
                    let view = AdversaryView {
                        params,
                        slot,
                        history: &history,
                        pending_outboxes: &[],
                        registry: &registry,
                        inputs,
                    };
                    outbox = adversary.crash_subset(&view, p, &outbox);
                    frozen.insert(p);
                }
                Fault::Omission => {
                    let view = AdversaryView {
                        params,
                        slot,
                        history: &history,
                        pending_outboxes: &[],
                        registry: &registry,
                        inputs,
                    };
                    outbox = adversary.omission_outgoing(&view, p, &outbox);
                }
                _ => {}
            }
            pending.extend(outbox);
            if !outputs.contains_key(&p) {
                if let Some((value, grade)) = machine.output() {
                    outputs.insert(p, OutputRecord { value, grade, slot });
                }
            }
        }

        // Rushing adversary: sees all pending protocol sends for this slot.
        let mut byz_sends: Vec<Message> = Vec::new();
        for b in faults.byzantine.iter().copied() {
            let view = AdversaryView {
                params,
                slot,
                history: &history,
                pending_outboxes: &pending,
                registry: &registry,
                inputs,
            };
            let mut sends = adversary.byzantine_sends(&view, b);
            for m in &mut sends {
                m.sender = b;
                m.slot = slot;
            }
            byz_sends.extend(sends);
        }

        let mut sent = pending;
        sent.extend(byz_sends);

        // Authentication: an endorsement may enter the network only from its
        // own signer or after having been observed. Protocol machines respect
        // this by construction; an adversary violation aborts the run.
        for m in &sent {
            for (i, signer) in m.signatures.iter().enumerate() {
                if *signer == m.sender {
                    registry.sign(*signer, &m.payload, &m.signatures[..i]);
                } else if !registry.verify(*signer, &m.payload, &m.signatures[..i]) {
                    return Err(SimError::ForgeryAttempt { signer: *signer, slot });
                }
            }
        }

        history.push(sent);
    }

    let missing: Vec<ProcessorId> =
        correct.iter().copied().filter(|p| !outputs.contains_key(p)).collect();
    if !missing.is_empty() {
        return Err(SimError::NonTermination { missing, max_slots });
    }

    Ok(ExecutionTrace {
        params: *params,
        fault_assignment: faults.to_map(params),
        inputs: inputs.clone(),
        slots: history,
        outputs,
    })
}

/// Count messages and bits sent by correct processors, excluding
/// self-addressed messages, grouped by `depth_of`.
pub fn account(
    trace: &ExecutionTrace,
    depth_of: impl Fn(&Message) -> usize,
    sig_bits: u64,
) -> ComplexityReport {
    let mut report = ComplexityReport::default();
    for sent in &trace.slots {
        for m in sent {
            if !trace.is_correct(m.sender) || m.is_self_addressed() {
                continue;
            }
            let bits = m.bit_size(sig_bits);
            report.total_messages += 1;
            report.total_bits += bits;
            let entry = report.per_depth.entry(depth_of(m)).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += bits;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Rational, DEFAULT_SIG_BITS};

    /// Outputs its input at slot 0 without sending anything.
    struct Echo {
        input: Value,
        done: bool,
    }

    impl ProtocolMachine for Echo {
        fn slot_budget(&self) -> usize {
            1
        }
        fn on_slot(&mut self, _slot: usize, _inbox: &[Message]) -> Vec<Message> {
            self.done = true;
            Vec::new()
        }
        fn output(&self) -> Option<(Value, Option<Grade>)> {
            self.done.then_some((self.input, None))
        }
    }

    fn params(n: usize, f: usize) -> SystemParams {
        SystemParams::new(n, f, Rational::new(1, 4), 1).unwrap()
    }

    #[test]
    fn single_processor_echo() {
        let params = params(1, 0);
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> =
            BTreeMap::new();
        machines.insert(ProcessorId(0), Box::new(Echo { input: Value::ONE, done: false }));
        let inputs = [(ProcessorId(0), Value::ONE)].into_iter().collect();
        let trace = run_lockstep(
            &params,
            &mut machines,
            &inputs,
            &FaultAssignment::all_correct(),
            &mut SilentAdversary,
            1,
        )
        .unwrap();
        assert_eq!(
            trace.outputs[&ProcessorId(0)],
            OutputRecord { value: Value::ONE, grade: None, slot: 0 }
        );
        let report = account(&trace, |_| 0, DEFAULT_SIG_BITS);
        assert_eq!((report.total_messages, report.total_bits), (0, 0));
    }

    #[test]
    fn non_termination_reported() {
        struct Never;
        impl ProtocolMachine for Never {
            fn slot_budget(&self) -> usize {
                4
            }
            fn on_slot(&mut self, _: usize, _: &[Message]) -> Vec<Message> {
                Vec::new()
            }
            fn output(&self) -> Option<(Value, Option<Grade>)> {
                None
            }
        }
        let params = params(1, 0);
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> =
            BTreeMap::new();
        machines.insert(ProcessorId(0), Box::new(Never));
        let inputs = [(ProcessorId(0), Value::ZERO)].into_iter().collect();
        let err = run_lockstep(
            &params,
            &mut machines,
            &inputs,
            &FaultAssignment::all_correct(),
            &mut SilentAdversary,
            4,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::NonTermination { .. }));
    }

    #[test]
    fn registry_sign_verify_replay() {
        let mut reg = SignatureRegistry::new();
        reg.sign(ProcessorId(3), b"out=1", &[]);
        assert!(reg.verify(ProcessorId(3), b"out=1", &[]));
        assert!(!reg.verify(ProcessorId(3), b"out=0", &[]));
        // Replay of an observed endorsement by a different sender is legal.
        let replay = Message {
            sender: ProcessorId(5),
            receiver: ProcessorId(0),
            slot: 1,
            payload: b"out=1".to_vec(),
            signatures: vec![ProcessorId(3)],
        };
        assert!(reg.verify_message(&replay));
    }

    #[test]
    fn adversary_forgery_aborts() {
        struct Forger;
        impl AdversaryStrategy for Forger {
            fn byzantine_sends(&mut self, _: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
                vec![Message {
                    sender: byz,
                    receiver: ProcessorId(0),
                    slot: 0,
                    payload: b"out=1".to_vec(),
                    signatures: vec![ProcessorId(0)], // never signed by p0
                }]
            }
        }
        let params = SystemParams::new(13, 1, Rational::new(1, 4), 1).unwrap();
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> =
            BTreeMap::new();
        let mut inputs = BTreeMap::new();
        for p in params.processors() {
            machines.insert(p, Box::new(Echo { input: Value::ZERO, done: false }) as _);
            inputs.insert(p, Value::ZERO);
        }
        let faults = FaultAssignment::byzantine_only([ProcessorId(12)]);
        // Make the correct machines slow enough that the forged send happens.
        struct Slow;
        impl ProtocolMachine for Slow {
            fn slot_budget(&self) -> usize {
                2
            }
            fn on_slot(&mut self, _: usize, _: &[Message]) -> Vec<Message> {
                Vec::new()
            }
            fn output(&self) -> Option<(Value, Option<Grade>)> {
                None
            }
        }
        for p in params.processors() {
            machines.insert(p, Box::new(Slow) as _);
        }
        let err = run_lockstep(&params, &mut machines, &inputs, &faults, &mut Forger, 2)
            .unwrap_err();
        assert!(matches!(err, SimError::ForgeryAttempt { .. }));
    }

    #[test]
    fn accounting_ignores_byzantine_and_self() {
        let params = SystemParams::new(13, 1, Rational::new(1, 4), 1).unwrap();
        let mut trace = ExecutionTrace {
            params,
            fault_assignment: params.processors().map(|p| (p, Fault::Correct)).collect(),
            inputs: BTreeMap::new(),
            slots: vec![vec![]],
            outputs: BTreeMap::new(),
        };
        trace
            .fault_assignment
            .insert(ProcessorId(12), Fault::Byzantine);
        // 3 correct senders, one 1-byte message each.
        for s in 0..3u32 {
            trace.slots[0].push(Message::unsigned(
                ProcessorId(s),
                ProcessorId(5),
                0,
                vec![1],
            ));
        }
        // Byzantine flood and a self-addressed message are not counted.
        for _ in 0..1000 {
            trace.slots[0].push(Message::unsigned(
                ProcessorId(12),
                ProcessorId(0),
                0,
                vec![1],
            ));
        }
        trace.slots[0].push(Message::unsigned(ProcessorId(1), ProcessorId(1), 0, vec![9]));
        let report = account(&trace, |_| 0, DEFAULT_SIG_BITS);
        assert_eq!((report.total_messages, report.total_bits), (3, 24));
    }
}
