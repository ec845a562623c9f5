//! Lifting relaxed agreement back to full Byzantine Agreement: majority
//! dissemination over an epsilon-agreement protocol, the committee
//! construction whose outcome is determined by an extraction function, and
//! the full-dissemination lift over that construction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    majority_of, ExecutionTrace, Grade, Message, ProcessorId, Rational, SystemParams, Value,
};
use crate::netsim::{ProtocolMachine, SignatureRegistry};
use crate::protocols::wire;

#[derive(Debug, Error, PartialEq)]
pub enum ReductionError {
    #[error("majority lift needs epsilon in (0, 1/2) and f < n(1/2 - epsilon); n={n}, f={f}, epsilon={epsilon}")]
    MajorityHypothesis { n: usize, f: usize, epsilon: Rational },
    #[error("committee size m={m} exceeds n={n}")]
    CommitteeTooLarge { m: usize, n: usize },
    #[error("epsilon must lie strictly in (0, 1/3), got {0}")]
    BadEpsilon(Rational),
    #[error("extraction returned the empty outcome at a correct processor")]
    TerminationViolation,
}

/// Which lift hypotheses hold for given parameters. The majority-lift bound
/// `f < n(1/2 - epsilon)` is strictly weaker than the inner protocol's
/// `f < n(1/3 - epsilon)`; compositions may be run where only the former
/// holds, and the report says which bound binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftHypotheses {
    pub majority_lift_holds: bool,
    pub inner_resilience_holds: bool,
}

pub fn check_lift_hypotheses(params: &SystemParams) -> LiftHypotheses {
    let n = Rational::from_integer(params.n as i64);
    let f = Rational::from_integer(params.f as i64);
    let majority = params.epsilon > Rational::new(0, 1)
        && params.epsilon < Rational::new(1, 2)
        && f < n * (Rational::new(1, 2) - params.epsilon);
    LiftHypotheses {
        majority_lift_holds: majority,
        inner_resilience_holds: params.resilience_holds(),
    }
}

// ---------------------------------------------------------------------------
// Majority dissemination lift
// ---------------------------------------------------------------------------

/// Runs an epsilon-agreement machine to completion, then adds one slot in
/// which every processor sends its output to all and outputs the majority of
/// received values plus its own.
pub struct MajorityLiftMachine {
    inner: Box<dyn ProtocolMachine>,
    id: ProcessorId,
    members: Vec<ProcessorId>,
    inner_budget: usize,
    own: Option<Value>,
    output: Option<Value>,
}

impl MajorityLiftMachine {
    pub fn new(
        params: &SystemParams,
        id: ProcessorId,
        inner: Box<dyn ProtocolMachine>,
    ) -> Result<MajorityLiftMachine, ReductionError> {
        if !check_lift_hypotheses(params).majority_lift_holds {
            return Err(ReductionError::MajorityHypothesis {
                n: params.n,
                f: params.f,
                epsilon: params.epsilon,
            });
        }
        let inner_budget = inner.slot_budget();
        Ok(MajorityLiftMachine {
            inner,
            id,
            members: params.processors().collect(),
            inner_budget,
            own: None,
            output: None,
        })
    }
}

impl ProtocolMachine for MajorityLiftMachine {
    fn slot_budget(&self) -> usize {
        self.inner_budget + 2
    }

    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message> {
        if slot < self.inner_budget {
            return self.inner.on_slot(slot, inbox);
        }
        if slot == self.inner_budget {
            let (v, _) = self.inner.output().expect("inner output due by its budget");
            self.own = Some(v);
            return wire::broadcast(self.id, slot, &self.members, wire::value_payload(v));
        }
        if slot == self.inner_budget + 1 {
            // Every processor reports here, so any sender is admissible;
            // Byzantine lies are tolerated by the > n/2 correct majority.
            let received = wire::latest_values(inbox, |_| true);
            let mut tally: Vec<Value> = received.values().copied().collect();
            // Own value counts once even though the self-addressed copy is
            // already in the inbox; dedup by sender has handled that.
            if !received.contains_key(&self.id) {
                tally.push(self.own.expect("set in the dissemination slot"));
            }
            self.output = Some(majority_of(tally));
        }
        Vec::new()
    }

    fn output(&self) -> Option<(Value, Option<Grade>)> {
        self.output.map(|v| (v, None))
    }
}

// ---------------------------------------------------------------------------
// Extractable construction
// ---------------------------------------------------------------------------

/// A committee member's signed output claim.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct SignedOutput {
    pub member: ProcessorId,
    pub value: Value,
}

/// A duplicate-free set of signed outputs (keyed by member and value; a
/// conflicting member contributes one entry per value).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedMessageSet {
    pub outputs: BTreeSet<SignedOutput>,
}

impl SignedMessageSet {
    pub fn from_outputs(outputs: impl IntoIterator<Item = SignedOutput>) -> SignedMessageSet {
        SignedMessageSet { outputs: outputs.into_iter().collect() }
    }

    pub fn insert(&mut self, s: SignedOutput) {
        self.outputs.insert(s);
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Outcome of the extraction function: a bit, or the empty string when the
/// messages do not determine one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractOutcome {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "")]
    Empty,
}

impl ExtractOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractOutcome::Zero => "0",
            ExtractOutcome::One => "1",
            ExtractOutcome::Empty => "",
        }
    }

    pub fn from_value(v: Value) -> ExtractOutcome {
        match v {
            Value::ZERO => ExtractOutcome::Zero,
            _ => ExtractOutcome::One,
        }
    }

    pub fn value(self) -> Option<Value> {
        match self {
            ExtractOutcome::Zero => Some(Value::ZERO),
            ExtractOutcome::One => Some(Value::ONE),
            ExtractOutcome::Empty => None,
        }
    }
}

/// Committee size `floor(f / (1/3 - epsilon)) + 1`, the smallest m with
/// `f < m (1/3 - epsilon)`.
pub fn committee_size_m(f: usize, epsilon: Rational) -> Result<usize, ReductionError> {
    if epsilon <= Rational::new(0, 1) || epsilon >= Rational::new(1, 3) {
        return Err(ReductionError::BadEpsilon(epsilon));
    }
    let ratio = Rational::from_integer(f as i64) / (Rational::new(1, 3) - epsilon);
    Ok(ratio.floor().to_integer() as usize + 1)
}

/// The extraction function: a total, deterministic map from signed-output
/// sets to an outcome. Committee membership is the lowest `m` ids. Members
/// signing more than one value are counted toward the `m - f` presence quorum
/// but excluded from the tally; the residual tie returns "0" and is
/// unreachable in protocol-compliant executions.
pub fn extract_f(messages: &SignedMessageSet, m: usize, f: usize) -> ExtractOutcome {
    let mut values_of: BTreeMap<ProcessorId, BTreeSet<Value>> = BTreeMap::new();
    for s in &messages.outputs {
        if s.member.index() < m {
            values_of.entry(s.member).or_default().insert(s.value);
        }
    }
    if values_of.len() < m.saturating_sub(f) {
        return ExtractOutcome::Empty;
    }
    let mut zeros = 0usize;
    let mut ones = 0usize;
    for values in values_of.values() {
        if values.len() == 1 {
            match values.iter().next().unwrap() {
                &Value::ZERO => zeros += 1,
                _ => ones += 1,
            }
        }
    }
    if ones > zeros {
        ExtractOutcome::One
    } else if zeros > ones {
        ExtractOutcome::Zero
    } else {
        ExtractOutcome::Zero
    }
}

/// Static shape of the extractable construction: the committee (lowest m
/// ids), the designated collector, and the slot budget t*.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractableSpec {
    pub m: usize,
    pub committee: Vec<ProcessorId>,
    pub collector: ProcessorId,
    pub inner_budget: usize,
    /// Budget of the extractable protocol: inner run plus the signing slot.
    pub t_star: usize,
}

pub fn build_extractable(
    params: &SystemParams,
    inner_budget: usize,
) -> Result<ExtractableSpec, ReductionError> {
    let m = committee_size_m(params.f, params.epsilon)?;
    if m > params.n {
        return Err(ReductionError::CommitteeTooLarge { m, n: params.n });
    }
    let committee: Vec<ProcessorId> = (0..m as u32).map(ProcessorId).collect();
    let collector = if m < params.n { ProcessorId(m as u32) } else { ProcessorId(0) };
    Ok(ExtractableSpec { m, committee, collector, inner_budget, t_star: inner_budget + 1 })
}

/// Committee members run the inner protocol among themselves, then each signs
/// its output and sends it to the collector: exactly m messages beyond the
/// inner protocol. Non-members idle. No machine outputs before the signing
/// slot so the simulation cannot stop early.
pub struct ExtractableMachine {
    spec: ExtractableSpec,
    id: ProcessorId,
    inner: Option<Box<dyn ProtocolMachine>>,
    output: Option<Value>,
}

impl ExtractableMachine {
    pub fn new(
        spec: ExtractableSpec,
        id: ProcessorId,
        inner: Option<Box<dyn ProtocolMachine>>,
    ) -> ExtractableMachine {
        debug_assert_eq!(spec.committee.contains(&id), inner.is_some());
        ExtractableMachine { spec, id, inner, output: None }
    }

    fn signing_sends(&mut self, slot: usize) -> Vec<Message> {
        match self.inner.as_ref().and_then(|m| m.output()) {
            Some((v, _)) => {
                self.output = Some(v);
                vec![Message {
                    sender: self.id,
                    receiver: self.spec.collector,
                    slot,
                    payload: wire::value_payload(v),
                    signatures: vec![self.id],
                }]
            }
            None => {
                // Non-members terminate with a placeholder; the protocol's
                // outcome is defined by extraction, not by their outputs.
                self.output = Some(Value::ZERO);
                Vec::new()
            }
        }
    }
}

impl ProtocolMachine for ExtractableMachine {
    fn slot_budget(&self) -> usize {
        self.spec.t_star
    }

    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message> {
        if slot < self.spec.inner_budget {
            return match self.inner.as_mut() {
                Some(inner) => inner.on_slot(slot, inbox),
                None => Vec::new(),
            };
        }
        if slot == self.spec.inner_budget {
            return self.signing_sends(slot);
        }
        Vec::new()
    }

    fn output(&self) -> Option<(Value, Option<Grade>)> {
        self.output.map(|v| (v, None))
    }
}

/// Replay a trace's sends through a fresh registry, recording every
/// endorsement made by its own signer, exactly as the simulator does.
pub fn registry_of(trace: &ExecutionTrace) -> SignatureRegistry {
    let mut registry = SignatureRegistry::new();
    for sent in &trace.slots {
        for m in sent {
            for (i, signer) in m.signatures.iter().enumerate() {
                if *signer == m.sender {
                    registry.sign(*signer, &m.payload, &m.signatures[..i]);
                }
            }
        }
    }
    registry
}

/// Collect the verified signed outputs present in a message sequence:
/// single-endorsement value messages from committee members whose endorsement
/// the registry confirms. Unverifiable endorsements are ignored.
pub fn signed_outputs_in<'a>(
    messages: impl IntoIterator<Item = &'a Message>,
    committee: &[ProcessorId],
    registry: &SignatureRegistry,
) -> SignedMessageSet {
    let mut set = SignedMessageSet::default();
    for m in messages {
        let [signer] = m.signatures[..] else { continue };
        if !committee.contains(&signer) {
            continue;
        }
        let Some(value) = wire::parse_value(&m.payload) else { continue };
        if registry.verify(signer, &m.payload, &[]) {
            set.insert(SignedOutput { member: signer, value });
        }
    }
    set
}

/// All signed outputs sent anywhere in a trace (the set M_a).
pub fn all_signed_outputs(trace: &ExecutionTrace, committee: &[ProcessorId]) -> SignedMessageSet {
    let registry = registry_of(trace);
    signed_outputs_in(trace.slots.iter().flatten(), committee, &registry)
}

// ---------------------------------------------------------------------------
// Full-dissemination lift
// ---------------------------------------------------------------------------

/// Runs the extractable construction, then after t* every processor forwards
/// the signature-bearing messages it has sent or received to all, applies
/// the extraction function to its collected set and outputs the resulting
/// bit. An empty extraction at a correct processor leaves the machine without
/// output, which the simulator reports as non-termination.
pub struct DisseminationLiftMachine {
    ext: ExtractableMachine,
    id: ProcessorId,
    members: Vec<ProcessorId>,
    f: usize,
    held: BTreeSet<(Vec<ProcessorId>, Vec<u8>)>,
    output: Option<Value>,
    pub extraction_empty: bool,
}

impl DisseminationLiftMachine {
    pub fn new(
        params: &SystemParams,
        spec: ExtractableSpec,
        id: ProcessorId,
        inner: Option<Box<dyn ProtocolMachine>>,
    ) -> DisseminationLiftMachine {
        DisseminationLiftMachine {
            ext: ExtractableMachine::new(spec, id, inner),
            id,
            members: params.processors().collect(),
            f: params.f,
            held: BTreeSet::new(),
            output: None,
            extraction_empty: false,
        }
    }

    fn hold_from(&mut self, messages: &[Message]) {
        for m in messages {
            if !m.signatures.is_empty() {
                self.held.insert((m.signatures.clone(), m.payload.clone()));
            }
        }
    }

    fn held_set(&self) -> SignedMessageSet {
        // Held chains were policed by the simulator at send time: an
        // endorsement enters the network only from its signer or after
        // observation, so single-signer chains here are authentic.
        let mut set = SignedMessageSet::default();
        for (signatures, payload) in &self.held {
            let [signer] = signatures[..] else { continue };
            if !self.ext.spec.committee.contains(&signer) {
                continue;
            }
            if let Some(value) = wire::parse_value(payload) {
                set.insert(SignedOutput { member: signer, value });
            }
        }
        set
    }
}

impl ProtocolMachine for DisseminationLiftMachine {
    fn slot_budget(&self) -> usize {
        self.ext.spec.t_star + 2
    }

    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message> {
        let t_star = self.ext.spec.t_star;
        self.hold_from(inbox);
        if slot < t_star {
            let sends = self.ext.on_slot(slot, inbox);
            self.hold_from(&sends);
            return sends;
        }
        if slot == t_star {
            let mut sends = Vec::new();
            for (signatures, payload) in &self.held {
                for &to in &self.members {
                    sends.push(Message {
                        sender: self.id,
                        receiver: to,
                        slot,
                        payload: payload.clone(),
                        signatures: signatures.clone(),
                    });
                }
            }
            return sends;
        }
        if slot == t_star + 1 {
            let outcome = extract_f(&self.held_set(), self.ext.spec.m, self.f);
            match outcome.value() {
                Some(v) => self.output = Some(v),
                None => self.extraction_empty = true,
            }
        }
        Vec::new()
    }

    fn output(&self) -> Option<(Value, Option<Grade>)> {
        self.output.map(|v| (v, None))
    }
}
