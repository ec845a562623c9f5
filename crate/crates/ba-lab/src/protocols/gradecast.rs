//! Gradecast: a 3-slot graded broadcast primitive.
//!
//! Slot 0: send the input to all members. Slot 1: if some value was received
//! from at least `n - f` members, echo it. Slot 2: output with grade 2 on an
//! `n - f` echo quorum, grade 1 on an `f + 1` echo quorum, grade 0 otherwise
//! (keeping the input).

use std::collections::BTreeMap;

use crate::core::{Grade, Message, ProcessorId, Value};
use crate::netsim::ProtocolMachine;
use crate::protocols::wire;

/// Quorum logic reused by the standalone machine and the embeddings in
/// Phase King and Recursive Phase King. Local slots are 0..3; the caller maps
/// them onto global slots.
#[derive(Debug, Clone)]
pub struct GradecastCore {
    members: Vec<ProcessorId>,
    f: usize,
    id: ProcessorId,
    input: Value,
    result: Option<(Value, Grade)>,
}

impl GradecastCore {
    pub fn new(members: Vec<ProcessorId>, f: usize, id: ProcessorId, input: Value) -> Self {
        debug_assert!(members.contains(&id));
        GradecastCore { members, f, id, input, result: None }
    }

    fn quorum_value(
        &self,
        received: &BTreeMap<ProcessorId, Value>,
        quorum: usize,
    ) -> Option<Value> {
        // At most one value can meet an n-f quorum, and Time-slot 1 Agreement
        // keeps the f+1 case unique among compliant echoes; break any
        // adversarial residue toward 0.
        Value::both()
            .into_iter()
            .find(|b| received.values().filter(|v| *v == b).count() >= quorum)
    }

    pub fn slot0_sends(&self, slot: usize) -> Vec<Message> {
        wire::broadcast(self.id, slot, &self.members, wire::value_payload(self.input))
    }

    /// Process slot-0 values; returns the echo broadcast, if any.
    pub fn slot1_sends(
        &self,
        slot: usize,
        received: &BTreeMap<ProcessorId, Value>,
    ) -> Vec<Message> {
        let n = self.members.len();
        match self.quorum_value(received, n - self.f) {
            Some(b) => {
                wire::broadcast(self.id, slot, &self.members, wire::value_payload(b))
            }
            None => Vec::new(),
        }
    }

    /// Process slot-1 echoes and fix the graded output.
    pub fn slot2_decide(&mut self, received: &BTreeMap<ProcessorId, Value>) -> (Value, Grade) {
        let n = self.members.len();
        let out = if let Some(b) = self.quorum_value(received, n - self.f) {
            (b, Grade::G2)
        } else if let Some(b) = self.quorum_value(received, self.f + 1) {
            (b, Grade::G1)
        } else {
            (self.input, Grade::G0)
        };
        self.result = Some(out);
        out
    }

    pub fn result(&self) -> Option<(Value, Grade)> {
        self.result
    }

    pub fn members(&self) -> &[ProcessorId] {
        &self.members
    }

    fn member(&self, p: ProcessorId) -> bool {
        self.members.binary_search(&p).is_ok()
    }

    pub fn values_from_members(&self, inbox: &[Message]) -> BTreeMap<ProcessorId, Value> {
        wire::latest_values(inbox, |s| self.member(s))
    }
}

/// Standalone Gradecast machine over the full processor set.
pub struct GradecastMachine {
    core: GradecastCore,
}

impl GradecastMachine {
    pub fn new(n: usize, f: usize, id: ProcessorId, input: Value) -> Self {
        let members = (0..n as u32).map(ProcessorId).collect();
        GradecastMachine { core: GradecastCore::new(members, f, id, input) }
    }
}

impl ProtocolMachine for GradecastMachine {
    fn slot_budget(&self) -> usize {
        3
    }

    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message> {
        match slot {
            0 => self.core.slot0_sends(slot),
            1 => {
                let received = self.core.values_from_members(inbox);
                self.core.slot1_sends(slot, &received)
            }
            2 => {
                let received = self.core.values_from_members(inbox);
                self.core.slot2_decide(&received);
                Vec::new()
            }
            _ => Vec::new(),
        }
    }

    fn output(&self) -> Option<(Value, Option<Grade>)> {
        self.core.result().map(|(v, g)| (v, Some(g)))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::core::{Rational, SystemParams};
    use crate::netsim::{run_lockstep, AdversaryStrategy, AdversaryView, FaultAssignment, SilentAdversary};

    fn params_4_1() -> SystemParams {
        SystemParams::new(4, 1, Rational::new(1, 24), 4).unwrap()
    }

    fn run_gradecast(
        params: &SystemParams,
        inputs: &[(u32, u8)],
        faults: FaultAssignment,
        adversary: &mut dyn AdversaryStrategy,
    ) -> crate::core::ExecutionTrace {
        let inputs: BTreeMap<ProcessorId, Value> = inputs
            .iter()
            .map(|&(p, b)| (ProcessorId(p), Value::from_bit(b).unwrap()))
            .collect();
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
        for p in params.processors() {
            if faults.status(p) != crate::core::Fault::Byzantine {
                machines.insert(
                    p,
                    Box::new(GradecastMachine::new(params.n, params.f, p, inputs[&p])) as _,
                );
            }
        }
        run_lockstep(params, &mut machines, &inputs, &faults, adversary, 3).unwrap()
    }

    #[test]
    fn unanimous_inputs_give_grade_two() {
        let params = params_4_1();
        let trace = run_gradecast(
            &params,
            &[(0, 0), (1, 0), (2, 0), (3, 0)],
            FaultAssignment::all_correct(),
            &mut SilentAdversary,
        );
        for p in params.processors() {
            let out = trace.outputs[&p];
            assert_eq!((out.value, out.grade, out.slot), (Value::ZERO, Some(Grade::G2), 2));
        }
    }

    #[test]
    fn silent_byzantine_mixed_inputs_grade_zero() {
        // Correct inputs (1,1,0) with p3 Byzantine and silent: the slot-1
        // quorum of 3 is unreachable, so everyone keeps its input at grade 0.
        let params = params_4_1();
        let faults = FaultAssignment::byzantine_only([ProcessorId(3)]);
        let trace = run_gradecast(
            &params,
            &[(0, 1), (1, 1), (2, 0), (3, 0)],
            faults,
            &mut SilentAdversary,
        );
        let expect = [(0, 1), (1, 1), (2, 0)];
        for (p, v) in expect {
            let out = trace.outputs[&ProcessorId(p)];
            assert_eq!(out.value, Value::from_bit(v).unwrap());
            assert_eq!(out.grade, Some(Grade::G0));
        }
    }

    /// Byzantine sends 1 to all at slot 0 and nothing after.
    struct SupportThenSilent;
    impl AdversaryStrategy for SupportThenSilent {
        fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
            if view.slot == 0 {
                wire::broadcast(byz, 0, &(0..view.params.n as u32).map(ProcessorId).collect::<Vec<_>>(), vec![1])
            } else {
                Vec::new()
            }
        }
    }

    #[test]
    fn byzantine_slot0_support_gives_grade_two() {
        let params = params_4_1();
        let faults = FaultAssignment::byzantine_only([ProcessorId(3)]);
        let trace = run_gradecast(
            &params,
            &[(0, 1), (1, 1), (2, 1), (3, 1)],
            faults,
            &mut SupportThenSilent,
        );
        for p in 0..3u32 {
            let out = trace.outputs[&ProcessorId(p)];
            assert_eq!((out.value, out.grade), (Value::ONE, Some(Grade::G2)));
        }
    }
}
