//! Basic Phase King: `f + 1` rounds of Gradecast plus a rotating leader.
//!
//! Round `r` (0-based, leader is processor `r`) occupies four slots:
//! the three Gradecast slots on the current value, then one slot in which the
//! leader broadcasts its value and everyone without grade 2 adopts it.

use crate::core::{Grade, Message, ProcessorId, Value};
use crate::netsim::ProtocolMachine;
use crate::protocols::gradecast::GradecastCore;
use crate::protocols::wire;

pub struct PhaseKingMachine {
    f: usize,
    id: ProcessorId,
    members: Vec<ProcessorId>,
    value: Value,
    round_gc: Option<GradecastCore>,
    grade: Grade,
    output: Option<Value>,
}

impl PhaseKingMachine {
    pub fn new(n: usize, f: usize, id: ProcessorId, input: Value) -> Self {
        PhaseKingMachine {
            f,
            id,
            members: (0..n as u32).map(ProcessorId).collect(),
            value: input,
            round_gc: None,
            grade: Grade::G0,
            output: None,
        }
    }

    fn rounds(&self) -> usize {
        self.f + 1
    }

    fn leader(round: usize) -> ProcessorId {
        ProcessorId(round as u32)
    }
}

impl ProtocolMachine for PhaseKingMachine {
    fn slot_budget(&self) -> usize {
        4 * self.rounds()
    }

    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message> {
        let round = slot / 4;
        if round >= self.rounds() {
            return Vec::new();
        }
        match slot % 4 {
            0 => {
                let gc = GradecastCore::new(
                    self.members.clone(),
                    self.f,
                    self.id,
                    self.value,
                );
                let sends = gc.slot0_sends(slot);
                self.round_gc = Some(gc);
                sends
            }
            1 => {
                let gc = self.round_gc.as_ref().expect("round started");
                let received = gc.values_from_members(inbox);
                gc.slot1_sends(slot, &received)
            }
            2 => {
                let gc = self.round_gc.as_mut().expect("round started");
                let received = gc.values_from_members(inbox);
                let (v, g) = gc.slot2_decide(&received);
                self.value = v;
                self.grade = g;
                if self.id == Self::leader(round) {
                    wire::broadcast(self.id, slot, &self.members, wire::value_payload(self.value))
                } else {
                    Vec::new()
                }
            }
            _ => {
                // A missing or malformed leader value is adopted as 0.
                let leader_value = inbox
                    .iter()
                    .rev()
                    .find(|m| m.sender == Self::leader(round))
                    .and_then(|m| wire::parse_value(&m.payload))
                    .unwrap_or(Value::ZERO);
                if self.grade < Grade::G2 {
                    self.value = leader_value;
                }
                if round + 1 == self.rounds() {
                    self.output = Some(self.value);
                }
                Vec::new()
            }
        }
    }

    fn output(&self) -> Option<(Value, Option<Grade>)> {
        self.output.map(|v| (v, None))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::core::{ExecutionTrace, Fault, Rational, SystemParams};
    use crate::netsim::{
        run_lockstep, AdversaryStrategy, AdversaryView, FaultAssignment, SilentAdversary,
    };

    pub fn run_phase_king(
        params: &SystemParams,
        inputs: &[(u32, u8)],
        faults: FaultAssignment,
        adversary: &mut dyn AdversaryStrategy,
    ) -> ExecutionTrace {
        let inputs: BTreeMap<ProcessorId, Value> = inputs
            .iter()
            .map(|&(p, b)| (ProcessorId(p), Value::from_bit(b).unwrap()))
            .collect();
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
        for p in params.processors() {
            if faults.status(p) != Fault::Byzantine {
                machines.insert(
                    p,
                    Box::new(PhaseKingMachine::new(params.n, params.f, p, inputs[&p])) as _,
                );
            }
        }
        let budget = 4 * (params.f + 1);
        run_lockstep(params, &mut machines, &inputs, &faults, adversary, budget).unwrap()
    }

    struct Equivocator;
    impl AdversaryStrategy for Equivocator {
        fn byzantine_sends(&mut self, view: &AdversaryView, byz: ProcessorId) -> Vec<Message> {
            let n = view.params.n as u32;
            (0..n)
                .map(|r| {
                    let v = if r < n / 2 { 0 } else { 1 };
                    Message::unsigned(byz, ProcessorId(r), view.slot, vec![v])
                })
                .collect()
        }
    }

    #[test]
    fn unanimous_inputs_survive_any_adversary() {
        let params = SystemParams::new(4, 1, Rational::new(1, 24), 4).unwrap();
        let faults = FaultAssignment::byzantine_only([ProcessorId(3)]);
        for adversary in [
            &mut SilentAdversary as &mut dyn AdversaryStrategy,
            &mut Equivocator as &mut dyn AdversaryStrategy,
        ] {
            let trace = run_phase_king(
                &params,
                &[(0, 1), (1, 1), (2, 1), (3, 1)],
                faults.clone(),
                adversary,
            );
            for p in 0..3u32 {
                assert_eq!(trace.outputs[&ProcessorId(p)].value, Value::ONE);
            }
        }
    }

    #[test]
    fn byzantine_first_leader_still_agrees() {
        // p0 leads round 0 and is Byzantine; round 1 has the correct leader p1.
        let params = SystemParams::new(4, 1, Rational::new(1, 24), 4).unwrap();
        let faults = FaultAssignment::byzantine_only([ProcessorId(0)]);
        let trace = run_phase_king(
            &params,
            &[(0, 0), (1, 0), (2, 0), (3, 1)],
            faults,
            &mut Equivocator,
        );
        let v = trace.outputs[&ProcessorId(1)].value;
        for p in 1..4u32 {
            assert_eq!(trace.outputs[&ProcessorId(p)].value, v);
        }
    }

    #[test]
    fn single_round_mixed_inputs() {
        let params = SystemParams::new(3, 0, Rational::new(1, 4), 3).unwrap();
        let trace = run_phase_king(
            &params,
            &[(0, 0), (1, 1), (2, 1)],
            FaultAssignment::all_correct(),
            &mut SilentAdversary,
        );
        let v = trace.outputs[&ProcessorId(0)].value;
        for p in 0..3u32 {
            assert_eq!(trace.outputs[&ProcessorId(p)].value, v);
        }
        // With no grade-2 holders everyone adopts the round-0 leader's value.
        assert_eq!(v, Value::ZERO);
    }
}
