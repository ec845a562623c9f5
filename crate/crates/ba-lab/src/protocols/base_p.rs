//! Base-case protocol for committees of size at most 2: the lowest-id member
//! broadcasts its input, both members output that value. Costs at most one
//! 1-byte message over two slots.

use crate::core::{Grade, Message, ProcessorId, Value};
use crate::netsim::ProtocolMachine;
use crate::protocols::wire;

#[derive(Debug, Clone)]
pub struct BaseCaseP {
    members: Vec<ProcessorId>,
    id: ProcessorId,
    input: Value,
    output: Option<Value>,
}

impl BaseCaseP {
    pub const SLOT_BUDGET: usize = 2;

    pub fn new(members: Vec<ProcessorId>, id: ProcessorId, input: Value) -> Self {
        assert!(members.len() <= 2 && members.contains(&id));
        BaseCaseP { members, id, input, output: None }
    }

    fn lowest(&self) -> ProcessorId {
        self.members[0]
    }

    /// Local-slot driver shared with the recursive embeddings.
    pub fn on_local_slot(&mut self, local: usize, slot: usize, inbox: &[Message]) -> Vec<Message> {
        match local {
            0 => {
                if self.id == self.lowest() && self.members.len() == 2 {
                    vec![Message::unsigned(
                        self.id,
                        self.members[1],
                        slot,
                        wire::value_payload(self.input),
                    )]
                } else {
                    Vec::new()
                }
            }
            1 => {
                let v = if self.id == self.lowest() {
                    self.input
                } else {
                    // A silent or malformed leader falls back to own input so
                    // the machine always terminates.
                    inbox
                        .iter()
                        .rev()
                        .find(|m| m.sender == self.lowest())
                        .and_then(|m| wire::parse_value(&m.payload))
                        .unwrap_or(self.input)
                };
                self.output = Some(v);
                Vec::new()
            }
            _ => Vec::new(),
        }
    }

    pub fn value_output(&self) -> Option<Value> {
        self.output
    }
}

impl ProtocolMachine for BaseCaseP {
    fn slot_budget(&self) -> usize {
        Self::SLOT_BUDGET
    }

    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message> {
        self.on_local_slot(slot, slot, inbox)
    }

    fn output(&self) -> Option<(Value, Option<Grade>)> {
        self.output.map(|v| (v, None))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::core::{Rational, SystemParams};
    use crate::netsim::{run_lockstep, FaultAssignment, SilentAdversary};

    fn run(n: usize, inputs: &[u8]) -> BTreeMap<ProcessorId, Value> {
        let params = SystemParams::new(n, 0, Rational::new(1, 4), 1).unwrap();
        let members: Vec<ProcessorId> = params.processors().collect();
        let inputs: BTreeMap<ProcessorId, Value> = inputs
            .iter()
            .enumerate()
            .map(|(i, &b)| (ProcessorId(i as u32), Value::from_bit(b).unwrap()))
            .collect();
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
        for p in params.processors() {
            machines.insert(p, Box::new(BaseCaseP::new(members.clone(), p, inputs[&p])) as _);
        }
        let trace = run_lockstep(
            &params,
            &mut machines,
            &inputs,
            &FaultAssignment::all_correct(),
            &mut SilentAdversary,
            BaseCaseP::SLOT_BUDGET,
        )
        .unwrap();
        trace.outputs.iter().map(|(p, o)| (*p, o.value)).collect()
    }

    #[test]
    fn singleton_outputs_input() {
        let out = run(1, &[1]);
        assert_eq!(out[&ProcessorId(0)], Value::ONE);
    }

    #[test]
    fn pair_adopts_lowest_id_value() {
        let out = run(2, &[0, 1]);
        assert_eq!(out[&ProcessorId(0)], Value::ZERO);
        assert_eq!(out[&ProcessorId(1)], Value::ZERO);
    }

    #[test]
    fn pair_unanimous() {
        let out = run(2, &[1, 1]);
        assert_eq!(out[&ProcessorId(0)], Value::ONE);
        assert_eq!(out[&ProcessorId(1)], Value::ONE);
    }
}
