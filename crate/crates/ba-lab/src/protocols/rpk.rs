//! Recursive Phase King: the `f + 1` leader rounds are replaced by two
//! rounds, each handing the leader role to a committee that recursively runs
//! the same protocol.
//!
//! Slot schedule for a node over `m >= 2` members with children C1, C2 of
//! budgets T1, T2 (a singleton has budget 1 and outputs its value on the
//! spot):
//!
//! ```text
//! local 0..3          gradecast on the current value (decide at 2)
//! local 2..2+T1       recursive call on C1 (child local slot = local - 2)
//! local 2+T1-1        C1 members broadcast their recursive output
//! local 2+T1          adopt the committee majority unless grade 2
//! local s2 = 3+T1     round 2, same shape with C2; output at s2+2+T2
//! ```
//!
//! Total budget: `6 + T1 + T2`. All processors compute this schedule from
//! `n` alone, so committee responses are due at globally agreed slots.

use std::rc::Rc;

use crate::core::{
    majority_of, partition_committees, CommitteeNode, Grade, Message, ProcessorId, Value,
};
use crate::netsim::ProtocolMachine;
use crate::protocols::gradecast::GradecastCore;
use crate::protocols::wire;

/// Precomputed recursion tree and slot schedule, shared by every machine of
/// one protocol instance.
#[derive(Debug)]
pub struct RpkSchedule {
    pub node: CommitteeNode,
    /// Fault threshold used for this node's gradecast quorums.
    pub f: usize,
    pub budget: usize,
    pub children: Option<(Rc<RpkSchedule>, Rc<RpkSchedule>)>,
    /// Recursion depth of the messages sent at each local slot.
    slot_depth: Vec<usize>,
}

/// Largest committee-local fault budget strictly below a third.
pub fn local_fault_budget(m: usize) -> usize {
    (m.max(1) - 1) / 3
}

impl RpkSchedule {
    pub fn new(n: usize, f: usize) -> Rc<RpkSchedule> {
        Self::build(CommitteeNode::root(n), f, 0)
    }

    fn build(node: CommitteeNode, f: usize, depth: usize) -> Rc<RpkSchedule> {
        if node.size() < 2 {
            return Rc::new(RpkSchedule {
                node,
                f: 0,
                budget: 1,
                children: None,
                slot_depth: vec![depth],
            });
        }
        let (c1, c2) = partition_committees(&node).expect("size >= 2");
        let child1 = Self::build(c1.clone(), local_fault_budget(c1.size()), depth + 1);
        let child2 = Self::build(c2.clone(), local_fault_budget(c2.size()), depth + 1);
        let (t1, t2) = (child1.budget, child2.budget);
        let budget = 6 + t1 + t2;
        let mut slot_depth = vec![depth; budget];
        for (start, child) in [(2usize, &child1), (3 + t1 + 2, &child2)] {
            for (i, d) in child.slot_depth.iter().enumerate() {
                slot_depth[start + i] = *d;
            }
            // The child's final slot carries this node's output broadcast.
            slot_depth[start + child.budget - 1] = depth;
        }
        Rc::new(RpkSchedule {
            node,
            f,
            budget,
            children: Some((child1, child2)),
            slot_depth,
        })
    }

    pub fn depth_of_slot(&self, slot: usize) -> usize {
        self.slot_depth.get(slot).copied().unwrap_or(0)
    }
}

/// Per-node runtime state of one processor.
struct NodeState {
    sched: Rc<RpkSchedule>,
    id: ProcessorId,
    value: Value,
    grade: Grade,
    gc: Option<GradecastCore>,
    child: Option<Box<NodeState>>,
    output: Option<Value>,
}

impl NodeState {
    fn new(sched: Rc<RpkSchedule>, id: ProcessorId, input: Value) -> NodeState {
        NodeState {
            sched,
            id,
            value: input,
            grade: Grade::G0,
            gc: None,
            child: None,
            output: None,
        }
    }

    fn members(&self) -> &[ProcessorId] {
        &self.sched.node.members
    }

    fn on_slot(&mut self, local: usize, slot: usize, inbox: &[Message]) -> Vec<Message> {
        if self.sched.node.size() < 2 {
            // Singleton: the member's value is its output, immediately.
            if local == 0 {
                self.output = Some(self.value);
            }
            return Vec::new();
        }
        let (c1, c2) = self.sched.children.as_ref().expect("non-singleton").clone();
        let (t1, t2) = (c1.budget, c2.budget);
        let s2 = 3 + t1;
        let round = if local < s2 { 1 } else { 2 };
        let (start, child_sched, t_child) =
            if round == 1 { (0, c1, t1) } else { (s2, c2, t2) };
        let rel = local - start;

        if rel == 0 {
            let gc = GradecastCore::new(
                self.members().to_vec(),
                self.sched.f,
                self.id,
                self.value,
            );
            let sends = gc.slot0_sends(slot);
            self.gc = Some(gc);
            return sends;
        }
        if rel == 1 {
            let gc = self.gc.as_ref().expect("gradecast started");
            let received = gc.values_from_members(inbox);
            return gc.slot1_sends(slot, &received);
        }

        let mut sends = Vec::new();
        if rel == 2 {
            let gc = self.gc.as_mut().expect("gradecast started");
            let received = gc.values_from_members(inbox);
            let (v, g) = gc.slot2_decide(&received);
            self.value = v;
            self.grade = g;
            if child_sched.node.members.contains(&self.id) {
                self.child = Some(Box::new(NodeState::new(
                    child_sched.clone(),
                    self.id,
                    self.value,
                )));
            } else {
                self.child = None;
            }
        }

        if (2..2 + t_child).contains(&rel) {
            if let Some(child) = self.child.as_mut() {
                sends.extend(child.on_slot(rel - 2, slot, inbox));
                if rel == 2 + t_child - 1 {
                    let out = child.output.expect("child output due by its budget");
                    sends.extend(wire::broadcast(
                        self.id,
                        slot,
                        self.members(),
                        wire::value_payload(out),
                    ));
                }
            }
            return sends;
        }

        if rel == 2 + t_child {
            let committee = &child_sched.node.members;
            let received = wire::latest_values(inbox, |s| committee.contains(&s));
            if self.grade < Grade::G2 {
                self.value = majority_of(received.values().copied());
            }
            if round == 2 {
                self.output = Some(self.value);
            }
        }
        sends
    }
}

pub struct RpkMachine {
    root: NodeState,
    budget: usize,
}

impl RpkMachine {
    pub fn new(schedule: Rc<RpkSchedule>, id: ProcessorId, input: Value) -> RpkMachine {
        let budget = schedule.budget;
        RpkMachine { root: NodeState::new(schedule, id, input), budget }
    }
}

impl ProtocolMachine for RpkMachine {
    fn slot_budget(&self) -> usize {
        self.budget
    }

    fn on_slot(&mut self, slot: usize, inbox: &[Message]) -> Vec<Message> {
        if slot >= self.budget {
            return Vec::new();
        }
        self.root.on_slot(slot, slot, inbox)
    }

    fn output(&self) -> Option<(Value, Option<Grade>)> {
        self.root.output.map(|v| (v, None))
    }
}
