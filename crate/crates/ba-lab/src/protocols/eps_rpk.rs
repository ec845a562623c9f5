//! Sampled Recursive Phase King: the all-to-all exchanges of the recursive
//! protocol are replaced by pushes along a fixed sampling choice, trading
//! exact agreement for epsilon-agreement at near-linear communication.
//!
//! Each round has three steps. Step 1: push the current value to everyone
//! that samples you; classify your own sampled responses to a response value
//! (or bot). Step 2: push the response value likewise; classify to a graded
//! value. Step 3: the round's committee recursively runs the same protocol
//! (or the two-processor base case), members push their outputs to their
//! samplers, and non-grade-2 processors adopt the sampled majority.
//!
//! Slot schedule for a node with children C1, C2 of budgets T1, T2 (leaves
//! of size <= 2 run the base case with budget 2):
//!
//! ```text
//! local s        push value (step 1 / 4)
//! local s+1      classify, push response (step 2 / 5)
//! local s+2      classify responses; child starts (child local = local-s-2)
//! local s+1+Tc   child members push their child output (child's final slot)
//! local s+2+Tc   adopt sampled committee majority unless grade 2
//! ```
//!
//! with s = 0 for round 1 and s = 3 + T1 for round 2; total budget
//! 6 + T1 + T2. Messages from processors outside a receiver's sample list
//! for the slot's step are discarded before classification.

use std::rc::Rc;

use crate::core::{
    majority_of, partition_committees, CommitteeNode, Grade, Message, ProcessorId, Rational,
    Value,
};
use crate::netsim::ProtocolMachine;
use crate::protocols::base_p::BaseCaseP;
use crate::protocols::wire;
use crate::sampling::{SamplingChoice, SmpError, SmpIndex};

/// Response-value threshold: at least `k(2/3 - eps/2)` of the sampled slots
/// must report `b`. Exact rational comparison; at most one value can qualify
/// since `2 (2/3 - eps/2) > 1` for `eps < 2/3`.
pub fn classify_step1(received: &[Value], k: usize, epsilon: Rational) -> Option<Value> {
    let threshold = Rational::from_integer(k as i64)
        * (Rational::new(2, 3) - epsilon / Rational::from_integer(2));
    Value::both().into_iter().find(|b| {
        let count = received.iter().filter(|v| *v == b).count();
        Rational::from_integer(count as i64) >= threshold
    })
}

/// Graded classification of step-2 responses. Bot (`Some(None)`) and silence
/// (absence from the multiset) never count toward a value.
pub fn classify_step2(
    responses: &[Option<Value>],
    k: usize,
    current: Value,
) -> (Value, Grade) {
    let count = |b: Value| responses.iter().filter(|r| **r == Some(b)).count() as i64;
    let k = k as i64;
    let (c0, c1) = (count(Value::ZERO), count(Value::ONE));
    // count >= 2k/3 without division: 3*count >= 2k. At most one value can
    // reach it since 2 * 2/3 > 1.
    if 3 * c0 >= 2 * k {
        (Value::ZERO, Grade::G2)
    } else if 3 * c1 >= 2 * k {
        (Value::ONE, Grade::G2)
    } else {
        match (3 * c0 >= k, 3 * c1 >= k) {
            (true, false) => (Value::ZERO, Grade::G1),
            (false, true) => (Value::ONE, Grade::G1),
            _ => (current, Grade::G0),
        }
    }
}

/// Recursion tree and slot schedule, shared by every machine of an instance.
#[derive(Debug)]
pub struct EpsRpkSchedule {
    pub node: CommitteeNode,
    pub budget: usize,
    pub children: Option<(Rc<EpsRpkSchedule>, Rc<EpsRpkSchedule>)>,
    slot_depth: Vec<usize>,
}

impl EpsRpkSchedule {
    pub fn new(n: usize) -> Rc<EpsRpkSchedule> {
        Self::build(CommitteeNode::root(n), 0)
    }

    fn build(node: CommitteeNode, depth: usize) -> Rc<EpsRpkSchedule> {
        if node.size() <= 2 {
            return Rc::new(EpsRpkSchedule {
                node,
                budget: BaseCaseP::SLOT_BUDGET,
                children: None,
                slot_depth: vec![depth; BaseCaseP::SLOT_BUDGET],
            });
        }
        let (c1, c2) = partition_committees(&node).expect("size > 2");
        let child1 = Self::build(c1, depth + 1);
        let child2 = Self::build(c2, depth + 1);
        let (t1, t2) = (child1.budget, child2.budget);
        let budget = 6 + t1 + t2;
        let mut slot_depth = vec![depth; budget];
        for (start, child) in [(2usize, &child1), (3 + t1 + 2, &child2)] {
            for (i, d) in child.slot_depth.iter().enumerate() {
                slot_depth[start + i] = *d;
            }
            // The child's final slot carries this node's output pushes.
            slot_depth[start + child.budget - 1] = depth;
        }
        Rc::new(EpsRpkSchedule { node, budget, children: Some((child1, child2)), slot_depth })
    }

    pub fn depth_of_slot(&self, slot: usize) -> usize {
        self.slot_depth.get(slot).copied().unwrap_or(0)
    }
}

struct NodeState {
    sched: Rc<EpsRpkSchedule>,
    smp: Rc<SmpIndex>,
    epsilon: Rational,
    id: ProcessorId,
    value: Value,
    grade: Grade,
    base: Option<BaseCaseP>,
    child: Option<Box<NodeState>>,
    output: Option<Value>,
}

impl NodeState {
    fn new(
        sched: Rc<EpsRpkSchedule>,
        smp: Rc<SmpIndex>,
        epsilon: Rational,
        id: ProcessorId,
        input: Value,
    ) -> NodeState {
        let base = (sched.node.size() <= 2)
            .then(|| BaseCaseP::new(sched.node.members.clone(), id, input));
        NodeState {
            sched,
            smp,
            epsilon,
            id,
            value: input,
            grade: Grade::G0,
            base,
            child: None,
            output: None,
        }
    }

    fn push_to_samplers(&self, step: u8, slot: usize, payload: Vec<u8>) -> Vec<Message> {
        self.smp
            .samplers_of(&self.sched.node.path, step, self.id)
            .iter()
            .map(|&to| Message::unsigned(self.id, to, slot, payload.clone()))
            .collect()
    }

    /// The multiset of values received this slot from one's own sampled set,
    /// with multiplicity per duplicate sample.
    fn sampled_values(&self, step: u8, inbox: &[Message]) -> Vec<Value> {
        let list = self.smp.samples(&self.sched.node.path, step, self.id);
        let received = wire::latest_values(inbox, |s| list.contains(&s));
        list.iter().filter_map(|p| received.get(p).copied()).collect()
    }

    fn sampled_responses(&self, step: u8, inbox: &[Message]) -> Vec<Option<Value>> {
        let list = self.smp.samples(&self.sched.node.path, step, self.id);
        let received = wire::latest_responses(inbox, |s| list.contains(&s));
        list.iter().filter_map(|p| received.get(p).copied()).collect()
    }

    fn on_slot(&mut self, local: usize, slot: usize, inbox: &[Message]) -> Vec<Message> {
        if let Some(base) = self.base.as_mut() {
            let sends = base.on_local_slot(local, slot, inbox);
            self.output = base.value_output();
            return sends;
        }
        let (c1, c2) = self.sched.children.as_ref().expect("non-leaf").clone();
        let (t1, t2) = (c1.budget, c2.budget);
        let s2 = 3 + t1;
        let (round, start, child_sched, t_child, step_val, step_resp, step_out) =
            if local < s2 {
                (1, 0, c1, t1, 1u8, 2u8, 3u8)
            } else {
                (2, s2, c2, t2, 4u8, 5u8, 6u8)
            };
        let rel = local - start;
        let k = self.smp.k;

        if rel == 0 {
            return self.push_to_samplers(step_val, slot, wire::value_payload(self.value));
        }
        if rel == 1 {
            let received = self.sampled_values(step_val, inbox);
            let response = classify_step1(&received, k, self.epsilon);
            return self.push_to_samplers(step_resp, slot, wire::response_payload(response));
        }

        let mut sends = Vec::new();
        if rel == 2 {
            let responses = self.sampled_responses(step_resp, inbox);
            let (v, g) = classify_step2(&responses, k, self.value);
            self.value = v;
            self.grade = g;
            self.child = child_sched.node.members.contains(&self.id).then(|| {
                Box::new(NodeState::new(
                    child_sched.clone(),
                    self.smp.clone(),
                    self.epsilon,
                    self.id,
                    self.value,
                ))
            });
        }

        if (2..2 + t_child).contains(&rel) {
            if let Some(child) = self.child.as_mut() {
                sends.extend(child.on_slot(rel - 2, slot, inbox));
                if rel == 2 + t_child - 1 {
                    let out = child.output.expect("child output due by its budget");
                    sends.extend(self.push_to_samplers(
                        step_out,
                        slot,
                        wire::value_payload(out),
                    ));
                }
            }
            return sends;
        }

        if rel == 2 + t_child {
            let reported = self.sampled_values(step_out, inbox);
            if self.grade < Grade::G2 && !reported.is_empty() {
                self.value = majority_of(reported);
            }
            if round == 2 {
                self.output = Some(self.value);
            }
        }
        sends
    }
}

pub struct EpsRpkMachine {
    root: NodeState,
    budget: usize,
}

impl EpsRpkMachine {
    pub fn new(
        schedule: Rc<EpsRpkSchedule>,
        smp: Rc<SmpIndex>,
        epsilon: Rational,
        id: ProcessorId,
        input: Value,
    ) -> EpsRpkMachine {
        let budget = schedule.budget;
        EpsRpkMachine { root: NodeState::new(schedule, smp, epsilon, id, input), budget }
    }

    /// Build from a sampling choice, validating it against the recursion tree
    /// (wrong sample counts or out-of-set samples are rejected here).
    pub fn from_choice(
        n: usize,
        k: usize,
        epsilon: Rational,
        choice: &SamplingChoice,
        id: ProcessorId,
        input: Value,
    ) -> Result<EpsRpkMachine, SmpError> {
        let smp = Rc::new(SmpIndex::build(choice, n, k)?);
        Ok(EpsRpkMachine::new(EpsRpkSchedule::new(n), smp, epsilon, id, input))
    }

    /// The probabilistic variant: the sampling choice is drawn from the seed
    /// up front, uniformly with replacement, then pushed like the fixed one.
    pub fn probabilistic(
        n: usize,
        k: usize,
        epsilon: Rational,
        seed: u64,
        id: ProcessorId,
        input: Value,
    ) -> EpsRpkMachine {
        Self::from_choice(n, k, epsilon, &SamplingChoice::Seeded(seed), id, input)
            .expect("seeded choices are well-formed")
    }
}

impl ProtocolMachine for EpsRpkMachine {
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

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::core::{ExecutionTrace, Fault, SystemParams};
    use crate::netsim::{run_lockstep, AdversaryStrategy, FaultAssignment, SilentAdversary};
    use crate::sampling::uniform_smp;

    fn vals(zeros: usize, ones: usize) -> Vec<Value> {
        let mut v = vec![Value::ZERO; zeros];
        v.extend(vec![Value::ONE; ones]);
        v
    }

    #[test]
    fn classify_step1_thresholds() {
        let e6 = Rational::new(1, 6);
        // k=12, eps=1/6: threshold 12*(2/3 - 1/12) = 7.
        assert_eq!(classify_step1(&vals(0, 9), 12, e6), Some(Value::ONE));
        assert_eq!(classify_step1(&vals(6, 6), 12, e6), None);
        // k=3, eps=1/6: threshold 3*(2/3 - 1/12) = 7/4; two 0s qualify.
        assert_eq!(classify_step1(&vals(2, 0), 3, e6), Some(Value::ZERO));
        assert_eq!(classify_step1(&vals(1, 0), 3, e6), None);
    }

    #[test]
    fn classify_step1_at_most_one_value() {
        // Enumerate all multisets over {0,1,silence} for k <= 12: never can
        // both values qualify, across an epsilon grid.
        for k in 1..=12usize {
            for &eps in &[Rational::new(1, 24), Rational::new(1, 6), Rational::new(1, 4)] {
                for zeros in 0..=k {
                    for ones in 0..=(k - zeros) {
                        let threshold = Rational::from_integer(k as i64)
                            * (Rational::new(2, 3) - eps / Rational::from_integer(2));
                        let q0 = Rational::from_integer(zeros as i64) >= threshold;
                        let q1 = Rational::from_integer(ones as i64) >= threshold;
                        assert!(!(q0 && q1), "k={k} zeros={zeros} ones={ones}");
                        let got = classify_step1(&vals(zeros, ones), k, eps);
                        match got {
                            Some(Value::ZERO) => assert!(q0),
                            Some(Value::ONE) => assert!(q1),
                            Some(_) => unreachable!(),
                            None => assert!(!q0 && !q1),
                        }
                    }
                }
            }
        }
    }

    fn resp(zeros: usize, ones: usize, bots: usize) -> Vec<Option<Value>> {
        let mut v = vec![Some(Value::ZERO); zeros];
        v.extend(vec![Some(Value::ONE); ones]);
        v.extend(vec![None; bots]);
        v
    }

    #[test]
    fn classify_step2_examples() {
        assert_eq!(
            classify_step2(&resp(0, 8, 4), 12, Value::ZERO),
            (Value::ONE, Grade::G2)
        );
        assert_eq!(
            classify_step2(&resp(3, 4, 5), 12, Value::ZERO),
            (Value::ONE, Grade::G1)
        );
        assert_eq!(
            classify_step2(&resp(5, 5, 2), 12, Value::ZERO),
            (Value::ZERO, Grade::G0)
        );
        // Silence alone never produces a value.
        assert_eq!(classify_step2(&[], 12, Value::ONE), (Value::ONE, Grade::G0));
    }

    #[test]
    fn budget_matches_doubling_recurrence() {
        // Equal child budgets give t* = 2 (3 + t*_child) exactly.
        for n in [4usize, 8, 16, 32] {
            let sched = EpsRpkSchedule::new(n);
            let (c1, c2) = sched.children.as_ref().unwrap();
            assert_eq!(c1.budget, c2.budget, "n={n}");
            assert_eq!(sched.budget, 2 * (3 + c1.budget), "n={n}");
        }
        assert_eq!(EpsRpkSchedule::new(2).budget, BaseCaseP::SLOT_BUDGET);
    }

    pub fn run_eps_rpk(
        params: &SystemParams,
        k: usize,
        choice: &SamplingChoice,
        inputs: &BTreeMap<ProcessorId, Value>,
        faults: FaultAssignment,
        adversary: &mut dyn AdversaryStrategy,
    ) -> ExecutionTrace {
        let schedule = EpsRpkSchedule::new(params.n);
        let smp = Rc::new(SmpIndex::build(choice, params.n, k).unwrap());
        let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
        for p in params.processors() {
            if faults.status(p) != Fault::Byzantine {
                machines.insert(
                    p,
                    Box::new(EpsRpkMachine::new(
                        schedule.clone(),
                        smp.clone(),
                        params.epsilon,
                        p,
                        inputs[&p],
                    )) as _,
                );
            }
        }
        let budget = schedule.budget;
        run_lockstep(params, &mut machines, inputs, &faults, adversary, budget).unwrap()
    }

    fn inputs_of(bits: &[u8]) -> BTreeMap<ProcessorId, Value> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| (ProcessorId(i as u32), Value::from_bit(b).unwrap()))
            .collect()
    }

    #[test]
    fn unanimous_inputs_all_correct() {
        let params = SystemParams::new(6, 0, Rational::new(1, 4), 6).unwrap();
        let smp = uniform_smp(6, 6).unwrap();
        let trace = run_eps_rpk(
            &params,
            6,
            &smp,
            &inputs_of(&[1; 6]),
            FaultAssignment::all_correct(),
            &mut SilentAdversary,
        );
        for p in params.processors() {
            assert_eq!(trace.outputs[&p].value, Value::ONE);
        }
    }

    #[test]
    fn silent_byzantine_common_output() {
        let params = SystemParams::new(6, 1, Rational::new(1, 8), 6).unwrap();
        let smp = uniform_smp(6, 6).unwrap();
        let trace = run_eps_rpk(
            &params,
            6,
            &smp,
            &inputs_of(&[0, 0, 0, 0, 0, 1]),
            FaultAssignment::byzantine_only([ProcessorId(5)]),
            &mut SilentAdversary,
        );
        let v = trace.outputs[&ProcessorId(0)].value;
        for p in 0..5u32 {
            assert_eq!(trace.outputs[&ProcessorId(p)].value, v, "p{p}");
        }
        assert_eq!(v, Value::ZERO);
    }

    #[test]
    fn probabilistic_variant_is_deterministic() {
        let params = SystemParams::new(6, 1, Rational::new(1, 8), 6).unwrap();
        let choice = SamplingChoice::Seeded(99);
        let inputs = inputs_of(&[1, 0, 1, 0, 1, 0]);
        let faults = FaultAssignment::byzantine_only([ProcessorId(2)]);
        let a = run_eps_rpk(&params, 6, &choice, &inputs, faults.clone(), &mut SilentAdversary);
        let b = run_eps_rpk(&params, 6, &choice, &inputs, faults, &mut SilentAdversary);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn malformed_smp_is_rejected() {
        let mut map = match uniform_smp(6, 6).unwrap() {
            SamplingChoice::Explicit(m) => m,
            _ => unreachable!(),
        };
        // Sample outside the step's response set.
        map.insert((vec![1], 3, ProcessorId(0)), vec![ProcessorId(5); 6]);
        let err = EpsRpkMachine::from_choice(
            6,
            6,
            Rational::new(1, 4),
            &SamplingChoice::Explicit(map),
            ProcessorId(0),
            Value::ZERO,
        )
        .err()
        .expect("malformed choice must be rejected");
        assert!(matches!(err, SmpError::SampleOutsideResponseSet { .. }));
    }
}
