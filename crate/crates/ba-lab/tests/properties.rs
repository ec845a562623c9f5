//! Property tests for the pure building blocks.

use std::collections::BTreeMap;

use proptest::prelude::*;

use ba_lab::core::{
    majority_of, partition_committees, rat_serde, CommitteeNode, Grade, ProcessorId, Rational,
    Value,
};
use ba_lab::netsim::{run_lockstep, FaultAssignment, ProtocolMachine, SilentAdversary};
use ba_lab::protocols::{classify_step1, classify_step2, GradecastMachine};
use ba_lab::reductions::{extract_f, ExtractOutcome, SignedMessageSet, SignedOutput};
use ba_lab::sampling::{
    is_bad_for, smp_nodes, uniform_smp, MemberStatus, SamplingChoice, StepConfiguration,
};

proptest! {
    #[test]
    fn rational_display_parse_round_trip(p in -1000i64..1000, q in 1i64..1000) {
        let r = Rational::new(p, q);
        let parsed = rat_serde::parse_rational(&format!("{}/{}", r.numer(), r.denom())).unwrap();
        prop_assert_eq!(parsed, r);
    }

    #[test]
    fn majority_is_permutation_invariant(bits in proptest::collection::vec(0u8..2, 0..40)) {
        let values: Vec<Value> = bits.iter().map(|&b| Value::from_bit(b).unwrap()).collect();
        let mut reversed = values.clone();
        reversed.reverse();
        prop_assert_eq!(majority_of(values.clone()), majority_of(reversed));
        let ones = bits.iter().filter(|&&b| b == 1).count();
        let expected = if 2 * ones > bits.len() { Value::ONE } else { Value::ZERO };
        prop_assert_eq!(majority_of(values), expected);
    }

    #[test]
    fn committee_partition_is_a_balanced_split(n in 2usize..400) {
        let root = CommitteeNode::root(n);
        let (c1, c2) = partition_committees(&root).unwrap();
        prop_assert_eq!(c1.size(), n.div_ceil(2));
        prop_assert_eq!(c2.size(), n / 2);
        let mut merged = c1.members.clone();
        merged.extend(&c2.members);
        prop_assert_eq!(merged, root.members);
    }

    #[test]
    fn classify_step1_yields_at_most_one_qualified_value(
        bits in proptest::collection::vec(0u8..2, 1..30),
        num in 1i64..8,
    ) {
        let epsilon = Rational::new(num, 24);
        prop_assume!(epsilon < Rational::new(1, 3));
        let received: Vec<Value> = bits.iter().map(|&b| Value::from_bit(b).unwrap()).collect();
        let k = received.len();
        let threshold = Rational::from_integer(k as i64)
            * (Rational::new(2, 3) - epsilon / Rational::from_integer(2));
        match classify_step1(&received, k, epsilon) {
            Some(v) => {
                let count = received.iter().filter(|x| **x == v).count();
                prop_assert!(Rational::from_integer(count as i64) >= threshold);
                // The threshold exceeds k/2, so the other value cannot also
                // qualify.
                let other = received.iter().filter(|x| **x == v.flip()).count();
                prop_assert!(Rational::from_integer(other as i64) < threshold);
            }
            None => {
                for v in Value::both() {
                    let count = received.iter().filter(|x| **x == v).count();
                    prop_assert!(Rational::from_integer(count as i64) < threshold);
                }
            }
        }
    }

    #[test]
    fn classify_step2_grades_track_report_counts(
        codes in proptest::collection::vec(0u8..3, 1..30),
        current in 0u8..2,
    ) {
        let responses: Vec<Option<Value>> = codes
            .iter()
            .map(|&c| (c < 2).then(|| Value::from_bit(c).unwrap()))
            .collect();
        let k = responses.len();
        let current = Value::from_bit(current).unwrap();
        let (v, g) = classify_step2(&responses, k, current);
        let count = responses.iter().filter(|r| **r == Some(v)).count();
        match g {
            Grade::G2 => prop_assert!(3 * count >= 2 * k),
            Grade::G1 => prop_assert!(3 * count >= k),
            _ => prop_assert_eq!(v, current),
        }
    }

    #[test]
    fn extract_ignores_members_outside_the_committee(
        in_bits in proptest::collection::vec(0u8..2, 0..8),
        out_bits in proptest::collection::vec(0u8..2, 0..8),
        m in 1usize..8,
        f in 0usize..3,
    ) {
        let committee: Vec<SignedOutput> = in_bits
            .iter()
            .enumerate()
            .map(|(i, &b)| SignedOutput {
                member: ProcessorId((i % m) as u32),
                value: Value::from_bit(b).unwrap(),
            })
            .collect();
        let base = extract_f(&SignedMessageSet::from_outputs(committee.clone()), m, f);
        let noisy: Vec<SignedOutput> = committee
            .into_iter()
            .chain(out_bits.iter().enumerate().map(|(i, &b)| SignedOutput {
                member: ProcessorId((m + i) as u32),
                value: Value::from_bit(b).unwrap(),
            }))
            .collect();
        prop_assert_eq!(extract_f(&SignedMessageSet::from_outputs(noisy), m, f), base);
    }

    #[test]
    fn extract_on_a_unanimous_full_committee_returns_that_value(
        m in 1usize..8,
        f in 0usize..3,
        bit in 0u8..2,
    ) {
        prop_assume!(f < m);
        let v = Value::from_bit(bit).unwrap();
        let outputs = (0..m as u32).map(|i| SignedOutput { member: ProcessorId(i), value: v });
        let got = extract_f(&SignedMessageSet::from_outputs(outputs), m, f);
        prop_assert_eq!(got, if bit == 1 { ExtractOutcome::One } else { ExtractOutcome::Zero });
    }

    #[test]
    fn badness_is_invariant_under_sample_duplication(
        statuses in proptest::collection::vec(0u8..4, 3..8),
        picks in proptest::collection::vec(0usize..8, 1..12),
        num in 1i64..8,
    ) {
        let epsilon = Rational::new(num, 24);
        prop_assume!(epsilon < Rational::new(1, 3));
        let assignment: BTreeMap<ProcessorId, MemberStatus> = statuses
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let status = match c {
                    0 => MemberStatus::Byzantine,
                    1 => MemberStatus::Correct(Some(Value::ZERO)),
                    2 => MemberStatus::Correct(Some(Value::ONE)),
                    _ => MemberStatus::Correct(None),
                };
                (ProcessorId(i as u32), status)
            })
            .collect();
        let config = StepConfiguration { step: 1, assignment };
        let samples: Vec<ProcessorId> = picks
            .iter()
            .map(|&i| ProcessorId((i % statuses.len()) as u32))
            .collect();
        let doubled: Vec<ProcessorId> =
            samples.iter().chain(samples.iter()).copied().collect();
        prop_assert_eq!(
            is_bad_for(&samples, &config, epsilon),
            is_bad_for(&doubled, &config, epsilon)
        );
    }

    #[test]
    fn seeded_choices_are_deterministic_and_well_formed(seed in 0u64..5000) {
        let (n, k) = (6usize, 4usize);
        let choice = SamplingChoice::Seeded(seed);
        let again = SamplingChoice::Seeded(seed);
        for node in smp_nodes(n) {
            for step in 1..=6u8 {
                for member in node.node.members.clone() {
                    let a = choice.samples(&node, step, member, k).unwrap();
                    let b = again.samples(&node, step, member, k).unwrap();
                    prop_assert_eq!(&a, &b);
                    prop_assert_eq!(a.len(), k);
                    let set = node.response_set(step);
                    prop_assert!(a.iter().all(|p| set.contains(p)));
                }
            }
        }
    }
}

#[test]
fn uniform_choice_samples_every_responder_equally() {
    let (n, k) = (8usize, 8usize);
    let smp = uniform_smp(n, k).unwrap();
    for node in smp_nodes(n) {
        for step in 1..=6u8 {
            let set = node.response_set(step);
            for member in node.node.members.clone() {
                let samples = smp.samples(&node, step, member, k).unwrap();
                for target in set {
                    let count = samples.iter().filter(|p| *p == target).count();
                    assert_eq!(count, k / set.len(), "node {:?} step {step}", node.node.path);
                }
            }
        }
    }
}

#[test]
fn execution_trace_survives_a_json_round_trip() {
    let params = ba_lab::core::SystemParams::new(4, 1, Rational::new(1, 24), 1).unwrap();
    let inputs: BTreeMap<ProcessorId, Value> = params
        .processors()
        .map(|p| (p, Value::from_bit((p.0 % 2) as u8).unwrap()))
        .collect();
    let faults = FaultAssignment::byzantine_only([ProcessorId(3)]);
    let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
    for p in params.processors().take(3) {
        machines.insert(p, Box::new(GradecastMachine::new(4, 1, p, inputs[&p])));
    }
    let trace =
        run_lockstep(&params, &mut machines, &inputs, &faults, &mut SilentAdversary, 3).unwrap();
    let json = serde_json::to_string_pretty(&trace).unwrap();
    let back: ba_lab::core::ExecutionTrace = serde_json::from_str(&json).unwrap();
    assert_eq!(serde_json::to_string_pretty(&back).unwrap(), json);
}

#[test]
fn smp_file_round_trips_through_json() {
    let smp = uniform_smp(6, 6).unwrap();
    let file =
        ba_lab::sampling::SmpFile::from_choice(&smp, 6, 6, Rational::new(1, 4), None).unwrap();
    let json = serde_json::to_string(&file).unwrap();
    let back: ba_lab::sampling::SmpFile = serde_json::from_str(&json).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.to_choice(), smp);
}
