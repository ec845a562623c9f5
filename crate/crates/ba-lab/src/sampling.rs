//! Sampling choices, badness verification, derandomization search, and the
//! concentration-bound calculator for the sampled recursive protocol.
//!
//! A sampling choice fixes, for every recursion node, every step 1..6 and
//! every member, the ordered list of exactly `k` processors that member
//! queries (duplicates allowed). Steps 1, 2, 4, 5 query the node's members;
//! step 3 queries the first child committee, step 6 the second.

use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    partition_committees, rat_serde, CommitteeNode, ProcessorId, Rational, Value,
};

pub type NodePath = Vec<u8>;

#[derive(Debug, Error, PartialEq)]
pub enum SmpError {
    #[error("sampling choice missing entry for node {path:?} step {step} sampler {sampler}")]
    MissingEntry { path: NodePath, step: u8, sampler: ProcessorId },
    #[error("entry for node {path:?} step {step} sampler {sampler} has {got} samples, expected {expected}")]
    WrongSampleCount { path: NodePath, step: u8, sampler: ProcessorId, got: usize, expected: usize },
    #[error("entry for node {path:?} step {step} sampler {sampler} samples {target} outside the response set")]
    SampleOutsideResponseSet { path: NodePath, step: u8, sampler: ProcessorId, target: ProcessorId },
    #[error("uniform sampling needs k divisible by response-set size {0}")]
    NotDivisible(usize),
    #[error("response set of size {size} exceeds the enumeration guard {guard}")]
    EnumerationTooLarge { size: usize, guard: usize },
    #[error("monte carlo estimation needs at least one trial")]
    ZeroTrials,
    #[error("step must be in 1..=6, got {0}")]
    BadStep(u8),
    #[error("epsilon must lie strictly in (0, 1/3), got {0}")]
    BadEpsilon(Rational),
    #[error("certificate mismatch: recorded verdict {recorded}, re-check found {actual}")]
    CertificateMismatch { recorded: String, actual: String },
    #[error("no certificate present in sampling-choice file")]
    MissingCertificate,
}

/// One recursion node that runs the sampled protocol (size > 2), with its
/// child committees.
#[derive(Debug, Clone)]
pub struct SmpNode {
    pub node: CommitteeNode,
    pub c1: CommitteeNode,
    pub c2: CommitteeNode,
}

impl SmpNode {
    /// The processors that may be queried in a given step.
    pub fn response_set(&self, step: u8) -> &[ProcessorId] {
        match step {
            3 => &self.c1.members,
            6 => &self.c2.members,
            _ => &self.node.members,
        }
    }
}

/// All recursion nodes of size > 2 for an instance over `n` processors,
/// pre-order. Committees of size <= 2 run the base-case protocol and need no
/// sampling.
pub fn smp_nodes(n: usize) -> Vec<SmpNode> {
    let mut out = Vec::new();
    let mut stack = vec![CommitteeNode::root(n)];
    while let Some(node) = stack.pop() {
        if node.size() <= 2 {
            continue;
        }
        let (c1, c2) = partition_committees(&node).expect("size > 2");
        stack.push(c2.clone());
        stack.push(c1.clone());
        out.push(SmpNode { node, c1, c2 });
    }
    out.sort_by(|a, b| a.node.path.cmp(&b.node.path));
    out
}

/// A fixed sampling choice: either fully materialized lists, or a seed from
/// which lists are derived on demand (used for large sweeps where explicit
/// storage is wasteful). Both forms are deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SamplingChoice {
    Explicit(BTreeMap<(NodePath, u8, ProcessorId), Vec<ProcessorId>>),
    Seeded(u64),
}

fn seeded_rng(seed: u64, path: &[u8], step: u8, sampler: ProcessorId) -> ChaCha12Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let mut path_bits = 0u64;
    for (i, entry) in path.iter().enumerate().take(32) {
        if *entry == 2 {
            path_bits |= 1 << i;
        }
    }
    bytes[8..16].copy_from_slice(&path_bits.to_le_bytes());
    bytes[16] = path.len() as u8;
    bytes[17] = step;
    bytes[18..22].copy_from_slice(&sampler.0.to_le_bytes());
    ChaCha12Rng::from_seed(bytes)
}

impl SamplingChoice {
    /// The ordered k samples for one (node, step, sampler).
    pub fn samples(
        &self,
        node: &SmpNode,
        step: u8,
        sampler: ProcessorId,
        k: usize,
    ) -> Result<Vec<ProcessorId>, SmpError> {
        let response_set = node.response_set(step);
        match self {
            SamplingChoice::Explicit(map) => {
                let key = (node.node.path.clone(), step, sampler);
                let list = map.get(&key).ok_or(SmpError::MissingEntry {
                    path: node.node.path.clone(),
                    step,
                    sampler,
                })?;
                if list.len() != k {
                    return Err(SmpError::WrongSampleCount {
                        path: node.node.path.clone(),
                        step,
                        sampler,
                        got: list.len(),
                        expected: k,
                    });
                }
                for t in list {
                    if !response_set.contains(t) {
                        return Err(SmpError::SampleOutsideResponseSet {
                            path: node.node.path.clone(),
                            step,
                            sampler,
                            target: *t,
                        });
                    }
                }
                Ok(list.clone())
            }
            SamplingChoice::Seeded(seed) => {
                let mut rng = seeded_rng(*seed, &node.node.path, step, sampler);
                Ok((0..k)
                    .map(|_| response_set[rng.gen_range(0..response_set.len())])
                    .collect())
            }
        }
    }

    /// Materialize into the explicit form (canonically ordered by key).
    pub fn materialize(&self, n: usize, k: usize) -> Result<SamplingChoice, SmpError> {
        let mut map = BTreeMap::new();
        for node in smp_nodes(n) {
            for step in 1..=6u8 {
                for sampler in &node.node.members {
                    map.insert(
                        (node.node.path.clone(), step, *sampler),
                        self.samples(&node, step, *sampler, k)?,
                    );
                }
            }
        }
        Ok(SamplingChoice::Explicit(map))
    }
}

/// Exactly proportional sampling: every member of the response set is sampled
/// `k / |response set|` times by every sampler. Requires divisibility, and in
/// exchange every sampled fraction equals the population fraction exactly, so
/// the choice is never bad.
pub fn uniform_smp(n: usize, k: usize) -> Result<SamplingChoice, SmpError> {
    let mut map = BTreeMap::new();
    for node in smp_nodes(n) {
        for step in 1..=6u8 {
            let response_set = node.response_set(step);
            if k % response_set.len() != 0 {
                return Err(SmpError::NotDivisible(response_set.len()));
            }
            let per = k / response_set.len();
            let list: Vec<ProcessorId> = response_set
                .iter()
                .flat_map(|p| std::iter::repeat(*p).take(per))
                .collect();
            for sampler in &node.node.members {
                map.insert((node.node.path.clone(), step, *sampler), list.clone());
            }
        }
    }
    Ok(SamplingChoice::Explicit(map))
}

/// Pre-resolved sample lists plus reverse ("who samples me") indexes for one
/// protocol instance; shared by all machines of a simulation.
#[derive(Debug)]
pub struct SmpIndex {
    pub n: usize,
    pub k: usize,
    pub nodes: Vec<SmpNode>,
    forward: BTreeMap<(NodePath, u8, ProcessorId), Vec<ProcessorId>>,
    reverse: BTreeMap<(NodePath, u8, ProcessorId), Vec<ProcessorId>>,
}

impl SmpIndex {
    pub fn build(smp: &SamplingChoice, n: usize, k: usize) -> Result<SmpIndex, SmpError> {
        let nodes = smp_nodes(n);
        let mut forward = BTreeMap::new();
        let mut reverse: BTreeMap<(NodePath, u8, ProcessorId), Vec<ProcessorId>> =
            BTreeMap::new();
        for node in &nodes {
            for step in 1..=6u8 {
                for sampler in &node.node.members {
                    let list = smp.samples(node, step, *sampler, k)?;
                    for target in &list {
                        let entry = reverse
                            .entry((node.node.path.clone(), step, *target))
                            .or_default();
                        if entry.last() != Some(sampler) {
                            entry.push(*sampler);
                        }
                    }
                    forward.insert((node.node.path.clone(), step, *sampler), list);
                }
            }
        }
        Ok(SmpIndex { n, k, nodes, forward, reverse })
    }

    pub fn samples(&self, path: &[u8], step: u8, sampler: ProcessorId) -> &[ProcessorId] {
        self.forward
            .get(&(path.to_vec(), step, sampler))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Distinct processors that must be sent to in this step by `target`.
    pub fn samplers_of(&self, path: &[u8], step: u8, target: ProcessorId) -> &[ProcessorId] {
        self.reverse
            .get(&(path.to_vec(), step, target))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

// ---------------------------------------------------------------------------
// Step configurations and badness
// ---------------------------------------------------------------------------

/// Fault status and response value of one response-set member in a step
/// configuration. `Correct(None)` is the explicit bot response, admissible in
/// steps 2 and 5 only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemberStatus {
    Byzantine,
    Correct(Option<Value>),
}

/// An assignment of statuses over one step's response set. Configurations
/// range over ALL assignments, with no `<= f` restriction: the counting
/// argument quantifies over every one, which makes not-bad certificates
/// conservative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepConfiguration {
    pub step: u8,
    pub assignment: BTreeMap<ProcessorId, MemberStatus>,
}

impl StepConfiguration {
    fn status(&self, p: ProcessorId) -> MemberStatus {
        self.assignment
            .get(&p)
            .copied()
            .unwrap_or(MemberStatus::Byzantine)
    }
}

/// Fraction of the response set that is correct with response value `b`.
pub fn alpha_fraction(config: &StepConfiguration, b: Value) -> Rational {
    let m = config.assignment.len();
    let count = config
        .assignment
        .values()
        .filter(|s| **s == MemberStatus::Correct(Some(b)))
        .count();
    Rational::new(count as i64, m as i64)
}

/// Fraction of a sampler's k sampled slots (with multiplicity) that are
/// correct with response value `b`.
pub fn alpha_fraction_sampled(
    config: &StepConfiguration,
    b: Value,
    samples: &[ProcessorId],
) -> Rational {
    let count = samples
        .iter()
        .filter(|p| config.status(**p) == MemberStatus::Correct(Some(b)))
        .count();
    Rational::new(count as i64, samples.len() as i64)
}

/// A sampling choice is bad for a sampler given a configuration when the
/// sampled fraction deviates from the population fraction by at least
/// epsilon/2 for some value; the boundary is inclusive.
pub fn is_bad_for(
    samples: &[ProcessorId],
    config: &StepConfiguration,
    epsilon: Rational,
) -> bool {
    let half = epsilon / Rational::from_integer(2);
    Value::both().into_iter().any(|b| {
        (alpha_fraction(config, b) - alpha_fraction_sampled(config, b, samples)).abs()
            >= half
    })
}

/// Per-configuration badness summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadnessVerdict {
    pub bad_for: Vec<ProcessorId>,
    pub is_bad: bool,
    #[serde(with = "rat_serde")]
    pub worst_deviation: Rational,
}

/// Per-step badness threshold: bad for at least `node_n * epsilon / 24`
/// correct processors, with node-local member count.
pub fn per_step_threshold(node_n: usize, epsilon: Rational) -> Rational {
    Rational::from_integer(node_n as i64) * epsilon / Rational::from_integer(24)
}

/// Whole-choice badness threshold `node_n * epsilon / 4`.
pub fn whole_choice_threshold(node_n: usize, epsilon: Rational) -> Rational {
    Rational::from_integer(node_n as i64) * epsilon / Rational::from_integer(4)
}

/// Single-configuration kernel shared by the exhaustive and Monte Carlo
/// verifiers: which samplers is the choice bad for, and is that at least the
/// threshold?
pub fn badness_verdict(
    config: &StepConfiguration,
    samplers: &[(ProcessorId, Vec<ProcessorId>)],
    epsilon: Rational,
    threshold: Rational,
) -> BadnessVerdict {
    let mut bad_for = Vec::new();
    let mut worst = Rational::new(0, 1);
    for (p, samples) in samplers {
        // A sampler marked Byzantine in the configuration is not a correct
        // processor; samplers outside the response set count as correct.
        if config.assignment.get(p) == Some(&MemberStatus::Byzantine) {
            continue;
        }
        for b in Value::both() {
            let dev = (alpha_fraction(config, b)
                - alpha_fraction_sampled(config, b, samples))
            .abs();
            if dev > worst {
                worst = dev;
            }
        }
        if is_bad_for(samples, config, epsilon) {
            bad_for.push(*p);
        }
    }
    let is_bad = Rational::from_integer(bad_for.len() as i64) >= threshold;
    BadnessVerdict { bad_for, is_bad, worst_deviation: worst }
}

/// Result of verifying one (node, step) sampling choice against every
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub path: NodePath,
    pub step: u8,
    pub not_bad: bool,
    pub configs_checked: u64,
    #[serde(with = "rat_serde")]
    pub worst_deviation: Rational,
    /// A configuration demonstrating badness, when one exists.
    pub witness: Option<(StepConfiguration, BadnessVerdict)>,
}

/// Guard on exhaustive response-set enumeration.
pub const ENUMERATION_GUARD_MEMBERS: usize = 16;

fn statuses_per_member(step: u8) -> Result<u64, SmpError> {
    match step {
        1 | 3 | 4 | 6 => Ok(3),
        2 | 5 => Ok(4),
        other => Err(SmpError::BadStep(other)),
    }
}

fn decode_status(code: u8) -> MemberStatus {
    match code {
        0 => MemberStatus::Byzantine,
        1 => MemberStatus::Correct(Some(Value::ZERO)),
        2 => MemberStatus::Correct(Some(Value::ONE)),
        _ => MemberStatus::Correct(None),
    }
}

fn config_from_codes(step: u8, response_set: &[ProcessorId], codes: &[u8]) -> StepConfiguration {
    StepConfiguration {
        step,
        assignment: response_set
            .iter()
            .zip(codes)
            .map(|(p, c)| (*p, decode_status(*c)))
            .collect(),
    }
}

fn sampler_lists(
    smp: &SamplingChoice,
    node: &SmpNode,
    step: u8,
    k: usize,
) -> Result<Vec<(ProcessorId, Vec<ProcessorId>)>, SmpError> {
    node.node
        .members
        .iter()
        .map(|p| Ok((*p, smp.samples(node, step, *p, k)?)))
        .collect()
}

/// Exhaustively decide whether one step's sampling choice is bad at any
/// configuration of its response set.
pub fn verify_step_choice_exhaustive(
    smp: &SamplingChoice,
    node: &SmpNode,
    step: u8,
    k: usize,
    epsilon: Rational,
) -> Result<StepVerdict, SmpError> {
    let response_set = node.response_set(step);
    let m = response_set.len();
    if m > ENUMERATION_GUARD_MEMBERS {
        return Err(SmpError::EnumerationTooLarge { size: m, guard: ENUMERATION_GUARD_MEMBERS });
    }
    let radix = statuses_per_member(step)?;
    let samplers = sampler_lists(smp, node, step, k)?;
    let threshold = per_step_threshold(node.node.size(), epsilon);

    let total = radix.pow(m as u32);
    let mut codes = vec![0u8; m];
    let mut worst = Rational::new(0, 1);
    for idx in 0..total {
        let mut rem = idx;
        for c in codes.iter_mut() {
            *c = (rem % radix) as u8;
            rem /= radix;
        }
        let config = config_from_codes(step, response_set, &codes);
        let verdict = badness_verdict(&config, &samplers, epsilon, threshold);
        if verdict.worst_deviation > worst {
            worst = verdict.worst_deviation;
        }
        if verdict.is_bad {
            return Ok(StepVerdict {
                path: node.node.path.clone(),
                step,
                not_bad: false,
                configs_checked: idx + 1,
                worst_deviation: worst,
                witness: Some((config, verdict)),
            });
        }
    }
    Ok(StepVerdict {
        path: node.node.path.clone(),
        step,
        not_bad: true,
        configs_checked: total,
        worst_deviation: worst,
        witness: None,
    })
}

/// Verdict over every node and step of a whole sampling choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceVerdict {
    pub not_bad: bool,
    pub steps: Vec<StepVerdict>,
}

pub fn verify_choice_exhaustive(
    smp: &SamplingChoice,
    n: usize,
    k: usize,
    epsilon: Rational,
) -> Result<ChoiceVerdict, SmpError> {
    let mut steps = Vec::new();
    let mut not_bad = true;
    for node in smp_nodes(n) {
        for step in 1..=6u8 {
            let verdict = verify_step_choice_exhaustive(smp, &node, step, k, epsilon)?;
            not_bad &= verdict.not_bad;
            steps.push(verdict);
        }
    }
    Ok(ChoiceVerdict { not_bad, steps })
}

/// Monte Carlo estimate of the fraction of configurations that make each
/// (node, step) choice bad. Deterministic for a given seed; shares the
/// single-configuration kernel with the exhaustive verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub trials: u64,
    pub bad_fraction: BTreeMap<String, f64>,
    pub any_bad_found: bool,
}

fn step_key(path: &[u8], step: u8) -> String {
    let path_str: Vec<String> = path.iter().map(|e| e.to_string()).collect();
    format!("[{}]:s{step}", path_str.join(","))
}

pub fn estimate_badness_monte_carlo(
    smp: &SamplingChoice,
    n: usize,
    k: usize,
    epsilon: Rational,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, SmpError> {
    if trials == 0 {
        return Err(SmpError::ZeroTrials);
    }
    let mut bad_fraction = BTreeMap::new();
    let mut any_bad = false;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for node in smp_nodes(n) {
        for step in 1..=6u8 {
            let response_set = node.response_set(step);
            let radix = statuses_per_member(step)? as u8;
            let samplers = sampler_lists(smp, &node, step, k)?;
            let threshold = per_step_threshold(node.node.size(), epsilon);
            let mut bad = 0u64;
            for _ in 0..trials {
                let codes: Vec<u8> =
                    (0..response_set.len()).map(|_| rng.gen_range(0..radix)).collect();
                let config = config_from_codes(step, response_set, &codes);
                if badness_verdict(&config, &samplers, epsilon, threshold).is_bad {
                    bad += 1;
                }
            }
            any_bad |= bad > 0;
            bad_fraction.insert(step_key(&node.node.path, step), bad as f64 / trials as f64);
        }
    }
    Ok(McEstimate { trials, bad_fraction, any_bad_found: any_bad })
}

// ---------------------------------------------------------------------------
// Derandomization search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifierMode {
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy)]
pub enum Verifier {
    Exhaustive,
    MonteCarlo { trials: u64, seed: u64 },
}

/// Verification certificate recorded alongside a sampling-choice file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub mode: VerifierMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub verdict: String,
}

#[derive(Debug)]
pub enum SearchOutcome {
    Found { smp: SamplingChoice, certificate: Certificate, draws: u64 },
    Failure { draws: u64, last_verdict: Option<ChoiceVerdict>, last_estimate: Option<McEstimate> },
}

fn random_explicit_smp(n: usize, k: usize, seed: u64, draw: u64) -> SamplingChoice {
    let mut map = BTreeMap::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ draw.wrapping_mul(0x9e3779b97f4a7c15));
    for node in smp_nodes(n) {
        for step in 1..=6u8 {
            let response_set = node.response_set(step);
            for sampler in &node.node.members {
                let list: Vec<ProcessorId> = (0..k)
                    .map(|_| response_set[rng.gen_range(0..response_set.len())])
                    .collect();
                map.insert((node.node.path.clone(), step, *sampler), list);
            }
        }
    }
    SamplingChoice::Explicit(map)
}

/// Draw uniformly random sampling choices and return the first one the
/// verifier accepts, with its certificate.
pub fn search_smp(
    n: usize,
    k: usize,
    epsilon: Rational,
    budget: u64,
    seed: u64,
    verifier: Verifier,
) -> Result<SearchOutcome, SmpError> {
    let mut last_verdict = None;
    let mut last_estimate = None;
    for draw in 0..budget {
        let smp = random_explicit_smp(n, k, seed, draw);
        match verifier {
            Verifier::Exhaustive => {
                let verdict = verify_choice_exhaustive(&smp, n, k, epsilon)?;
                if verdict.not_bad {
                    return Ok(SearchOutcome::Found {
                        smp,
                        certificate: Certificate {
                            mode: VerifierMode::Exhaustive,
                            trials: None,
                            seed: None,
                            verdict: "not-bad".into(),
                        },
                        draws: draw + 1,
                    });
                }
                last_verdict = Some(verdict);
            }
            Verifier::MonteCarlo { trials, seed: mc_seed } => {
                let estimate =
                    estimate_badness_monte_carlo(&smp, n, k, epsilon, trials, mc_seed)?;
                if !estimate.any_bad_found {
                    return Ok(SearchOutcome::Found {
                        smp,
                        certificate: Certificate {
                            mode: VerifierMode::MonteCarlo,
                            trials: Some(trials),
                            seed: Some(mc_seed),
                            verdict: "not-bad".into(),
                        },
                        draws: draw + 1,
                    });
                }
                last_estimate = Some(estimate);
            }
        }
    }
    Ok(SearchOutcome::Failure { draws: budget, last_verdict, last_estimate })
}

// ---------------------------------------------------------------------------
// Sampling-choice file format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmpEntry {
    pub node: NodePath,
    pub step: u8,
    pub sampler: u32,
    pub samples: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmpFile {
    pub n: usize,
    pub k: usize,
    #[serde(with = "rat_serde")]
    pub epsilon: Rational,
    pub entries: Vec<SmpEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

impl SmpFile {
    /// Canonical file form: entries sorted by (node path, step, sampler).
    pub fn from_choice(
        smp: &SamplingChoice,
        n: usize,
        k: usize,
        epsilon: Rational,
        certificate: Option<Certificate>,
    ) -> Result<SmpFile, SmpError> {
        let materialized = smp.materialize(n, k)?;
        let SamplingChoice::Explicit(map) = materialized else { unreachable!() };
        let entries = map
            .into_iter()
            .map(|((node, step, sampler), samples)| SmpEntry {
                node,
                step,
                sampler: sampler.0,
                samples: samples.into_iter().map(|p| p.0).collect(),
            })
            .collect();
        Ok(SmpFile { n, k, epsilon, entries, certificate })
    }

    pub fn to_choice(&self) -> SamplingChoice {
        SamplingChoice::Explicit(
            self.entries
                .iter()
                .map(|e| {
                    (
                        (e.node.clone(), e.step, ProcessorId(e.sampler)),
                        e.samples.iter().map(|&p| ProcessorId(p)).collect(),
                    )
                })
                .collect(),
        )
    }

    /// Re-check the recorded certificate: exhaustive mode re-enumerates,
    /// monte-carlo mode re-runs with the recorded seed and trial count.
    pub fn recheck_certificate(&self) -> Result<(), SmpError> {
        let cert = self.certificate.as_ref().ok_or(SmpError::MissingCertificate)?;
        let smp = self.to_choice();
        let actual = match cert.mode {
            VerifierMode::Exhaustive => {
                let verdict = verify_choice_exhaustive(&smp, self.n, self.k, self.epsilon)?;
                if verdict.not_bad { "not-bad" } else { "bad" }
            }
            VerifierMode::MonteCarlo => {
                let estimate = estimate_badness_monte_carlo(
                    &smp,
                    self.n,
                    self.k,
                    self.epsilon,
                    cert.trials.ok_or(SmpError::MissingCertificate)?,
                    cert.seed.ok_or(SmpError::MissingCertificate)?,
                )?;
                if estimate.any_bad_found { "bad" } else { "not-bad" }
            }
        };
        if actual != cert.verdict {
            return Err(SmpError::CertificateMismatch {
                recorded: cert.verdict.clone(),
                actual: actual.into(),
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Concentration bound
// ---------------------------------------------------------------------------

/// Per-sampler deviation bound used to instantiate the existence argument:
/// two-sided Hoeffding at deviation epsilon/2 for one value, union-bounded
/// over both values.
pub fn per_sampler_deviation_bound(k: u64, epsilon: Rational) -> f64 {
    let eps = epsilon.to_f64().expect("small rational");
    4.0 * (-2.0 * k as f64 * (eps / 2.0) * (eps / 2.0)).exp()
}

fn kl_divergence(q: f64, p: f64) -> f64 {
    q * (q / p).ln() + (1.0 - q) * ((1.0 - q) / (1.0 - p)).ln()
}

/// Smallest k whose deviation bound alpha(k) satisfies the KL condition
/// `D(eps/24 || alpha(k)) > ln(alphabet_size)` with `alpha(k) < eps/24`.
pub fn chernoff_k_bound(epsilon: Rational, alphabet_size: u32) -> Result<u64, SmpError> {
    if epsilon <= Rational::new(0, 1) || epsilon >= Rational::new(1, 3) {
        return Err(SmpError::BadEpsilon(epsilon));
    }
    let q = epsilon.to_f64().expect("small rational") / 24.0;
    let target = (alphabet_size as f64).ln();
    let ok = |k: u64| {
        let alpha = per_sampler_deviation_bound(k, epsilon);
        alpha < q && kl_divergence(q, alpha) > target
    };
    let mut hi = 1u64;
    while !ok(hi) {
        hi *= 2;
        assert!(hi < 1 << 40, "KL condition unexpectedly unreachable");
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
