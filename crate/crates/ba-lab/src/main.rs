//! Experiment runner: simulate protocols, sweep communication costs, search
//! and verify sampling choices, run the extraction function on message-set
//! files, and produce scenario reports.
//!
//! Exit codes: 0 success, 1 contract or verification failure, 2 usage or
//! configuration error. All outputs are byte-deterministic given the command
//! line and seed. JSON for structured artifacts, CSV for tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::rc::Rc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ba_lab::analysis::{
    silencing_scenario, check_epsilon_agreement, check_epsilon_validity, compute_valency,
    enumeration_guard, strategy, AdversaryBehaviorSpace, AnalysisError, MachineFactory,
    TraversalOrder,
};
use ba_lab::core::{
    rat_serde, Fault, Grade, Message, ProcessorId, Rational, SystemParams, Value,
    DEFAULT_SIG_BITS,
};
use ba_lab::netsim::{account, run_lockstep, FaultAssignment, ProtocolMachine, SimError};
use ba_lab::protocols::{
    BaseCaseP, EpsRpkMachine, EpsRpkSchedule, GradecastMachine, PhaseKingMachine, RpkMachine,
    RpkSchedule, PROTOCOL_NAMES,
};
use ba_lab::reductions::{extract_f, MajorityLiftMachine, SignedMessageSet, SignedOutput};
use ba_lab::sampling::{
    search_smp, SamplingChoice, SearchOutcome, SmpFile, SmpIndex, Verifier,
};

#[derive(Parser)]
#[command(name = "ba-lab", version, about = "Synchronous Byzantine agreement laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one protocol execution and check its agreement contract.
    Run(RunArgs),
    /// Measure communication over a list of n values.
    Sweep(SweepArgs),
    /// Search for or verify sampling-choice files.
    Smp {
        #[command(subcommand)]
        cmd: SmpCmd,
    },
    /// Apply the extraction function to a signed-output file.
    Extract(ExtractArgs),
    /// Produce scenario reports.
    Scenario {
        #[command(subcommand)]
        cmd: ScenarioCmd,
    },
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    f: usize,
    /// Exact rational, e.g. "1/24".
    #[arg(long, value_parser = parse_eps)]
    epsilon: Rational,
    /// Samples per query in the sampled protocols.
    #[arg(long, default_value_t = 1)]
    k: usize,
}

fn parse_eps(s: &str) -> Result<Rational, String> {
    rat_serde::parse_rational(s)
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    protocol: String,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value = "silent")]
    adversary: String,
    /// Sampling-choice file for eps-rpk.
    #[arg(long)]
    smp: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for trace.json, report.json and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    protocol: String,
    /// Comma-separated processor counts.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    f: usize,
    #[arg(long, value_parser = parse_eps)]
    epsilon: Rational,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// File to write the CSV table to (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SmpCmd {
    /// Draw random choices until the verifier accepts one.
    Search {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 64)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Verify by Monte Carlo with this many trials instead of exhaustively.
        #[arg(long)]
        trials: Option<u64>,
        /// Directory for smp.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the certificate recorded in a sampling-choice file.
    Verify {
        #[arg(long)]
        smp: PathBuf,
    },
}

#[derive(Args)]
struct ExtractArgs {
    /// JSON array of {"member": id, "value": bit} objects.
    file: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    f: usize,
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Two-execution dissemination scenario over the chosen protocol.
    Silencing {
        #[arg(long)]
        protocol: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        smp: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for e1.json, e2.json and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Valency of a finished run's prefix under a majority-dissemination
    /// continuation.
    Valency {
        #[arg(long)]
        protocol: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "silent")]
        adversary: String,
        #[arg(long)]
        smp: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continuation slots the enumerated adversary may act in.
        #[arg(long, default_value_t = 1)]
        budget: usize,
        /// Enumeration guard (also via BA_LAB_GUARD).
        #[arg(long)]
        guard: Option<u64>,
    },
}

/// Errors mapped onto exit codes: usage/config 2, contract/verification 1.
enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }
    fn failure(msg: impl Into<String>) -> CliError {
        CliError::Failure(msg.into())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> CliError {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Smp { cmd } => cmd_smp(cmd),
        Cmd::Extract(args) => cmd_extract(args),
        Cmd::Scenario { cmd } => cmd_scenario(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

// ---------------------------------------------------------------------------
// Protocol setup
// ---------------------------------------------------------------------------

struct Setup {
    factory: Box<dyn Fn(ProcessorId, Value) -> Box<dyn ProtocolMachine>>,
    budget: usize,
    depth_of: Box<dyn Fn(&Message) -> usize>,
    epsilon_contract: bool,
}

fn load_smp_choice(path: &Path) -> Result<SmpFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", path.display())))
}

fn strict_params(p: &ParamArgs) -> Result<SystemParams, CliError> {
    SystemParams::new(p.n, p.f, p.epsilon, p.k).map_err(|e| CliError::usage(e.to_string()))
}

fn loose_params(p: &ParamArgs) -> Result<SystemParams, CliError> {
    SystemParams::new_unchecked(p.n, p.f, p.epsilon, p.k)
        .map_err(|e| CliError::usage(e.to_string()))
}

fn build_setup(
    protocol: &str,
    params: SystemParams,
    smp_path: Option<&Path>,
    seed: Option<u64>,
) -> Result<Setup, CliError> {
    let SystemParams { n, f, epsilon, k } = params;
    match protocol {
        "gradecast" => Ok(Setup {
            factory: Box::new(move |p, v| Box::new(GradecastMachine::new(n, f, p, v))),
            budget: 3,
            depth_of: Box::new(|_| 0),
            epsilon_contract: false,
        }),
        "phase-king" => Ok(Setup {
            factory: Box::new(move |p, v| Box::new(PhaseKingMachine::new(n, f, p, v))),
            budget: 4 * (f + 1),
            depth_of: Box::new(|_| 0),
            epsilon_contract: false,
        }),
        "rpk" => {
            let sched = RpkSchedule::new(n, f);
            let budget = sched.budget;
            let depth_sched = sched.clone();
            Ok(Setup {
                factory: Box::new(move |p, v| Box::new(RpkMachine::new(sched.clone(), p, v))),
                budget,
                depth_of: Box::new(move |m| depth_sched.depth_of_slot(m.slot)),
                epsilon_contract: false,
            })
        }
        "base-p" => {
            if n > 2 {
                return Err(CliError::usage("base-p runs on at most 2 processors"));
            }
            let members: Vec<ProcessorId> = params.processors().collect();
            Ok(Setup {
                factory: Box::new(move |p, v| {
                    Box::new(BaseCaseP::new(members.clone(), p, v))
                }),
                budget: BaseCaseP::SLOT_BUDGET,
                depth_of: Box::new(|_| 0),
                epsilon_contract: false,
            })
        }
        "eps-rpk" | "prob-eps-rpk" => {
            let choice = match (protocol, smp_path, seed) {
                ("eps-rpk", Some(path), _) => load_smp_choice(path)?.to_choice(),
                ("eps-rpk", None, Some(s)) | ("prob-eps-rpk", _, Some(s)) => {
                    SamplingChoice::Seeded(s)
                }
                _ => {
                    return Err(CliError::usage(format!(
                        "{protocol} needs --smp or --seed"
                    )))
                }
            };
            let smp = Rc::new(
                SmpIndex::build(&choice, n, k).map_err(|e| CliError::usage(e.to_string()))?,
            );
            let sched = EpsRpkSchedule::new(n);
            let budget = sched.budget;
            let depth_sched = sched.clone();
            Ok(Setup {
                factory: Box::new(move |p, v| {
                    Box::new(EpsRpkMachine::new(sched.clone(), smp.clone(), epsilon, p, v))
                }),
                budget,
                depth_of: Box::new(move |m| depth_sched.depth_of_slot(m.slot)),
                epsilon_contract: true,
            })
        }
        other => Err(CliError::usage(format!(
            "unknown protocol {other:?}; expected one of {PROTOCOL_NAMES:?}"
        ))),
    }
}

/// Default fault assignment: the highest-numbered f processors are Byzantine.
fn default_faults(params: &SystemParams) -> FaultAssignment {
    FaultAssignment::byzantine_only(
        ((params.n - params.f)..params.n).map(|i| ProcessorId(i as u32)),
    )
}

/// Default deterministic input assignment: processor i gets bit i mod 2.
fn default_inputs(params: &SystemParams) -> BTreeMap<ProcessorId, Value> {
    params
        .processors()
        .map(|p| (p, Value::from_bit((p.0 % 2) as u8).unwrap()))
        .collect()
}

fn run_setup(
    setup: &Setup,
    params: &SystemParams,
    inputs: &BTreeMap<ProcessorId, Value>,
    faults: &FaultAssignment,
    adversary_name: &str,
) -> Result<ba_lab::core::ExecutionTrace, CliError> {
    let mut adversary = strategy(adversary_name, &setup.factory).map_err(|e| match e {
        AnalysisError::UnknownStrategy(_) => CliError::usage(e.to_string()),
        other => CliError::failure(other.to_string()),
    })?;
    let mut machines: BTreeMap<ProcessorId, Box<dyn ProtocolMachine>> = BTreeMap::new();
    for p in params.processors() {
        if faults.status(p) != Fault::Byzantine {
            machines.insert(p, (setup.factory)(p, inputs[&p]));
        }
    }
    Ok(run_lockstep(params, &mut machines, inputs, faults, adversary.as_mut(), setup.budget)?)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn check_contract(
    setup: &Setup,
    params: &SystemParams,
    trace: &ba_lab::core::ExecutionTrace,
) -> Result<(), String> {
    let correct = trace.correct_processors();
    if setup.epsilon_contract {
        let verdict = check_epsilon_agreement(trace, params).map_err(|e| e.to_string())?;
        if !verdict.holds {
            return Err(format!(
                "epsilon-agreement violated: {} dissenters from {}",
                verdict.dissenters.len(),
                verdict.common
            ));
        }
        if !check_epsilon_validity(trace, params, verdict.common) {
            return Err(format!("epsilon-validity violated for {}", verdict.common));
        }
        return Ok(());
    }
    // Validity: unanimous correct inputs force that output.
    let inputs: BTreeSet<Value> = correct.iter().map(|p| trace.inputs[p]).collect();
    if let [v] = inputs.iter().copied().collect::<Vec<_>>()[..] {
        for p in &correct {
            if trace.outputs[p].value != v {
                return Err(format!("validity violated: {p} output {}", trace.outputs[p].value));
            }
        }
    }
    // Gradecast: a grade-2 output pins the value for every correct processor,
    // with grade at least 1. Other protocols: plain agreement.
    let graded = correct.iter().any(|p| trace.outputs[p].grade.is_some());
    if graded {
        if let Some(p2) = correct.iter().find(|p| trace.outputs[*p].grade == Some(Grade::G2)) {
            let v = trace.outputs[p2].value;
            for p in &correct {
                let out = trace.outputs[p];
                if out.value != v || out.grade < Some(Grade::G1) {
                    return Err(format!(
                        "knowledge of agreement violated: {p2} has ({v}, 2) but {p} has ({}, {:?})",
                        out.value, out.grade
                    ));
                }
            }
        }
    } else {
        let v = trace.outputs[&correct[0]].value;
        for p in &correct {
            if trace.outputs[p].value != v {
                return Err(format!("agreement violated: {p} output {}", trace.outputs[p].value));
            }
        }
    }
    Ok(())
}

fn per_depth_cell(report: &ba_lab::core::ComplexityReport) -> String {
    report
        .per_depth
        .iter()
        .map(|(d, (msgs, bits))| format!("{d}:{msgs}:{bits}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let params = strict_params(&args.params)?;
    let setup = build_setup(&args.protocol, params, args.smp.as_deref(), args.seed)?;
    let faults = default_faults(&params);
    let inputs = default_inputs(&params);
    let trace = run_setup(&setup, &params, &inputs, &faults, &args.adversary)?;

    let report = account(&trace, &setup.depth_of, DEFAULT_SIG_BITS);
    let header = "protocol,n,f,epsilon,k,adversary,seed,messages,bits,per_depth";
    let row = format!(
        "{},{},{},{},{},{},{},{},{},{}",
        args.protocol,
        params.n,
        params.f,
        params.epsilon,
        params.k,
        args.adversary,
        args.seed.map_or(String::new(), |s| s.to_string()),
        report.total_messages,
        report.total_bits,
        per_depth_cell(&report),
    );
    println!("{header}");
    println!("{row}");

    if let Some(dir) = &args.out {
        write_out(dir, "trace.json", &serde_json::to_string_pretty(&trace).unwrap())?;
        write_out(dir, "report.json", &serde_json::to_string_pretty(&report).unwrap())?;
        write_out(dir, "report.csv", &format!("{header}\n{row}\n"))?;
    }

    check_contract(&setup, &params, &trace).map_err(|msg| {
        let location = args
            .out
            .as_ref()
            .map(|d| format!("; witness trace at {}", d.join("trace.json").display()))
            .unwrap_or_default();
        CliError::failure(format!("{msg}{location}"))
    })
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    if args.n.is_empty() {
        return Err(CliError::usage("sweep needs at least one value in --n"));
    }
    let header = "protocol,n,f,epsilon,k,trials,seed,mean_bits,max_bits,mean_messages";
    let mut rows = vec![header.to_string()];
    for &n in &args.n {
        let params = SystemParams::new(
            n,
            args.f,
            args.epsilon,
            args.k,
        )
        .map_err(|e| CliError::usage(e.to_string()))?;
        let setup = build_setup(&args.protocol, params, None, Some(args.seed))?;
        let faults = FaultAssignment::all_correct();
        let mut bits = Vec::new();
        let mut messages = Vec::new();
        for trial in 0..args.trials {
            let mut rng = ChaCha12Rng::seed_from_u64(
                args.seed ^ ((n as u64) << 32) ^ trial.wrapping_mul(0x9e37_79b9),
            );
            let inputs: BTreeMap<ProcessorId, Value> = params
                .processors()
                .map(|p| (p, Value::from_bit(rng.gen_range(0..2u8)).unwrap()))
                .collect();
            let trace = run_setup(&setup, &params, &inputs, &faults, "silent")?;
            let report = account(&trace, &setup.depth_of, DEFAULT_SIG_BITS);
            bits.push(report.total_bits);
            messages.push(report.total_messages);
        }
        let mean = |xs: &[u64]| xs.iter().sum::<u64>() as f64 / xs.len() as f64;
        rows.push(format!(
            "{},{},{},{},{},{},{},{:.1},{},{:.1}",
            args.protocol,
            n,
            args.f,
            args.epsilon,
            args.k,
            args.trials,
            args.seed,
            mean(&bits),
            bits.iter().max().unwrap(),
            mean(&messages),
        ));
    }
    let table = rows.join("\n");
    println!("{table}");
    if let Some(path) = &args.out {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, format!("{table}\n"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// smp
// ---------------------------------------------------------------------------

fn cmd_smp(cmd: SmpCmd) -> Result<(), CliError> {
    match cmd {
        SmpCmd::Search { params, budget, seed, trials, out } => {
            let sys = loose_params(&params)?;
            let verifier = match trials {
                Some(t) => Verifier::MonteCarlo { trials: t, seed },
                None => Verifier::Exhaustive,
            };
            let outcome = search_smp(sys.n, sys.k, sys.epsilon, budget, seed, verifier)
                .map_err(|e| CliError::usage(e.to_string()))?;
            match outcome {
                SearchOutcome::Found { smp, certificate, draws } => {
                    let file =
                        SmpFile::from_choice(&smp, sys.n, sys.k, sys.epsilon, Some(certificate))
                            .map_err(|e| CliError::usage(e.to_string()))?;
                    let json = serde_json::to_string_pretty(&file).unwrap();
                    println!("{json}");
                    eprintln!("found not-bad choice after {draws} draw(s)");
                    if let Some(dir) = &out {
                        write_out(dir, "smp.json", &json)?;
                    }
                    Ok(())
                }
                SearchOutcome::Failure { draws, .. } => Err(CliError::failure(format!(
                    "no not-bad sampling choice found in {draws} draw(s)"
                ))),
            }
        }
        SmpCmd::Verify { smp } => {
            let file = load_smp_choice(&smp)?;
            file.recheck_certificate().map_err(|e| CliError::failure(e.to_string()))?;
            let cert = file.certificate.expect("present after recheck");
            println!("certificate ok: {} ({:?})", cert.verdict, cert.mode);
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

fn cmd_extract(args: ExtractArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.file.display())))?;
    let outputs: Vec<SignedOutput> = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", args.file.display())))?;
    let set = SignedMessageSet::from_outputs(outputs);
    println!("{}", extract_f(&set, args.m, args.f).as_str());
    Ok(())
}

// ---------------------------------------------------------------------------
// scenario
// ---------------------------------------------------------------------------

fn cmd_scenario(cmd: ScenarioCmd) -> Result<(), CliError> {
    match cmd {
        ScenarioCmd::Silencing { protocol, params, smp, seed, out } => {
            // Deliberately beyond-threshold territory: the scenario needs
            // |P1| = ceil(f/2) omission faults, not protocol guarantees.
            let sys = loose_params(&params)?;
            if sys.f < 1 || sys.f >= sys.n - 1 {
                return Err(CliError::usage("silencing needs 1 <= f < n-1"));
            }
            let setup = build_setup(&protocol, sys, smp.as_deref(), seed)?;
            let inputs = default_inputs(&sys);
            let p1: BTreeSet<ProcessorId> =
                (0..sys.f.div_ceil(2) as u32).map(ProcessorId).collect();
            let (e1, e2, report) =
                silencing_scenario(&sys, &setup.factory, &inputs, &p1, setup.budget)
                    .map_err(|e| CliError::failure(e.to_string()))?;
            let json = serde_json::to_string_pretty(&report).unwrap();
            println!("{json}");
            if let Some(dir) = &out {
                write_out(dir, "report.json", &json)?;
                write_out(dir, "e1.json", &serde_json::to_string_pretty(&e1).unwrap())?;
                if let Some(e2) = &e2 {
                    write_out(dir, "e2.json", &serde_json::to_string_pretty(e2).unwrap())?;
                }
            }
            Ok(())
        }
        ScenarioCmd::Valency { protocol, params, adversary, smp, seed, budget, guard } => {
            let sys = loose_params(&params)?;
            let setup = build_setup(&protocol, sys, smp.as_deref(), seed)?;
            let faults = default_faults(&sys);
            let inputs = default_inputs(&sys);
            let prefix = run_setup(&setup, &sys, &inputs, &faults, &adversary)?;
            let agreement =
                check_epsilon_agreement(&prefix, &sys).map_err(|e| CliError::failure(e.to_string()))?;

            // Continuation: the finished run plus a majority dissemination
            // round, with the enumerated adversary free over `budget` slots.
            let inner_factory = build_setup(&protocol, sys, smp.as_deref(), seed)?.factory;
            let lift_factory: Box<MachineFactory> = Box::new(move |p, v| {
                Box::new(
                    MajorityLiftMachine::new(&sys, p, inner_factory(p, v))
                        .expect("hypothesis checked below"),
                )
            });
            if MajorityLiftMachine::new(&sys, ProcessorId(0), (setup.factory)(ProcessorId(0), Value::ZERO))
                .is_err()
            {
                return Err(CliError::usage(format!(
                    "majority lift needs f < n(1/2 - epsilon); n={}, f={}, epsilon={}",
                    sys.n, sys.f, sys.epsilon
                )));
            }
            let space = AdversaryBehaviorSpace::values(
                faults.byzantine.iter().copied(),
                sys.processors(),
                budget,
            );
            let guard = guard.unwrap_or_else(enumeration_guard);
            let max_slots = setup.budget + 2;
            let mut valencies = Vec::new();
            for order in [TraversalOrder::Forward, TraversalOrder::Reverse] {
                let v = compute_valency(
                    &sys, &lift_factory, &prefix, &faults, &space, max_slots, guard, order,
                )
                .map_err(|e| match e {
                    AnalysisError::EnumerationTooLarge { .. } => CliError::usage(e.to_string()),
                    other => CliError::failure(other.to_string()),
                })?;
                valencies.push(v);
            }
            if valencies[0] != valencies[1] {
                return Err(CliError::failure(
                    "valency differs between traversal orders",
                ));
            }
            let report = serde_json::json!({
                "valency": valencies[0],
                "prefix_common_value": agreement.common,
                "prefix_agreement_holds": agreement.holds,
                "continuation_behaviors": space.count().to_string(),
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
    }
}
