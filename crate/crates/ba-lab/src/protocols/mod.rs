//! The protocol suite, each implemented as a [`crate::netsim::ProtocolMachine`].

mod base_p;
mod eps_rpk;
mod gradecast;
mod phase_king;
mod rpk;
pub(crate) mod wire;

pub use base_p::BaseCaseP;
pub use eps_rpk::{classify_step1, classify_step2, EpsRpkMachine, EpsRpkSchedule};
pub use gradecast::{GradecastCore, GradecastMachine};
pub use phase_king::PhaseKingMachine;
pub use rpk::{local_fault_budget as rpk_local_fault_budget, RpkMachine, RpkSchedule};

/// Registered protocol names used by the CLI.
pub const PROTOCOL_NAMES: &[&str] =
    &["gradecast", "phase-king", "rpk", "eps-rpk", "prob-eps-rpk", "base-p"];
