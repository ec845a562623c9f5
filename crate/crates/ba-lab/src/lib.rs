//! Synchronous Byzantine agreement laboratory.
//!
//! A deterministic lock-step simulator ([`netsim`]) runs the protocol suite
//! in [`protocols`] (Gradecast, Phase King, Recursive Phase King, and the
//! sampled epsilon-RPK variants) against the adversary library in
//! [`analysis`]. The [`sampling`] module verifies and searches for non-bad
//! sampling choices, [`reductions`] lifts relaxed agreement back to full
//! Byzantine agreement, and everything is exposed through the `ba-lab` CLI.

pub mod analysis;
pub mod core;
pub mod netsim;
pub mod protocols;
pub mod reductions;
pub mod sampling;
