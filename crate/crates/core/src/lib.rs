//! Deterministic governance-chain stack.
//!
//! The crate is organized around five subsystems:
//!
//! * [`election`] — threshold-triggered single transferable vote with a
//!   fault-tolerant quota, a classic-quota reference tally, and a
//!   proportionality verifier.
//! * [`consensus`] — leaderless agreement: echo/ready reliable broadcast of
//!   per-node proposals, one binary consensus instance per slot, and
//!   bitmask-AND superblock assembly.
//! * [`ledger`] — mempool admission, proposal building, and superblock
//!   execution into hash-linked blocks.
//! * [`governance`] — epoch management: periodic elections routed through
//!   ballot transactions and committee swaps on the emitted result.
//! * [`sim`] — a seeded discrete-event network with scripted adversaries,
//!   runtime invariant monitors, and a replayable trace.
//!
//! Everything is a pure function of its inputs: no wall clock, no OS
//! randomness, no threads. The same scenario and seed always produce the
//! same trace, byte for byte.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod auth;
pub mod codec;
pub mod consensus;
pub mod election;
pub mod governance;
pub mod ledger;
pub mod rng;
pub mod sim;
