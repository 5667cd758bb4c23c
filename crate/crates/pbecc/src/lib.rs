//! Discrete-event simulator and protocol library for congestion control
//! driven by cellular physical-layer observation.
//!
//! A mobile client decodes its cells' downlink control channels, turns PRB
//! allocations into capacity and fair-share estimates, and feeds them back on
//! every ACK; the sender matches the wireless rate or, when the bottleneck
//! moves into the wired network, runs a conservative probing cycle. The crate
//! bundles the cellular MAC/PHY model, the estimation pipeline, the sender
//! state machines, and a scenario harness with metrics.

pub mod cellmac;
pub mod clientest;
pub mod ctrlchan;
pub mod harness;
pub mod senders;
pub mod simcore;
