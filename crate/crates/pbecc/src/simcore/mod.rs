//! Deterministic discrete-event core: simulation clock, event queue and the
//! wired (Internet) link model.
//!
//! The cellular side runs on a 1 ms subframe clock; wired links, packets and
//! ACKs use continuous time at microsecond resolution.

mod engine;
mod link;
mod queue;
mod time;

pub use engine::{
    FlowStats, SenderTraceRow, Simulation, SimulationReport, StateTraceRow, BACKGROUND_USER_BASE,
};
pub use link::{EnqueueOutcome, WiredLink};
pub use queue::EventQueue;
pub use time::SimTime;

use serde::{Deserialize, Serialize};

pub type FlowId = usize;
pub type CellId = usize;
pub type UserId = u64;

/// Default segment size: 1500 bytes.
pub const MSS_BITS: u64 = 12_000;

/// A data segment in flight between a sender and a mobile user.
#[derive(Debug, Clone)]
pub struct Packet {
    pub flow: FlowId,
    pub seq: u64,
    pub size_bits: u64,
    pub sent_at: SimTime,
    /// Sender pacing rate at send time, echoed to the client so it can tell
    /// whether the sender has reached its fair-share rate.
    pub sender_rate_bps: f64,
    /// Sender's current round-trip propagation estimate, used by the client
    /// to size its observation windows.
    pub sender_rtprop_us: u64,
    pub retransmit: bool,
}

/// One line of the per-packet trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PacketRecord {
    pub flow_id: FlowId,
    pub seq: u64,
    pub sent_us: u64,
    /// Unset when the packet was dropped.
    pub delivered_us: Option<u64>,
    pub owd_ms: f64,
    pub harq_delay_ms: u32,
    pub dropped: bool,
}

impl PacketRecord {
    pub fn csv_header() -> &'static str {
        "flow_id,seq,sent_us,delivered_us,owd_ms,harq_delay_ms,dropped"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{},{}",
            self.flow_id,
            self.seq,
            self.sent_us,
            self.delivered_us.map_or(String::new(), |u| u.to_string()),
            self.owd_ms,
            self.harq_delay_ms,
            self.dropped as u8
        )
    }
}
