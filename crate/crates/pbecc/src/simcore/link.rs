use std::collections::VecDeque;

use super::{Packet, SimTime};

/// Tail-drop FIFO store-and-forward link: fixed rate, fixed one-way
/// propagation delay, byte-capacity queue.
#[derive(Debug)]
pub struct WiredLink {
    pub rate_bps: u64,
    pub prop_delay_us: u64,
    capacity_bits: u64,
    /// Waiting packets (the in-service packet is not in this queue).
    queue: VecDeque<Packet>,
    in_service: Option<Packet>,
    /// Bits waiting plus bits of the in-service packet.
    occupied_bits: u64,
    pub drops: u64,
}

/// Result of handing a packet to the link.
#[derive(Debug, PartialEq)]
pub enum EnqueueOutcome {
    /// Link was idle; serialization completes at the given time.
    Started(SimTime),
    /// Packet queued behind others.
    Queued,
    /// Queue full; packet discarded.
    Dropped,
}

impl WiredLink {
    pub fn new(rate_bps: u64, prop_delay_us: u64, capacity_bytes: u64) -> Self {
        assert!(rate_bps > 0, "link rate must be positive");
        WiredLink {
            rate_bps,
            prop_delay_us,
            capacity_bits: capacity_bytes * 8,
            queue: VecDeque::new(),
            in_service: None,
            occupied_bits: 0,
            drops: 0,
        }
    }

    fn serialization_us(&self, size_bits: u64) -> u64 {
        size_bits * 1_000_000 / self.rate_bps
    }

    pub fn enqueue(&mut self, pkt: Packet, now: SimTime) -> EnqueueOutcome {
        if self.occupied_bits + pkt.size_bits > self.capacity_bits {
            self.drops += 1;
            return EnqueueOutcome::Dropped;
        }
        self.occupied_bits += pkt.size_bits;
        if self.in_service.is_none() {
            let done = now + self.serialization_us(pkt.size_bits);
            self.in_service = Some(pkt);
            EnqueueOutcome::Started(done)
        } else {
            self.queue.push_back(pkt);
            EnqueueOutcome::Queued
        }
    }

    /// Called when the in-service packet finishes serialization. Returns the
    /// packet (it reaches the far end after `prop_delay_us`) and, if another
    /// packet starts service, its completion time.
    pub fn service_complete(&mut self, now: SimTime) -> (Packet, Option<SimTime>) {
        let pkt = self.in_service.take().expect("service_complete on idle link");
        self.occupied_bits -= pkt.size_bits;
        let next = self.queue.pop_front().map(|p| {
            let done = now + self.serialization_us(p.size_bits);
            self.in_service = Some(p);
            done
        });
        (pkt, next)
    }

    pub fn queued_bits(&self) -> u64 {
        self.occupied_bits
    }
}
