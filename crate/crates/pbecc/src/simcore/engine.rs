//! The simulation driver: owns the cells, flows and the event queue, and
//! advances the 1-ms subframe clock interleaved with continuous-time wired
//! packet and ACK events.

use std::collections::{BTreeMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cellmac::{
    BackgroundProfile, CaController, CaEvent, Cell, CellConfig, SubframeAllocation, Timeline,
    HARQ_RETX_SUBFRAMES,
};
use crate::clientest::{AckPayload, BottleneckState, ClientEstimator};
use crate::harness::scenario::{Scenario, SenderKind};
use crate::senders::{AckContext, AimdSender, BbrSender, ConstantSender, PbeSender, Sender};
use crate::simcore::{
    EnqueueOutcome, EventQueue, FlowId, Packet, PacketRecord, SimTime, UserId, WiredLink, MSS_BITS,
};

/// Background (control-traffic) users get ids far above any flow id.
pub const BACKGROUND_USER_BASE: UserId = 1000;

/// Packets sent this long before the newest acknowledged packet are treated
/// as lost (covers three HARQ rounds plus wired jitter).
const LOSS_REORDER_US: u64 = 40_000;
/// Absolute staleness bound for outstanding packets.
const LOSS_TIMEOUT_US: u64 = 500_000;

#[derive(Debug)]
enum Event {
    SubframeTick,
    FlowStart { flow: FlowId },
    FlowStop { flow: FlowId },
    PacerFire { flow: FlowId },
    LinkDeparture { flow: FlowId },
    BsArrival { flow: FlowId, pkt: Packet },
    AckArrival { flow: FlowId, payload: AckPayload, bits: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SenderTraceRow {
    pub time_us: u64,
    pub flow: FlowId,
    pub phase: String,
    pub pacing_bps: f64,
    pub cwnd_bits: f64,
    pub btlbw_bps: f64,
    pub rtprop_us: u64,
    pub c_f_bps: f64,
    pub link_queue_bits: u64,
}

impl SenderTraceRow {
    pub fn csv_header() -> &'static str {
        "time_us,flow,phase,pacing_rate,cwnd,btlbw,rtprop,c_f,link_queue_bits"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.0},{:.0},{:.0},{},{:.0},{}",
            self.time_us, self.flow, self.phase, self.pacing_bps, self.cwnd_bits, self.btlbw_bps,
            self.rtprop_us, self.c_f_bps, self.link_queue_bits
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateTraceRow {
    pub time_us: u64,
    pub flow: FlowId,
    pub internet: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FlowStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub bdp_violations: u64,
}

/// Everything a run produces: per-packet records, the full allocation log
/// (the simulated control channel), sender decisions and state transitions.
#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationReport {
    pub duration_ms: u64,
    pub seed: u64,
    pub packets: Vec<PacketRecord>,
    pub allocations: Vec<SubframeAllocation>,
    pub sender_trace: Vec<SenderTraceRow>,
    pub state_trace: Vec<StateTraceRow>,
    pub ca_events: Vec<(u64, FlowId, CaEvent)>,
    pub flow_stats: Vec<FlowStats>,
    /// Peak queue occupancy of each flow's wired link, in bits.
    pub max_link_queue_bits: Vec<u64>,
}

struct FlowRt {
    user: UserId,
    sender: Sender,
    client: ClientEstimator,
    ca: CaController,
    link: WiredLink,
    reverse_delay_us: u64,
    active: bool,
    next_seq: u64,
    inflight_bits: f64,
    outstanding: BTreeMap<u64, (SimTime, u64)>,
    latest_acked_sent: SimTime,
    arrived_bits_this_sf: u64,
    pacer_scheduled: bool,
    blocked: bool,
    credit_bits: f64,
    credit_at: SimTime,
    pending_resends: u64,
    stats: FlowStats,
    last_state: BottleneckState,
    last_trace_at: Option<SimTime>,
    max_link_queue_bits: u64,
}

pub struct Simulation {
    clock: SimTime,
    end: SimTime,
    queue: EventQueue<Event>,
    rng: ChaCha8Rng,
    cells: Vec<Cell>,
    flows: Vec<FlowRt>,
    report: SimulationReport,
    /// Latest subframe allocation per cell, for client observation.
    current_allocs: Vec<Option<SubframeAllocation>>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        scenario.validate().expect("scenario must validate before running");

        let mut cells: Vec<Cell> = scenario
            .cells
            .iter()
            .map(|c| {
                Cell::new(CellConfig {
                    id: c.id,
                    total_prbs: c.prbs,
                    rw: Timeline(c.rw.clone()),
                    p: Timeline(if c.p.is_empty() { vec![(0, 0.0)] } else { c.p.clone() }),
                    user_buffer_bytes: c.user_buffer_bytes,
                    overhead: scenario.overhead,
                })
            })
            .collect();

        for (i, b) in scenario.background.iter().enumerate() {
            cells[b.cell].backgrounds.push(BackgroundProfile {
                cell: b.cell,
                user: BACKGROUND_USER_BASE + i as UserId,
                start_ms: b.start_ms,
                duration_sf: b.duration_sf,
                prbs: b.prbs,
                repeat_every_ms: b.repeat_every_ms,
                until_ms: b.until_ms,
            });
        }

        for fe in &scenario.forced_tb_errors {
            cells[fe.cell].force_tb_error(fe.subframe, fe.user, fe.failures);
        }

        let mut queue = EventQueue::new();
        let mut flows = Vec::new();
        for (idx, f) in scenario.flows.iter().enumerate() {
            let user = idx as UserId;
            let sender = match f.sender {
                SenderKind::Pbe => Sender::Pbe(Box::new(PbeSender::new())),
                SenderKind::Bbr => Sender::Bbr(Box::new(BbrSender::new())),
                SenderKind::Aimd => Sender::Aimd(Box::new(AimdSender::new())),
                SenderKind::Constant => Sender::Constant(ConstantSender {
                    rate_bps: Timeline(
                        f.rate_mbps
                            .iter()
                            .map(|&(t, mbps)| (t, (mbps * 1e6) as u64))
                            .collect(),
                    ),
                }),
            };
            let primary = f.cells[0];
            let mut client = ClientEstimator::new(
                user,
                scenario.cell(primary).p.first().map_or(0.0, |&(_, p)| p),
                scenario.overhead,
            );
            client.attach_cell(primary, scenario.cell(primary).prbs);
            cells[primary].attach_user(user);
            let ca = CaController::new(
                f.cells.clone(),
                scenario.ca.activate_share,
                scenario.ca.activate_window_ms,
                scenario.ca.deactivate_share,
                scenario.ca.deactivate_window_ms,
            );
            let start = SimTime::from_ms(f.start_ms);
            let stop = f.stop_ms.map(SimTime::from_ms);
            queue.schedule(start, Event::FlowStart { flow: idx });
            if let Some(stop) = stop {
                queue.schedule(stop, Event::FlowStop { flow: idx });
            }
            flows.push(FlowRt {
                user,
                sender,
                client,
                ca,
                link: WiredLink::new(
                    (f.link_rate_mbps * 1e6) as u64,
                    (f.link_delay_ms * 1000.0) as u64,
                    f.link_queue_bytes,
                ),
                reverse_delay_us: (f.link_delay_ms * 1000.0) as u64,
                active: false,
                next_seq: 0,
                inflight_bits: 0.0,
                outstanding: BTreeMap::new(),
                latest_acked_sent: SimTime::ZERO,
                arrived_bits_this_sf: 0,
                pacer_scheduled: false,
                blocked: false,
                credit_bits: 0.0,
                credit_at: SimTime::ZERO,
                pending_resends: 0,
                stats: FlowStats::default(),
                last_state: BottleneckState::Wireless,
                last_trace_at: None,
                max_link_queue_bits: 0,
            });
        }

        queue.schedule(SimTime::ZERO, Event::SubframeTick);
        let n_cells = cells.len();
        let n_flows = flows.len();
        Simulation {
            clock: SimTime::ZERO,
            end: SimTime::from_ms(scenario.duration_ms),
            queue,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cells,
            flows,
            report: SimulationReport {
                duration_ms: scenario.duration_ms,
                seed,
                packets: Vec::new(),
                allocations: Vec::new(),
                sender_trace: Vec::new(),
                state_trace: Vec::new(),
                ca_events: Vec::new(),
                flow_stats: vec![FlowStats::default(); n_flows],
                max_link_queue_bits: vec![0; n_flows],
            },
            current_allocs: vec![None; n_cells],
        }
    }

    /// Process every event up to the configured end time and assemble the
    /// report. An empty queue before the end terminates the run early.
    pub fn run(mut self) -> SimulationReport {
        while let Some(at) = self.queue.peek_time() {
            if at >= self.end {
                break;
            }
            let (now, event) = self.queue.pop().unwrap();
            debug_assert!(now >= self.clock, "clock must be monotone");
            self.clock = now;
            self.dispatch(now, event);
        }
        for (idx, f) in self.flows.iter().enumerate() {
            self.report.flow_stats[idx] = f.stats.clone();
            self.report.max_link_queue_bits[idx] = f.max_link_queue_bits;
        }
        self.report
    }

    fn dispatch(&mut self, now: SimTime, event: Event) {
        match event {
            Event::SubframeTick => self.on_tick(now),
            Event::FlowStart { flow } => self.on_flow_start(now, flow),
            Event::FlowStop { flow } => self.flows[flow].active = false,
            Event::PacerFire { flow } => self.on_pacer(now, flow),
            Event::LinkDeparture { flow } => self.on_link_departure(now, flow),
            Event::BsArrival { flow, pkt } => self.on_bs_arrival(now, flow, pkt),
            Event::AckArrival { flow, payload, bits } => self.on_ack(now, flow, payload, bits),
        }
    }

    fn on_flow_start(&mut self, now: SimTime, flow: FlowId) {
        let f = &mut self.flows[flow];
        f.active = true;
        f.sender.on_start(now);
        f.credit_bits = MSS_BITS as f64;
        f.credit_at = now;
        if !f.pacer_scheduled {
            f.pacer_scheduled = true;
            self.queue.schedule(now, Event::PacerFire { flow });
        }
    }

    fn on_tick(&mut self, now: SimTime) {
        let sf = now.subframe();

        // Run every cell's subframe: HARQ, scheduling, TB errors, release.
        let mut released_all = Vec::new();
        for cell_idx in 0..self.cells.len() {
            let mut eligible: HashSet<UserId> = HashSet::new();
            for f in self.flows.iter() {
                let cell_id = self.cells[cell_idx].config.id;
                if f.ca.is_active(cell_id) || self.cells[cell_idx].backlog_bits(f.user) > 0 {
                    eligible.insert(f.user);
                }
            }
            let result = self.cells[cell_idx].run_subframe(sf, &eligible, &mut self.rng);
            self.current_allocs[cell_idx] = Some(result.allocation.clone());
            self.report.allocations.push(result.allocation);
            released_all.extend(result.released.into_iter().map(|(u, r)| (cell_idx, u, r)));
        }

        // Carrier-aggregation control per flow.
        for idx in 0..self.flows.len() {
            let arrived = std::mem::take(&mut self.flows[idx].arrived_bits_this_sf);
            let user = self.flows[idx].user;
            let (mut own, mut total) = (0u32, 0u32);
            for alloc in self.current_allocs.iter().flatten() {
                if self.flows[idx].ca.is_active(alloc.cell) {
                    total += alloc.total_prbs;
                    own += alloc
                        .grants
                        .iter()
                        .filter(|g| g.user == user)
                        .map(|g| g.prbs)
                        .sum::<u32>();
                }
            }
            let cell_rates: Vec<u64> = self.flows[idx]
                .ca
                .cells
                .iter()
                .map(|&c| {
                    let cell = &self.cells[c];
                    cell.rw_at(sf) as u64 * cell.config.total_prbs as u64
                })
                .collect();
            if let Some(event) = self.flows[idx].ca.on_subframe(own, total, arrived, &cell_rates) {
                self.report.ca_events.push((now.as_us() / 1000, idx, event));
                match event {
                    CaEvent::Activated(cell) => {
                        self.cells[cell].attach_user(user);
                        let prbs = self.cells[cell].config.total_prbs;
                        self.flows[idx].client.on_carrier_activated(cell, prbs);
                    }
                    CaEvent::Deactivated(cell) => {
                        self.flows[idx].client.on_carrier_deactivated(cell);
                    }
                }
            }
        }

        // Client-side control-channel observation and estimation.
        for idx in 0..self.flows.len() {
            let f = &mut self.flows[idx];
            let rtprop = f.sender.rtprop_us();
            f.client.set_rtprop(rtprop);
            let primary = f.ca.cells[0];
            f.client.set_ber(self.cells[primary].p_at(sf));
            let allocs: Vec<&SubframeAllocation> = self
                .current_allocs
                .iter()
                .flatten()
                .filter(|a| f.ca.is_active(a.cell))
                .collect();
            f.client.on_subframe(&allocs);
        }

        // Deliveries released by the reorder buffers this subframe; the TB
        // transmission occupies the subframe, so delivery timestamps land at
        // its end.
        let delivery_time = now + 1000;
        for (_, user, rel) in released_all {
            let flow = user as FlowId;
            if flow >= self.flows.len() {
                continue;
            }
            self.on_mac_release(delivery_time, flow, rel);
        }

        // Stale-outstanding scan (covers total ACK loss).
        for idx in 0..self.flows.len() {
            self.detect_losses(now, idx);
        }

        let next = now + 1000;
        if next <= self.end {
            self.queue.schedule(next, Event::SubframeTick);
        }
    }

    fn on_mac_release(&mut self, at: SimTime, flow: FlowId, rel: crate::cellmac::ReleasedPacket) {
        let f = &mut self.flows[flow];
        let pkt = rel.packet;
        let owd_us = at.saturating_sub(pkt.sent_at).as_us();
        self.report.packets.push(PacketRecord {
            flow_id: flow,
            seq: pkt.seq,
            sent_us: pkt.sent_at.as_us(),
            delivered_us: if rel.dropped { None } else { Some(at.as_us()) },
            owd_ms: owd_us as f64 / 1000.0,
            harq_delay_ms: rel.harq_delay_ms,
            dropped: rel.dropped,
        });
        if rel.dropped {
            // Lost at the MAC after exhausting retransmissions.
            if f.outstanding.remove(&pkt.seq).is_some() {
                f.inflight_bits -= pkt.size_bits as f64;
            }
            f.stats.dropped += 1;
            f.pending_resends += 1;
            f.sender.on_loss(at);
            return;
        }
        f.stats.delivered += 1;
        f.client.sender_rate_bps = pkt.sender_rate_bps;
        let payload = f.client.on_delivery(at, pkt.seq, pkt.sent_at, owd_us);
        let state = f.client.state;
        if state != f.last_state {
            f.last_state = state;
            self.report.state_trace.push(StateTraceRow {
                time_us: at.as_us(),
                flow,
                internet: state == BottleneckState::Internet,
            });
        }
        self.queue.schedule(
            at + f.reverse_delay_us,
            Event::AckArrival { flow, payload, bits: pkt.size_bits },
        );
    }

    fn on_pacer(&mut self, now: SimTime, flow: FlowId) {
        let f = &mut self.flows[flow];
        if !f.active {
            f.pacer_scheduled = false;
            return;
        }
        let rate = f.sender.pacing_bps(now).max(1_000.0);
        let cwnd = f.sender.cwnd_bits();
        // Token-bucket pacing: credit keeps accruing at the pacing rate while
        // the cwnd gate is closed, so a flow stalled by an inflight spike
        // catches up afterwards instead of permanently losing send time.
        // Credit is capped at one HARQ retransmission round of sending (the
        // longest routine stall) so the catch-up burst stays small, and every
        // send still re-checks the cwnd gate.
        let burst_cap = (rate * HARQ_RETX_SUBFRAMES as f64 * 1e-3).max(MSS_BITS as f64);
        let dt_us = now.saturating_sub(f.credit_at).as_us() as f64;
        f.credit_bits = (f.credit_bits + rate * dt_us / 1e6).min(burst_cap);
        f.credit_at = now;
        while f.credit_bits >= MSS_BITS as f64 {
            if f.inflight_bits + MSS_BITS as f64 > cwnd {
                f.pacer_scheduled = false;
                f.blocked = true;
                return;
            }
            f.credit_bits -= MSS_BITS as f64;
            let retransmit = f.pending_resends > 0;
            if retransmit {
                f.pending_resends -= 1;
            }
            let pkt = Packet {
                flow,
                seq: f.next_seq,
                size_bits: MSS_BITS,
                sent_at: now,
                sender_rate_bps: rate,
                sender_rtprop_us: f.sender.rtprop_us(),
                retransmit,
            };
            f.next_seq += 1;
            f.stats.sent += 1;
            f.inflight_bits += MSS_BITS as f64;
            f.outstanding.insert(pkt.seq, (now, MSS_BITS));
            if f.sender.is_pbe() {
                // The cwnd gate above enforces the BDP cap; count any escape.
                if f.inflight_bits > cwnd + 1e-6 {
                    f.stats.bdp_violations += 1;
                }
            }
            match f.link.enqueue(pkt, now) {
                EnqueueOutcome::Started(done) => {
                    self.queue.schedule(done, Event::LinkDeparture { flow });
                }
                EnqueueOutcome::Queued => {}
                EnqueueOutcome::Dropped => {
                    // Tail drop at the wired queue; detected later as a loss.
                }
            }
            f.max_link_queue_bits = f.max_link_queue_bits.max(f.link.queued_bits());
        }
        let need = MSS_BITS as f64 - f.credit_bits;
        let gap_us = ((need * 1e6 / rate) as u64).max(1);
        self.queue.schedule(now + gap_us, Event::PacerFire { flow });
    }

    fn on_link_departure(&mut self, now: SimTime, flow: FlowId) {
        let f = &mut self.flows[flow];
        let (pkt, next) = f.link.service_complete(now);
        let prop = f.link.prop_delay_us;
        self.queue.schedule(now + prop, Event::BsArrival { flow, pkt });
        if let Some(done) = next {
            self.queue.schedule(done, Event::LinkDeparture { flow });
        }
    }

    fn on_bs_arrival(&mut self, now: SimTime, flow: FlowId, pkt: Packet) {
        let size = pkt.size_bits;
        let user = self.flows[flow].user;
        let sf = now.subframe();
        // Route to the active cell with the smallest expected drain time.
        let mut best: Option<(f64, usize)> = None;
        for (idx, cell) in self.cells.iter().enumerate() {
            if !self.flows[flow].ca.is_active(cell.config.id) {
                continue;
            }
            let rate = cell.rw_at(sf) as f64 * cell.config.total_prbs as f64;
            let drain = (cell.backlog_bits(user) + size) as f64 / rate.max(1.0);
            if best.map_or(true, |(b, _)| drain < b) {
                best = Some((drain, idx));
            }
        }
        let cell_idx = best.expect("flow has at least its primary cell").1;
        let phy = self.cells[cell_idx].phy_bits(size);
        if self.cells[cell_idx].enqueue(user, pkt) {
            self.flows[flow].arrived_bits_this_sf += phy;
        }
        // A base-station tail drop surfaces later via loss detection.
    }

    fn on_ack(&mut self, now: SimTime, flow: FlowId, payload: AckPayload, bits: u64) {
        let f = &mut self.flows[flow];
        let sent_at = SimTime::from_us(payload.echo_send_time_us);
        if f.outstanding.remove(&payload.echo_seq).is_some() {
            f.inflight_bits -= bits as f64;
        }
        f.latest_acked_sent = f.latest_acked_sent.max(sent_at);
        let rtt_us = now.saturating_sub(sent_at).as_us().max(1);
        let ctx = AckContext {
            payload,
            rtt_us,
            bits_acked: bits,
            inflight_bits: f.inflight_bits,
        };
        f.sender.on_ack(&ctx, now);
        self.detect_losses(now, flow);
        self.maybe_trace(now, flow);
        let f = &mut self.flows[flow];
        if f.blocked && f.active && f.inflight_bits + MSS_BITS as f64 <= f.sender.cwnd_bits() {
            f.blocked = false;
            if !f.pacer_scheduled {
                f.pacer_scheduled = true;
            }
            self.queue.schedule(now, Event::PacerFire { flow });
        }
    }

    /// Declare outstanding packets lost once the receiver has acknowledged
    /// packets sent well after them, or once they are simply stale.
    fn detect_losses(&mut self, now: SimTime, flow: FlowId) {
        let f = &mut self.flows[flow];
        let reorder_cutoff = f.latest_acked_sent.saturating_sub(SimTime::from_us(LOSS_REORDER_US));
        let rtprop = f.sender.rtprop_us();
        let lost: Vec<u64> = f
            .outstanding
            .iter()
            .filter(|&(_, &(sent, _))| {
                sent < reorder_cutoff
                    || now.saturating_sub(sent).as_us() > rtprop + LOSS_TIMEOUT_US
            })
            .map(|(&seq, _)| seq)
            .collect();
        for seq in lost {
            let (sent, bits) = f.outstanding.remove(&seq).unwrap();
            f.inflight_bits -= bits as f64;
            f.stats.dropped += 1;
            f.pending_resends += 1;
            f.sender.on_loss(now);
            self.report.packets.push(PacketRecord {
                flow_id: flow,
                seq,
                sent_us: sent.as_us(),
                delivered_us: None,
                owd_ms: 0.0,
                harq_delay_ms: 0,
                dropped: true,
            });
        }
        let f = &mut self.flows[flow];
        if f.blocked && f.active && f.inflight_bits + MSS_BITS as f64 <= f.sender.cwnd_bits() {
            f.blocked = false;
            if !f.pacer_scheduled {
                f.pacer_scheduled = true;
                self.queue.schedule(now.max(self.clock), Event::PacerFire { flow });
            }
        }
    }

    /// Sample the sender's control state at most every 10 ms per flow.
    fn maybe_trace(&mut self, now: SimTime, flow: FlowId) {
        let f = &mut self.flows[flow];
        if f.last_trace_at.map_or(false, |t| now.saturating_sub(t).as_us() < 10_000) {
            return;
        }
        f.last_trace_at = Some(now);
        let pacing = f.sender.pacing_bps(now);
        self.report.sender_trace.push(SenderTraceRow {
            time_us: now.as_us(),
            flow,
            phase: f.sender.phase_name().to_string(),
            pacing_bps: pacing,
            cwnd_bits: f.sender.cwnd_bits(),
            btlbw_bps: f.sender.btlbw_bps(),
            rtprop_us: f.sender.rtprop_us(),
            c_f_bps: f.sender.c_f_bps(),
            link_queue_bits: f.link.queued_bits(),
        });
    }
}
