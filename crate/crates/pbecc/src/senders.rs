//! Sender-side congestion control: the capacity-feedback state machine with
//! its Internet-mode probing cycle, plus a BBR-like baseline, an AIMD
//! loss-based baseline and a constant-rate application source.

use std::collections::VecDeque;

use crate::cellmac::Timeline;
use crate::clientest::AckPayload;
use crate::simcore::{SimTime, MSS_BITS};

/// ProbeBW pacing-gain cycle; each phase lasts one RTprop.
pub const GAIN_CYCLE: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
/// BtlBw filter window, in RTprop rounds.
pub const BTLBW_WINDOW_RTPROPS: u64 = 10;
/// RTprop min-filter window.
pub const RTPROP_WINDOW_US: u64 = 10_000_000;
/// ProbeRTT duration and cwnd floor.
pub const PROBE_RTT_DURATION_US: u64 = 200_000;
pub const PROBE_RTT_CWND_PACKETS: u64 = 4;
/// Before the first feedback arrives: ten packets paced over an assumed
/// 100 ms round trip.
pub const INITIAL_RATE_BPS: f64 = 10.0 * MSS_BITS as f64 / 0.1;
pub const INITIAL_CWND_BITS: f64 = 10.0 * MSS_BITS as f64;
pub const ASSUMED_RTPROP_US: u64 = 100_000;

/// Windowed min filter over (time, value) samples.
#[derive(Debug, Default)]
pub struct MinFilter {
    window_us: u64,
    deque: VecDeque<(SimTime, u64)>,
    pub last_new_min: Option<SimTime>,
}

impl MinFilter {
    pub fn new(window_us: u64) -> Self {
        MinFilter { window_us, deque: VecDeque::new(), last_new_min: None }
    }

    pub fn update(&mut self, now: SimTime, value: u64) {
        while let Some(&(t, _)) = self.deque.front() {
            if now.saturating_sub(t).as_us() > self.window_us {
                self.deque.pop_front();
            } else {
                break;
            }
        }
        if self.deque.front().map_or(true, |&(_, m)| value <= m) {
            self.last_new_min = Some(now);
        }
        while let Some(&(_, v)) = self.deque.back() {
            if v >= value {
                self.deque.pop_back();
            } else {
                break;
            }
        }
        self.deque.push_back((now, value));
    }

    pub fn get(&self) -> Option<u64> {
        self.deque.front().map(|&(_, v)| v)
    }
}

/// Windowed max filter over (time, value) samples.
#[derive(Debug, Default)]
pub struct MaxFilter {
    window_us: u64,
    deque: VecDeque<(SimTime, f64)>,
}

impl MaxFilter {
    pub fn new(window_us: u64) -> Self {
        MaxFilter { window_us, deque: VecDeque::new() }
    }

    pub fn set_window(&mut self, window_us: u64) {
        self.window_us = window_us.max(1);
    }

    pub fn update(&mut self, now: SimTime, value: f64) {
        while let Some(&(t, _)) = self.deque.front() {
            if now.saturating_sub(t).as_us() > self.window_us {
                self.deque.pop_front();
            } else {
                break;
            }
        }
        while let Some(&(_, v)) = self.deque.back() {
            if v <= value {
                self.deque.pop_back();
            } else {
                break;
            }
        }
        self.deque.push_back((now, value));
    }

    pub fn get(&self) -> Option<f64> {
        self.deque.front().map(|&(_, v)| v)
    }
}

/// Delivery-rate estimator: bits acknowledged over a trailing time window.
#[derive(Debug, Default)]
pub struct DeliveryRate {
    samples: VecDeque<(SimTime, u64)>,
}

impl DeliveryRate {
    pub fn on_ack(&mut self, now: SimTime, bits: u64, window_us: u64) -> Option<f64> {
        self.samples.push_back((now, bits));
        while let Some(&(t, _)) = self.samples.front() {
            if now.saturating_sub(t).as_us() > window_us {
                self.samples.pop_front();
            } else {
                break;
            }
        }
        let first = self.samples.front()?.0;
        let span_us = now.saturating_sub(first).as_us();
        if span_us == 0 || self.samples.len() < 2 {
            return None;
        }
        let bits: u64 = self.samples.iter().skip(1).map(|&(_, b)| b).sum();
        Some(bits as f64 * 1e6 / span_us as f64)
    }
}

/// Everything a sender learns from one acknowledgement.
#[derive(Debug, Clone, Copy)]
pub struct AckContext {
    pub payload: AckPayload,
    pub rtt_us: u64,
    pub bits_acked: u64,
    pub inflight_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    LinearIncrease,
    WirelessCa,
    PreDrain,
    InternetProbeBw,
    InternetProbeRtt,
    InternetStartUp,
    InternetDrain,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::LinearIncrease => "linear_increase",
            Phase::WirelessCa => "wireless_ca",
            Phase::PreDrain => "pre_drain",
            Phase::InternetProbeBw => "probe_bw",
            Phase::InternetProbeRtt => "probe_rtt",
            Phase::InternetStartUp => "startup",
            Phase::InternetDrain => "drain",
        }
    }
}

/// Fair-share ramp: the target rate is approached linearly over three
/// RTprops from the ramp anchor; a changing target keeps the original
/// deadline and retargets the slope.
fn ramp_rate(c_f_bps: f64, elapsed_us: u64, rtprop_us: u64) -> f64 {
    let deadline = 3 * rtprop_us.max(1);
    let frac = (elapsed_us as f64 / deadline as f64).min(1.0);
    c_f_bps * frac
}

/// Probing-phase rate: `min(1.25 * BtlBw, C_f)`.
pub fn probe_rate(btlbw_bps: f64, c_f_bps: f64) -> f64 {
    (1.25 * btlbw_bps).min(c_f_bps)
}

/// Detects the startup exit condition: delivery rate flat for one RTprop
/// while the round-trip delay rises monotonically under growing load.
#[derive(Debug, Default)]
struct PlateauDetector {
    best_rate: f64,
    best_at: Option<SimTime>,
    rtts: VecDeque<(SimTime, u64)>,
}

impl PlateauDetector {
    fn on_sample(&mut self, now: SimTime, rate_bps: f64, rtt_us: u64, rtprop_us: u64) -> bool {
        if rate_bps > self.best_rate * 1.02 {
            self.best_rate = rate_bps;
            self.best_at = Some(now);
        }
        self.rtts.push_back((now, rtt_us));
        while let Some(&(t, _)) = self.rtts.front() {
            if now.saturating_sub(t).as_us() > rtprop_us {
                self.rtts.pop_front();
            } else {
                break;
            }
        }
        let Some(best_at) = self.best_at else { return false };
        if now.saturating_sub(best_at).as_us() < rtprop_us || self.rtts.len() < 4 {
            return false;
        }
        let rising = self.rtts.iter().zip(self.rtts.iter().skip(1)).all(|(a, b)| b.1 >= a.1);
        let spread = self.rtts.back().unwrap().1.saturating_sub(self.rtts.front().unwrap().1);
        rising && spread > 1_000
    }
}

/// The capacity-feedback sender: linear fair-share ramp, wireless rate
/// matching, and a conservative Internet-mode probing cycle.
pub struct PbeSender {
    pub phase: Phase,
    started_at: Option<SimTime>,
    ramp_start: SimTime,
    phase_start: SimTime,
    pub gain_index: usize,
    pacing_bps: f64,
    /// Latest wireless-capacity rate from feedback, bits/s.
    c_t_bps: f64,
    /// Latest fair-share rate (transport units), bits/s.
    pub c_f_bps: f64,
    rtprop: MinFilter,
    btlbw: MaxFilter,
    delivery: DeliveryRate,
    plateau: PlateauDetector,
    predrain_rate_bps: f64,
    probe_rtt_until: Option<SimTime>,
    reprobe_until: Option<SimTime>,
    /// Sends that would have pushed inflight past the BDP cap; the pacer
    /// gate keeps this at zero.
    pub bdp_violations: u64,
}

impl PbeSender {
    pub fn new() -> Self {
        PbeSender {
            phase: Phase::LinearIncrease,
            started_at: None,
            ramp_start: SimTime::ZERO,
            phase_start: SimTime::ZERO,
            gain_index: 0,
            pacing_bps: INITIAL_RATE_BPS,
            c_t_bps: 0.0,
            c_f_bps: 0.0,
            rtprop: MinFilter::new(RTPROP_WINDOW_US),
            btlbw: MaxFilter::new(BTLBW_WINDOW_RTPROPS * ASSUMED_RTPROP_US),
            delivery: DeliveryRate::default(),
            plateau: PlateauDetector::default(),
            predrain_rate_bps: 0.0,
            probe_rtt_until: None,
            reprobe_until: None,
            bdp_violations: 0,
        }
    }

    pub fn on_start(&mut self, now: SimTime) {
        self.started_at = Some(now);
        self.ramp_start = now;
        self.phase_start = now;
    }

    pub fn rtprop_us(&self) -> u64 {
        self.rtprop.get().unwrap_or(ASSUMED_RTPROP_US)
    }

    pub fn btlbw_bps(&self) -> f64 {
        self.btlbw.get().unwrap_or(self.pacing_bps)
    }

    fn enter(&mut self, phase: Phase, now: SimTime) {
        self.phase = phase;
        self.phase_start = now;
    }

    pub fn on_ack(&mut self, ctx: &AckContext, now: SimTime) {
        let rtprop_us = {
            self.rtprop.update(now, ctx.rtt_us);
            self.rtprop.get().unwrap()
        };
        self.btlbw.set_window(BTLBW_WINDOW_RTPROPS * rtprop_us);
        if let Some(rate) = self.delivery.on_ack(now, ctx.bits_acked, rtprop_us.max(1_000)) {
            self.btlbw.update(now, rate);
        }
        let p = &ctx.payload;
        if p.interval_us > 0 && p.interval_us < u32::MAX {
            self.c_t_bps = MSS_BITS as f64 * 1e6 / p.interval_us as f64;
        }
        self.c_f_bps = p.c_f_bits_per_subframe as f64 * 1000.0;

        if p.carrier_activated
            && matches!(self.phase, Phase::LinearIncrease | Phase::WirelessCa)
        {
            // More carriers: restart the fair-share approach with summed C_f.
            self.ramp_start = now;
            self.enter(Phase::LinearIncrease, now);
        }

        match self.phase {
            Phase::LinearIncrease => {
                let elapsed = now.saturating_sub(self.ramp_start).as_us();
                self.pacing_bps = ramp_rate(self.c_f_bps, elapsed, rtprop_us).max(INITIAL_RATE_BPS);
                let delivery_rate = self.btlbw.get().unwrap_or(0.0);
                if p.internet_bottleneck
                    || self.plateau.on_sample(now, delivery_rate, ctx.rtt_us, rtprop_us)
                {
                    self.predrain_rate_bps = 0.5 * self.btlbw_bps();
                    self.enter(Phase::PreDrain, now);
                } else if elapsed >= 3 * rtprop_us {
                    self.enter(Phase::WirelessCa, now);
                    self.pacing_bps = self.wireless_rate();
                }
            }
            Phase::WirelessCa => {
                if p.internet_bottleneck {
                    self.predrain_rate_bps = 0.5 * self.btlbw_bps();
                    self.enter(Phase::PreDrain, now);
                } else {
                    self.pacing_bps = self.wireless_rate();
                    if p.reprobe_rtprop && self.reprobe_until.is_none() {
                        self.reprobe_until = Some(now + rtprop_us);
                    }
                }
            }
            Phase::PreDrain | Phase::InternetDrain => {
                self.pacing_bps = self.predrain_rate_bps.max(INITIAL_RATE_BPS);
            }
            Phase::InternetProbeBw | Phase::InternetStartUp => {
                if !p.internet_bottleneck {
                    self.enter(Phase::WirelessCa, now);
                    self.pacing_bps = self.wireless_rate();
                } else if self
                    .rtprop
                    .last_new_min
                    .map_or(false, |t| now.saturating_sub(t).as_us() >= RTPROP_WINDOW_US)
                {
                    self.probe_rtt_until = Some(now + PROBE_RTT_DURATION_US);
                    self.rtprop.last_new_min = Some(now);
                    self.enter(Phase::InternetProbeRtt, now);
                }
            }
            Phase::InternetProbeRtt => {}
        }
        self.advance_timers(now);
    }

    /// Advance RTprop-clocked phase timers; called from both the ACK path
    /// and the pacer so phases progress even when ACKs stall.
    pub fn advance_timers(&mut self, now: SimTime) {
        let rtprop_us = self.rtprop_us();
        match self.phase {
            Phase::PreDrain | Phase::InternetDrain => {
                if now.saturating_sub(self.phase_start).as_us() >= rtprop_us {
                    self.gain_index = 0;
                    self.enter(Phase::InternetProbeBw, now);
                }
            }
            Phase::InternetProbeBw => {
                while now.saturating_sub(self.phase_start).as_us() >= rtprop_us {
                    self.phase_start += rtprop_us;
                    self.gain_index = (self.gain_index + 1) % GAIN_CYCLE.len();
                }
            }
            Phase::InternetProbeRtt => {
                if let Some(until) = self.probe_rtt_until {
                    if now >= until {
                        self.probe_rtt_until = None;
                        self.gain_index = 2; // resume cruising
                        self.enter(Phase::InternetProbeBw, now);
                    }
                }
            }
            _ => {}
        }
        if let Some(until) = self.reprobe_until {
            if now >= until {
                self.reprobe_until = None;
            }
        }
    }

    pub fn pacing_bps(&mut self, now: SimTime) -> f64 {
        self.advance_timers(now);
        let rate = match self.phase {
            Phase::LinearIncrease | Phase::WirelessCa => {
                if self.reprobe_until.is_some() {
                    0.75 * self.pacing_bps
                } else {
                    self.pacing_bps
                }
            }
            Phase::PreDrain | Phase::InternetDrain => self.predrain_rate_bps,
            Phase::InternetProbeBw => {
                let btlbw = self.btlbw_bps();
                if self.gain_index == 0 {
                    probe_rate(btlbw, self.fair_share_cap())
                } else {
                    GAIN_CYCLE[self.gain_index] * btlbw
                }
            }
            Phase::InternetProbeRtt => self.btlbw_bps() * 0.5,
            Phase::InternetStartUp => 2.885 * self.btlbw_bps(),
        };
        rate.max(INITIAL_RATE_BPS.min(1e5))
    }

    pub fn cwnd_bits(&self) -> f64 {
        if self.rtprop.get().is_none() {
            return INITIAL_CWND_BITS;
        }
        if self.phase == Phase::InternetProbeRtt {
            return (PROBE_RTT_CWND_PACKETS * MSS_BITS) as f64;
        }
        let bdp = self.rtprop_us() as f64 / 1e6 * self.pacing_snapshot();
        bdp.max(2.0 * MSS_BITS as f64)
    }

    /// Wireless-mode rate: match the estimated capacity, never below the
    /// fair share. The capacity estimate tracks the user's current grants,
    /// so without the fair-share floor a backlogged competitor could pin a
    /// conservative flow at whatever it currently receives.
    fn wireless_rate(&self) -> f64 {
        self.c_t_bps.max(self.c_f_bps).max(INITIAL_RATE_BPS)
    }

    /// Fair-share cap for probing; unbounded until the first feedback
    /// carries a fair-share estimate.
    fn fair_share_cap(&self) -> f64 {
        if self.c_f_bps > 0.0 {
            self.c_f_bps
        } else {
            f64::INFINITY
        }
    }

    fn pacing_snapshot(&self) -> f64 {
        match self.phase {
            Phase::LinearIncrease | Phase::WirelessCa => self.pacing_bps,
            Phase::PreDrain | Phase::InternetDrain => self.predrain_rate_bps,
            Phase::InternetProbeBw => {
                let btlbw = self.btlbw_bps();
                if self.gain_index == 0 {
                    probe_rate(btlbw, self.fair_share_cap())
                } else {
                    GAIN_CYCLE[self.gain_index] * btlbw
                }
            }
            Phase::InternetProbeRtt => self.btlbw_bps() * 0.5,
            Phase::InternetStartUp => 2.885 * self.btlbw_bps(),
        }
    }
}

impl Default for PbeSender {
    fn default() -> Self {
        Self::new()
    }
}

/// Conventional BBR-like baseline: StartUp/Drain/ProbeBW/ProbeRTT with the
/// same gain cycle, BtlBw as the max delivery rate over 10 round trips.
pub struct BbrSender {
    pub phase: Phase,
    phase_start: SimTime,
    pub gain_index: usize,
    rtprop: MinFilter,
    btlbw: MaxFilter,
    delivery: DeliveryRate,
    full_bw: f64,
    full_bw_rounds: u32,
    round_start: SimTime,
    probe_rtt_until: Option<SimTime>,
}

const BBR_STARTUP_GAIN: f64 = 2.885;

impl BbrSender {
    pub fn new() -> Self {
        BbrSender {
            phase: Phase::InternetStartUp,
            phase_start: SimTime::ZERO,
            gain_index: 0,
            rtprop: MinFilter::new(RTPROP_WINDOW_US),
            btlbw: MaxFilter::new(BTLBW_WINDOW_RTPROPS * ASSUMED_RTPROP_US),
            delivery: DeliveryRate::default(),
            full_bw: 0.0,
            full_bw_rounds: 0,
            round_start: SimTime::ZERO,
            probe_rtt_until: None,
        }
    }

    pub fn rtprop_us(&self) -> u64 {
        self.rtprop.get().unwrap_or(ASSUMED_RTPROP_US)
    }

    pub fn btlbw_bps(&self) -> f64 {
        self.btlbw.get().unwrap_or(INITIAL_RATE_BPS)
    }

    pub fn on_ack(&mut self, ctx: &AckContext, now: SimTime) {
        self.rtprop.update(now, ctx.rtt_us);
        let rtprop_us = self.rtprop.get().unwrap();
        self.btlbw.set_window(BTLBW_WINDOW_RTPROPS * rtprop_us);
        if let Some(rate) = self.delivery.on_ack(now, ctx.bits_acked, rtprop_us.max(1_000)) {
            self.btlbw.update(now, rate);
        }
        match self.phase {
            Phase::InternetStartUp => {
                if now.saturating_sub(self.round_start).as_us() >= rtprop_us {
                    self.round_start = now;
                    let bw = self.btlbw_bps();
                    if bw > self.full_bw * 1.25 {
                        self.full_bw = bw;
                        self.full_bw_rounds = 0;
                    } else {
                        self.full_bw_rounds += 1;
                        if self.full_bw_rounds >= 3 {
                            self.phase = Phase::InternetDrain;
                            self.phase_start = now;
                        }
                    }
                }
            }
            Phase::InternetDrain => {
                let bdp = self.btlbw_bps() * rtprop_us as f64 / 1e6;
                if ctx.inflight_bits <= bdp {
                    self.phase = Phase::InternetProbeBw;
                    self.phase_start = now;
                    self.gain_index = 2;
                }
            }
            Phase::InternetProbeBw => {
                if self
                    .rtprop
                    .last_new_min
                    .map_or(false, |t| now.saturating_sub(t).as_us() >= RTPROP_WINDOW_US)
                {
                    self.probe_rtt_until = Some(now + PROBE_RTT_DURATION_US);
                    self.rtprop.last_new_min = Some(now);
                    self.phase = Phase::InternetProbeRtt;
                    self.phase_start = now;
                }
            }
            _ => {}
        }
        self.advance_timers(now);
    }

    pub fn advance_timers(&mut self, now: SimTime) {
        let rtprop_us = self.rtprop_us();
        match self.phase {
            Phase::InternetProbeBw => {
                while now.saturating_sub(self.phase_start).as_us() >= rtprop_us {
                    self.phase_start += rtprop_us;
                    self.gain_index = (self.gain_index + 1) % GAIN_CYCLE.len();
                }
            }
            Phase::InternetProbeRtt => {
                if let Some(until) = self.probe_rtt_until {
                    if now >= until {
                        self.probe_rtt_until = None;
                        self.phase = Phase::InternetProbeBw;
                        self.phase_start = now;
                        self.gain_index = 2;
                    }
                }
            }
            _ => {}
        }
    }

    pub fn pacing_bps(&mut self, now: SimTime) -> f64 {
        self.advance_timers(now);
        let rate = match self.phase {
            Phase::InternetStartUp => BBR_STARTUP_GAIN * self.btlbw_bps(),
            Phase::InternetDrain => self.btlbw_bps() / BBR_STARTUP_GAIN,
            Phase::InternetProbeBw => GAIN_CYCLE[self.gain_index] * self.btlbw_bps(),
            Phase::InternetProbeRtt => 0.5 * self.btlbw_bps(),
            _ => self.btlbw_bps(),
        };
        rate.max(INITIAL_RATE_BPS)
    }

    pub fn cwnd_bits(&self) -> f64 {
        if self.phase == Phase::InternetProbeRtt {
            return (PROBE_RTT_CWND_PACKETS * MSS_BITS) as f64;
        }
        let bdp = self.btlbw_bps() * self.rtprop_us() as f64 / 1e6;
        let gain = if self.phase == Phase::InternetStartUp { BBR_STARTUP_GAIN } else { 2.0 };
        (gain * bdp).max(INITIAL_CWND_BITS)
    }
}

impl Default for BbrSender {
    fn default() -> Self {
        Self::new()
    }
}

/// Loss-based baseline: additive increase of one MSS per RTT, halve on loss.
pub struct AimdSender {
    pub cwnd_bits: f64,
    srtt_us: f64,
    last_decrease: SimTime,
}

impl AimdSender {
    pub fn new() -> Self {
        AimdSender {
            cwnd_bits: INITIAL_CWND_BITS,
            srtt_us: ASSUMED_RTPROP_US as f64,
            last_decrease: SimTime::ZERO,
        }
    }

    pub fn on_ack(&mut self, ctx: &AckContext, _now: SimTime) {
        self.srtt_us = 0.875 * self.srtt_us + 0.125 * ctx.rtt_us as f64;
        self.cwnd_bits += MSS_BITS as f64 * (ctx.bits_acked as f64 / self.cwnd_bits);
    }

    pub fn on_loss(&mut self, now: SimTime) {
        // One multiplicative decrease per round trip.
        if now.saturating_sub(self.last_decrease).as_us() as f64 >= self.srtt_us {
            self.cwnd_bits = (self.cwnd_bits * 0.5).max(2.0 * MSS_BITS as f64);
            self.last_decrease = now;
        }
    }

    pub fn pacing_bps(&self) -> f64 {
        self.cwnd_bits * 1e6 / self.srtt_us
    }
}

impl Default for AimdSender {
    fn default() -> Self {
        Self::new()
    }
}

/// Application-limited constant-rate source (scenario traffic generator).
pub struct ConstantSender {
    pub rate_bps: Timeline<u64>,
}

/// Any of the sender algorithms, behind one dispatch surface for the engine.
pub enum Sender {
    Pbe(Box<PbeSender>),
    Bbr(Box<BbrSender>),
    Aimd(Box<AimdSender>),
    Constant(ConstantSender),
}

impl Sender {
    pub fn on_start(&mut self, now: SimTime) {
        if let Sender::Pbe(s) = self {
            s.on_start(now);
        }
    }

    pub fn on_ack(&mut self, ctx: &AckContext, now: SimTime) {
        match self {
            Sender::Pbe(s) => s.on_ack(ctx, now),
            Sender::Bbr(s) => s.on_ack(ctx, now),
            Sender::Aimd(s) => s.on_ack(ctx, now),
            Sender::Constant(_) => {}
        }
    }

    pub fn on_loss(&mut self, now: SimTime) {
        if let Sender::Aimd(s) = self {
            s.on_loss(now);
        }
        // Feedback-driven and BBR-like senders do not react to loss; the
        // capacity signal already reflects the channel.
    }

    pub fn pacing_bps(&mut self, now: SimTime) -> f64 {
        match self {
            Sender::Pbe(s) => s.pacing_bps(now),
            Sender::Bbr(s) => s.pacing_bps(now),
            Sender::Aimd(s) => s.pacing_bps(),
            Sender::Constant(s) => s.rate_bps.value_at(now.as_us() / 1000) as f64,
        }
    }

    pub fn cwnd_bits(&self) -> f64 {
        match self {
            Sender::Pbe(s) => s.cwnd_bits(),
            Sender::Bbr(s) => s.cwnd_bits(),
            Sender::Aimd(s) => s.cwnd_bits,
            Sender::Constant(_) => f64::INFINITY,
        }
    }

    pub fn rtprop_us(&self) -> u64 {
        match self {
            Sender::Pbe(s) => s.rtprop_us(),
            Sender::Bbr(s) => s.rtprop_us(),
            Sender::Aimd(s) => s.srtt_us as u64,
            Sender::Constant(_) => 0,
        }
    }

    pub fn btlbw_bps(&self) -> f64 {
        match self {
            Sender::Pbe(s) => s.btlbw_bps(),
            Sender::Bbr(s) => s.btlbw_bps(),
            _ => 0.0,
        }
    }

    pub fn c_f_bps(&self) -> f64 {
        match self {
            Sender::Pbe(s) => s.c_f_bps,
            _ => 0.0,
        }
    }

    pub fn phase_name(&self) -> &'static str {
        match self {
            Sender::Pbe(s) => s.phase.name(),
            Sender::Bbr(s) => s.phase.name(),
            Sender::Aimd(_) => "aimd",
            Sender::Constant(_) => "constant",
        }
    }

    pub fn is_pbe(&self) -> bool {
        matches!(self, Sender::Pbe(_))
    }
}
