//! The mobile-client brain: fair-share and physical capacity estimation,
//! physical-to-transport rate translation, bottleneck-state detection and
//! per-ACK feedback synthesis.
//!
//! Unit convention: all internal rates are in bits per 1-ms subframe, so a
//! rate of 12000 bits/subframe equals 12 Mbit/s. The transport block size
//! used in the translation equals the transport rate in these units.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cellmac::SubframeAllocation;
use crate::ctrlchan::CellObservation;
use crate::simcore::{CellId, SimTime, UserId, MSS_BITS};

/// Protocol-header overhead fraction of the physical capacity.
pub const DEFAULT_OVERHEAD: f64 = 0.068;
/// Allowance above the propagation floor: three HARQ rounds plus jitter.
pub const DELAY_THRESHOLD_MARGIN_US: u64 = (3 * 8 + 3) * 1000;
/// Sliding window for the minimum one-way delay.
pub const DPROP_WINDOW_US: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum TranslateError {
    #[error("bit error rate must be in [0,1), got {0}")]
    InvalidBer(f64),
    #[error("overhead must be in [0,1), got {0}")]
    InvalidOverhead(f64),
}

/// Fair-share rate over the active cells, in bits per subframe: each cell
/// contributes `R_w * P_cell / N`, fractional PRBs retained.
pub fn fair_share_rate(cells: &[(f64, u32, usize)]) -> f64 {
    cells
        .iter()
        .map(|&(rw, p_cell, n)| {
            assert!(n >= 1, "every cell sees at least the observing user");
            rw * p_cell as f64 / n as f64
        })
        .sum()
}

/// Available physical capacity over the active cells, in bits per subframe:
/// each cell contributes `R_w * (P_a + P_idle / N)`.
pub fn estimate_capacity(cells: &[(f64, f64, f64, usize)]) -> f64 {
    cells
        .iter()
        .map(|&(rw, p_a, p_idle, n)| {
            assert!(n >= 1);
            rw * (p_a + p_idle / n as f64)
        })
        .sum()
}

/// Translate physical capacity to transport goodput by solving
/// `C_p = C_t + C_t*(1-(1-p)^L) + overhead*C_p` with `L = C_t` (bits per
/// subframe), via bisection on the monotone map `C_t * (2-(1-p)^L)`.
pub fn translate_capacity(c_p: f64, p: f64, overhead: f64) -> Result<f64, TranslateError> {
    if !(0.0..1.0).contains(&p) {
        return Err(TranslateError::InvalidBer(p));
    }
    if !(0.0..1.0).contains(&overhead) {
        return Err(TranslateError::InvalidOverhead(overhead));
    }
    assert!(c_p >= 0.0, "capacity must be non-negative");
    if c_p == 0.0 {
        return Ok(0.0);
    }
    let target = (1.0 - overhead) * c_p;
    if p == 0.0 {
        // No retransmission term: C_p = C_t + overhead*C_p exactly.
        return Ok(target);
    }
    let f = |c_t: f64| {
        let survive = if p == 0.0 { 1.0 } else { (c_t * (-p).ln_1p()).exp() };
        c_t * (2.0 - survive)
    };
    let (mut lo, mut hi) = (0.0_f64, target);
    debug_assert!(f(hi) >= target - 1e-9 * target);
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Precomputed translation table: log-spaced physical-capacity points for a
/// fixed (p, overhead) pair, linearly interpolated. Agrees with bisection
/// within 0.1% over its range.
#[derive(Debug, Clone)]
pub struct TranslationTable {
    pub p: f64,
    pub overhead: f64,
    points: Vec<(f64, f64)>, // (c_p, c_t)
}

pub const TABLE_POINTS: usize = 1024;
const TABLE_MIN_CP: f64 = 1.0;
const TABLE_MAX_CP: f64 = 1e7;

impl TranslationTable {
    pub fn build(p: f64, overhead: f64) -> Result<Self, TranslateError> {
        let mut points = Vec::with_capacity(TABLE_POINTS);
        let log_min = TABLE_MIN_CP.ln();
        let log_max = TABLE_MAX_CP.ln();
        for i in 0..TABLE_POINTS {
            let c_p = (log_min + (log_max - log_min) * i as f64 / (TABLE_POINTS - 1) as f64).exp();
            points.push((c_p, translate_capacity(c_p, p, overhead)?));
        }
        Ok(TranslationTable { p, overhead, points })
    }

    pub fn translate(&self, c_p: f64) -> f64 {
        if c_p <= 0.0 {
            return 0.0;
        }
        let pts = &self.points;
        if c_p <= pts[0].0 {
            // Below the grid the map is essentially linear in c_p.
            return pts[0].1 * c_p / pts[0].0;
        }
        if c_p >= pts[pts.len() - 1].0 {
            let (cp1, ct1) = pts[pts.len() - 1];
            return ct1 * c_p / cp1;
        }
        let idx = pts.partition_point(|&(cp, _)| cp < c_p);
        let (cp0, ct0) = pts[idx - 1];
        let (cp1, ct1) = pts[idx];
        ct0 + (ct1 - ct0) * (c_p - cp0) / (cp1 - cp0)
    }
}

/// Consecutive-packet guard: the number of packets sendable in six subframes
/// at the current transport rate, ceiling with a floor of one.
pub fn consecutive_threshold(c_t_bits_per_subframe: f64, mss_bits: u64) -> u32 {
    let n = (6.0 * c_t_bits_per_subframe / mss_bits as f64).ceil();
    (n as u32).max(1)
}

/// Which hop limits the flow; mirrored into every ACK as one bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BottleneckState {
    Wireless,
    Internet,
}

/// Minimum one-way delay over a 10-second sliding window, the switch
/// threshold derived from it, and the consecutive over/under counters.
#[derive(Debug)]
pub struct DelayTracker {
    samples: VecDeque<(SimTime, u64)>, // monotone min-deque of (time, owd_us)
    pub over_count: u32,
    pub under_count: u32,
    last_new_min: SimTime,
    pub reprobe_requested: bool,
}

impl Default for DelayTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl DelayTracker {
    pub fn new() -> Self {
        DelayTracker {
            samples: VecDeque::new(),
            over_count: 0,
            under_count: 0,
            last_new_min: SimTime::ZERO,
            reprobe_requested: false,
        }
    }

    pub fn d_prop_us(&self) -> Option<u64> {
        self.samples.front().map(|&(_, owd)| owd)
    }

    /// `D_th = D_prop + 3*8 + 3` ms.
    pub fn d_th_us(&self) -> Option<u64> {
        self.d_prop_us().map(|d| d + DELAY_THRESHOLD_MARGIN_US)
    }

    pub fn on_sample(&mut self, now: SimTime, owd_us: u64) {
        // Expire and maintain the monotone deque.
        while let Some(&(t, _)) = self.samples.front() {
            if now.saturating_sub(t).as_us() > DPROP_WINDOW_US {
                self.samples.pop_front();
            } else {
                break;
            }
        }
        let is_new_min = self.d_prop_us().map_or(true, |m| owd_us < m);
        while let Some(&(_, v)) = self.samples.back() {
            if v >= owd_us {
                self.samples.pop_back();
            } else {
                break;
            }
        }
        self.samples.push_back((now, owd_us));
        if is_new_min {
            self.last_new_min = now;
        } else if now.saturating_sub(self.last_new_min).as_us() >= DPROP_WINDOW_US {
            // Delay has not probed a new floor in 10 s; ask the sender to
            // drain so the true propagation delay can surface.
            self.reprobe_requested = true;
            self.last_new_min = now;
        }

        let d_th = self.d_th_us().unwrap();
        if owd_us > d_th {
            self.over_count += 1;
            self.under_count = 0;
        } else if owd_us < d_th {
            self.under_count += 1;
            self.over_count = 0;
        } else {
            self.over_count = 0;
            self.under_count = 0;
        }
    }
}

/// Apply the state-switch rules to the current counters.
///
/// Wireless -> Internet: at least `n_pkt` consecutive samples over D_th.
/// Internet -> Wireless: at least `n_pkt` consecutive samples under D_th and
/// the sender has reached the fair-share rate.
pub fn state_transition(
    state: BottleneckState,
    over_count: u32,
    under_count: u32,
    n_pkt: u32,
    rate_reached_fair_share: bool,
) -> BottleneckState {
    match state {
        BottleneckState::Wireless if over_count >= n_pkt => BottleneckState::Internet,
        BottleneckState::Internet if under_count >= n_pkt && rate_reached_fair_share => {
            BottleneckState::Wireless
        }
        s => s,
    }
}

/// Capacity estimate snapshot, all rates in bits per subframe.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub c_p: f64,
    pub c_f: f64,
    /// Transport-layer translation of `c_p`.
    pub c_t: f64,
    /// Transport-layer translation of `c_f`, fed back for Internet-mode
    /// probing.
    pub c_f_transport: f64,
    pub users: usize,
}

/// Feedback carried on every ACK: the send interval between 1500-byte
/// packets encoded with microsecond resolution in a 32-bit field, the
/// bottleneck-state bit, and the fair-share echo.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AckPayload {
    pub interval_us: u32,
    pub internet_bottleneck: bool,
    pub c_f_bits_per_subframe: u32,
    pub echo_seq: u64,
    pub echo_send_time_us: u64,
    /// Set once after a secondary carrier activates, so the sender restarts
    /// its fair-share ramp.
    pub carrier_activated: bool,
    /// Set when the client wants the sender to drain for a D_prop re-probe.
    pub reprobe_rtprop: bool,
}

/// Interval in microseconds between 1500-byte sends at `c_t` bits/subframe.
pub fn feedback_interval_us(c_t_bits_per_subframe: f64) -> u32 {
    if c_t_bits_per_subframe <= 0.0 {
        return u32::MAX;
    }
    let us = MSS_BITS as f64 * 1000.0 / c_t_bits_per_subframe;
    (us.round() as u64).clamp(1, u32::MAX as u64) as u32
}

/// Per-flow client: windows per aggregated cell, the capacity estimates and
/// the bottleneck-state machine.
pub struct ClientEstimator {
    pub user: UserId,
    overhead: f64,
    table: TranslationTable,
    current_p: f64,
    observations: Vec<CellObservation>,
    pub delay: DelayTracker,
    pub state: BottleneckState,
    pub estimate: CapacityEstimate,
    pub n_pkt: u32,
    carrier_event_pending: bool,
    /// Latest sender pacing rate echoed in data packets, bits/s.
    pub sender_rate_bps: f64,
    window_sf: usize,
}

impl ClientEstimator {
    pub fn new(user: UserId, p: f64, overhead: f64) -> Self {
        ClientEstimator {
            user,
            overhead,
            table: TranslationTable::build(p, overhead).expect("valid p/overhead"),
            current_p: p,
            observations: Vec::new(),
            delay: DelayTracker::new(),
            state: BottleneckState::Wireless,
            estimate: CapacityEstimate::default(),
            n_pkt: 1,
            carrier_event_pending: false,
            sender_rate_bps: 0.0,
            window_sf: 40,
        }
    }

    pub fn set_ber(&mut self, p: f64) {
        if p != self.current_p {
            self.current_p = p;
            self.table = TranslationTable::build(p, self.overhead).expect("valid p/overhead");
        }
    }

    /// Start observing a cell without flagging a carrier event; used for the
    /// primary cell at attach time.
    pub fn attach_cell(&mut self, cell: CellId, total_prbs: u32) {
        self.observations.push(CellObservation::new(cell, total_prbs));
    }

    pub fn on_carrier_activated(&mut self, cell: CellId, total_prbs: u32) {
        self.observations.push(CellObservation::new(cell, total_prbs));
        self.carrier_event_pending = true;
    }

    pub fn on_carrier_deactivated(&mut self, cell: CellId) {
        self.observations.retain(|o| o.cell != cell);
    }

    /// Window length follows the sender-stamped RTprop.
    pub fn set_rtprop(&mut self, rtprop_us: u64) {
        if rtprop_us > 0 {
            self.window_sf = (rtprop_us.div_ceil(1000) as usize).max(1);
        }
    }

    /// Ingest this subframe's decoded allocations (one per active cell) and
    /// refresh the estimates.
    pub fn on_subframe(&mut self, allocs: &[&SubframeAllocation]) {
        for alloc in allocs {
            if let Some(obs) = self.observations.iter_mut().find(|o| o.cell == alloc.cell) {
                obs.set_window(self.window_sf);
                obs.observe(alloc, self.user);
            }
        }
        let mut c_p = 0.0;
        let mut c_f = 0.0;
        let mut c_t = 0.0;
        let mut c_f_t = 0.0;
        let mut users = 1;
        for obs in &self.observations {
            let w = obs.windowed();
            let cell_cp = estimate_capacity(&[(w.rw, w.own_prbs, w.idle_prbs, w.users)]);
            let cell_cf = fair_share_rate(&[(w.rw, obs.total_prbs, w.users)]);
            c_p += cell_cp;
            c_f += cell_cf;
            // The TB-size term is per cell, so each cell translates its own
            // share before summing.
            c_t += self.table.translate(cell_cp);
            c_f_t += self.table.translate(cell_cf);
            users = users.max(w.users);
        }
        self.estimate = CapacityEstimate { c_p, c_f, c_t, c_f_transport: c_f_t, users };
        self.n_pkt = consecutive_threshold(c_t.max(c_f_t), MSS_BITS);
    }

    /// Record a delivered packet and produce the ACK feedback for it.
    pub fn on_delivery(&mut self, now: SimTime, seq: u64, sent_at: SimTime, owd_us: u64) -> AckPayload {
        self.delay.on_sample(now, owd_us);
        let reached = self.sender_rate_bps >= 0.95 * self.estimate.c_f_transport * 1000.0;
        let next = state_transition(
            self.state,
            self.delay.over_count,
            self.delay.under_count,
            self.n_pkt,
            reached,
        );
        self.state = next;
        let reprobe = std::mem::take(&mut self.delay.reprobe_requested);
        AckPayload {
            interval_us: feedback_interval_us(self.estimate.c_t),
            internet_bottleneck: self.state == BottleneckState::Internet,
            c_f_bits_per_subframe: self.estimate.c_f_transport.round().clamp(0.0, u32::MAX as f64)
                as u32,
            echo_seq: seq,
            echo_send_time_us: sent_at.as_us(),
            carrier_activated: std::mem::take(&mut self.carrier_event_pending),
            reprobe_rtprop: reprobe,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_share_arithmetic() {
        assert_eq!(fair_share_rate(&[(1000.0, 100, 4)]), 25_000.0);
        assert_eq!(fair_share_rate(&[(1000.0, 100, 2), (800.0, 50, 1)]), 90_000.0);
        assert_eq!(fair_share_rate(&[(1800.0, 50, 1)]), 90_000.0);
    }

    #[test]
    fn capacity_arithmetic() {
        assert_eq!(estimate_capacity(&[(1000.0, 20.0, 10.0, 2)]), 25_000.0);
        assert_eq!(estimate_capacity(&[(1000.0, 20.0, 10.0, 2), (800.0, 10.0, 0.0, 4)]), 33_000.0);
        assert_eq!(estimate_capacity(&[(1000.0, 20.0, 0.0, 7)]), 20_000.0);
    }

    #[test]
    fn translate_degenerate_cases() {
        assert_eq!(translate_capacity(100_000.0, 0.0, 0.0).unwrap(), 100_000.0);
        let ct = translate_capacity(100_000.0, 0.0, DEFAULT_OVERHEAD).unwrap();
        assert!((ct - 93_200.0).abs() < 1e-3, "ct={ct}");
    }

    #[test]
    fn translate_residual_is_tiny() {
        let c_p = 100_000.0;
        let p = 3e-6;
        let gamma = DEFAULT_OVERHEAD;
        let c_t = translate_capacity(c_p, p, gamma).unwrap();
        let survive = (c_t * (-p).ln_1p()).exp();
        let residual = (c_t * (2.0 - survive) - (1.0 - gamma) * c_p).abs();
        assert!(residual < 1e-6 * c_p, "residual={residual}");
    }

    #[test]
    fn translate_rejects_bad_inputs() {
        assert!(translate_capacity(1.0, 1.0, 0.0).is_err());
        assert!(translate_capacity(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn table_matches_bisection() {
        let table = TranslationTable::build(3e-6, DEFAULT_OVERHEAD).unwrap();
        for &c_p in &[150.0, 9_000.0, 120_000.0, 2.5e6] {
            let exact = translate_capacity(c_p, 3e-6, DEFAULT_OVERHEAD).unwrap();
            let approx = table.translate(c_p);
            assert!((approx - exact).abs() <= 1e-3 * exact, "c_p={c_p}");
        }
    }

    #[test]
    fn n_pkt_rounding() {
        assert_eq!(consecutive_threshold(18_000.0, 12_000), 9);
        assert_eq!(consecutive_threshold(1_000.0, 12_000), 1);
        assert_eq!(consecutive_threshold(24_000.0, 12_000), 12);
    }

    #[test]
    fn d_prop_tracks_window_minimum() {
        let mut t = DelayTracker::new();
        for (i, ms) in [30u64, 31, 30, 29].iter().enumerate() {
            t.on_sample(SimTime::from_ms(i as u64), ms * 1000);
        }
        assert_eq!(t.d_prop_us(), Some(29_000));
        assert_eq!(t.d_th_us(), Some(56_000));
        t.on_sample(SimTime::from_ms(10), 25_000);
        assert_eq!(t.d_prop_us(), Some(25_000));
    }

    #[test]
    fn constant_delay_triggers_reprobe() {
        let mut t = DelayTracker::new();
        let mut fired = false;
        for i in 0..1200u64 {
            t.on_sample(SimTime::from_ms(i * 10), 30_000);
            fired |= t.reprobe_requested;
        }
        assert!(fired);
    }

    #[test]
    fn state_switch_needs_consecutive_qualifying_samples() {
        let mut t = DelayTracker::new();
        t.on_sample(SimTime::ZERO, 29_000); // establish floor: D_th = 56 ms
        let mut state = BottleneckState::Wireless;
        for i in 0..9 {
            t.on_sample(SimTime::from_ms(i + 1), 61_000);
            state = state_transition(state, t.over_count, t.under_count, 9, false);
        }
        assert_eq!(state, BottleneckState::Internet);

        // 8 over then 1 under resets the counter.
        let mut t = DelayTracker::new();
        t.on_sample(SimTime::ZERO, 29_000);
        let mut state = BottleneckState::Wireless;
        for i in 0..8 {
            t.on_sample(SimTime::from_ms(i + 1), 61_000);
            state = state_transition(state, t.over_count, t.under_count, 9, false);
        }
        t.on_sample(SimTime::from_ms(9), 30_000);
        state = state_transition(state, t.over_count, t.under_count, 9, false);
        assert_eq!(state, BottleneckState::Wireless);
        assert_eq!(t.over_count, 0);
    }

    #[test]
    fn switch_back_requires_fair_share_rate() {
        let mut t = DelayTracker::new();
        t.on_sample(SimTime::ZERO, 29_000);
        let mut state = BottleneckState::Internet;
        for i in 0..12 {
            t.on_sample(SimTime::from_ms(i + 1), 30_000);
        }
        state = state_transition(state, t.over_count, t.under_count, 9, false);
        assert_eq!(state, BottleneckState::Internet);
        state = state_transition(state, t.over_count, t.under_count, 9, true);
        assert_eq!(state, BottleneckState::Wireless);
    }

    #[test]
    fn feedback_interval_encoding() {
        assert_eq!(feedback_interval_us(12_000.0), 1_000);
        assert_eq!(feedback_interval_us(24_000.0), 500);
    }
}
