//! Component-carrier model: per-subframe PRB scheduling with an equal-share
//! policy, per-user base-station buffers, transport-block error injection,
//! HARQ retransmission and the client-side reorder buffer.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::simcore::{CellId, Packet, UserId};

/// Step timeline: value holds from its timestamp until the next entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timeline<T: Copy>(pub Vec<(u64, T)>);

impl<T: Copy> Timeline<T> {
    pub fn constant(v: T) -> Self {
        Timeline(vec![(0, v)])
    }

    pub fn value_at(&self, ms: u64) -> T {
        let mut v = self.0[0].1;
        for &(t, x) in &self.0 {
            if t <= ms {
                v = x;
            } else {
                break;
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct CellConfig {
    pub id: CellId,
    /// Total PRBs per subframe (50 for 10 MHz, 100 for 20 MHz).
    pub total_prbs: u32,
    /// Bits per PRB, time-varying via the scenario script.
    pub rw: Timeline<u32>,
    /// Per-bit TB error probability.
    pub p: Timeline<f64>,
    /// Per-user base-station buffer capacity.
    pub user_buffer_bytes: u64,
    /// PHY/MAC framing overhead fraction: a packet of `s` transport bits
    /// occupies `s / (1 - overhead)` bits of PRB capacity over the air.
    pub overhead: f64,
}

/// TB error probability for size `l` bits at bit-error rate `p`:
/// `1 - (1-p)^L`, evaluated in log space.
pub fn tb_error_probability(p: f64, l: u64) -> f64 {
    assert!((0.0..1.0).contains(&p), "BER must be in [0,1)");
    if p == 0.0 || l == 0 {
        return 0.0;
    }
    -((l as f64) * (-p).ln_1p()).exp_m1()
}

/// One control message: a grant of `prbs` PRBs to `user` in one subframe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grant {
    pub user: UserId,
    pub prbs: u32,
    pub rw: u32,
    /// New-data indicator; false marks a HARQ retransmission.
    pub ndi: bool,
}

/// The decoded control channel for one (cell, subframe).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubframeAllocation {
    pub cell: CellId,
    pub subframe: u64,
    pub total_prbs: u32,
    pub rw: u32,
    pub grants: Vec<Grant>,
    pub idle_prbs: u32,
}

impl SubframeAllocation {
    pub fn csv_header() -> &'static str {
        "time_ms,cell,user,prbs,rw_bits_per_prb,ndi,idle_prbs"
    }

    pub fn to_csv_rows(&self, out: &mut String) {
        use std::fmt::Write;
        if self.grants.is_empty() {
            let _ = writeln!(
                out,
                "{},{},-1,0,{},1,{}",
                self.subframe, self.cell, self.rw, self.idle_prbs
            );
        }
        for g in &self.grants {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.subframe, self.cell, g.user, g.prbs, g.rw, g.ndi as u8, self.idle_prbs
            );
        }
    }
}

/// Equal-share water-filling over one subframe's PRBs.
///
/// `reserved` entries (background/control-traffic users) are honored first in
/// insertion order, truncated to the residual budget. Data users then split
/// the remainder max-min fairly: demand-limited users take their demand, the
/// saturated rest split evenly, with the indivisible remainder PRBs rotating
/// by `rotate` (the subframe index) so no user is systematically short.
pub fn water_fill(
    total_prbs: u32,
    rw: u32,
    reserved: &[(UserId, u32)],
    demands: &[(UserId, u32)],
    rotate: usize,
) -> Vec<Grant> {
    let mut grants = Vec::new();
    let mut left = total_prbs;
    for &(user, want) in reserved {
        let got = want.min(left);
        if got > 0 {
            grants.push(Grant { user, prbs: got, rw, ndi: true });
            left -= got;
        }
    }
    let mut ds: Vec<(UserId, u32)> = demands.iter().copied().filter(|&(_, d)| d > 0).collect();
    ds.sort_by_key(|&(u, d)| (d, u));
    while !ds.is_empty() && left > 0 {
        let n = ds.len() as u32;
        let share = left / n;
        if ds[0].1 <= share {
            // Demand-limited users leave their unused share to the rest.
            let limited: Vec<_> = ds.iter().copied().filter(|&(_, d)| d <= share).collect();
            ds.retain(|&(_, d)| d > share);
            for (user, demand) in limited {
                grants.push(Grant { user, prbs: demand, rw, ndi: true });
                left -= demand;
            }
        } else {
            // All saturated: even shares plus a rotating remainder.
            let n = n as usize;
            let rem = (left as usize) % n;
            ds.sort_by_key(|&(u, _)| u);
            for (i, &(user, _)) in ds.iter().enumerate() {
                let bonus = ((i + n - rotate % n) % n < rem) as u32;
                if share + bonus > 0 {
                    grants.push(Grant { user, prbs: share + bonus, rw, ndi: true });
                }
            }
            left = 0;
        }
    }
    grants
}

/// Fragment of a packet carried inside one TB. The final fragment owns the
/// packet; it is delivered when the TB holding it releases.
#[derive(Debug)]
struct Fragment {
    seq: u64,
    bits: u64,
    packet: Option<Packet>,
}

#[derive(Debug, PartialEq, Clone, Copy)]
enum TbStatus {
    /// Awaiting a HARQ retransmission.
    Pending,
    Received,
    /// All retransmissions failed; payload lost.
    Dropped,
}

#[derive(Debug)]
struct TbEntry {
    status: TbStatus,
    fragments: Vec<Fragment>,
}

/// In-order release buffer: a TB leaves only once every earlier-subframe TB
/// of the same (cell, user) is resolved.
#[derive(Debug, Default)]
pub struct ReorderBuffer {
    entries: BTreeMap<u64, TbEntry>,
    /// Packets that lost a fragment in a dropped TB.
    damaged: HashSet<u64>,
}

/// A packet handed up to the transport layer, annotated with the blocking
/// delay the HARQ/reorder path added.
#[derive(Debug)]
pub struct ReleasedPacket {
    pub packet: Packet,
    pub harq_delay_ms: u32,
    pub dropped: bool,
}

impl ReorderBuffer {
    fn insert(&mut self, subframe: u64, status: TbStatus, fragments: Vec<Fragment>) {
        self.entries.insert(subframe, TbEntry { status, fragments });
    }

    fn resolve(&mut self, subframe: u64, status: TbStatus) {
        if let Some(e) = self.entries.get_mut(&subframe) {
            debug_assert_eq!(e.status, TbStatus::Pending);
            e.status = status;
        }
    }

    /// Pop every leading resolved TB. `now_sf` is the subframe in which the
    /// resolution happened; the annotation on each released packet is the
    /// number of subframes it was held back.
    fn release(&mut self, now_sf: u64) -> Vec<ReleasedPacket> {
        let mut out = Vec::new();
        while let Some((&sf, entry)) = self.entries.iter().next() {
            if entry.status == TbStatus::Pending {
                break;
            }
            let entry = self.entries.remove(&sf).unwrap();
            let delay_ms = (now_sf - sf) as u32;
            let tb_dropped = entry.status == TbStatus::Dropped;
            for frag in entry.fragments {
                if tb_dropped {
                    self.damaged.insert(frag.seq);
                }
                if let Some(packet) = frag.packet {
                    let dropped = tb_dropped || self.damaged.remove(&frag.seq);
                    out.push(ReleasedPacket { packet, harq_delay_ms: delay_ms, dropped });
                }
            }
        }
        out
    }
}

/// One HARQ process: a failed TB awaiting retransmission exactly eight
/// subframes after the failed attempt, at most three retransmissions.
#[derive(Debug)]
pub struct HarqProcess {
    pub user: UserId,
    pub original_subframe: u64,
    pub retransmissions: u8,
    pub error_prob: f64,
    /// Deterministic failures still owed by the scenario script.
    forced_failures: u32,
    pub prbs: u32,
    pub rw: u32,
}

pub const HARQ_RETX_SUBFRAMES: u64 = 8;
pub const HARQ_MAX_RETX: u8 = 3;

/// Per-user backlog at the base station; separate buffer per (cell, user).
#[derive(Debug, Default)]
struct UserQueue {
    backlog_bits: u64,
    pending: VecDeque<(Packet, u64)>, // (packet, remaining bits)
    drops: u64,
}

impl UserQueue {
    fn push(&mut self, pkt: Packet, phy_bits: u64, capacity_bits: u64) -> bool {
        if self.backlog_bits + phy_bits > capacity_bits {
            self.drops += 1;
            return false;
        }
        self.backlog_bits += phy_bits;
        self.pending.push_back((pkt, phy_bits));
        true
    }

    /// Carve up to `budget_bits` into TB fragments, in sequence order.
    fn take(&mut self, mut budget_bits: u64) -> Vec<Fragment> {
        let mut frags = Vec::new();
        while budget_bits > 0 {
            let Some((pkt, remaining)) = self.pending.front_mut() else { break };
            let bits = (*remaining).min(budget_bits);
            budget_bits -= bits;
            *remaining -= bits;
            self.backlog_bits -= bits;
            if *remaining == 0 {
                let (pkt, _) = self.pending.pop_front().unwrap();
                frags.push(Fragment { seq: pkt.seq, bits, packet: Some(pkt) });
            } else {
                frags.push(Fragment { seq: pkt.seq, bits, packet: None });
            }
        }
        frags
    }
}

/// Activity of one background (control-traffic or competing) user.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundProfile {
    pub cell: CellId,
    pub user: UserId,
    pub start_ms: u64,
    /// T_a: number of consecutive active subframes.
    pub duration_sf: u64,
    pub prbs: u32,
    /// Repeat the profile with this period, until `until_ms`.
    pub repeat_every_ms: Option<u64>,
    pub until_ms: Option<u64>,
}

impl BackgroundProfile {
    pub fn active_at(&self, sf: u64) -> bool {
        if sf < self.start_ms {
            return false;
        }
        if let Some(until) = self.until_ms {
            if sf >= until {
                return false;
            }
        }
        let offset = sf - self.start_ms;
        match self.repeat_every_ms {
            Some(period) => offset % period < self.duration_sf,
            None => offset < self.duration_sf,
        }
    }
}

/// One component carrier with its attached users, HARQ state and reorder
/// buffers.
pub struct Cell {
    pub config: CellConfig,
    users: BTreeMap<UserId, UserQueue>,
    reorder: BTreeMap<UserId, ReorderBuffer>,
    harq: BTreeMap<u64, Vec<HarqProcess>>,
    /// Scripted deterministic TB failures: (subframe, user) -> failure count.
    forced_errors: HashMap<(u64, UserId), u32>,
    pub backgrounds: Vec<BackgroundProfile>,
    pub mac_drops: u64,
    pub bs_drops: u64,
}

pub struct SubframeResult {
    pub allocation: SubframeAllocation,
    pub released: Vec<(UserId, ReleasedPacket)>,
}

impl Cell {
    pub fn new(config: CellConfig) -> Self {
        Cell {
            config,
            users: BTreeMap::new(),
            reorder: BTreeMap::new(),
            harq: BTreeMap::new(),
            forced_errors: HashMap::new(),
            backgrounds: Vec::new(),
            mac_drops: 0,
            bs_drops: 0,
        }
    }

    pub fn attach_user(&mut self, user: UserId) {
        self.users.entry(user).or_default();
        self.reorder.entry(user).or_default();
    }

    pub fn force_tb_error(&mut self, subframe: u64, user: UserId, failures: u32) {
        self.forced_errors.insert((subframe, user), failures);
    }

    pub fn backlog_bits(&self, user: UserId) -> u64 {
        self.users.get(&user).map_or(0, |q| q.backlog_bits)
    }

    pub fn total_backlog_bits(&self) -> u64 {
        self.users.values().map(|q| q.backlog_bits).sum()
    }

    /// Over-the-air size of a packet after PHY/MAC framing overhead.
    pub fn phy_bits(&self, transport_bits: u64) -> u64 {
        (transport_bits as f64 / (1.0 - self.config.overhead)).round() as u64
    }

    /// Enqueue an arriving packet into the user's base-station buffer.
    /// Returns false on tail drop.
    pub fn enqueue(&mut self, user: UserId, pkt: Packet) -> bool {
        let cap = self.config.user_buffer_bytes * 8;
        let phy = self.phy_bits(pkt.size_bits);
        let q = self.users.entry(user).or_default();
        let ok = q.push(pkt, phy, cap);
        if !ok {
            self.bs_drops += 1;
        }
        ok
    }

    pub fn rw_at(&self, sf: u64) -> u32 {
        self.config.rw.value_at(sf)
    }

    pub fn p_at(&self, sf: u64) -> f64 {
        self.config.p.value_at(sf)
    }

    /// Run one subframe: resolve due HARQ retransmissions, schedule new
    /// grants among `eligible` users, inject TB errors, and release in-order
    /// packets from the reorder buffers.
    pub fn run_subframe<R: Rng>(
        &mut self,
        sf: u64,
        eligible: &HashSet<UserId>,
        rng: &mut R,
    ) -> SubframeResult {
        let rw = self.rw_at(sf);
        let p = self.p_at(sf);

        // 1. HARQ retransmissions due this subframe. They repeat the failed
        //    TB, so they consume PRBs ahead of any new scheduling.
        let mut retx_grants = Vec::new();
        for mut proc in self.harq.remove(&sf).unwrap_or_default() {
            retx_grants.push(Grant { user: proc.user, prbs: proc.prbs, rw: proc.rw, ndi: false });
            let failed = if proc.forced_failures > 0 {
                proc.forced_failures -= 1;
                true
            } else {
                rng.gen::<f64>() < proc.error_prob
            };
            let buf = self.reorder.entry(proc.user).or_default();
            if !failed {
                buf.resolve(proc.original_subframe, TbStatus::Received);
            } else if proc.retransmissions + 1 < HARQ_MAX_RETX {
                // This attempt was retransmission number retransmissions+1.
                proc.retransmissions += 1;
                self.harq.entry(sf + HARQ_RETX_SUBFRAMES).or_default().push(proc);
            } else {
                buf.resolve(proc.original_subframe, TbStatus::Dropped);
                self.mac_drops += 1;
            }
        }

        // 2. Background reservations active this subframe.
        let reserved: Vec<(UserId, u32)> = self
            .backgrounds
            .iter()
            .filter(|b| b.active_at(sf))
            .map(|b| (b.user, b.prbs))
            .collect();

        // 3. Equal-share water-filling over the data users' demands.
        let retx_prbs: u32 = retx_grants.iter().map(|g| g.prbs).sum();
        debug_assert!(
            retx_prbs <= self.config.total_prbs,
            "retransmissions cannot exceed a past subframe's grants"
        );
        let budget = self.config.total_prbs.saturating_sub(retx_prbs);
        let demands: Vec<(UserId, u32)> = self
            .users
            .iter()
            .filter(|(u, q)| eligible.contains(u) && q.backlog_bits > 0)
            .map(|(&u, q)| (u, (q.backlog_bits).div_ceil(rw as u64).min(u32::MAX as u64) as u32))
            .collect();
        let mut grants = water_fill(budget, rw, &reserved, &demands, sf as usize);

        // 4. Form TBs for data grants; draw errors.
        for g in &grants {
            if !self.users.contains_key(&g.user) {
                continue; // background users carry no modeled payload
            }
            let tb_bits = g.prbs as u64 * rw as u64;
            let fragments = self.users.get_mut(&g.user).unwrap().take(tb_bits);
            let actual_bits: u64 = fragments.iter().map(|f| f.bits).sum();
            let q_err = tb_error_probability(p, actual_bits);
            let forced = self.forced_errors.remove(&(sf, g.user));
            let failed = match forced {
                Some(n) if n > 0 => true,
                _ => rng.gen::<f64>() < q_err,
            };
            let buf = self.reorder.entry(g.user).or_default();
            if failed {
                buf.insert(sf, TbStatus::Pending, fragments);
                self.harq.entry(sf + HARQ_RETX_SUBFRAMES).or_default().push(HarqProcess {
                    user: g.user,
                    original_subframe: sf,
                    retransmissions: 0,
                    error_prob: q_err,
                    forced_failures: forced.map_or(0, |n| n.saturating_sub(1)),
                    prbs: g.prbs,
                    rw,
                });
            } else {
                buf.insert(sf, TbStatus::Received, fragments);
            }
        }

        // 5. Release in-order TBs for every user.
        let mut released = Vec::new();
        for (&user, buf) in self.reorder.iter_mut() {
            for r in buf.release(sf) {
                released.push((user, r));
            }
        }

        grants.extend(retx_grants);
        let used: u32 = grants.iter().map(|g| g.prbs).sum();
        assert!(used <= self.config.total_prbs, "allocated PRBs exceed cell budget");
        let idle_prbs = self.config.total_prbs - used;
        SubframeResult {
            allocation: SubframeAllocation {
                cell: self.config.id,
                subframe: sf,
                total_prbs: self.config.total_prbs,
                rw,
                grants,
                idle_prbs,
            },
            released,
        }
    }
}

/// Carrier-aggregation controller for one user: activates the next listed
/// cell when the user's PRB share of its active cells stays above the
/// activation threshold, deactivates the highest-order cell when offered
/// demand fits below the deactivation threshold without it.
#[derive(Debug)]
pub struct CaController {
    pub cells: Vec<CellId>,
    active: usize,
    activate_share: f64,
    activate_window_sf: usize,
    deactivate_share: f64,
    deactivate_window_sf: usize,
    share_window: VecDeque<(u32, u32)>, // (own prbs, total active prbs)
    demand_window: VecDeque<u64>,       // arrived bits per subframe
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CaEvent {
    Activated(CellId),
    Deactivated(CellId),
}

impl CaController {
    pub fn new(
        cells: Vec<CellId>,
        activate_share: f64,
        activate_window_ms: u64,
        deactivate_share: f64,
        deactivate_window_ms: u64,
    ) -> Self {
        assert!(!cells.is_empty(), "a user needs at least a primary cell");
        CaController {
            cells,
            active: 1,
            activate_share,
            activate_window_sf: activate_window_ms as usize,
            deactivate_share,
            deactivate_window_sf: deactivate_window_ms as usize,
            share_window: VecDeque::new(),
            demand_window: VecDeque::new(),
        }
    }

    pub fn active_cells(&self) -> &[CellId] {
        &self.cells[..self.active]
    }

    pub fn is_active(&self, cell: CellId) -> bool {
        self.active_cells().contains(&cell)
    }

    /// Per-subframe update. `own_prbs`/`total_prbs` cover the currently
    /// active cells; `arrived_bits` is new demand that reached the base
    /// station this subframe; `cell_rates` gives each listed cell's current
    /// capacity in bits per subframe.
    pub fn on_subframe(
        &mut self,
        own_prbs: u32,
        total_prbs: u32,
        arrived_bits: u64,
        cell_rates: &[u64],
    ) -> Option<CaEvent> {
        self.share_window.push_back((own_prbs, total_prbs));
        if self.share_window.len() > self.activate_window_sf {
            self.share_window.pop_front();
        }
        self.demand_window.push_back(arrived_bits);
        if self.demand_window.len() > self.deactivate_window_sf {
            self.demand_window.pop_front();
        }

        if self.active < self.cells.len() && self.share_window.len() == self.activate_window_sf {
            let own: u64 = self.share_window.iter().map(|&(o, _)| o as u64).sum();
            let total: u64 = self.share_window.iter().map(|&(_, t)| t as u64).sum();
            if total > 0 && own as f64 / total as f64 > self.activate_share {
                self.active += 1;
                self.share_window.clear();
                self.demand_window.clear();
                return Some(CaEvent::Activated(self.cells[self.active - 1]));
            }
        }

        if self.active > 1 && self.demand_window.len() == self.deactivate_window_sf {
            let demand: u64 = self.demand_window.iter().sum();
            let per_sf = demand as f64 / self.deactivate_window_sf as f64;
            let cap_without_top: u64 = cell_rates[..self.active - 1].iter().sum();
            if per_sf < self.deactivate_share * cap_without_top as f64 {
                self.active -= 1;
                self.share_window.clear();
                self.demand_window.clear();
                return Some(CaEvent::Deactivated(self.cells[self.active]));
            }
        }
        None
    }
}
