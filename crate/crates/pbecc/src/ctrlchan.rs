//! Client-side control-channel observer: consumes the per-subframe
//! allocation stream of every aggregated cell, maintains sliding windows
//! sized by the connection's RTprop, filters control-traffic users and
//! exposes the averaged (R_w, P_a, P_idle) parameters and the active-user
//! count N.

use std::collections::{BTreeMap, VecDeque};

use crate::cellmac::SubframeAllocation;
use crate::simcore::{CellId, UserId};

/// Thresholds that separate data users from parameter-update control
/// traffic: a user counts as active only with T_a > 1 and P_ave > 4.
pub const ACTIVITY_SUBFRAME_THRESHOLD: u64 = 1;
pub const ACTIVITY_PRB_THRESHOLD: f64 = 4.0;

/// Activity of one observed user within the averaging window.
#[derive(Debug, Clone, PartialEq)]
pub struct UserActivity {
    pub user: UserId,
    /// Subframes in which the user held a grant.
    pub active_subframes: u64,
    /// Mean PRBs over those subframes.
    pub avg_prbs: f64,
}

/// Idle PRBs of one subframe: `P_cell - sum of all grants`, every identified
/// user included; retransmission grants occupy PRBs like any other. A
/// negative count is a model bug and panics.
pub fn idle_prbs(alloc: &SubframeAllocation) -> u32 {
    let used: u64 = alloc.grants.iter().map(|g| g.prbs as u64).sum();
    let total = alloc.total_prbs as u64;
    assert!(used <= total, "grants exceed cell PRBs: {used} > {total}");
    (total - used) as u32
}

/// Count of active users, self always included: N = 1 + others passing both
/// activity thresholds.
pub fn filter_active_users(others: &[UserActivity]) -> usize {
    filter_active_users_with(others, ACTIVITY_SUBFRAME_THRESHOLD, ACTIVITY_PRB_THRESHOLD)
}

/// As [`filter_active_users`] with explicit thresholds: a user counts when it
/// held grants in more than `sf_threshold` subframes at more than
/// `prb_threshold` average PRBs. Raising either threshold never increases N.
pub fn filter_active_users_with(
    others: &[UserActivity],
    sf_threshold: u64,
    prb_threshold: f64,
) -> usize {
    1 + others
        .iter()
        .filter(|a| a.active_subframes > sf_threshold && a.avg_prbs > prb_threshold)
        .count()
}

#[derive(Debug, Clone, Copy, Default)]
struct SubframeObs {
    own_prbs: u32,
    idle_prbs: u32,
    rw: u32,
}

/// Windowed parameters of one cell, averaged over the most recent RTprop
/// subframes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedParams {
    pub rw: f64,
    pub own_prbs: f64,
    pub idle_prbs: f64,
    /// Active users after filtering, self included.
    pub users: usize,
}

/// Sliding-window view of one aggregated cell's control channel.
#[derive(Debug)]
pub struct CellObservation {
    pub cell: CellId,
    pub total_prbs: u32,
    window_sf: usize,
    window: VecDeque<SubframeObs>,
    /// Per-user grant history within the window, for activity statistics.
    grants: VecDeque<Vec<(UserId, u32)>>,
}

impl CellObservation {
    pub fn new(cell: CellId, total_prbs: u32) -> Self {
        CellObservation {
            cell,
            total_prbs,
            window_sf: 1,
            window: VecDeque::new(),
            grants: VecDeque::new(),
        }
    }

    /// Window length tracks the RTprop estimate, minimum one subframe.
    pub fn set_window(&mut self, subframes: usize) {
        self.window_sf = subframes.max(1);
        self.trim();
    }

    fn trim(&mut self) {
        while self.window.len() > self.window_sf {
            self.window.pop_front();
            self.grants.pop_front();
        }
    }

    /// Ingest one decoded subframe. Decoding is lossless and zero-cost; the
    /// observer sees the exact allocation log.
    pub fn observe(&mut self, alloc: &SubframeAllocation, self_user: UserId) {
        debug_assert_eq!(alloc.cell, self.cell);
        let own: u32 = alloc
            .grants
            .iter()
            .filter(|g| g.user == self_user)
            .map(|g| g.prbs)
            .sum();
        let others: Vec<(UserId, u32)> = alloc
            .grants
            .iter()
            .filter(|g| g.user != self_user)
            .map(|g| (g.user, g.prbs))
            .collect();
        self.window.push_back(SubframeObs {
            own_prbs: own,
            idle_prbs: idle_prbs(alloc),
            rw: alloc.rw,
        });
        self.grants.push_back(others);
        self.trim();
    }

    pub fn activity(&self) -> Vec<UserActivity> {
        let mut acc: BTreeMap<UserId, (u64, u64)> = BTreeMap::new();
        for sf in &self.grants {
            for &(user, prbs) in sf {
                let e = acc.entry(user).or_default();
                e.0 += 1;
                e.1 += prbs as u64;
            }
        }
        acc.into_iter()
            .map(|(user, (t_a, prbs))| UserActivity {
                user,
                active_subframes: t_a,
                avg_prbs: prbs as f64 / t_a as f64,
            })
            .collect()
    }

    /// Arithmetic means over the window plus the filtered user count.
    pub fn windowed(&self) -> WindowedParams {
        let n = self.window.len().max(1) as f64;
        let (mut rw, mut own, mut idle) = (0.0, 0.0, 0.0);
        for o in &self.window {
            rw += o.rw as f64;
            own += o.own_prbs as f64;
            idle += o.idle_prbs as f64;
        }
        WindowedParams {
            rw: rw / n,
            own_prbs: own / n,
            idle_prbs: idle / n,
            users: filter_active_users(&self.activity()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellmac::Grant;

    fn alloc(grants: Vec<(UserId, u32)>, total: u32, rw: u32) -> SubframeAllocation {
        let gs: Vec<Grant> = grants
            .into_iter()
            .map(|(user, prbs)| Grant { user, prbs, rw, ndi: true })
            .collect();
        let used: u32 = gs.iter().map(|g| g.prbs).sum();
        SubframeAllocation {
            cell: 0,
            subframe: 0,
            total_prbs: total,
            rw,
            grants: gs,
            idle_prbs: total - used,
        }
    }

    #[test]
    fn idle_prbs_arithmetic() {
        assert_eq!(idle_prbs(&alloc(vec![(1, 40), (2, 30), (3, 20)], 100, 1000)), 10);
        assert_eq!(idle_prbs(&alloc(vec![], 100, 1000)), 100);
        assert_eq!(idle_prbs(&alloc(vec![(1, 60), (2, 40)], 100, 1000)), 0);
    }

    #[test]
    fn control_traffic_users_are_filtered() {
        // A (T_a=1, P=4) burst is control traffic: N stays 1.
        let others = vec![UserActivity { user: 2, active_subframes: 1, avg_prbs: 4.0 }];
        assert_eq!(filter_active_users(&others), 1);
    }

    #[test]
    fn both_thresholds_are_conjunctive() {
        let others = vec![
            UserActivity { user: 2, active_subframes: 2, avg_prbs: 5.0 },
            UserActivity { user: 3, active_subframes: 1, avg_prbs: 50.0 },
        ];
        assert_eq!(filter_active_users(&others), 2);
        assert_eq!(filter_active_users(&[]), 1);
    }

    #[test]
    fn windowed_means() {
        let mut obs = CellObservation::new(0, 100);
        obs.set_window(2);
        obs.observe(&alloc(vec![(1, 20)], 100, 1000), 1);
        obs.observe(&alloc(vec![(1, 30)], 100, 1000), 1);
        let w = obs.windowed();
        assert_eq!(w.own_prbs, 25.0);
        assert_eq!(w.rw, 1000.0);
        assert_eq!(w.idle_prbs, 75.0);
    }

    #[test]
    fn window_tracks_rtprop_updates() {
        let mut obs = CellObservation::new(0, 100);
        obs.set_window(40);
        for i in 0..60 {
            obs.observe(&alloc(vec![(1, i % 10)], 100, 1000), 1);
        }
        assert_eq!(obs.window.len(), 40);
        obs.set_window(10);
        assert_eq!(obs.window.len(), 10);
    }

    #[test]
    fn own_plus_others_plus_idle_is_total() {
        let a = alloc(vec![(1, 20), (2, 30), (9, 4)], 100, 1000);
        let own = 20u32;
        let others = 34u32;
        assert_eq!(own + others + idle_prbs(&a), 100);
    }
}
