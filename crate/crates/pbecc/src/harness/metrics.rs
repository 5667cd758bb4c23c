//! Post-run metrics: throughput, delay percentiles, fairness and
//! time-in-state, assembled into a deterministic JSON-serializable report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::simcore::{PacketRecord, SimulationReport};

use super::scenario::Scenario;

/// Jain fairness index `(Σx)² / (n·Σx²)`; 1.0 for equal allocations.
pub fn jain_index(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return 1.0;
    }
    sum * sum / (xs.len() as f64 * sq)
}

/// Delivered throughput in fixed windows, bits/s per window.
pub fn windowed_throughput(
    records: &[&PacketRecord],
    duration_ms: u64,
    window_ms: u64,
) -> Vec<f64> {
    let n = (duration_ms.div_ceil(window_ms)) as usize;
    let mut bits = vec![0u64; n];
    for r in records {
        if let Some(at) = r.delivered_us {
            let idx = (at / 1000 / window_ms) as usize;
            if idx < n {
                bits[idx] += crate::simcore::MSS_BITS;
            }
        }
    }
    bits.iter().map(|&b| b as f64 * 1000.0 / window_ms as f64).collect()
}

/// Nearest-rank percentile of a sorted slice.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (pct / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub const DELAY_PERCENTILES: [u32; 6] = [10, 25, 50, 75, 90, 95];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub flow: usize,
    pub sender: String,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub mean_throughput_mbps: f64,
    /// Delivered throughput per 100 ms window, Mbit/s.
    pub throughput_100ms_mbps: Vec<f64>,
    /// One-way delay percentiles of delivered packets, ms.
    pub delay_percentiles_ms: BTreeMap<String, f64>,
    /// Fraction of delivered-packet samples per sender phase.
    pub time_in_state: BTreeMap<String, f64>,
    /// PRBs granted in the steady-state window.
    pub steady_prbs: u64,
    pub bdp_violations: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_ms: u64,
    /// Window used for the fairness figures, ms.
    pub steady_window_ms: (u64, u64),
    /// Jain index over the flows' steady-window PRB totals.
    pub jain_prb_index: f64,
    /// Jain index over the flows' steady-window throughputs.
    pub jain_throughput_index: f64,
    pub ca_activations: usize,
    pub ca_deactivations: usize,
    pub flows: Vec<FlowMetrics>,
}

impl MetricsReport {
    /// Deterministic serialization: identical runs produce identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The steady-state window: the last 10 seconds, or the second half of a
/// shorter run.
pub fn steady_window(duration_ms: u64) -> (u64, u64) {
    (duration_ms.saturating_sub(10_000).max(duration_ms / 2), duration_ms)
}

pub fn compute_metrics(scenario: &Scenario, report: &SimulationReport) -> MetricsReport {
    let duration_ms = report.duration_ms;
    let (steady_lo, steady_hi) = steady_window(duration_ms);

    let mut flows = Vec::new();
    let mut steady_prbs_per_flow = Vec::new();
    let mut steady_tput_per_flow = Vec::new();
    for (idx, spec) in scenario.flows.iter().enumerate() {
        let records: Vec<&PacketRecord> =
            report.packets.iter().filter(|r| r.flow_id == idx).collect();
        let stats = &report.flow_stats[idx];

        let active_ms = spec.stop_ms.unwrap_or(duration_ms).min(duration_ms) - spec.start_ms;
        let mean_bps = stats.delivered as f64 * crate::simcore::MSS_BITS as f64 * 1000.0
            / active_ms.max(1) as f64;

        let mut owds: Vec<f64> = records
            .iter()
            .filter(|r| !r.dropped)
            .map(|r| r.owd_ms)
            .collect();
        owds.sort_by(|a, b| a.total_cmp(b));
        let delay_percentiles_ms = DELAY_PERCENTILES
            .iter()
            .map(|&p| (format!("p{p}"), percentile(&owds, p as f64)))
            .collect();

        let mut time_in_state = BTreeMap::new();
        let trace: Vec<_> = report.sender_trace.iter().filter(|t| t.flow == idx).collect();
        for t in &trace {
            *time_in_state.entry(t.phase.clone()).or_insert(0.0) += 1.0;
        }
        let total = trace.len() as f64;
        if total > 0.0 {
            for v in time_in_state.values_mut() {
                *v /= total;
            }
        }

        let user = idx as u64;
        let steady_prbs: u64 = report
            .allocations
            .iter()
            .filter(|a| a.subframe >= steady_lo && a.subframe < steady_hi)
            .flat_map(|a| &a.grants)
            .filter(|g| g.user == user)
            .map(|g| g.prbs as u64)
            .sum();

        let steady_bits: u64 = records
            .iter()
            .filter_map(|r| r.delivered_us)
            .filter(|&at| at / 1000 >= steady_lo && at / 1000 < steady_hi)
            .count() as u64
            * crate::simcore::MSS_BITS;
        // Only flows active through the whole steady window enter the
        // fairness figures.
        if spec.start_ms <= steady_lo && spec.stop_ms.map_or(true, |s| s >= steady_hi) {
            steady_prbs_per_flow.push(steady_prbs as f64);
            steady_tput_per_flow.push(steady_bits as f64);
        }

        flows.push(FlowMetrics {
            flow: idx,
            sender: spec.sender.name().to_string(),
            sent: stats.sent,
            delivered: stats.delivered,
            dropped: stats.dropped,
            mean_throughput_mbps: mean_bps / 1e6,
            throughput_100ms_mbps: windowed_throughput(&records, duration_ms, 100)
                .into_iter()
                .map(|b| b / 1e6)
                .collect(),
            delay_percentiles_ms,
            time_in_state,
            steady_prbs,
            bdp_violations: stats.bdp_violations,
        });
    }

    MetricsReport {
        scenario: scenario.name.clone(),
        seed: report.seed,
        duration_ms,
        steady_window_ms: (steady_lo, steady_hi),
        jain_prb_index: jain_index(&steady_prbs_per_flow),
        jain_throughput_index: jain_index(&steady_tput_per_flow),
        ca_activations: report
            .ca_events
            .iter()
            .filter(|(_, _, e)| matches!(e, crate::cellmac::CaEvent::Activated(_)))
            .count(),
        ca_deactivations: report
            .ca_events
            .iter()
            .filter(|(_, _, e)| matches!(e, crate::cellmac::CaEvent::Deactivated(_)))
            .count(),
        flows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jain_equal_allocations_is_one() {
        assert!((jain_index(&[5.0, 5.0, 5.0, 5.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jain_single_user_hogging_quarter() {
        // One of four users gets everything: index = 1/4.
        assert!((jain_index(&[12.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn jain_two_to_one_split() {
        // (2+1)^2 / (2 * (4+1)) = 0.9.
        assert!((jain_index(&[2.0, 1.0]) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn percentile_nearest_rank() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile(&xs, 50.0), 5.0);
        assert_eq!(percentile(&xs, 90.0), 9.0);
        assert_eq!(percentile(&xs, 95.0), 10.0);
        assert_eq!(percentile(&xs, 10.0), 1.0);
    }

    #[test]
    fn windowed_throughput_buckets_by_delivery_time() {
        let recs = [
            PacketRecord {
                flow_id: 0,
                seq: 0,
                sent_us: 0,
                delivered_us: Some(50_000),
                owd_ms: 50.0,
                harq_delay_ms: 0,
                dropped: false,
            },
            PacketRecord {
                flow_id: 0,
                seq: 1,
                sent_us: 0,
                delivered_us: Some(150_000),
                owd_ms: 150.0,
                harq_delay_ms: 0,
                dropped: false,
            },
        ];
        let refs: Vec<&PacketRecord> = recs.iter().collect();
        let tput = windowed_throughput(&refs, 300, 100);
        // One 12000-bit packet per 100 ms window = 120 kbit/s.
        assert_eq!(tput, vec![120_000.0, 120_000.0, 0.0]);
    }
}
