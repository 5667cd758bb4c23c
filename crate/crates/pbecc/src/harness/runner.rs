//! Run scenarios and write their traces: `metrics.json`, `packets.csv`,
//! `allocations.csv` and `sender.csv` per run directory.

use std::fs;
use std::io;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::simcore::{PacketRecord, Simulation, SimulationReport};

use super::metrics::{compute_metrics, MetricsReport};
use super::scenario::Scenario;

pub struct RunOutput {
    pub report: SimulationReport,
    pub metrics: MetricsReport,
}

pub fn run_scenario(scenario: &Scenario, seed: u64) -> RunOutput {
    let report = Simulation::new(scenario, seed).run();
    let metrics = compute_metrics(scenario, &report);
    RunOutput { report, metrics }
}

/// Run a batch of (scenario, seed) jobs, one simulator instance per job.
/// With the `parallel` feature the jobs spread across a thread pool;
/// otherwise they run sequentially. Results keep the input order either way.
pub fn run_batch(jobs: &[(Scenario, u64)]) -> Vec<MetricsReport> {
    #[cfg(feature = "parallel")]
    {
        jobs.par_iter().map(|(s, seed)| run_scenario(s, *seed).metrics).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(jobs)
    }
}

/// Always-sequential batch runner, the baseline for the bench comparison.
pub fn run_batch_sequential(jobs: &[(Scenario, u64)]) -> Vec<MetricsReport> {
    jobs.iter().map(|(s, seed)| run_scenario(s, *seed).metrics).collect()
}

pub fn write_outputs(out: &RunOutput, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.json"), out.metrics.to_json())?;

    let mut packets = String::from(PacketRecord::csv_header());
    packets.push('\n');
    for r in &out.report.packets {
        packets.push_str(&r.to_csv());
        packets.push('\n');
    }
    fs::write(dir.join("packets.csv"), packets)?;

    let mut allocs = String::from(crate::cellmac::SubframeAllocation::csv_header());
    allocs.push('\n');
    for a in &out.report.allocations {
        a.to_csv_rows(&mut allocs);
    }
    fs::write(dir.join("allocations.csv"), allocs)?;

    let mut sender = String::from(crate::simcore::SenderTraceRow::csv_header());
    sender.push('\n');
    for t in &out.report.sender_trace {
        sender.push_str(&t.to_csv());
        sender.push('\n');
    }
    fs::write(dir.join("sender.csv"), sender)?;
    Ok(())
}

/// Re-render the human-readable summary from a previously written run
/// directory.
pub fn summarize_trace_dir(dir: &Path) -> io::Result<String> {
    let metrics: MetricsReport =
        serde_json::from_str(&fs::read_to_string(dir.join("metrics.json"))?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    Ok(render_summary(&metrics))
}

pub fn render_summary(m: &MetricsReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {} (seed {}, {} ms)", m.scenario, m.seed, m.duration_ms);
    let _ = writeln!(
        out,
        "steady window: {}..{} ms  jain(prb)={:.4}  jain(throughput)={:.4}",
        m.steady_window_ms.0, m.steady_window_ms.1, m.jain_prb_index, m.jain_throughput_index
    );
    let _ = writeln!(out, "carrier events: {} activations, {} deactivations", m.ca_activations, m.ca_deactivations);
    for f in &m.flows {
        let p50 = f.delay_percentiles_ms.get("p50").copied().unwrap_or(0.0);
        let p95 = f.delay_percentiles_ms.get("p95").copied().unwrap_or(0.0);
        let _ = writeln!(
            out,
            "flow {} [{}]: {:.2} Mbit/s mean, {} sent / {} delivered / {} dropped, owd p50 {:.1} ms p95 {:.1} ms",
            f.flow, f.sender, f.mean_throughput_mbps, f.sent, f.delivered, f.dropped, p50, p95
        );
    }
    out
}
