//! TOML scenario schema, validation, and the bundled scenario set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

fn default_seed() -> u64 {
    1
}

fn default_overhead() -> f64 {
    0.068
}

fn default_buffer_bytes() -> u64 {
    2_000_000
}

fn default_link_queue_bytes() -> u64 {
    250_000
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario `{0}`: {1}")]
    Invalid(String, String),
    #[error("TOML parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub duration_ms: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Protocol-header overhead fraction used in capacity translation.
    #[serde(default = "default_overhead")]
    pub overhead: f64,
    pub cells: Vec<CellSpec>,
    /// May be empty: a flowless scenario runs the cells and produces an
    /// all-zero report.
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
    #[serde(default)]
    pub background: Vec<BackgroundSpec>,
    #[serde(default)]
    pub ca: CaSpec,
    #[serde(default)]
    pub forced_tb_errors: Vec<ForcedErrorSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSpec {
    pub id: usize,
    pub prbs: u32,
    /// `(time_ms, bits_per_prb)` steps.
    pub rw: Vec<(u64, u32)>,
    /// `(time_ms, bit_error_rate)` steps; empty means error-free.
    #[serde(default)]
    pub p: Vec<(u64, f64)>,
    #[serde(default = "default_buffer_bytes")]
    pub user_buffer_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenderKind {
    Pbe,
    Bbr,
    Aimd,
    Constant,
}

impl SenderKind {
    pub fn name(self) -> &'static str {
        match self {
            SenderKind::Pbe => "pbe",
            SenderKind::Bbr => "bbr",
            SenderKind::Aimd => "aimd",
            SenderKind::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSpec {
    pub sender: SenderKind,
    /// Application rate timeline, constant-rate sources only.
    #[serde(default)]
    pub rate_mbps: Vec<(u64, f64)>,
    #[serde(default)]
    pub start_ms: u64,
    pub stop_ms: Option<u64>,
    /// Aggregation order: primary first.
    pub cells: Vec<usize>,
    pub link_rate_mbps: f64,
    pub link_delay_ms: f64,
    #[serde(default = "default_link_queue_bytes")]
    pub link_queue_bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub cell: usize,
    pub start_ms: u64,
    pub duration_sf: u64,
    pub prbs: u32,
    pub repeat_every_ms: Option<u64>,
    pub until_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CaSpec {
    pub activate_share: f64,
    pub activate_window_ms: u64,
    pub deactivate_share: f64,
    pub deactivate_window_ms: u64,
}

impl Default for CaSpec {
    fn default() -> Self {
        CaSpec {
            activate_share: 0.9,
            activate_window_ms: 100,
            deactivate_share: 0.8,
            deactivate_window_ms: 500,
        }
    }
}

/// Deterministic TB failure injection: the TB formed for `user` in
/// `subframe` fails `failures` times (original plus retransmissions).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForcedErrorSpec {
    pub cell: usize,
    pub subframe: u64,
    pub user: u64,
    pub failures: u32,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn cell(&self, id: usize) -> &CellSpec {
        &self.cells[id]
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |msg: String| Err(ScenarioError::Invalid(self.name.clone(), msg));
        if self.duration_ms == 0 {
            return err("duration_ms must be positive".into());
        }
        if !(0.0..1.0).contains(&self.overhead) {
            return err(format!("overhead must be in [0,1), got {}", self.overhead));
        }
        if self.cells.is_empty() {
            return err("at least one cell is required".into());
        }
        for (i, c) in self.cells.iter().enumerate() {
            if c.id != i {
                return err(format!("cell ids must be 0..n in order, cell {i} has id {}", c.id));
            }
            if c.prbs == 0 {
                return err(format!("cell {i}: prbs must be positive"));
            }
            if c.rw.is_empty() {
                return err(format!("cell {i}: rw timeline must not be empty"));
            }
            if c.rw[0].0 != 0 || c.p.first().is_some_and(|&(t, _)| t != 0) {
                return err(format!("cell {i}: timelines must start at time 0"));
            }
            if !c.rw.windows(2).all(|w| w[0].0 < w[1].0)
                || !c.p.windows(2).all(|w| w[0].0 < w[1].0)
            {
                return err(format!("cell {i}: timeline timestamps must be strictly increasing"));
            }
            if c.p.iter().any(|&(_, p)| !(0.0..1.0).contains(&p)) {
                return err(format!("cell {i}: bit error rates must be in [0,1)"));
            }
        }
        for (i, f) in self.flows.iter().enumerate() {
            if f.cells.is_empty() {
                return err(format!("flow {i}: needs a primary cell"));
            }
            for &c in &f.cells {
                if c >= self.cells.len() {
                    return err(format!("flow {i}: references unknown cell {c}"));
                }
            }
            if f.link_rate_mbps <= 0.0 {
                return err(format!("flow {i}: link_rate_mbps must be positive"));
            }
            if f.sender == SenderKind::Constant && f.rate_mbps.is_empty() {
                return err(format!("flow {i}: constant sender needs a rate_mbps timeline"));
            }
            if f.sender != SenderKind::Constant && !f.rate_mbps.is_empty() {
                return err(format!("flow {i}: rate_mbps only applies to constant senders"));
            }
            if let Some(stop) = f.stop_ms {
                if stop <= f.start_ms {
                    return err(format!("flow {i}: stop_ms must be after start_ms"));
                }
            }
        }
        for (i, b) in self.background.iter().enumerate() {
            if b.cell >= self.cells.len() {
                return err(format!("background {i}: references unknown cell {}", b.cell));
            }
            if b.prbs == 0 || b.duration_sf == 0 {
                return err(format!("background {i}: prbs and duration_sf must be positive"));
            }
        }
        for (i, fe) in self.forced_tb_errors.iter().enumerate() {
            if fe.cell >= self.cells.len() {
                return err(format!("forced_tb_errors {i}: references unknown cell {}", fe.cell));
            }
        }
        Ok(())
    }
}

/// The scenarios shipped with the binary, compiled in.
pub fn bundled() -> Vec<(&'static str, &'static str)> {
    vec![
        ("ca_trigger", include_str!("../../scenarios/ca_trigger.toml")),
        ("idle_prb_absorption", include_str!("../../scenarios/idle_prb_absorption.toml")),
        ("multiuser_fairness", include_str!("../../scenarios/multiuser_fairness.toml")),
        (
            "controlled_competition",
            include_str!("../../scenarios/controlled_competition.toml"),
        ),
        ("on_off_competition", include_str!("../../scenarios/on_off_competition.toml")),
        ("rtt_fairness", include_str!("../../scenarios/rtt_fairness.toml")),
        ("tcp_friendliness", include_str!("../../scenarios/tcp_friendliness.toml")),
        ("internet_bottleneck", include_str!("../../scenarios/internet_bottleneck.toml")),
        ("mobility", include_str!("../../scenarios/mobility.toml")),
        ("harq_reorder", include_str!("../../scenarios/harq_reorder.toml")),
    ]
}

pub fn bundled_by_name(name: &str) -> Option<Scenario> {
    bundled()
        .into_iter()
        .find(|&(n, _)| n == name)
        .map(|(_, text)| Scenario::from_toml(text).expect("bundled scenarios are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_scenarios_parse_and_validate() {
        for (name, text) in bundled() {
            let s = Scenario::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn rejects_unknown_cell_reference() {
        let text = r#"
            name = "bad"
            duration_ms = 1000
            [[cells]]
            id = 0
            prbs = 50
            rw = [[0, 720]]
            [[flows]]
            sender = "pbe"
            cells = [0, 3]
            link_rate_mbps = 100.0
            link_delay_ms = 10.0
        "#;
        let e = Scenario::from_toml(text).unwrap_err();
        assert!(e.to_string().contains("unknown cell 3"), "{e}");
    }

    #[test]
    fn rejects_zero_duration() {
        let text = r#"
            name = "bad"
            duration_ms = 0
            [[cells]]
            id = 0
            prbs = 50
            rw = [[0, 720]]
            [[flows]]
            sender = "pbe"
            cells = [0]
            link_rate_mbps = 100.0
            link_delay_ms = 10.0
        "#;
        assert!(Scenario::from_toml(text).is_err());
    }

    #[test]
    fn rejects_constant_sender_without_rate() {
        let text = r#"
            name = "bad"
            duration_ms = 1000
            [[cells]]
            id = 0
            prbs = 50
            rw = [[0, 720]]
            [[flows]]
            sender = "constant"
            cells = [0]
            link_rate_mbps = 100.0
            link_delay_ms = 10.0
        "#;
        assert!(Scenario::from_toml(text).is_err());
    }
}
