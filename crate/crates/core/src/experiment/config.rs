//! TOML experiment configuration.
//!
//! Every section and key is optional; absent keys take the defaults below.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::PowerBudget;
use crate::channel::{CellGeometry, LineGeometry, PathLossParams};
use crate::error::{Error, Result};
use crate::federated::{LrSchedule, Scheme, TaskParams};
use crate::optimizer::SolverConfig;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub p0_watts: f64,
    pub pr_watts: f64,
    pub noise_dbm: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            p0_watts: 0.05,
            pr_watts: 0.1,
            noise_dbm: -70.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Line,
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    pub kind: LayoutKind,
    pub x_relay: f64,
    pub device_x_min: f64,
    pub device_x_max: f64,
    pub device_y_min: f64,
    pub device_y_max: f64,
    pub cell_radius: f64,
    pub relay_ring_radius: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        let line = LineGeometry::default();
        let cell = CellGeometry::default();
        Self {
            kind: LayoutKind::Line,
            x_relay: line.x_relay,
            device_x_min: line.device_x_min,
            device_x_max: line.device_x_max,
            device_y_min: line.device_y_min,
            device_y_max: line.device_y_max,
            cell_radius: cell.cell_radius,
            relay_ring_radius: cell.relay_ring_radius,
        }
    }
}

impl LayoutConfig {
    pub fn line(&self) -> LineGeometry {
        LineGeometry {
            x_relay: self.x_relay,
            device_x_min: self.device_x_min,
            device_x_max: self.device_x_max,
            device_y_min: self.device_y_min,
            device_y_max: self.device_y_max,
        }
    }

    pub fn cell(&self) -> CellGeometry {
        CellGeometry {
            cell_radius: self.cell_radius,
            relay_ring_radius: self.relay_ring_radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.x_relay,
            self.device_x_min,
            self.device_x_max,
            self.device_y_min,
            self.device_y_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.device_x_min > self.device_x_max || self.device_y_min > self.device_y_max {
            return Err(Error::Config(format!("layout: bad device rectangle {self:?}")));
        }
        if !(self.x_relay > 0.0) {
            return Err(Error::Config(format!("layout.x_relay must be positive, got {}", self.x_relay)));
        }
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return Err(Error::Config(format!("layout.cell_radius must be positive, got {}", self.cell_radius)));
        }
        if !(self.relay_ring_radius > 0.0 && self.relay_ring_radius.is_finite()) {
            return Err(Error::Config(format!(
                "layout.relay_ring_radius must be positive, got {}",
                self.relay_ring_radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    Iid,
    Shards,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlConfig {
    pub total_blocks: usize,
    pub tau: usize,
    pub lr: LrSchedule,
    pub task: TaskParams,
    pub partition: PartitionKind,
    /// Shards per device when `partition = "shards"`.
    pub shards_c: usize,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            total_blocks: 200,
            tau: 1,
            lr: LrSchedule::default(),
            task: TaskParams::default(),
            partition: PartitionKind::Iid,
            shards_c: 2,
        }
    }
}

/// Parameters a one-dimensional sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    P0Watts,
    PrWatts,
    NoiseDbm,
    XRelay,
    NumDevices,
    NumRelays,
    ShardsC,
    CsiKappa,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::P0Watts => "p0_watts",
            SweepKey::PrWatts => "pr_watts",
            SweepKey::NoiseDbm => "noise_dbm",
            SweepKey::XRelay => "x_relay",
            SweepKey::NumDevices => "num_devices",
            SweepKey::NumRelays => "num_relays",
            SweepKey::ShardsC => "shards_c",
            SweepKey::CsiKappa => "csi_kappa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub num_devices: usize,
    pub num_relays: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// Absent means perfect channel knowledge.
    pub csi_kappa: Option<f64>,
    pub budget: BudgetConfig,
    pub layout: LayoutConfig,
    pub path_loss: PathLossParams,
    pub solver: SolverConfig,
    pub fl: FlConfig,
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Proposed,
            num_devices: 20,
            num_relays: 1,
            trials: 50,
            master_seed: 0,
            csi_kappa: None,
            budget: BudgetConfig::default(),
            layout: LayoutConfig::default(),
            path_loss: PathLossParams::default(),
            solver: SolverConfig::default(),
            fl: FlConfig::default(),
            sweep: None,
        }
    }
}

fn as_count(key: SweepKey, value: f64) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::Config(format!("sweep.values: {} needs whole numbers, got {value}", key.name())))
    }
}

impl ExperimentConfig {
    /// Noise power in watts.
    pub fn sigma2(&self) -> f64 {
        dbm_to_watts(self.budget.noise_dbm)
    }

    pub fn power_budget(&self) -> Result<PowerBudget> {
        PowerBudget::new(self.budget.p0_watts, self.budget.pr_watts, self.sigma2())
            .map_err(|e| Error::Config(format!("budget: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.num_devices == 0 {
            return Err(Error::Config("num_devices must be at least 1".into()));
        }
        let b = &self.budget;
        if !(b.p0_watts > 0.0 && b.p0_watts.is_finite()) || !(b.pr_watts > 0.0 && b.pr_watts.is_finite()) {
            return Err(Error::Config(format!("budget: powers must be positive, got {b:?}")));
        }
        if !b.noise_dbm.is_finite() {
            return Err(Error::Config(format!("budget.noise_dbm must be finite, got {}", b.noise_dbm)));
        }
        self.power_budget()?;
        if let Some(kappa) = self.csi_kappa {
            if !(0.0..=1.0).contains(&kappa) {
                return Err(Error::Config(format!("csi_kappa must lie in [0, 1], got {kappa}")));
            }
        }
        self.layout.validate()?;
        self.path_loss.validate().map_err(|e| Error::Config(format!("path_loss: {e}")))?;
        self.solver.validate().map_err(|e| Error::Config(format!("solver: {e}")))?;
        let fl = &self.fl;
        if fl.total_blocks == 0 || fl.tau == 0 || fl.shards_c == 0 {
            return Err(Error::Config("fl.total_blocks, fl.tau and fl.shards_c must be positive".into()));
        }
        fl.lr.validate().map_err(|e| Error::Config(format!("fl.lr: {e}")))?;
        fl.task.validate().map_err(|e| Error::Config(format!("fl.task: {e}")))?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep.values must not be empty".into()));
            }
            for &v in &sweep.values {
                self.with_sweep_value(sweep.key, v)?;
            }
        }
        Ok(())
    }

    /// A copy with one parameter replaced, validated.
    pub fn with_sweep_value(&self, key: SweepKey, value: f64) -> Result<ExperimentConfig> {
        let mut out = self.clone();
        out.sweep = None;
        match key {
            SweepKey::P0Watts => out.budget.p0_watts = value,
            SweepKey::PrWatts => out.budget.pr_watts = value,
            SweepKey::NoiseDbm => out.budget.noise_dbm = value,
            SweepKey::XRelay => out.layout.x_relay = value,
            SweepKey::NumDevices => out.num_devices = as_count(key, value)?,
            SweepKey::NumRelays => out.num_relays = as_count(key, value)?,
            SweepKey::ShardsC => out.fl.shards_c = as_count(key, value)?,
            SweepKey::CsiKappa => out.csi_kappa = Some(value),
        }
        out.validate()?;
        Ok(out)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.scheme, Scheme::Proposed);
        assert_eq!(c.layout.kind, LayoutKind::Line);
        assert_eq!(c.num_devices, 20);
        assert_eq!(c.solver.j_max, 100);
        assert_eq!(c.solver.epsilon, 1e-4);
        assert_eq!((c.budget.p0_watts, c.budget.pr_watts), (0.05, 0.1));
        assert!((c.sigma2() - 1e-10).abs() < 1e-24);
        assert_eq!(c.path_loss, PathLossParams::default());
    }

    #[test]
    fn noise_is_converted_from_dbm() {
        let c = parse_config("[budget]\nnoise_dbm = -100\n").unwrap();
        assert!((c.sigma2() - 1e-13).abs() < 1e-27);
        assert_eq!(c.budget.p0_watts, 0.05);
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            "trials = 0",
            "bogus = 1",
            "[budget]\nbogus = 1",
            "[fl.task]\nwidth = 3",
            "num_devices = \"many\"",
            "[budget]\np0_watts = -1",
            "csi_kappa = 1.5",
            "scheme = \"telepathy\"",
            "[sweep]\nkey = \"num_relays\"\nvalues = [1.5]",
            "[sweep]\nkey = \"pr_watts\"\nvalues = []",
        ] {
            assert!(matches!(parse_config(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn unknown_key_error_names_the_key() {
        let msg = parse_config("[layout]\nradius = 3").unwrap_err().to_string();
        assert!(msg.contains("radius"), "{msg}");
    }

    #[test]
    fn full_document_parses() {
        let text = r#"
scheme = "relay_only"
num_devices = 5
num_relays = 2
trials = 3
master_seed = 9
csi_kappa = 0.8

[budget]
p0_watts = 0.1
pr_watts = 0.2
noise_dbm = -80

[layout]
kind = "cell"
cell_radius = 100

[solver]
j_max = 10

[fl]
total_blocks = 40
partition = "shards"
shards_c = 3

[fl.lr]
initial = 0.1

[fl.task]
num_classes = 4

[sweep]
key = "pr_watts"
values = [0.05, 0.1]
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.scheme, Scheme::RelayOnly);
        assert_eq!(c.csi_kappa, Some(0.8));
        assert_eq!(c.layout.kind, LayoutKind::Cell);
        assert_eq!(c.layout.cell_radius, 100.0);
        assert_eq!(c.solver.j_max, 10);
        assert_eq!(c.solver.epsilon, 1e-4);
        assert_eq!(c.fl.partition, PartitionKind::Shards);
        assert_eq!(c.fl.lr.initial, 0.1);
        assert_eq!(c.fl.lr.step, 50);
        assert_eq!(c.fl.task.num_classes, 4);
        let s = c.sweep.clone().unwrap();
        assert_eq!(s.key, SweepKey::PrWatts);
        let swept = c.with_sweep_value(s.key, s.values[0]).unwrap();
        assert_eq!(swept.budget.pr_watts, 0.05);
        assert!(swept.sweep.is_none());
    }

    #[test]
    fn counts_sweep_as_integers() {
        let c = ExperimentConfig::default();
        assert_eq!(c.with_sweep_value(SweepKey::NumDevices, 7.0).unwrap().num_devices, 7);
        assert!(c.with_sweep_value(SweepKey::NumDevices, 0.0).is_err());
        assert!(c.with_sweep_value(SweepKey::ShardsC, -1.0).is_err());
    }
}
