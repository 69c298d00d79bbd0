use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anomaly::{AnomalyConfig, DEFAULT_INJECT_TIME, F_MAX, F_STEP};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sim::{
    simulate_faulted, FaultScenario, SimConfig, SwitchSet, WaveformRecord, PAIR_CASES, SINGLE_CASES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleNoAnomaly,
    SingleAnomaly,
    MultiNoAnomaly,
    MultiAnomaly,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::SingleNoAnomaly,
        ScenarioKind::SingleAnomaly,
        ScenarioKind::MultiNoAnomaly,
        ScenarioKind::MultiAnomaly,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ScenarioKind::SingleNoAnomaly => "s1",
            ScenarioKind::SingleAnomaly => "s2",
            ScenarioKind::MultiNoAnomaly => "s3",
            ScenarioKind::MultiAnomaly => "s4",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ScenarioKind::SingleNoAnomaly => "Single Switch Without Anomalies",
            ScenarioKind::SingleAnomaly => "Single Switch With Anomalies",
            ScenarioKind::MultiNoAnomaly => "Multi-Switch Without Anomalies",
            ScenarioKind::MultiAnomaly => "Multi-Switch With Anomalies",
        }
    }

    pub fn anomalous(self) -> bool {
        matches!(
            self,
            ScenarioKind::SingleAnomaly | ScenarioKind::MultiAnomaly
        )
    }

    pub fn cases(self) -> Vec<SwitchSet> {
        match self {
            ScenarioKind::SingleNoAnomaly | ScenarioKind::SingleAnomaly => {
                SINGLE_CASES.iter().map(|&s| SwitchSet::single(s)).collect()
            }
            ScenarioKind::MultiNoAnomaly | ScenarioKind::MultiAnomaly => PAIR_CASES
                .iter()
                .map(|&(a, b)| SwitchSet::pair(a, b).expect("table pairs are valid"))
                .collect(),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

/// Which records a corpus holds. Healthy records are shared by all scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentGrid {
    pub scenarios: Vec<ScenarioKind>,
    /// Anomaly amplitudes used by the anomalous scenarios, each a multiple
    /// of 0.05 in [0, 2]. F = 0 is left out by default since it reproduces
    /// the hardware-only records.
    pub f_grid: Vec<f64>,
    /// Replicates per (case, load) cell of the non-anomalous scenarios, and
    /// the number of healthy seeds.
    pub seeds_per_cell: usize,
    /// Replicates per (case, F, load) cell of the anomalous scenarios.
    pub anomaly_seeds_per_cell: usize,
    /// Healthy records per healthy seed and load level.
    pub healthy_per_seed: usize,
    pub load_levels: Vec<f64>,
    pub fault_time: f64,
    pub inject_time: f64,
    pub seed: u64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            scenarios: ScenarioKind::ALL.to_vec(),
            f_grid: (1..=40).map(|k| k as f64 / 20.0).collect(),
            seeds_per_cell: 20,
            anomaly_seeds_per_cell: 1,
            healthy_per_seed: 6,
            load_levels: vec![1.0],
            fault_time: 0.1,
            inject_time: DEFAULT_INJECT_TIME,
            seed: 0,
        }
    }
}

/// One record of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub scenario: Option<ScenarioKind>,
    pub switches: SwitchSet,
    pub f_amplitude: Option<f64>,
    pub load_level: f64,
    pub replicate: usize,
    pub seed: u64,
}

impl Cell {
    pub fn fault_scenario(&self, grid: &ExperimentGrid) -> FaultScenario {
        FaultScenario {
            switches: self.switches.clone(),
            fault_time: grid.fault_time,
            load_level: self.load_level,
            anomaly: self.f_amplitude.map(|f| AnomalyConfig {
                inject_time: grid.inject_time,
                ..AnomalyConfig::with_amplitude(f, derive_seed(self.seed, "fdi"))
            }),
        }
    }

    pub fn simulate(&self, sim: &SimConfig, grid: &ExperimentGrid) -> Result<WaveformRecord> {
        let config = SimConfig {
            seed: self.seed,
            ..sim.clone()
        };
        simulate_faulted(&config, &self.fault_scenario(grid))
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("grid needs at least one scenario".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::Config("seeds_per_cell >= 1 violated".into()));
        }
        if self.scenarios.iter().any(|s| s.anomalous()) {
            if self.anomaly_seeds_per_cell == 0 {
                return Err(Error::Config("anomaly_seeds_per_cell >= 1 violated".into()));
            }
            if self.f_grid.is_empty() {
                return Err(Error::Config(
                    "anomalous scenarios need a non-empty f_grid".into(),
                ));
            }
        }
        for &f in &self.f_grid {
            let k = f / F_STEP;
            if !(0.0..=F_MAX).contains(&f) || (k - k.round()).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "f_grid value {f} is not in {{0, 0.05, ..., 2}}"
                )));
            }
        }
        if let Some(l) = self
            .load_levels
            .iter()
            .find(|l| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::Config(format!(
                "load levels must be positive, got {l}"
            )));
        }
        if self.load_levels.is_empty() {
            return Err(Error::Config("grid needs at least one load level".into()));
        }
        Ok(())
    }

    fn cell_seed(&self, id: &str) -> u64 {
        derive_seed(self.seed, id)
    }

    /// All cells in manifest order: healthy records, then each scenario's
    /// cases. Two cells with the same coordinates are a configuration error.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let mut cells = Vec::new();
        for &load in &self.load_levels {
            for rep in 0..self.seeds_per_cell {
                for h in 0..self.healthy_per_seed {
                    let id = format!("healthy-l{load}-r{rep:03}-h{h}");
                    cells.push(Cell {
                        seed: self.cell_seed(&id),
                        id,
                        scenario: None,
                        switches: SwitchSet::empty(),
                        f_amplitude: None,
                        load_level: load,
                        replicate: rep,
                    });
                }
            }
        }
        for &sc in &self.scenarios {
            let (fs, reps): (Vec<Option<f64>>, usize) = if sc.anomalous() {
                (
                    self.f_grid.iter().map(|&f| Some(f)).collect(),
                    self.anomaly_seeds_per_cell,
                )
            } else {
                (vec![None], self.seeds_per_cell)
            };
            for case in sc.cases() {
                for f in &fs {
                    for &load in &self.load_levels {
                        for rep in 0..reps {
                            let f_part = f.map_or(String::new(), |f| format!("-f{f}"));
                            let id =
                                format!("{}-{}{f_part}-l{load}-r{rep:03}", sc.code(), case.label());
                            cells.push(Cell {
                                seed: self.cell_seed(&id),
                                id,
                                scenario: Some(sc),
                                switches: case.clone(),
                                f_amplitude: *f,
                                load_level: load,
                                replicate: rep,
                            });
                        }
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for c in &cells {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Config(format!("duplicate grid cell {}", c.id)));
            }
        }
        Ok(cells)
    }

    /// Human-readable cell count: distinct switch cases per scenario family,
    /// then records per group.
    pub fn summary(&self, cells: &[Cell]) -> String {
        let cases = |single: bool| -> usize {
            self.scenarios
                .iter()
                .filter(|s| {
                    matches!(
                        s,
                        ScenarioKind::SingleNoAnomaly | ScenarioKind::SingleAnomaly
                    ) == single
                })
                .map(|s| s.cases().len())
                .sum()
        };
        let healthy = cells.iter().filter(|c| c.scenario.is_none()).count();
        let mut parts = vec![format!("{healthy} healthy")];
        for &sc in &self.scenarios {
            let n = cells.iter().filter(|c| c.scenario == Some(sc)).count();
            parts.push(format!("{n} {}", sc.code()));
        }
        format!(
            "cells: {} single + {} pair cases; {} records ({})",
            cases(true),
            cases(false),
            cells.len(),
            parts.join(", ")
        )
    }
}
