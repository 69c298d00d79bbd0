//! Three-phase inverter output synthesis with open-switch faults.
//!
//! The signal model is steady state: balanced sinusoids on all six channels,
//! Gaussian sensor noise, and an open switch modelled by suppressing the
//! half-cycle its leg would conduct. An open upper switch removes the positive
//! half-cycle of its leg current (scaled down to `residual_factor` of its
//! value), an open lower switch the negative one. The leg voltage sees the
//! same half-cycle reduced by `voltage_distortion`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyConfig;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Whether scenario and anomaly parameters must stay inside the experiment
/// grid the corpus replicates, or may take any physically valid value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Replication,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Fundamental frequency, Hz.
    pub f0: f64,
    /// Sampling rate, Hz.
    pub fs: f64,
    /// Record length, seconds.
    pub duration: f64,
    /// Voltage amplitude, per-unit.
    pub v_amp: f64,
    /// Current amplitude at load level 1, per-unit of the rated load current.
    pub i_amp: f64,
    /// Current lag behind voltage, radians.
    pub phase_offset_i: f64,
    pub seed: u64,
    /// Standard deviation of the additive measurement noise on every channel.
    pub sensor_noise_std: f64,
    /// Fraction of a suppressed current half-cycle that survives an open switch.
    pub residual_factor: f64,
    /// Relative amplitude reduction of the affected voltage half-cycle.
    pub voltage_distortion: f64,
    pub mode: Mode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            f0: 60.0,
            fs: 10_000.0,
            duration: 0.3,
            v_amp: 1.0,
            i_amp: 1.0,
            phase_offset_i: PI / 12.0,
            seed: 0,
            sensor_noise_std: 0.01,
            residual_factor: 0.05,
            voltage_distortion: 0.5,
            mode: Mode::Replication,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return fail(format!("f0 must be positive, got {}", self.f0));
        }
        if !(self.fs.is_finite() && self.fs >= 20.0 * self.f0) {
            return fail(format!(
                "fs >= 20*f0 violated: fs={} f0={}",
                self.fs, self.f0
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return fail(format!("duration > 0 violated: {}", self.duration));
        }
        if !(self.v_amp.is_finite() && self.v_amp > 0.0) {
            return fail(format!("v_amp > 0 violated: {}", self.v_amp));
        }
        if !(self.i_amp.is_finite() && self.i_amp > 0.0) {
            return fail(format!("i_amp > 0 violated: {}", self.i_amp));
        }
        if !self.phase_offset_i.is_finite() {
            return fail("phase_offset_i must be finite".into());
        }
        if !(self.sensor_noise_std.is_finite() && self.sensor_noise_std >= 0.0) {
            return fail(format!(
                "sensor_noise_std >= 0 violated: {}",
                self.sensor_noise_std
            ));
        }
        if !(0.0..=1.0).contains(&self.residual_factor) {
            return fail(format!(
                "residual_factor must lie in [0, 1], got {}",
                self.residual_factor
            ));
        }
        if !(0.0..=1.0).contains(&self.voltage_distortion) {
            return fail(format!(
                "voltage_distortion must lie in [0, 1], got {}",
                self.voltage_distortion
            ));
        }
        if self.n_samples() < 2 {
            return fail("record would contain fewer than two samples".into());
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.fs * self.duration).round() as usize
    }

    /// Samples per fundamental period, rounded.
    pub fn samples_per_cycle(&self) -> usize {
        (self.fs / self.f0).round() as usize
    }

    pub fn time_axis(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|k| k as f64 / self.fs).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Leg {
    A,
    B,
    C,
}

impl Leg {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Position {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SwitchId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl SwitchId {
    pub const ALL: [SwitchId; 6] = [
        SwitchId::S1,
        SwitchId::S2,
        SwitchId::S3,
        SwitchId::S4,
        SwitchId::S5,
        SwitchId::S6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SwitchId::S1 => "S1",
            SwitchId::S2 => "S2",
            SwitchId::S3 => "S3",
            SwitchId::S4 => "S4",
            SwitchId::S5 => "S5",
            SwitchId::S6 => "S6",
        }
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SwitchId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SwitchId::ALL
            .into_iter()
            .find(|id| id.name() == s.trim())
            .ok_or_else(|| Error::Scenario(format!("unknown switch `{s}`")))
    }
}

/// Switch to (leg, position) table of the two-level, three-leg inverter.
///
/// Upper devices are S1/S3/S5 on legs A/B/C, lower devices S4/S6/S2.
pub const SWITCH_TABLE: [(SwitchId, Leg, Position); 6] = [
    (SwitchId::S1, Leg::A, Position::Upper),
    (SwitchId::S2, Leg::C, Position::Lower),
    (SwitchId::S3, Leg::B, Position::Upper),
    (SwitchId::S4, Leg::A, Position::Lower),
    (SwitchId::S5, Leg::C, Position::Upper),
    (SwitchId::S6, Leg::B, Position::Lower),
];

pub fn switch_effect(s: SwitchId) -> (Leg, Position) {
    let (_, leg, pos) = SWITCH_TABLE[s as usize];
    (leg, pos)
}

/// Single-switch fault cases, in table order.
pub const SINGLE_CASES: [SwitchId; 6] = SwitchId::ALL;

/// The six two-switch fault cases of the replication grid, in table order.
pub const PAIR_CASES: [(SwitchId, SwitchId); 6] = [
    (SwitchId::S1, SwitchId::S4),
    (SwitchId::S1, SwitchId::S6),
    (SwitchId::S3, SwitchId::S2),
    (SwitchId::S3, SwitchId::S6),
    (SwitchId::S5, SwitchId::S2),
    (SwitchId::S5, SwitchId::S4),
];

/// A set of at most two faulted switches with a canonical ordering: upper
/// devices first, then by switch number (so pairs print as `S3+S2`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<SwitchId>", into = "Vec<SwitchId>")]
pub struct SwitchSet(Vec<SwitchId>);

impl SwitchSet {
    pub fn empty() -> Self {
        SwitchSet(Vec::new())
    }

    pub fn single(s: SwitchId) -> Self {
        SwitchSet(vec![s])
    }

    pub fn pair(a: SwitchId, b: SwitchId) -> Result<Self> {
        Self::new([a, b])
    }

    pub fn new(ids: impl IntoIterator<Item = SwitchId>) -> Result<Self> {
        let mut v: Vec<SwitchId> = ids.into_iter().collect();
        v.sort_by_key(|&s| (switch_effect(s).1, s));
        let before = v.len();
        v.dedup();
        if v.len() != before {
            return Err(Error::Scenario("duplicate switch in fault set".into()));
        }
        if v.len() > 2 {
            return Err(Error::Scenario(format!(
                "at most two faulted switches are modelled, got {}",
                v.len()
            )));
        }
        Ok(SwitchSet(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = SwitchId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, s: SwitchId) -> bool {
        self.0.contains(&s)
    }

    pub fn is_replication_pair(&self) -> bool {
        self.0.len() == 2
            && PAIR_CASES
                .iter()
                .any(|&(a, b)| self.0[0] == a && self.0[1] == b)
    }

    /// Ordering key: size first, then position in the single or pair case
    /// table, then the switches themselves for sets outside the tables.
    pub fn grid_rank(&self) -> (usize, usize, SwitchSet) {
        let pos = match self.0.as_slice() {
            [s] => SINGLE_CASES.iter().position(|c| c == s),
            [a, b] => PAIR_CASES.iter().position(|c| c == &(*a, *b)),
            _ => Some(0),
        };
        (self.0.len(), pos.unwrap_or(usize::MAX), self.clone())
    }

    /// `S1`, `S3+S2`, or `None` for the empty set.
    pub fn label(&self) -> String {
        if self.0.is_empty() {
            "None".to_string()
        } else {
            self.0
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join("+")
        }
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        if s == "None" || s.is_empty() {
            return Ok(Self::empty());
        }
        Self::new(
            s.split('+')
                .map(str::parse)
                .collect::<Result<Vec<SwitchId>>>()?,
        )
    }
}

impl TryFrom<Vec<SwitchId>> for SwitchSet {
    type Error = Error;

    fn try_from(v: Vec<SwitchId>) -> Result<Self> {
        SwitchSet::new(v)
    }
}

impl From<SwitchSet> for Vec<SwitchId> {
    fn from(s: SwitchSet) -> Self {
        s.0
    }
}

impl fmt::Display for SwitchSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub switches: SwitchSet,
    /// Fault inception, seconds.
    pub fault_time: f64,
    /// Multiplier applied to `SimConfig::i_amp`.
    pub load_level: f64,
    pub anomaly: Option<AnomalyConfig>,
}

impl Default for FaultScenario {
    fn default() -> Self {
        FaultScenario {
            switches: SwitchSet::empty(),
            fault_time: 0.1,
            load_level: 1.0,
            anomaly: None,
        }
    }
}

impl FaultScenario {
    pub fn healthy() -> Self {
        Self::default()
    }

    pub fn with_switches(switches: SwitchSet) -> Self {
        FaultScenario {
            switches,
            ..Self::default()
        }
    }

    pub fn is_healthy(&self) -> bool {
        self.switches.is_empty()
    }

    pub fn validate(&self, config: &SimConfig) -> Result<()> {
        if !(self.fault_time.is_finite()
            && self.fault_time >= 0.0
            && self.fault_time < config.duration)
        {
            return Err(Error::Scenario(format!(
                "fault_time must lie in [0, {}), got {}",
                config.duration, self.fault_time
            )));
        }
        if !(self.load_level.is_finite() && self.load_level > 0.0) {
            return Err(Error::Scenario(format!(
                "load_level must be positive, got {}",
                self.load_level
            )));
        }
        if config.mode == Mode::Replication
            && self.switches.len() == 2
            && !self.switches.is_replication_pair()
        {
            return Err(Error::Scenario(format!(
                "{} is not one of the six replication pairs",
                self.switches
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    pub t: Vec<f64>,
    pub v_abc: [Vec<f64>; 3],
    pub i_abc: [Vec<f64>; 3],
    pub scenario: FaultScenario,
    pub config: SimConfig,
}

impl WaveformRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// First sample index with `t >= time`, or `len()` if none.
    pub fn index_at(&self, time: f64) -> usize {
        self.t.partition_point(|&t| t < time)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        for (name, ch) in self.channels() {
            if ch.len() != n {
                return Err(Error::Domain(format!(
                    "channel {name} has {} samples, time axis has {n}",
                    ch.len()
                )));
            }
            if let Some(k) = ch.iter().position(|x| !x.is_finite()) {
                return Err(Error::Domain(format!(
                    "channel {name} has a non-finite sample at index {k}"
                )));
            }
        }
        Ok(())
    }

    /// `(name, samples)` for the six channels in CSV column order.
    pub fn channels(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("va", &self.v_abc[0]),
            ("vb", &self.v_abc[1]),
            ("vc", &self.v_abc[2]),
            ("ia", &self.i_abc[0]),
            ("ib", &self.i_abc[1]),
            ("ic", &self.i_abc[2]),
        ]
    }
}

fn balanced_set(amp: f64, omega: f64, lag: f64, t: &[f64]) -> [Vec<f64>; 3] {
    let shift = 2.0 * PI / 3.0;
    let a: Vec<f64> = t.iter().map(|&t| amp * (omega * t - lag).sin()).collect();
    let b: Vec<f64> = t
        .iter()
        .map(|&t| amp * (omega * t - lag - shift).sin())
        .collect();
    // Third phase closes the set so the ideal sum is exactly zero.
    let c: Vec<f64> = a.iter().zip(&b).map(|(&a, &b)| -a - b).collect();
    [a, b, c]
}

fn add_sensor_noise(config: &SimConfig, v: &mut [Vec<f64>; 3], i: &mut [Vec<f64>; 3]) {
    if config.sensor_noise_std == 0.0 {
        return;
    }
    let dist =
        rng::normal(0.0, config.sensor_noise_std.powi(2)).expect("validated sensor noise std");
    let mut rng = rng::prng(config.seed, Stream::SensorNoise);
    for ch in v.iter_mut().chain(i.iter_mut()) {
        for x in ch.iter_mut() {
            *x += dist.sample(&mut rng);
        }
    }
}

fn apply_open_switches(
    config: &SimConfig,
    scenario: &FaultScenario,
    t: &[f64],
    v: &mut [Vec<f64>; 3],
    i: &mut [Vec<f64>; 3],
) {
    let start = t.partition_point(|&t| t < scenario.fault_time);
    let v_keep = 1.0 - config.voltage_distortion;
    for s in scenario.switches.iter() {
        let (leg, pos) = switch_effect(s);
        let suppressed = |x: f64| match pos {
            Position::Upper => x > 0.0,
            Position::Lower => x < 0.0,
        };
        for x in &mut i[leg.index()][start..] {
            if suppressed(*x) {
                *x *= config.residual_factor;
            }
        }
        for x in &mut v[leg.index()][start..] {
            if suppressed(*x) {
                *x *= v_keep;
            }
        }
    }
}

fn synthesize(config: &SimConfig, scenario: FaultScenario) -> WaveformRecord {
    let t = config.time_axis();
    let omega = 2.0 * PI * config.f0;
    let mut v_abc = balanced_set(config.v_amp, omega, 0.0, &t);
    let mut i_abc = balanced_set(
        config.i_amp * scenario.load_level,
        omega,
        config.phase_offset_i,
        &t,
    );
    apply_open_switches(config, &scenario, &t, &mut v_abc, &mut i_abc);
    add_sensor_noise(config, &mut v_abc, &mut i_abc);
    WaveformRecord {
        t,
        v_abc,
        i_abc,
        scenario,
        config: config.clone(),
    }
}

pub fn simulate_healthy(config: &SimConfig) -> Result<WaveformRecord> {
    config.validate()?;
    Ok(synthesize(config, FaultScenario::healthy()))
}

/// Simulates `scenario` without its anomaly; FDI is layered on afterwards by
/// [`crate::anomaly::inject_fdi`].
pub fn simulate_faulted(config: &SimConfig, scenario: &FaultScenario) -> Result<WaveformRecord> {
    config.validate()?;
    scenario.validate(config)?;
    let mut scenario = scenario.clone();
    let anomaly = scenario.anomaly.take();
    let record = synthesize(config, scenario);
    match anomaly {
        Some(cfg) => crate::anomaly::inject_fdi(&record, &cfg),
        None => Ok(record),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SimConfig {
        SimConfig {
            sensor_noise_std: 0.0,
            ..SimConfig::default()
        }
    }

    fn at_zero(switches: SwitchSet) -> FaultScenario {
        FaultScenario {
            switches,
            fault_time: 0.0,
            ..FaultScenario::default()
        }
    }

    #[test]
    fn healthy_phase_a_is_the_closed_form() {
        let rec = simulate_healthy(&quiet()).unwrap();
        assert_eq!(rec.len(), 3000);
        for (k, &t) in rec.t.iter().enumerate() {
            assert_eq!(rec.v_abc[0][k], (2.0 * PI * 60.0 * t).sin());
        }
    }

    #[test]
    fn healthy_currents_sum_to_zero() {
        let rec = simulate_healthy(&quiet()).unwrap();
        for k in 0..rec.len() {
            let s = rec.i_abc[0][k] + rec.i_abc[1][k] + rec.i_abc[2][k];
            assert!(s.abs() < 1e-12, "sample {k}: {s}");
        }
    }

    #[test]
    fn sensor_noise_has_the_configured_std() {
        let cfg = SimConfig {
            seed: 77,
            ..SimConfig::default()
        };
        let noisy = simulate_healthy(&cfg).unwrap();
        let ideal = simulate_healthy(&quiet()).unwrap();
        let d: Vec<f64> = noisy.i_abc[1]
            .iter()
            .zip(&ideal.i_abc[1])
            .map(|(a, b)| a - b)
            .collect();
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.01).abs() <= 0.0005, "std {sd}");
    }

    #[test]
    fn open_upper_switch_clamps_positive_half_cycles() {
        let cfg = quiet();
        let rec = simulate_faulted(&cfg, &at_zero(SwitchSet::single(SwitchId::S1))).unwrap();
        let max = rec.i_abc[0].iter().cloned().fold(f64::MIN, f64::max);
        let min = rec.i_abc[0].iter().cloned().fold(f64::MAX, f64::min);
        assert!(max <= cfg.residual_factor * cfg.i_amp + 1e-12, "max {max}");
        assert!((min + cfg.i_amp).abs() < 1e-3, "min {min}");
    }

    #[test]
    fn same_leg_pair_removes_the_phase_current() {
        let cfg = quiet();
        let healthy = simulate_healthy(&cfg).unwrap();
        let pair = SwitchSet::pair(SwitchId::S1, SwitchId::S4).unwrap();
        let rec = simulate_faulted(&cfg, &at_zero(pair)).unwrap();
        let peak = rec.i_abc[0].iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(peak <= cfg.residual_factor * cfg.i_amp + 1e-12);
        assert_eq!(rec.i_abc[1], healthy.i_abc[1]);
        assert_eq!(rec.i_abc[2], healthy.i_abc[2]);
        assert_eq!(rec.v_abc[1], healthy.v_abc[1]);
    }

    #[test]
    fn empty_fault_set_is_identity() {
        let cfg = SimConfig {
            seed: 3,
            ..SimConfig::default()
        };
        let a = simulate_healthy(&cfg).unwrap();
        let b = simulate_faulted(&cfg, &FaultScenario::healthy()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn switch_table_is_a_bijection() {
        assert_eq!(switch_effect(SwitchId::S1), (Leg::A, Position::Upper));
        assert_eq!(switch_effect(SwitchId::S2), (Leg::C, Position::Lower));
        let mut seen: Vec<_> = SwitchId::ALL.iter().map(|&s| switch_effect(s)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 6);
        for (id, ..) in SWITCH_TABLE {
            assert_eq!(SWITCH_TABLE[id as usize].0, id);
        }
    }

    #[test]
    fn every_replication_pair_shares_no_position_conflict() {
        // Each replication pair is one upper and one lower device.
        for (a, b) in PAIR_CASES {
            assert_eq!(switch_effect(a).1, Position::Upper);
            assert_eq!(switch_effect(b).1, Position::Lower);
            let set = SwitchSet::pair(b, a).unwrap();
            assert_eq!(set.label(), format!("{a}+{b}"));
            assert!(set.is_replication_pair());
        }
    }

    #[test]
    fn config_errors_name_the_invariant() {
        let bad = SimConfig {
            fs: 1000.0,
            ..SimConfig::default()
        };
        let msg = simulate_healthy(&bad).unwrap_err().to_string();
        assert!(msg.contains("fs >= 20*f0"), "{msg}");
        let bad = SimConfig {
            i_amp: 0.0,
            ..SimConfig::default()
        };
        assert!(matches!(simulate_healthy(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn scenario_validation() {
        let cfg = SimConfig::default();
        let late = FaultScenario {
            fault_time: 0.3,
            ..FaultScenario::with_switches(SwitchSet::single(SwitchId::S2))
        };
        assert!(matches!(
            simulate_faulted(&cfg, &late),
            Err(Error::Scenario(_))
        ));
        let odd_pair =
            FaultScenario::with_switches(SwitchSet::pair(SwitchId::S1, SwitchId::S3).unwrap());
        assert!(simulate_faulted(&cfg, &odd_pair).is_err());
        let free = SimConfig {
            mode: Mode::Free,
            ..cfg
        };
        assert!(simulate_faulted(&free, &odd_pair).is_ok());
        assert!(SwitchSet::new([SwitchId::S1, SwitchId::S2, SwitchId::S3]).is_err());
    }

    #[test]
    fn switch_set_labels_round_trip() {
        for label in ["None", "S4", "S5+S2", "S3+S6"] {
            assert_eq!(SwitchSet::parse_label(label).unwrap().label(), label);
        }
    }
}
