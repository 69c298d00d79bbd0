//! False-data-injection attack on the current sensors.
//!
//! From `inject_time` onward every targeted current channel receives additive
//! noise `F * g(t)`, `g ~ Normal(mean, base_power)`. Voltages are never touched.

use std::fmt;

use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::sim::{Mode, WaveformRecord};

/// Spacing of the replication F sweep.
pub const F_STEP: f64 = 0.05;
pub const F_MAX: f64 = 2.0;
pub const BASE_POWER: f64 = 0.1;
pub const DEFAULT_INJECT_TIME: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CurrentChannel {
    Ia,
    Ib,
    Ic,
}

impl CurrentChannel {
    pub const ALL: [CurrentChannel; 3] =
        [CurrentChannel::Ia, CurrentChannel::Ib, CurrentChannel::Ic];
}

impl fmt::Display for CurrentChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyConfig {
    /// Amplitude constant F multiplying the noise signal.
    pub f_amplitude: f64,
    pub inject_time: f64,
    /// Noise variance before scaling by F.
    pub base_power: f64,
    pub mean: f64,
    pub seed: u64,
    pub targets: Vec<CurrentChannel>,
    #[serde(default)]
    pub mode: Mode,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig {
            f_amplitude: 1.0,
            inject_time: DEFAULT_INJECT_TIME,
            base_power: BASE_POWER,
            mean: 0.0,
            seed: 0,
            targets: CurrentChannel::ALL.to_vec(),
            mode: Mode::Replication,
        }
    }
}

impl AnomalyConfig {
    pub fn with_amplitude(f_amplitude: f64, seed: u64) -> Self {
        AnomalyConfig {
            f_amplitude,
            seed,
            ..Self::default()
        }
    }

    /// True when the injection perturbs nothing (F = 0).
    pub fn is_inert(&self) -> bool {
        self.f_amplitude == 0.0
    }

    pub fn validate(&self, duration: f64) -> Result<()> {
        let f = self.f_amplitude;
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::Parameter(format!("F must be non-negative, got {f}")));
        }
        if !(self.base_power.is_finite() && self.base_power >= 0.0) {
            return Err(Error::Domain(format!(
                "base_power must be a non-negative variance, got {}",
                self.base_power
            )));
        }
        if !self.mean.is_finite() {
            return Err(Error::Parameter("noise mean must be finite".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Parameter(
                "at least one target channel required".into(),
            ));
        }
        let mut t = self.targets.clone();
        t.sort();
        t.dedup();
        if t.len() != self.targets.len() {
            return Err(Error::Parameter("duplicate target channel".into()));
        }
        if !(self.inject_time.is_finite() && self.inject_time >= 0.0 && self.inject_time < duration)
        {
            return Err(Error::Bounds(format!(
                "inject_time must lie in [0, {duration}), got {}",
                self.inject_time
            )));
        }
        if self.mode == Mode::Replication {
            if f > F_MAX || !on_f_grid(f) {
                return Err(Error::Parameter(format!(
                    "F = {f} is not on the grid {{0, 0.05, ..., 2}}"
                )));
            }
            if self.mean != 0.0 || self.base_power != BASE_POWER {
                return Err(Error::Parameter(format!(
                    "replication mode requires mean 0 and base power {BASE_POWER}"
                )));
            }
        }
        Ok(())
    }
}

fn on_f_grid(f: f64) -> bool {
    let k = f / F_STEP;
    (k - k.round()).abs() < 1e-9
}

/// The replication sweep `0, 0.05, ..., 2.0` (41 points).
pub fn f_sweep() -> Vec<f64> {
    (0..=40).map(|k| k as f64 / 20.0).collect()
}

pub fn inject_fdi(record: &WaveformRecord, cfg: &AnomalyConfig) -> Result<WaveformRecord> {
    cfg.validate(record.config.duration)?;
    if record.scenario.anomaly.is_some() {
        return Err(Error::Parameter(
            "record already carries an injected anomaly".into(),
        ));
    }
    let mut out = record.clone();
    out.scenario.anomaly = Some(cfg.clone());
    if cfg.is_inert() {
        return Ok(out);
    }
    let onset = record.index_at(cfg.inject_time);
    let dist = rng::normal(cfg.mean, cfg.base_power)?;
    let mut rng = rng::prng(cfg.seed, Stream::Injection);
    let mut targets = cfg.targets.clone();
    targets.sort();
    for ch in targets {
        for x in &mut out.i_abc[ch as usize][onset..] {
            *x += cfg.f_amplitude * dist.sample(&mut rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_healthy, SimConfig};

    fn record() -> WaveformRecord {
        simulate_healthy(&SimConfig {
            seed: 11,
            ..SimConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_amplitude_leaves_samples_untouched() {
        let rec = record();
        let out = inject_fdi(&rec, &AnomalyConfig::with_amplitude(0.0, 1)).unwrap();
        assert_eq!(out.i_abc, rec.i_abc);
        assert_eq!(out.v_abc, rec.v_abc);
        assert!(out.scenario.anomaly.is_some());
    }

    #[test]
    fn pre_onset_and_non_targets_are_untouched() {
        let rec = record();
        let cfg = AnomalyConfig {
            targets: vec![CurrentChannel::Ia],
            ..AnomalyConfig::with_amplitude(2.0, 4)
        };
        let out = inject_fdi(&rec, &cfg).unwrap();
        let onset = rec.index_at(0.15);
        assert_eq!(onset, 1500);
        assert_eq!(out.i_abc[0][..onset], rec.i_abc[0][..onset]);
        assert_ne!(out.i_abc[0][onset..], rec.i_abc[0][onset..]);
        assert_eq!(out.i_abc[1], rec.i_abc[1]);
        assert_eq!(out.i_abc[2], rec.i_abc[2]);
        assert_eq!(out.v_abc, rec.v_abc);
    }

    #[test]
    fn post_onset_variance_matches_base_power() {
        // 20 000 post-onset samples on one channel.
        let cfg = SimConfig {
            duration: 2.15,
            seed: 5,
            ..SimConfig::default()
        };
        let rec = simulate_healthy(&cfg).unwrap();
        let out = inject_fdi(&rec, &AnomalyConfig::with_amplitude(1.0, 99)).unwrap();
        let onset = rec.index_at(0.15);
        let d: Vec<f64> = out.i_abc[2][onset..]
            .iter()
            .zip(&rec.i_abc[2][onset..])
            .map(|(a, b)| a - b)
            .collect();
        assert_eq!(d.len(), 20_000);
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((v - 0.1).abs() <= 0.005, "variance {v}");
    }

    #[test]
    fn double_injection_is_rejected() {
        let once = inject_fdi(&record(), &AnomalyConfig::with_amplitude(0.5, 1)).unwrap();
        assert!(inject_fdi(&once, &AnomalyConfig::with_amplitude(0.5, 2)).is_err());
    }

    #[test]
    fn onset_past_the_record_is_a_bounds_error() {
        let cfg = AnomalyConfig {
            inject_time: 0.3,
            ..AnomalyConfig::default()
        };
        assert!(matches!(inject_fdi(&record(), &cfg), Err(Error::Bounds(_))));
    }

    #[test]
    fn replication_mode_pins_the_sweep() {
        assert!(AnomalyConfig::with_amplitude(2.05, 0)
            .validate(0.3)
            .is_err());
        assert!(AnomalyConfig::with_amplitude(0.33, 0)
            .validate(0.3)
            .is_err());
        assert!(AnomalyConfig::with_amplitude(1.35, 0).validate(0.3).is_ok());
        let free = AnomalyConfig {
            f_amplitude: 3.3,
            base_power: 0.2,
            mode: Mode::Free,
            ..AnomalyConfig::default()
        };
        assert!(free.validate(0.3).is_ok());
        let sweep = f_sweep();
        assert_eq!(sweep.len(), 41);
        assert_eq!(sweep[3], 0.15);
        assert!(sweep
            .iter()
            .all(|&f| AnomalyConfig::with_amplitude(f, 0).validate(0.3).is_ok()));
    }
}
