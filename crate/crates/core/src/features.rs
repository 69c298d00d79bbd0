//! Stationary/rotating frame transforms and windowed statistics.
//!
//! A record is mapped sample by sample to αβ (amplitude-invariant Clarke) and
//! optionally rotated to dq with the known fundamental angle `2π·f0·t`. Each
//! window then yields `|channels| × |stats|` values laid out channels-major,
//! stats-minor.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{FaultScenario, SimConfig, SwitchSet, WaveformRecord};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlphaBetaSample {
    pub alpha: f64,
    pub beta: f64,
}

/// Amplitude-invariant Clarke transform.
pub fn clarke(a: f64, b: f64, c: f64) -> AlphaBetaSample {
    AlphaBetaSample {
        alpha: (2.0 / 3.0) * (a - 0.5 * b - 0.5 * c),
        beta: (2.0 / 3.0) * SQRT3_2 * (b - c),
    }
}

/// Park rotation of an αβ sample by `theta`; returns `(d, q)`.
pub fn park(s: AlphaBetaSample, theta: f64) -> (f64, f64) {
    let (sin, cos) = theta.sin_cos();
    (s.alpha * cos + s.beta * sin, -s.alpha * sin + s.beta * cos)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

fn is_flat(sxx: f64, x: &[f64]) -> bool {
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    sxx <= x.len() as f64 * (4.0 * f64::EPSILON * scale).powi(2)
}

/// Pearson correlation between `x[..n-1]` and `x[1..]`; 0 when either slice is flat.
pub fn lag1_autocorr(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Domain(format!(
            "lag-1 autocorrelation needs at least 2 samples, got {}",
            x.len()
        )));
    }
    let (head, tail) = (&x[..x.len() - 1], &x[1..]);
    let (mh, mt) = (mean(head), mean(tail));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in head.iter().zip(tail) {
        let (da, db) = (a - mh, b - mt);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if is_flat(sxx, head) || is_flat(syy, tail) {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    AlphaBeta,
    Dq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mean,
    Variance,
    Lag1Autocorr,
}

impl Stat {
    pub fn name(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Variance => "variance",
            Stat::Lag1Autocorr => "lag1_autocorr",
        }
    }

    fn eval(self, x: &[f64]) -> f64 {
        match self {
            Stat::Mean => mean(x),
            Stat::Variance => variance(x),
            Stat::Lag1Autocorr => lag1_autocorr(x).expect("window_len >= 2"),
        }
    }
}

/// Two-axis channel. Under [`Frame::Dq`] the α/β axes read as d/q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    IAlpha,
    IBeta,
    VAlpha,
    VBeta,
}

impl Channel {
    pub fn name(self, frame: Frame) -> &'static str {
        match (frame, self) {
            (Frame::AlphaBeta, Channel::IAlpha) => "i_alpha",
            (Frame::AlphaBeta, Channel::IBeta) => "i_beta",
            (Frame::AlphaBeta, Channel::VAlpha) => "v_alpha",
            (Frame::AlphaBeta, Channel::VBeta) => "v_beta",
            (Frame::Dq, Channel::IAlpha) => "i_d",
            (Frame::Dq, Channel::IBeta) => "i_q",
            (Frame::Dq, Channel::VAlpha) => "v_d",
            (Frame::Dq, Channel::VBeta) => "v_q",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub frame: Frame,
    pub window_len: usize,
    pub window_stride: usize,
    pub stats: Vec<Stat>,
    pub channels: Vec<Channel>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec::for_sim(&SimConfig::default())
    }
}

impl FeatureSpec {
    /// One-cycle windows advanced by half a cycle, all three statistics on
    /// `Iα, Iβ, Vα, Vβ`.
    pub fn for_sim(sim: &SimConfig) -> Self {
        let cycle = sim.samples_per_cycle().max(2);
        FeatureSpec {
            frame: Frame::AlphaBeta,
            window_len: cycle,
            window_stride: (sim.fs / (2.0 * sim.f0)).round().max(1.0) as usize,
            stats: vec![Stat::Mean, Stat::Variance, Stat::Lag1Autocorr],
            channels: vec![
                Channel::IAlpha,
                Channel::IBeta,
                Channel::VAlpha,
                Channel::VBeta,
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::Config(format!(
                "window_len >= 2 violated: {}",
                self.window_len
            )));
        }
        if self.window_stride < 1 {
            return Err(Error::Config("window_stride >= 1 violated".into()));
        }
        if self.stats.is_empty() {
            return Err(Error::Config("at least one statistic required".into()));
        }
        if self.channels.is_empty() {
            return Err(Error::Config("at least one channel required".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.stats.len() * self.channels.len()
    }

    /// Column names in vector layout order, e.g. `i_alpha.mean`.
    pub fn feature_names(&self) -> Vec<String> {
        self.channels
            .iter()
            .flat_map(|c| {
                self.stats
                    .iter()
                    .map(move |s| format!("{}.{}", c.name(self.frame), s.name()))
            })
            .collect()
    }

    /// Window start indices for a record of `n` samples.
    pub fn window_starts(&self, n: usize) -> Vec<usize> {
        if n < self.window_len {
            return Vec::new();
        }
        (0..=n - self.window_len)
            .step_by(self.window_stride)
            .collect()
    }

    /// Short content hash identifying this spec.
    pub fn id(&self) -> String {
        let json = serde_json::to_vec(self).expect("feature spec serializes");
        crate::rng::hex_digest(&json)[..16].to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultKind {
    None,
    Hardware,
    Anomaly,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Ground truth attached to every window of a record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSet {
    pub fault_present: bool,
    pub fault_kind: FaultKind,
    pub switch_set: SwitchSet,
}

impl LabelSet {
    pub fn healthy() -> Self {
        LabelSet {
            fault_present: false,
            fault_kind: FaultKind::None,
            switch_set: SwitchSet::empty(),
        }
    }

    /// An F = 0 injection perturbs nothing and does not count as an anomaly.
    pub fn from_scenario(s: &FaultScenario) -> Self {
        let anomalous = s.anomaly.as_ref().is_some_and(|a| !a.is_inert());
        let kind = if anomalous {
            FaultKind::Anomaly
        } else if !s.switches.is_empty() {
            FaultKind::Hardware
        } else {
            FaultKind::None
        };
        LabelSet {
            fault_present: kind != FaultKind::None,
            fault_kind: kind,
            switch_set: s.switches.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fault_present
            && (self.fault_kind != FaultKind::None || !self.switch_set.is_empty())
        {
            return Err(Error::Label(
                "a fault-free label cannot carry a fault kind or switches".into(),
            ));
        }
        if self.fault_present && self.fault_kind == FaultKind::None {
            return Err(Error::Label("fault present without a fault kind".into()));
        }
        if self.fault_kind == FaultKind::Hardware && self.switch_set.is_empty() {
            return Err(Error::Label("hardware fault without switches".into()));
        }
        Ok(())
    }

    /// Presentation order: healthy, hardware cases, pure anomaly, then
    /// hardware plus anomaly; switch sets in grid order within each group.
    pub fn sort_key(&self) -> (u8, (usize, usize, SwitchSet)) {
        let group = match (self.fault_kind, self.switch_set.is_empty()) {
            (FaultKind::None, _) => 0,
            (FaultKind::Hardware, _) => 1,
            (FaultKind::Anomaly, true) => 2,
            (FaultKind::Anomaly, false) => 3,
        };
        (group, self.switch_set.grid_rank())
    }

    /// Inverse of [`LabelSet::case_name`].
    pub fn parse_case(name: &str) -> Result<Self> {
        let anomaly = |switch_set| LabelSet {
            fault_present: true,
            fault_kind: FaultKind::Anomaly,
            switch_set,
        };
        let hardware = |switch_set| LabelSet {
            fault_present: true,
            fault_kind: FaultKind::Hardware,
            switch_set,
        };
        Ok(match name {
            "Healthy" => LabelSet::healthy(),
            "FDI" => anomaly(SwitchSet::empty()),
            "Hardware" => hardware(SwitchSet::empty()),
            _ => match name.strip_suffix("+FDI") {
                Some(sw) => anomaly(SwitchSet::parse_label(sw)?),
                None => hardware(SwitchSet::parse_label(name)?),
            },
        })
    }

    /// Flat case name: `Healthy`, `S1`, `S3+S2`, `S1+FDI`, `FDI`.
    pub fn case_name(&self) -> String {
        match (self.fault_kind, self.switch_set.is_empty()) {
            (FaultKind::None, _) => "Healthy".into(),
            (FaultKind::Hardware, true) => "Hardware".into(),
            (FaultKind::Hardware, false) => self.switch_set.label(),
            (FaultKind::Anomaly, true) => "FDI".into(),
            (FaultKind::Anomaly, false) => format!("{}+FDI", self.switch_set.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: LabelSet,
    pub spec_id: String,
}

/// Per-sample two-axis series for voltage and current.
struct FrameSeries {
    i: [Vec<f64>; 2],
    v: [Vec<f64>; 2],
}

fn to_frame(record: &WaveformRecord, frame: Frame) -> FrameSeries {
    let n = record.len();
    let omega = 2.0 * PI * record.config.f0;
    let mut out = FrameSeries {
        i: [Vec::with_capacity(n), Vec::with_capacity(n)],
        v: [Vec::with_capacity(n), Vec::with_capacity(n)],
    };
    for k in 0..n {
        let iab = clarke(record.i_abc[0][k], record.i_abc[1][k], record.i_abc[2][k]);
        let vab = clarke(record.v_abc[0][k], record.v_abc[1][k], record.v_abc[2][k]);
        let (i, v) = match frame {
            Frame::AlphaBeta => ((iab.alpha, iab.beta), (vab.alpha, vab.beta)),
            Frame::Dq => {
                let theta = omega * record.t[k];
                (park(iab, theta), park(vab, theta))
            }
        };
        out.i[0].push(i.0);
        out.i[1].push(i.1);
        out.v[0].push(v.0);
        out.v[1].push(v.1);
    }
    out
}

/// Feature matrix for one record: one row per window.
pub fn extract_rows(record: &WaveformRecord, spec: &FeatureSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if record.len() < spec.window_len {
        return Err(Error::Window {
            len: record.len(),
            window: spec.window_len,
        });
    }
    let series = to_frame(record, spec.frame);
    let channel = |c: Channel| -> &[f64] {
        match c {
            Channel::IAlpha => &series.i[0],
            Channel::IBeta => &series.i[1],
            Channel::VAlpha => &series.v[0],
            Channel::VBeta => &series.v[1],
        }
    };
    Ok(spec
        .window_starts(record.len())
        .into_iter()
        .map(|start| {
            let mut row = Vec::with_capacity(spec.dim());
            for &c in &spec.channels {
                let w = &channel(c)[start..start + spec.window_len];
                row.extend(spec.stats.iter().map(|s| s.eval(w)));
            }
            row
        })
        .collect())
}

pub fn extract_features(record: &WaveformRecord, spec: &FeatureSpec) -> Result<Vec<FeatureVector>> {
    let label = LabelSet::from_scenario(&record.scenario);
    let spec_id = spec.id();
    Ok(extract_rows(record, spec)?
        .into_iter()
        .map(|values| FeatureVector {
            values,
            label: label.clone(),
            spec_id: spec_id.clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::{inject_fdi, AnomalyConfig};
    use crate::sim::{simulate_faulted, simulate_healthy, SwitchId};

    fn quiet() -> SimConfig {
        SimConfig {
            sensor_noise_std: 0.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn clarke_hand_values() {
        assert_eq!(clarke(0.0, 0.0, 0.0), AlphaBetaSample::default());
        let s = clarke(1.0, -0.5, -0.5);
        assert!((s.alpha - 1.0).abs() < 1e-15 && s.beta.abs() < 1e-15);
    }

    #[test]
    fn park_hand_values() {
        let s = AlphaBetaSample {
            alpha: 0.3,
            beta: -0.8,
        };
        assert_eq!(park(s, 0.0), (0.3, -0.8));
        let (d, q) = park(
            AlphaBetaSample {
                alpha: 1.0,
                beta: 0.0,
            },
            PI / 2.0,
        );
        assert!(d.abs() < 1e-15 && (q + 1.0).abs() < 1e-15);
    }

    #[test]
    fn lag1_conventions() {
        assert_eq!(lag1_autocorr(&[2.5; 40]).unwrap(), 0.0);
        let alt: Vec<f64> = (0..50)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!((lag1_autocorr(&alt).unwrap() + 1.0).abs() < 1e-9);
        assert!(matches!(lag1_autocorr(&[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn lag1_of_a_ramp_matches_the_covariance_formula() {
        let x: Vec<f64> = (0..100).map(|k| 0.25 * k as f64 - 3.0).collect();
        // Independent two-pass covariance over explicit pairs.
        let pairs: Vec<(f64, f64)> = x.windows(2).map(|w| (w[0], w[1])).collect();
        let n = pairs.len() as f64;
        let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum();
        let va: f64 = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum();
        let vb: f64 = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum();
        let oracle = cov / (va * vb).sqrt();
        assert!((lag1_autocorr(&x).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn default_spec_is_twelve_dimensional() {
        let spec = FeatureSpec::default();
        assert_eq!(spec.window_len, 167);
        assert_eq!(spec.window_stride, 83);
        assert_eq!(spec.dim(), 12);
        assert_eq!(spec.window_starts(3000).len(), 35);
    }

    #[test]
    fn layout_is_channels_major_stats_minor() {
        let spec = FeatureSpec::default();
        let names = spec.feature_names();
        assert_eq!(
            names[..4],
            [
                "i_alpha.mean",
                "i_alpha.variance",
                "i_alpha.lag1_autocorr",
                "i_beta.mean"
            ]
        );
        assert_eq!(names[11], "v_beta.lag1_autocorr");
        let dq = FeatureSpec {
            frame: Frame::Dq,
            ..spec
        };
        assert_eq!(dq.feature_names()[3], "i_q.mean");

        // Pin the layout against values computed from the raw αβ series.
        let rec = simulate_healthy(&SimConfig::default()).unwrap();
        let rows = extract_rows(&rec, &FeatureSpec::default()).unwrap();
        let w = 167;
        let vbeta: Vec<f64> = (0..w)
            .map(|k| clarke(rec.v_abc[0][k], rec.v_abc[1][k], rec.v_abc[2][k]).beta)
            .collect();
        assert_eq!(rows[0][9], mean(&vbeta));
        assert_eq!(rows[0][10], variance(&vbeta));
    }

    #[test]
    fn full_cycle_means_vanish_on_a_healthy_record() {
        let rec = simulate_healthy(&quiet()).unwrap();
        let spec = FeatureSpec {
            stats: vec![Stat::Mean],
            channels: vec![Channel::IAlpha],
            ..FeatureSpec::default()
        };
        for fv in extract_features(&rec, &spec).unwrap() {
            assert!(fv.values[0].abs() <= 0.02 * rec.config.i_amp);
        }
    }

    #[test]
    fn whole_record_window_yields_one_vector() {
        let rec = simulate_healthy(&SimConfig::default()).unwrap();
        let spec = FeatureSpec {
            window_len: 3000,
            window_stride: 3000,
            ..FeatureSpec::default()
        };
        assert_eq!(extract_features(&rec, &spec).unwrap().len(), 1);
        let too_long = FeatureSpec {
            window_len: 3001,
            ..spec
        };
        assert!(matches!(
            extract_features(&rec, &too_long),
            Err(Error::Window { .. })
        ));
    }

    #[test]
    fn fdi_raises_post_onset_current_variance() {
        let rec = simulate_healthy(&SimConfig::default()).unwrap();
        let out = inject_fdi(&rec, &AnomalyConfig::with_amplitude(2.0, 8)).unwrap();
        let spec = FeatureSpec::default();
        let starts = spec.window_starts(out.len());
        let rows = extract_rows(&out, &spec).unwrap();
        let onset = out.index_at(0.15);
        let pre: Vec<f64> = starts
            .iter()
            .zip(&rows)
            .filter(|(s, _)| **s + spec.window_len <= onset)
            .map(|(_, r)| r[1])
            .collect();
        let post: Vec<f64> = starts
            .iter()
            .zip(&rows)
            .filter(|(s, _)| **s >= onset)
            .map(|(_, r)| r[1])
            .collect();
        let max_pre = pre.iter().cloned().fold(f64::MIN, f64::max);
        let min_post = post.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min_post > max_pre, "pre max {max_pre}, post min {min_post}");
    }

    #[test]
    fn labels_follow_the_scenario() {
        let cfg = SimConfig::default();
        let hw = FaultScenario::with_switches(SwitchSet::single(SwitchId::S2));
        let rec = simulate_faulted(&cfg, &hw).unwrap();
        let l = LabelSet::from_scenario(&rec.scenario);
        assert_eq!(l.fault_kind, FaultKind::Hardware);
        assert_eq!(l.case_name(), "S2");
        let fdi = FaultScenario {
            anomaly: Some(AnomalyConfig::with_amplitude(0.5, 1)),
            ..hw.clone()
        };
        assert_eq!(LabelSet::from_scenario(&fdi).case_name(), "S2+FDI");
        for name in ["Healthy", "S2", "S3+S2", "S2+FDI", "S5+S4+FDI", "FDI"] {
            assert_eq!(LabelSet::parse_case(name).unwrap().case_name(), name);
        }
        assert!(LabelSet::parse_case("S9").is_err());
        let inert = FaultScenario {
            anomaly: Some(AnomalyConfig::with_amplitude(0.0, 1)),
            ..FaultScenario::healthy()
        };
        assert_eq!(LabelSet::from_scenario(&inert), LabelSet::healthy());
        let bad = LabelSet {
            fault_present: false,
            fault_kind: FaultKind::Hardware,
            switch_set: SwitchSet::empty(),
        };
        assert!(bad.validate().is_err());
    }
}
