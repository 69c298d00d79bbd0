//! Three-stage hierarchical diagnosis.
//!
//! Every window of a record goes through the detector; the record-level fault
//! status is the majority of those votes. When a fault is detected, only the
//! windows the detector flagged are passed on to the typer and the localizer,
//! and each stage again reports its majority class. A record judged healthy
//! never reaches the later stages.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifiers::{train, Classifier, LabeledDataset, ModelKind, ModelParams, TrainedModel};
use crate::error::{Error, Result};
use crate::features::{extract_rows, FaultKind, FeatureSpec, LabelSet};
use crate::sim::{SwitchId, SwitchSet, WaveformRecord};

pub const DETECTOR_CLASSES: [&str; 2] = ["NoFault", "Fault"];
pub const TYPER_CLASSES: [&str; 2] = ["Hardware", "Anomaly"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultStatus {
    NoFault,
    Detected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultType {
    None,
    Anomaly,
    Hardware,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchLocation {
    NA,
    Single(SwitchId),
    Multiple(SwitchSet),
}

impl SwitchLocation {
    pub fn from_set(set: &SwitchSet) -> Self {
        let ids: Vec<SwitchId> = set.iter().collect();
        match ids.as_slice() {
            [] => SwitchLocation::NA,
            [s] => SwitchLocation::Single(*s),
            _ => SwitchLocation::Multiple(set.clone()),
        }
    }

    pub fn switch_set(&self) -> SwitchSet {
        match self {
            SwitchLocation::NA => SwitchSet::empty(),
            SwitchLocation::Single(s) => SwitchSet::single(*s),
            SwitchLocation::Multiple(set) => set.clone(),
        }
    }
}

impl fmt::Display for SwitchLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchLocation::NA => f.write_str("NA"),
            SwitchLocation::Single(s) => write!(f, "Single({s})"),
            SwitchLocation::Multiple(set) => write!(f, "Multiple({set})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnosis {
    pub f_status: FaultStatus,
    pub f_type: FaultType,
    pub s_loc: SwitchLocation,
}

impl Diagnosis {
    pub fn no_fault() -> Self {
        Diagnosis {
            f_status: FaultStatus::NoFault,
            f_type: FaultType::None,
            s_loc: SwitchLocation::NA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.f_status {
            FaultStatus::NoFault => {
                self.f_type == FaultType::None && self.s_loc == SwitchLocation::NA
            }
            FaultStatus::Detected => self.f_type != FaultType::None,
        };
        let loc_ok = match &self.s_loc {
            SwitchLocation::Multiple(set) => set.len() >= 2,
            _ => true,
        };
        if ok && loc_ok {
            Ok(())
        } else {
            Err(Error::Pipeline(format!("inconsistent diagnosis: {self}")))
        }
    }

    /// The flat case this diagnosis corresponds to.
    pub fn to_label(&self) -> LabelSet {
        let kind = match self.f_type {
            FaultType::None => FaultKind::None,
            FaultType::Hardware => FaultKind::Hardware,
            FaultType::Anomaly => FaultKind::Anomaly,
        };
        LabelSet {
            fault_present: self.f_status == FaultStatus::Detected,
            fault_kind: kind,
            switch_set: self.s_loc.switch_set(),
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "status={:?} type={:?} loc={}",
            self.f_status, self.f_type, self.s_loc
        )
    }
}

/// Most frequent class; ties go to the smallest index.
pub fn majority_vote(predictions: &[usize]) -> Result<usize> {
    let Some(&max) = predictions.iter().max() else {
        return Err(Error::Domain("majority vote over zero predictions".into()));
    };
    let mut counts = vec![0usize; max + 1];
    for &p in predictions {
        counts[p] += 1;
    }
    Ok(crate::classifiers::argmax_count(&counts))
}

/// The three stage classifiers and the class list of the localizer.
pub struct Stages<'a> {
    pub detector: &'a dyn Classifier,
    pub typer: &'a dyn Classifier,
    pub localizer: &'a dyn Classifier,
    pub localizer_classes: &'a [SwitchSet],
}

impl Stages<'_> {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let checks = [
            ("detector", self.detector, DETECTOR_CLASSES.len()),
            ("typer", self.typer, TYPER_CLASSES.len()),
            ("localizer", self.localizer, self.localizer_classes.len()),
        ];
        for (name, model, classes) in checks {
            if model.n_classes() != classes {
                return Err(Error::Pipeline(format!(
                    "{name} has {} classes, expected {classes}",
                    model.n_classes()
                )));
            }
            if model.dim() != dim {
                return Err(Error::Pipeline(format!(
                    "{name} expects {}-dimensional features, spec has {dim}",
                    model.dim()
                )));
            }
        }
        Ok(())
    }
}

fn stage_predict(name: &str, model: &dyn Classifier, x: &[f64]) -> Result<usize> {
    let c = model.predict(x)?;
    if c >= model.n_classes() {
        return Err(Error::Pipeline(format!(
            "{name} returned class {c} of {}",
            model.n_classes()
        )));
    }
    Ok(c)
}

/// Runs the gated cascade over precomputed window features.
pub fn diagnose_windows(rows: &[Vec<f64>], stages: &Stages<'_>) -> Result<Diagnosis> {
    if rows.is_empty() {
        return Err(Error::Domain("record produced no windows".into()));
    }
    let detected: Vec<usize> = rows
        .iter()
        .map(|x| stage_predict("detector", stages.detector, x))
        .collect::<Result<_>>()?;
    if majority_vote(&detected)? == 0 {
        return Ok(Diagnosis::no_fault());
    }
    let flagged: Vec<&Vec<f64>> = rows
        .iter()
        .zip(&detected)
        .filter(|(_, &d)| d == 1)
        .map(|(x, _)| x)
        .collect();
    let types: Vec<usize> = flagged
        .iter()
        .map(|x| stage_predict("typer", stages.typer, x))
        .collect::<Result<_>>()?;
    let f_type = match majority_vote(&types)? {
        0 => FaultType::Hardware,
        _ => FaultType::Anomaly,
    };
    let locs: Vec<usize> = flagged
        .iter()
        .map(|x| stage_predict("localizer", stages.localizer, x))
        .collect::<Result<_>>()?;
    let set = &stages.localizer_classes[majority_vote(&locs)?];
    let diagnosis = Diagnosis {
        f_status: FaultStatus::Detected,
        f_type,
        s_loc: SwitchLocation::from_set(set),
    };
    diagnosis.validate()?;
    Ok(diagnosis)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageLearners {
    pub detector: ModelKind,
    pub typer: ModelKind,
    pub localizer: ModelKind,
}

impl Default for StageLearners {
    fn default() -> Self {
        StageLearners {
            detector: ModelKind::Knn,
            typer: ModelKind::Dt,
            localizer: ModelKind::Ann,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModels {
    pub detector: TrainedModel,
    pub typer: TrainedModel,
    pub localizer: TrainedModel,
    pub localizer_classes: Vec<SwitchSet>,
    pub feature_spec: FeatureSpec,
}

impl PipelineModels {
    pub fn stages(&self) -> Stages<'_> {
        Stages {
            detector: &self.detector,
            typer: &self.typer,
            localizer: &self.localizer,
            localizer_classes: &self.localizer_classes,
        }
    }
}

/// Extracts window features from `record` and runs the cascade.
pub fn run_faultnet(record: &WaveformRecord, models: &PipelineModels) -> Result<Diagnosis> {
    let stages = models.stages();
    stages.validate(models.feature_spec.dim())?;
    let rows = extract_rows(record, &models.feature_spec)?;
    diagnose_windows(&rows, &stages)
}

/// Window features of one record together with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordWindows {
    pub id: String,
    pub label: LabelSet,
    pub starts: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub window_len: usize,
    /// First sample of the hardware fault, if any.
    pub fault_onset: Option<usize>,
    /// First sample of the injected anomaly, if any.
    pub anomaly_onset: Option<usize>,
}

impl RecordWindows {
    pub fn from_record(
        id: impl Into<String>,
        record: &WaveformRecord,
        spec: &FeatureSpec,
    ) -> Result<Self> {
        let label = LabelSet::from_scenario(&record.scenario);
        let fault_onset = (!record.scenario.switches.is_empty())
            .then(|| record.index_at(record.scenario.fault_time));
        let anomaly_onset = match &record.scenario.anomaly {
            Some(a) if !a.is_inert() => Some(record.index_at(a.inject_time)),
            _ => None,
        };
        Ok(RecordWindows {
            id: id.into(),
            label,
            starts: spec.window_starts(record.len()),
            rows: extract_rows(record, spec)?,
            window_len: spec.window_len,
            fault_onset,
            anomaly_onset,
        })
    }

    /// Windows that reach past `onset`; every window when there is none.
    pub fn active_rows(&self, onset: Option<usize>) -> impl Iterator<Item = &Vec<f64>> + '_ {
        let len = self.window_len;
        self.starts
            .iter()
            .zip(&self.rows)
            .filter(move |(&s, _)| onset.map_or(true, |o| s + len > o))
            .map(|(_, r)| r)
    }

    /// Earliest disturbance of any kind.
    pub fn first_onset(&self) -> Option<usize> {
        match (self.fault_onset, self.anomaly_onset) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Onset of the disturbance that defines the fault kind.
    pub fn kind_onset(&self) -> Option<usize> {
        match self.label.fault_kind {
            FaultKind::Anomaly => self.anomaly_onset.or(self.fault_onset),
            _ => self.fault_onset,
        }
    }
}

/// Localizer classes present among fault records, in grid order.
pub fn localizer_classes(corpus: &[RecordWindows]) -> Vec<SwitchSet> {
    let mut sets: Vec<SwitchSet> = corpus
        .iter()
        .filter(|r| r.label.fault_present)
        .map(|r| r.label.switch_set.clone())
        .collect();
    sets.sort_by_key(SwitchSet::grid_rank);
    sets.dedup();
    sets
}

fn stage_dataset(
    stage: &str,
    names: &[&str],
    items: Vec<(&Vec<f64>, usize)>,
) -> Result<LabeledDataset> {
    let mut seen = vec![false; names.len()];
    for (_, l) in &items {
        seen[*l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Coverage(format!(
            "{stage} class missing: {}",
            names[missing]
        )));
    }
    let (vectors, labels) = items.into_iter().map(|(x, l)| (x.clone(), l)).unzip();
    LabeledDataset::new(
        vectors,
        labels,
        names.iter().map(|s| s.to_string()).collect(),
    )
}

fn check_windows(corpus: &[RecordWindows], spec: &FeatureSpec) -> Result<()> {
    for r in corpus {
        r.label.validate()?;
        if r.window_len != spec.window_len {
            return Err(Error::Compatibility(format!(
                "record {} was windowed with {} samples, spec uses {}",
                r.id, r.window_len, spec.window_len
            )));
        }
    }
    Ok(())
}

/// Fault vs no-fault windows. Fault records contribute the windows that
/// reach past their first onset, so pre-fault windows never teach the
/// detector that healthy-looking signals are faults.
pub fn detector_dataset(corpus: &[RecordWindows]) -> Result<LabeledDataset> {
    let items = corpus
        .iter()
        .flat_map(|r| {
            let (onset, class) = if r.label.fault_present {
                (r.first_onset(), 1)
            } else {
                (None, 0)
            };
            r.active_rows(onset).map(move |x| (x, class))
        })
        .collect();
    stage_dataset("detector", &DETECTOR_CLASSES, items)
}

/// Hardware vs anomaly windows of fault records, each taken from the onset
/// of the disturbance that defines its kind.
pub fn typer_dataset(corpus: &[RecordWindows]) -> Result<LabeledDataset> {
    let items = corpus
        .iter()
        .filter(|r| r.label.fault_present)
        .flat_map(|r| {
            let class = usize::from(r.label.fault_kind == FaultKind::Anomaly);
            r.active_rows(r.kind_onset()).map(move |x| (x, class))
        })
        .collect();
    stage_dataset("typer", &TYPER_CLASSES, items)
}

/// Switch-set windows of fault records; classes from [`localizer_classes`].
pub fn localizer_dataset(corpus: &[RecordWindows]) -> Result<(LabeledDataset, Vec<SwitchSet>)> {
    let classes = localizer_classes(corpus);
    let class_names: Vec<String> = classes.iter().map(SwitchSet::label).collect();
    if classes.len() < 2 {
        return Err(Error::Coverage(format!(
            "localizer needs at least two switch classes, found [{}]",
            class_names.join(", ")
        )));
    }
    let name_refs: Vec<&str> = class_names.iter().map(String::as_str).collect();
    let items = corpus
        .iter()
        .filter(|r| r.label.fault_present)
        .flat_map(|r| {
            let class = classes
                .iter()
                .position(|c| *c == r.label.switch_set)
                .expect("class list covers every fault record");
            let onset = if r.label.switch_set.is_empty() {
                r.anomaly_onset
            } else {
                r.fault_onset
            };
            r.active_rows(onset).map(move |x| (x, class))
        })
        .collect();
    Ok((stage_dataset("localizer", &name_refs, items)?, classes))
}

/// Trains the three stages independently on their label projections.
pub fn train_pipeline(
    corpus: &[RecordWindows],
    spec: &FeatureSpec,
    learners: &StageLearners,
    params: &ModelParams,
) -> Result<PipelineModels> {
    check_windows(corpus, spec)?;
    let detector_data = detector_dataset(corpus)?;
    let typer_data = typer_dataset(corpus)?;
    let (loc_data, classes) = localizer_dataset(corpus)?;
    Ok(PipelineModels {
        detector: train(
            learners.detector,
            &detector_data,
            &params.for_kind(learners.detector),
        )?,
        typer: train(
            learners.typer,
            &typer_data,
            &params.for_kind(learners.typer),
        )?,
        localizer: train(
            learners.localizer,
            &loc_data,
            &params.for_kind(learners.localizer),
        )?,
        localizer_classes: classes,
        feature_spec: spec.clone(),
    })
}
