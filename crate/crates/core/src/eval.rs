//! Record-level evaluation and the per-scenario comparison report.
//!
//! A flat model classifies every window into a case (`Healthy`, `S1`,
//! `S1+FDI`, ...) and the record takes the majority case. The cascade maps
//! its diagnosis onto the same case names, so both are scored alike.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train, LabeledDataset, ModelKind, ModelParams, TrainedModel};
use crate::error::{Error, Result};
use crate::features::{FaultKind, LabelSet};
use crate::pipeline::{
    diagnose_windows, majority_vote, Diagnosis, FaultStatus, FaultType, PipelineModels,
    RecordWindows, SwitchLocation,
};
use crate::store::{
    compute_metrics, split_records, ClassMetrics, ConfusionMatrix, Corpus, MetricsReport,
    ScenarioKind, SplitConfig,
};

pub const REPORT_FORMAT: &str = "faultnet-report";
pub const REPORT_VERSION: u32 = 1;

/// Distinct cases in presentation order.
pub fn case_classes<'a>(labels: impl IntoIterator<Item = &'a LabelSet>) -> Vec<LabelSet> {
    let mut v: Vec<LabelSet> = labels.into_iter().cloned().collect();
    v.sort_by_key(LabelSet::sort_key);
    v.dedup();
    v
}

/// Window dataset with case labels. Fault records contribute the windows
/// that reach past their first onset.
pub fn flat_dataset(records: &[&RecordWindows], classes: &[LabelSet]) -> Result<LabeledDataset> {
    let (mut vectors, mut labels) = (Vec::new(), Vec::new());
    for r in records {
        let class = classes
            .iter()
            .position(|c| *c == r.label)
            .ok_or_else(|| Error::Label(format!("record {} has no class", r.id)))?;
        let onset = if r.label.fault_present {
            r.first_onset()
        } else {
            None
        };
        for x in r.active_rows(onset) {
            vectors.push(x.clone());
            labels.push(class);
        }
    }
    LabeledDataset::new(
        vectors,
        labels,
        classes.iter().map(LabelSet::case_name).collect(),
    )
}

pub fn train_flat(
    kind: ModelKind,
    records: &[&RecordWindows],
    params: &ModelParams,
) -> Result<TrainedModel> {
    let classes = case_classes(records.iter().map(|r| &r.label));
    let data = flat_dataset(records, &classes)?;
    train(kind, &data, &params.for_kind(kind))
}

impl Diagnosis {
    pub fn from_label(label: &LabelSet) -> Self {
        if !label.fault_present {
            return Diagnosis::no_fault();
        }
        Diagnosis {
            f_status: FaultStatus::Detected,
            f_type: match label.fault_kind {
                FaultKind::Anomaly => FaultType::Anomaly,
                _ => FaultType::Hardware,
            },
            s_loc: SwitchLocation::from_set(&label.switch_set),
        }
    }
}

/// Either one flat case classifier or the three-stage cascade.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Flat(TrainedModel),
    Pipeline(PipelineModels),
}

impl Predictor {
    pub fn describe(&self) -> String {
        match self {
            Predictor::Flat(m) => m.kind.to_string(),
            Predictor::Pipeline(p) => {
                format!(
                    "Pipeline({}/{}/{})",
                    p.detector.kind, p.typer.kind, p.localizer.kind
                )
            }
        }
    }

    pub fn predict_case(&self, rows: &[Vec<f64>]) -> Result<LabelSet> {
        match self {
            Predictor::Flat(m) => {
                let votes = rows
                    .iter()
                    .map(|x| crate::classifiers::predict(m, x))
                    .collect::<Result<Vec<_>>>()?;
                LabelSet::parse_case(&m.class_names[majority_vote(&votes)?])
            }
            Predictor::Pipeline(p) => Ok(diagnose_windows(rows, &p.stages())?.to_label()),
        }
    }

    pub fn diagnose(&self, rows: &[Vec<f64>]) -> Result<Diagnosis> {
        match self {
            Predictor::Flat(_) => Ok(Diagnosis::from_label(&self.predict_case(rows)?)),
            Predictor::Pipeline(p) => diagnose_windows(rows, &p.stages()),
        }
    }
}

/// Metrics over record-level case predictions.
pub fn score_cases(truth: &[LabelSet], pred: &[LabelSet]) -> Result<MetricsReport> {
    let classes = case_classes(truth.iter().chain(pred));
    let index = |l: &LabelSet| {
        classes
            .iter()
            .position(|c| c == l)
            .expect("class list is complete")
    };
    let t: Vec<usize> = truth.iter().map(index).collect();
    let p: Vec<usize> = pred.iter().map(index).collect();
    compute_metrics(&t, &p, classes.iter().map(LabelSet::case_name).collect())
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<String>,
}

impl ReportRow {
    /// Values are rounded to the four decimals shown in text output so the
    /// JSON and text forms carry identical numbers.
    pub fn new(model: String, m: MetricsReport) -> Self {
        ReportRow {
            model,
            accuracy: round4(m.accuracy),
            precision: round4(m.precision),
            recall: round4(m.recall),
            f1: round4(m.f1),
            per_class: m
                .per_class
                .into_iter()
                .map(|c| ClassMetrics {
                    precision: round4(c.precision),
                    recall: round4(c.recall),
                    f1: round4(c.f1),
                    ..c
                })
                .collect(),
            confusion: m.confusion,
            warnings: m.warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSection {
    pub scenario: Option<ScenarioKind>,
    pub title: String,
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub manifest_hash: String,
    pub feature_spec_id: String,
    pub split: SplitConfig,
    pub side: EvalSide,
    pub sections: Vec<ReportSection>,
}

impl Report {
    fn new(
        corpus: &Corpus,
        split: &SplitConfig,
        side: EvalSide,
        sections: Vec<ReportSection>,
    ) -> Self {
        Report {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            manifest_hash: corpus.manifest_hash(),
            feature_spec_id: corpus.manifest.feature_spec.id(),
            split: split.clone(),
            side,
            sections,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (i, sec) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            writeln!(out, "Performance Metrics for {}", sec.title).unwrap();
            writeln!(out, "records: {} train, {} scored", sec.n_train, sec.n_test).unwrap();
            let width = sec
                .rows
                .iter()
                .map(|r| r.model.len())
                .max()
                .unwrap_or(5)
                .max(5);
            writeln!(
                out,
                "{:<width$} | {:>9} | {:>9} | {:>9} | {:>9}",
                "Model", "Accuracy", "Precision", "Recall", "F1-Score"
            )
            .unwrap();
            writeln!(out, "{}", "-".repeat(width + 4 * 12)).unwrap();
            for r in &sec.rows {
                writeln!(
                    out,
                    "{:<width$} | {:>9.4} | {:>9.4} | {:>9.4} | {:>9.4}",
                    r.model, r.accuracy, r.precision, r.recall, r.f1
                )
                .unwrap();
            }
            for r in &sec.rows {
                writeln!(
                    out,
                    "\nConfusion matrix, {} (rows: true, columns: predicted)",
                    r.model
                )
                .unwrap();
                out.push_str(&render_confusion(&r.confusion));
            }
            for r in &sec.rows {
                for w in &r.warnings {
                    writeln!(out, "warning ({}): {w}", r.model).unwrap();
                }
            }
        }
        out
    }
}

fn render_confusion(cm: &ConfusionMatrix) -> String {
    let label_w = cm.classes.iter().map(String::len).max().unwrap_or(0);
    let cell_w = cm
        .classes
        .iter()
        .map(String::len)
        .chain(cm.counts.iter().flatten().map(|c| c.to_string().len()))
        .max()
        .unwrap_or(1);
    let mut out = format!("{:label_w$}", "");
    for c in &cm.classes {
        write!(out, " {c:>cell_w$}").unwrap();
    }
    out.push('\n');
    for (name, row) in cm.classes.iter().zip(&cm.counts) {
        write!(out, "{name:<label_w$}").unwrap();
        for v in row {
            write!(out, " {v:>cell_w$}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn predict_records(predictor: &Predictor, corpus: &Corpus, idx: &[usize]) -> Result<Vec<LabelSet>> {
    idx.par_iter()
        .map(|&i| predictor.predict_case(&corpus.records[i].rows))
        .collect()
}

fn labels(corpus: &Corpus, idx: &[usize]) -> Vec<LabelSet> {
    idx.iter()
        .map(|&i| corpus.records[i].label.clone())
        .collect()
}

/// Sections of the comparison report: each scenario on its own, plus all
/// hardware-only cases together when both switch families are present.
pub fn benchmark_groups(corpus: &Corpus) -> Vec<(String, Vec<ScenarioKind>)> {
    let present = corpus.scenarios();
    let mut groups: Vec<(String, Vec<ScenarioKind>)> = present
        .iter()
        .map(|&s| (s.title().to_string(), vec![s]))
        .collect();
    let hw = [ScenarioKind::SingleNoAnomaly, ScenarioKind::MultiNoAnomaly];
    if hw.iter().all(|s| present.contains(s)) {
        groups.push((
            "Single and Multi-Switch Without Anomalies".into(),
            hw.to_vec(),
        ));
    }
    groups
}

/// Trains each learner as a flat case classifier on the given scenarios
/// (their records plus all healthy records) and scores it on the held-out
/// records of the same subset.
pub fn benchmark_section(
    corpus: &Corpus,
    title: &str,
    scenarios: &[ScenarioKind],
    kinds: &[ModelKind],
    params: &ModelParams,
    split: &SplitConfig,
) -> Result<ReportSection> {
    let subset = corpus.scenario_subset(scenarios);
    let s = split_records(&labels(corpus, &subset), split)?;
    let train_idx: Vec<usize> = s.train.iter().map(|&k| subset[k]).collect();
    let test_idx: Vec<usize> = s.test.iter().map(|&k| subset[k]).collect();
    let train_recs: Vec<&RecordWindows> = train_idx.iter().map(|&i| &corpus.records[i]).collect();
    let truth = labels(corpus, &test_idx);
    let rows = kinds
        .par_iter()
        .map(|&kind| {
            let model = Predictor::Flat(train_flat(kind, &train_recs, params)?);
            let pred = predict_records(&model, corpus, &test_idx)?;
            let mut m = score_cases(&truth, &pred)?;
            m.warnings.extend(s.warnings.iter().cloned());
            Ok(ReportRow::new(kind.to_string(), m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportSection {
        scenario: (scenarios.len() == 1).then(|| scenarios[0]),
        title: title.into(),
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        rows,
    })
}

pub fn benchmark(
    corpus: &Corpus,
    kinds: &[ModelKind],
    params: &ModelParams,
    split: &SplitConfig,
) -> Result<Report> {
    let sections = benchmark_groups(corpus)
        .iter()
        .map(|(title, scs)| benchmark_section(corpus, title, scs, kinds, params, split))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::new(corpus, split, EvalSide::Test, sections))
}

/// Which records of the corpus an evaluation scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSide {
    Train,
    Test,
    /// Every record, for corpora the model has never seen.
    All,
}

impl std::str::FromStr for EvalSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(EvalSide::Train),
            "test" => Ok(EvalSide::Test),
            "all" => Ok(EvalSide::All),
            _ => Err(Error::Config(format!(
                "unknown split side `{s}` (train|test|all)"
            ))),
        }
    }
}

/// Scores a trained predictor per scenario and over all selected records.
pub fn evaluate_predictor(
    predictor: &Predictor,
    corpus: &Corpus,
    split: &SplitConfig,
    side: EvalSide,
) -> Result<Report> {
    let all: Vec<usize> = (0..corpus.records.len()).collect();
    let (n_train, test) = match side {
        EvalSide::All => (0, all),
        _ => {
            let s = split_records(&labels(corpus, &all), split)?;
            let n_train = s.train.len();
            (
                n_train,
                if side == EvalSide::Train {
                    s.train
                } else {
                    s.test
                },
            )
        }
    };
    let pred = predict_records(predictor, corpus, &test)?;
    let truth = labels(corpus, &test);
    let name = predictor.describe();
    let mut sections = Vec::new();
    let mut section =
        |scenario: Option<ScenarioKind>, title: String, keep: &dyn Fn(usize) -> bool| {
            let pick: Vec<usize> = (0..test.len()).filter(|&k| keep(test[k])).collect();
            if pick.is_empty() {
                return Ok::<(), Error>(());
            }
            let t: Vec<LabelSet> = pick.iter().map(|&k| truth[k].clone()).collect();
            let p: Vec<LabelSet> = pick.iter().map(|&k| pred[k].clone()).collect();
            sections.push(ReportSection {
                scenario,
                title,
                n_train,
                n_test: pick.len(),
                rows: vec![ReportRow::new(name.clone(), score_cases(&t, &p)?)],
            });
            Ok(())
        };
    for sc in corpus.scenarios() {
        section(Some(sc), sc.title().into(), &|i| {
            corpus.entry(i).scenario.map_or(true, |s| s == sc)
        })?;
    }
    section(None, "All Records".into(), &|_| true)?;
    Ok(Report::new(corpus, split, side, sections))
}
