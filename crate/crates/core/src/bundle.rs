//! Trained-model bundles: a directory holding `bundle.json` plus one JSON
//! file per model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ModelKind, ModelParams, TrainedModel};
use crate::error::{Error, Result};
use crate::eval::{train_flat, Predictor};
use crate::features::{extract_rows, FeatureSpec};
use crate::pipeline::{train_pipeline, Diagnosis, PipelineModels, RecordWindows, StageLearners};
use crate::rng::hex_digest;
use crate::sim::{SimConfig, SwitchSet, WaveformRecord};
use crate::store::{split_records, Corpus, SplitConfig};

pub const BUNDLE_FORMAT: &str = "faultnet-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleMode {
    Single,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    pub role: String,
    pub kind: ModelKind,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub format: String,
    pub version: u32,
    pub mode: BundleMode,
    pub predictor: String,
    pub feature_spec: FeatureSpec,
    pub sim: SimConfig,
    pub split: SplitConfig,
    pub manifest_hash: String,
    pub models: Vec<ModelRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localizer_classes: Option<Vec<SwitchSet>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub header: BundleHeader,
    pub predictor: Predictor,
}

/// What to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Single(ModelKind),
    Pipeline(StageLearners),
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("bundle serializes");
    b.push(b'\n');
    b
}

impl Bundle {
    /// Trains on the train side of `split` over the whole corpus.
    pub fn train(
        corpus: &Corpus,
        mode: &TrainMode,
        params: &ModelParams,
        split: &SplitConfig,
    ) -> Result<Self> {
        let labels: Vec<_> = corpus.records.iter().map(|r| r.label.clone()).collect();
        let s = split_records(&labels, split)?;
        let train_recs: Vec<&RecordWindows> = s.train.iter().map(|&i| &corpus.records[i]).collect();
        let spec = &corpus.manifest.feature_spec;
        let (predictor, bundle_mode, models, localizer_classes) = match mode {
            TrainMode::Single(kind) => {
                let model = train_flat(*kind, &train_recs, params)?;
                let refs = vec![ModelRef {
                    role: "model".into(),
                    kind: *kind,
                    file: "model.json".into(),
                }];
                (Predictor::Flat(model), BundleMode::Single, refs, None)
            }
            TrainMode::Pipeline(learners) => {
                let owned: Vec<RecordWindows> = train_recs.into_iter().cloned().collect();
                let p = train_pipeline(&owned, spec, learners, params)?;
                let refs = [
                    ("detector", learners.detector),
                    ("typer", learners.typer),
                    ("localizer", learners.localizer),
                ]
                .into_iter()
                .map(|(role, kind)| ModelRef {
                    role: role.into(),
                    kind,
                    file: format!("{role}.json"),
                })
                .collect();
                let classes = p.localizer_classes.clone();
                (
                    Predictor::Pipeline(p),
                    BundleMode::Pipeline,
                    refs,
                    Some(classes),
                )
            }
        };
        let header = BundleHeader {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            mode: bundle_mode,
            predictor: predictor.describe(),
            feature_spec: spec.clone(),
            sim: corpus.manifest.sim.clone(),
            split: split.clone(),
            manifest_hash: corpus.manifest_hash(),
            models,
            localizer_classes,
        };
        Ok(Bundle { header, predictor })
    }

    fn model_for(&self, role: &str) -> &TrainedModel {
        match (&self.predictor, role) {
            (Predictor::Flat(m), _) => m,
            (Predictor::Pipeline(p), "detector") => &p.detector,
            (Predictor::Pipeline(p), "typer") => &p.typer,
            (Predictor::Pipeline(p), _) => &p.localizer,
        }
    }

    /// File name and contents of every file in the bundle, sorted by name.
    pub fn files(&self) -> Vec<(String, Vec<u8>)> {
        let mut files = vec![(BUNDLE_FILE.to_string(), json_bytes(&self.header))];
        for r in &self.header.models {
            files.push((
                r.file.clone(),
                self.model_for(&r.role).to_json().into_bytes(),
            ));
        }
        files.sort();
        files
    }

    /// Digest over all file names and contents.
    pub fn hash(&self) -> String {
        let mut all = Vec::new();
        for (name, bytes) in self.files() {
            all.extend_from_slice(name.as_bytes());
            all.push(0);
            all.extend_from_slice(hex_digest(&bytes).as_bytes());
            all.push(b'\n');
        }
        hex_digest(&all)
    }

    pub fn save(&self, dir: &Path) -> Result<String> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, bytes) in self.files() {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        Ok(self.hash())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(BUNDLE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        let format = value.get("format").and_then(|v| v.as_str());
        let version = value.get("version").and_then(|v| v.as_u64());
        if format != Some(BUNDLE_FORMAT) || version != Some(u64::from(BUNDLE_VERSION)) {
            return Err(Error::Compatibility(format!(
                "{}: expected {BUNDLE_FORMAT} v{BUNDLE_VERSION}, found {} v{}",
                path.display(),
                format.unwrap_or("?"),
                version.map_or("?".into(), |v| v.to_string())
            )));
        }
        let header: BundleHeader =
            serde_json::from_value(value).map_err(|e| Error::json(&path, e))?;
        let load = |role: &str| -> Result<TrainedModel> {
            let r = header
                .models
                .iter()
                .find(|r| r.role == role)
                .ok_or_else(|| Error::Compatibility(format!("bundle has no {role} model")))?;
            let m = TrainedModel::load(&dir.join(&r.file))?;
            if m.kind != r.kind {
                return Err(Error::Compatibility(format!(
                    "{} holds a {} model, bundle lists {}",
                    r.file, m.kind, r.kind
                )));
            }
            if m.dim != header.feature_spec.dim() {
                return Err(Error::Compatibility(format!(
                    "{} expects {} features, bundle spec has {}",
                    r.file,
                    m.dim,
                    header.feature_spec.dim()
                )));
            }
            Ok(m)
        };
        let predictor = match header.mode {
            BundleMode::Single => Predictor::Flat(load("model")?),
            BundleMode::Pipeline => {
                let p = PipelineModels {
                    detector: load("detector")?,
                    typer: load("typer")?,
                    localizer: load("localizer")?,
                    localizer_classes: header.localizer_classes.clone().ok_or_else(|| {
                        Error::Compatibility("pipeline bundle without localizer classes".into())
                    })?,
                    feature_spec: header.feature_spec.clone(),
                };
                p.stages().validate(header.feature_spec.dim())?;
                Predictor::Pipeline(p)
            }
        };
        Ok(Bundle { header, predictor })
    }

    /// Rejects corpora whose features were computed differently.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        if corpus.manifest.feature_spec != self.header.feature_spec {
            return Err(Error::Compatibility(format!(
                "feature spec mismatch: bundle {} vs manifest {}",
                self.header.feature_spec.id(),
                corpus.manifest.feature_spec.id()
            )));
        }
        Ok(())
    }

    pub fn diagnose(&self, record: &WaveformRecord) -> Result<Diagnosis> {
        let (fs, bundle_fs) = (record.config.fs, self.header.sim.fs);
        if (fs / bundle_fs - 1.0).abs() > 1e-6 {
            return Err(Error::Compatibility(format!(
                "record sampled at {fs} Hz, bundle trained at {bundle_fs} Hz"
            )));
        }
        let rows = extract_rows(record, &self.header.feature_spec)?;
        self.predictor.diagnose(&rows)
    }
}
