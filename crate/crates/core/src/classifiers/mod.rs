//! From-scratch learners behind one train/predict surface.
//!
//! | kind | learner |
//! |------|---------|
//! | `Dt`  | CART tree grown on Gini impurity |
//! | `Knn` | k nearest neighbours, Euclidean distance, majority vote |
//! | `Svm` | one-vs-rest linear SVM, hinge-loss subgradient descent |
//! | `Nn`  | MLP with one hidden layer (16) |
//! | `Ann` | MLP with three hidden layers (64/32/16) |
//!
//! Every tie (split choice, neighbour order, vote) resolves to the lowest
//! index so results do not depend on iteration or thread schedule.

pub mod knn;
pub mod mlp;
mod params;
pub mod standardize;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use knn::{euclidean_distance, knn_predict, KnnModel, KnnParams};
pub use mlp::{Activation, MlpModel, MlpParams, Network};
pub use params::ModelParams;
pub use standardize::Standardizer;
pub use svm::{svm_decision, SvmModel, SvmParams};
pub use tree::{gini_impurity, DecisionTree, DtParams, TreeNode};

pub const MODEL_FORMAT: &str = "faultnet-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    #[serde(alias = "dt")]
    Dt,
    #[serde(alias = "knn")]
    Knn,
    #[serde(alias = "svm")]
    Svm,
    #[serde(alias = "nn")]
    Nn,
    #[serde(alias = "ann")]
    Ann,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Dt,
        ModelKind::Knn,
        ModelKind::Svm,
        ModelKind::Nn,
        ModelKind::Ann,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dt => "DT",
            ModelKind::Knn => "KNN",
            ModelKind::Svm => "SVM",
            ModelKind::Nn => "NN",
            ModelKind::Ann => "ANN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Parameter(format!("unknown model kind `{s}` (dt|knn|svm|nn|ann)"))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        vectors: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = LabeledDataset {
            vectors,
            labels,
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vectors.len() != self.labels.len() {
            return Err(Error::Shape {
                expected: self.vectors.len(),
                got: self.labels.len(),
            });
        }
        if self.vectors.is_empty() {
            return Err(Error::Training("empty dataset".into()));
        }
        if self.class_names.len() < 2 {
            return Err(Error::Training(format!(
                "training needs at least 2 classes, got {}",
                self.class_names.len()
            )));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::Training("zero-dimensional feature vectors".into()));
        }
        for v in &self.vectors {
            if v.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Training("non-finite feature value".into()));
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.class_names.len()) {
            return Err(Error::Label(format!(
                "label {bad} outside {} classes",
                self.class_names.len()
            )));
        }
        Ok(())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum Hyperparams {
    Dt(DtParams),
    Knn(KnnParams),
    Svm(SvmParams),
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Dt => Hyperparams::Dt(DtParams::default()),
            ModelKind::Knn => Hyperparams::Knn(KnnParams::default()),
            ModelKind::Svm => Hyperparams::Svm(SvmParams::default()),
            ModelKind::Nn => Hyperparams::Mlp(MlpParams::nn()),
            ModelKind::Ann => Hyperparams::Mlp(MlpParams::ann()),
        }
    }

    fn matches(&self, kind: ModelKind) -> bool {
        matches!(
            (self, kind),
            (Hyperparams::Dt(_), ModelKind::Dt)
                | (Hyperparams::Knn(_), ModelKind::Knn)
                | (Hyperparams::Svm(_), ModelKind::Svm)
                | (Hyperparams::Mlp(_), ModelKind::Nn | ModelKind::Ann)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum ModelState {
    Dt(DecisionTree),
    Knn(KnnModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

/// Anything that maps a feature vector to a class index.
pub trait Classifier {
    fn dim(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<usize>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub class_names: Vec<String>,
    pub dim: usize,
    pub state: ModelState,
}

pub fn train(kind: ModelKind, data: &LabeledDataset, hp: &Hyperparams) -> Result<TrainedModel> {
    data.validate()?;
    if !hp.matches(kind) {
        return Err(Error::Parameter(format!(
            "hyperparameters do not belong to a {kind} model"
        )));
    }
    let state = match hp {
        Hyperparams::Dt(p) => ModelState::Dt(tree::dt_train(data, p)?),
        Hyperparams::Knn(p) => ModelState::Knn(knn::knn_train(data, p)?),
        Hyperparams::Svm(p) => ModelState::Svm(svm::svm_train(data, p)?),
        Hyperparams::Mlp(p) => ModelState::Mlp(mlp::mlp_train(data, p)?),
    };
    Ok(TrainedModel {
        kind,
        class_names: data.class_names.clone(),
        dim: data.dim(),
        state,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn hyperparams(&self) -> Hyperparams {
        match &self.state {
            ModelState::Dt(m) => Hyperparams::Dt(m.params.clone()),
            ModelState::Knn(m) => Hyperparams::Knn(m.params.clone()),
            ModelState::Svm(m) => Hyperparams::Svm(m.params.clone()),
            ModelState::Mlp(m) => Hyperparams::Mlp(m.params.clone()),
        }
    }

    /// Flat `name -> value` view of the hyperparameters.
    pub fn hyperparam_map(&self) -> BTreeMap<String, String> {
        let value = serde_json::to_value(self.hyperparams()).expect("hyperparams serialize");
        value
            .as_object()
            .into_iter()
            .flatten()
            .filter(|(k, _)| k.as_str() != "learner")
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect()
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let header: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
        let format = header.get("format").and_then(|v| v.as_str());
        let version = header.get("version").and_then(|v| v.as_u64());
        if format != Some(MODEL_FORMAT) || version != Some(u64::from(MODEL_FORMAT_VERSION)) {
            return Err(Error::Compatibility(format!(
                "{}: expected {MODEL_FORMAT} v{MODEL_FORMAT_VERSION}, found {} v{}",
                path.display(),
                format.unwrap_or("?"),
                version.map_or("?".to_string(), |v| v.to_string())
            )));
        }
        let file: ModelFile = serde_json::from_value(header).map_err(|e| Error::json(path, e))?;
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

impl Classifier for TrainedModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        predict(self, x)
    }
}

pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<usize> {
    model.check_dim(x)?;
    match &model.state {
        ModelState::Dt(t) => Ok(t.predict(x)),
        ModelState::Knn(m) => knn_predict(m, x, m.params.k),
        ModelState::Svm(m) => m.predict(x),
        ModelState::Mlp(m) => m.predict(x),
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}


#[cfg(test)]
mod tests {
    use super::testdata::*;
    use super::*;

    #[test]
    fn kind_parsing() {
        assert_eq!("knn".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert_eq!("ANN".parse::<ModelKind>().unwrap(), ModelKind::Ann);
        assert!("rf".parse::<ModelKind>().is_err());
    }

    #[test]
    fn every_kind_predicts_a_valid_class() {
        let data = blobs(
            &[
                vec![0.0, 0.0, 0.0],
                vec![2.0, 0.0, 1.0],
                vec![0.0, 2.0, -1.0],
            ],
            30,
            0.4,
            1,
        );
        let queries = uniform_points(200, 3, 2);
        for kind in ModelKind::ALL {
            let mut hp = Hyperparams::default_for(kind);
            if let Hyperparams::Mlp(p) = &mut hp {
                p.epochs = 5;
            }
            let model = train(kind, &data, &hp).unwrap();
            for q in &queries {
                let scaled: Vec<f64> = q.iter().map(|v| v * 5.0).collect();
                assert!(predict(&model, &scaled).unwrap() < 3, "{kind}");
            }
            assert!(matches!(
                predict(&model, &[1.0, 2.0]),
                Err(Error::Shape { .. })
            ));
        }
    }

    #[test]
    fn knn_dispatch_is_delegation() {
        let data = blobs(&[vec![0.0, 0.0], vec![1.0, 1.0]], 20, 0.5, 3);
        let model = train(
            ModelKind::Knn,
            &data,
            &Hyperparams::default_for(ModelKind::Knn),
        )
        .unwrap();
        let ModelState::Knn(inner) = &model.state else {
            panic!("not a knn model")
        };
        for q in uniform_points(50, 2, 4) {
            assert_eq!(
                predict(&model, &q).unwrap(),
                knn_predict(inner, &q, 5).unwrap()
            );
        }
    }

    #[test]
    fn mismatched_hyperparams_are_rejected() {
        let data = blobs(&[vec![0.0], vec![1.0]], 5, 0.1, 3);
        assert!(train(
            ModelKind::Svm,
            &data,
            &Hyperparams::default_for(ModelKind::Dt)
        )
        .is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(
            LabeledDataset::new(vec![vec![1.0]], vec![0, 1], vec!["a".into(), "b".into()]).is_err()
        );
        assert!(LabeledDataset::new(
            vec![vec![1.0], vec![1.0, 2.0]],
            vec![0, 1],
            vec!["a".into(), "b".into()]
        )
        .is_err());
        assert!(
            LabeledDataset::new(vec![vec![1.0]], vec![3], vec!["a".into(), "b".into()]).is_err()
        );
        assert!(LabeledDataset::new(vec![], vec![], vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn model_files_are_versioned() {
        let data = blobs(&[vec![0.0, 0.0], vec![3.0, 3.0]], 10, 0.3, 5);
        let model = train(
            ModelKind::Dt,
            &data,
            &Hyperparams::default_for(ModelKind::Dt),
        )
        .unwrap();
        let json = model.to_json();
        let back = TrainedModel::from_json(&json, Path::new("m.json")).unwrap();
        assert_eq!(back, model);
        let bumped = json.replace("\"version\":1", "\"version\":2");
        assert!(matches!(
            TrainedModel::from_json(&bumped, Path::new("m.json")),
            Err(Error::Compatibility(_))
        ));
        assert_eq!(model.hyperparam_map()["max_depth"], "12");
    }
}
