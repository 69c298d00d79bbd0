use serde::de::{DeserializeOwned, Deserializer};
use serde::{Deserialize, Serialize};

use super::{DtParams, Hyperparams, KnnParams, MlpParams, ModelKind, SvmParams};

/// Hyperparameters for every learner kind. Partial tables in a config file
/// are laid over the per-kind defaults, so `[models.ann] epochs = 10` keeps
/// the 64/32/16 architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    #[serde(deserialize_with = "overlay_dt")]
    pub dt: DtParams,
    #[serde(deserialize_with = "overlay_knn")]
    pub knn: KnnParams,
    #[serde(deserialize_with = "overlay_svm")]
    pub svm: SvmParams,
    #[serde(deserialize_with = "overlay_nn")]
    pub nn: MlpParams,
    #[serde(deserialize_with = "overlay_ann")]
    pub ann: MlpParams,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            dt: DtParams::default(),
            knn: KnnParams::default(),
            svm: SvmParams::default(),
            nn: MlpParams::nn(),
            ann: MlpParams::ann(),
        }
    }
}

impl ModelParams {
    pub fn for_kind(&self, kind: ModelKind) -> Hyperparams {
        match kind {
            ModelKind::Dt => Hyperparams::Dt(self.dt.clone()),
            ModelKind::Knn => Hyperparams::Knn(self.knn.clone()),
            ModelKind::Svm => Hyperparams::Svm(self.svm.clone()),
            ModelKind::Nn => Hyperparams::Mlp(self.nn.clone()),
            ModelKind::Ann => Hyperparams::Mlp(self.ann.clone()),
        }
    }

    /// Sets the seed of every stochastic learner.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.svm.seed = seed;
        self.nn.seed = seed;
        self.ann.seed = seed;
        self
    }
}

fn overlay<'de, D, T>(deserializer: D, base: T) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: Serialize + DeserializeOwned,
{
    use serde::de::Error;
    let patch = serde_json::Map::<String, serde_json::Value>::deserialize(deserializer)?;
    let mut merged = match serde_json::to_value(base).map_err(D::Error::custom)? {
        serde_json::Value::Object(map) => map,
        _ => unreachable!("parameter structs serialize to objects"),
    };
    merged.extend(patch);
    serde_json::from_value(serde_json::Value::Object(merged)).map_err(D::Error::custom)
}

fn overlay_dt<'de, D: Deserializer<'de>>(d: D) -> Result<DtParams, D::Error> {
    overlay(d, DtParams::default())
}

fn overlay_knn<'de, D: Deserializer<'de>>(d: D) -> Result<KnnParams, D::Error> {
    overlay(d, KnnParams::default())
}

fn overlay_svm<'de, D: Deserializer<'de>>(d: D) -> Result<SvmParams, D::Error> {
    overlay(d, SvmParams::default())
}

fn overlay_nn<'de, D: Deserializer<'de>>(d: D) -> Result<MlpParams, D::Error> {
    overlay(d, MlpParams::nn())
}

fn overlay_ann<'de, D: Deserializer<'de>>(d: D) -> Result<MlpParams, D::Error> {
    overlay(d, MlpParams::ann())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_tables_keep_kind_defaults() {
        let p: ModelParams =
            serde_json::from_str(r#"{"ann": {"epochs": 3}, "knn": {"k": 7}}"#).unwrap();
        assert_eq!(p.ann.hidden, vec![64, 32, 16]);
        assert_eq!(p.ann.epochs, 3);
        assert_eq!(p.knn.k, 7);
        assert_eq!(p.nn, MlpParams::nn());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = serde_json::from_str::<ModelParams>(r#"{"svm": {"gamma": 1.0}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("gamma"), "{err}");
        assert!(serde_json::from_str::<ModelParams>(r#"{"rf": {}}"#).is_err());
    }
}
