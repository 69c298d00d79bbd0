use serde::{Deserialize, Serialize};

use super::{argmax_count, LabeledDataset, Standardizer};
use crate::error::{Error, Result};

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(squared_distance(x, y).sqrt())
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnParams {
    pub k: usize,
    /// Z-score features with training statistics before measuring distance.
    pub standardize: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    pub scaler: Option<Standardizer>,
    /// Exemplars in insertion order, already scaled when `scaler` is set.
    pub exemplars: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

pub fn knn_train(data: &LabeledDataset, params: &KnnParams) -> Result<KnnModel> {
    data.validate()?;
    if params.k == 0 || params.k > data.len() {
        return Err(Error::Parameter(format!(
            "k must lie in 1..={}, got {}",
            data.len(),
            params.k
        )));
    }
    let scaler = params.standardize.then(|| Standardizer::fit(&data.vectors));
    let exemplars = match &scaler {
        Some(s) => s.transform_all(&data.vectors),
        None => data.vectors.clone(),
    };
    Ok(KnnModel {
        params: params.clone(),
        scaler,
        exemplars,
        labels: data.labels.clone(),
        n_classes: data.n_classes(),
    })
}

/// Majority vote over the `k` nearest exemplars. Equal distances keep
/// insertion order; equal votes go to the smaller class index.
pub fn knn_predict(model: &KnnModel, x: &[f64], k: usize) -> Result<usize> {
    let n = model.exemplars.len();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must lie in 1..={n}, got {k}")));
    }
    let dim = model.exemplars[0].len();
    if x.len() != dim {
        return Err(Error::Shape {
            expected: dim,
            got: x.len(),
        });
    }
    let scaled;
    let q = match &model.scaler {
        Some(s) => {
            scaled = s.transform(x);
            &scaled[..]
        }
        None => x,
    };
    let mut dist: Vec<(f64, usize)> = model
        .exemplars
        .iter()
        .enumerate()
        .map(|(i, e)| (squared_distance(q, e), i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < n {
        dist.select_nth_unstable_by(k - 1, order);
    }
    let mut votes = vec![0usize; model.n_classes];
    for &(_, i) in &dist[..k] {
        votes[model.labels[i]] += 1;
    }
    Ok(argmax_count(&votes))
}

#[cfg(test)]
mod tests {
    use super::super::testdata::*;
    use super::*;
    use proptest::prelude::*;

    /// Full sort of every exemplar by (distance, index), then a plain vote.
    fn exhaustive(data: &LabeledDataset, x: &[f64], k: usize) -> usize {
        let mut all: Vec<(f64, usize)> = data
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d: f64 = v
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut votes = vec![0; data.n_classes()];
        for &(_, i) in &all[..k] {
            votes[data.labels[i]] += 1;
        }
        let top = *votes.iter().max().unwrap();
        votes.iter().position(|&v| v == top).unwrap()
    }

    fn raw() -> KnnParams {
        KnnParams {
            k: 1,
            standardize: false,
        }
    }

    #[test]
    fn distance_hand_values() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(matches!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(
            x in prop::collection::vec(-100.0f64..100.0, 5),
            y in prop::collection::vec(-100.0f64..100.0, 5),
        ) {
            let a = euclidean_distance(&x, &y).unwrap();
            let b = euclidean_distance(&y, &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn matches_exhaustive_scan() {
        let data = blobs(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 1.0]],
            40,
            0.6,
            21,
        );
        let model = knn_train(&data, &raw()).unwrap();
        for q in uniform_points(100, 2, 22) {
            for k in [1, 3, 5] {
                assert_eq!(
                    knn_predict(&model, &q, k).unwrap(),
                    exhaustive(&data, &q, k)
                );
            }
        }
    }

    #[test]
    fn exact_training_point_with_k1() {
        let data = blobs(&[vec![0.0, 0.0], vec![0.2, 0.1]], 30, 1.0, 5);
        let model = knn_train(&data, &raw()).unwrap();
        for (v, &l) in data.vectors.iter().zip(&data.labels) {
            assert_eq!(knn_predict(&model, v, 1).unwrap(), l);
        }
    }

    #[test]
    fn global_vote_returns_the_majority() {
        let vectors = uniform_points(7, 2, 3);
        let data = LabeledDataset::new(
            vectors,
            vec![0, 1, 1, 0, 1, 1, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let model = knn_train(&data, &raw()).unwrap();
        for q in uniform_points(20, 2, 4) {
            assert_eq!(knn_predict(&model, &q, 7).unwrap(), 1);
        }
    }

    #[test]
    fn distance_ties_follow_insertion_order() {
        // Two equidistant exemplars with different labels: the first wins.
        let data = LabeledDataset::new(
            vec![vec![1.0], vec![-1.0]],
            vec![1, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let model = knn_train(&data, &raw()).unwrap();
        assert_eq!(knn_predict(&model, &[0.0], 1).unwrap(), 1);
        // Vote tie with k = 2 goes to the smaller class.
        assert_eq!(knn_predict(&model, &[0.0], 2).unwrap(), 0);
    }

    #[test]
    fn k_out_of_range() {
        let data = blobs(&[vec![0.0], vec![1.0]], 2, 0.1, 1);
        let model = knn_train(&data, &raw()).unwrap();
        assert!(matches!(
            knn_predict(&model, &[0.0], 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            knn_predict(&model, &[0.0], 5),
            Err(Error::Parameter(_))
        ));
        let too_big = KnnParams {
            k: 9,
            standardize: false,
        };
        assert!(knn_train(&data, &too_big).is_err());
    }
}
