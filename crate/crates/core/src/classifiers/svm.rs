//! Linear SVM trained by stochastic subgradient descent on
//! `½‖w‖² + C·Σ max(0, 1 − y(w·x + b))`.
//!
//! Multiclass problems use one-vs-rest; with two classes a single hyperplane
//! is fitted and class 1 is the positive side, so `predict` is the sign of
//! `w·x + b`. The returned parameters are the average of the final epoch's
//! iterates.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::rng::{prng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 40,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub scaler: Standardizer,
    /// One plane per class, or a single plane for binary problems.
    pub planes: Vec<Hyperplane>,
    pub n_classes: usize,
    /// Primal objective after each epoch, summed over planes.
    pub objective_history: Vec<f64>,
}

fn objective(plane: &Hyperplane, xs: &[Vec<f64>], ys: &[f64], c: f64) -> f64 {
    let reg = 0.5 * plane.w.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * plane.score(x)).max(0.0))
        .sum();
    reg + c * hinge
}

fn fit_plane(xs: &[Vec<f64>], ys: &[f64], params: &SvmParams, history: &mut [f64]) -> Hyperplane {
    let n = xs.len();
    let dim = xs[0].len();
    let mut rng = prng(params.seed, Stream::Training);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut avg = Hyperplane {
        w: vec![0.0; dim],
        b: 0.0,
    };
    let inv_n = 1.0 / n as f64;
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let eta = params.learning_rate / (1.0 + epoch as f64).sqrt();
        let mut sum_w = vec![0.0; dim];
        let mut sum_b = 0.0;
        for &i in &order {
            let (x, y) = (&xs[i], ys[i]);
            let margin = y * (w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b);
            let active = margin < 1.0;
            for (wj, xj) in w.iter_mut().zip(x) {
                let mut g = *wj * inv_n;
                if active {
                    g -= params.c * y * xj;
                }
                *wj -= eta * g;
            }
            if active {
                b += eta * params.c * y;
            }
            for (s, wj) in sum_w.iter_mut().zip(&w) {
                *s += wj;
            }
            sum_b += b;
        }
        avg = Hyperplane {
            w: sum_w.into_iter().map(|s| s * inv_n).collect(),
            b: sum_b * inv_n,
        };
        history[epoch] += objective(&avg, xs, ys, params.c);
    }
    avg
}

pub fn svm_train(data: &LabeledDataset, params: &SvmParams) -> Result<SvmModel> {
    data.validate()?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Parameter(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::Parameter(format!(
            "learning_rate must be positive, got {}",
            params.learning_rate
        )));
    }
    if params.epochs == 0 {
        return Err(Error::Parameter("epochs must be at least 1".into()));
    }
    let scaler = Standardizer::fit(&data.vectors);
    let xs = scaler.transform_all(&data.vectors);
    let k = data.n_classes();
    let positives: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
    let mut history = vec![0.0; params.epochs];
    let planes = positives
        .into_iter()
        .map(|c| {
            let ys: Vec<f64> = data
                .labels
                .iter()
                .map(|&l| if l == c { 1.0 } else { -1.0 })
                .collect();
            fit_plane(&xs, &ys, params, &mut history)
        })
        .collect();
    Ok(SvmModel {
        params: params.clone(),
        scaler,
        planes,
        n_classes: k,
        objective_history: history,
    })
}

impl SvmModel {
    /// Per-class scores on an already standardized input.
    pub fn scores_standardized(&self, z: &[f64]) -> Vec<f64> {
        if self.planes.len() == 1 && self.n_classes == 2 {
            let s = self.planes[0].score(z);
            vec![-s, s]
        } else {
            self.planes.iter().map(|p| p.score(z)).collect()
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&svm_decision(self, x)?))
    }
}

/// Per-class scores `w_c·x̃ + b_c` on the standardized input.
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.scaler.mean.len() {
        return Err(Error::Shape {
            expected: model.scaler.mean.len(),
            got: x.len(),
        });
    }
    Ok(model.scores_standardized(&model.scaler.transform(x)))
}
