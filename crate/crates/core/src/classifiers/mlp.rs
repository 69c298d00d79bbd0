//! Fully connected network with a softmax cross-entropy head, trained by
//! mini-batch gradient descent with momentum.
//!
//! Each neuron computes `f(Σ w_i x_i + b)`; hidden layers use the configured
//! activation and the output layer is a softmax over classes.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{argmax, LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::rng::{prng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    /// Hidden layer widths; empty means multinomial logistic regression.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl MlpParams {
    pub fn nn() -> Self {
        MlpParams {
            hidden: vec![16],
            activation: Activation::Relu,
            epochs: 60,
            batch: 32,
            learning_rate: 0.02,
            momentum: 0.9,
            seed: 0,
        }
    }

    pub fn ann() -> Self {
        MlpParams {
            hidden: vec![64, 32, 16],
            ..Self::nn()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config(
                "hidden layers must have at least one unit".into(),
            ));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("epochs and batch must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.biases))
        {
            *o = b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }

    fn clear(&mut self) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .for_each(|g| g.fill(0.0));
    }

    /// Same ordering as [`Network::param`].
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub activation: Activation,
    pub layers: Vec<Dense>,
}

struct Scratch {
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
    /// Layer outputs; `a[0]` is the input.
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl Network {
    pub fn new(sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let mut rng = prng(seed, Stream::Training);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let gain = match activation {
                    Activation::Relu => 2.0,
                    _ => 1.0,
                };
                let dist = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
                Dense {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| dist.sample(&mut rng))
                        .collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Network { activation, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    fn scratch(&self) -> Scratch {
        let mut a = vec![vec![0.0; self.input_dim()]];
        a.extend(self.layers.iter().map(|l| vec![0.0; l.outputs]));
        Scratch {
            z: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            a,
            delta: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    fn forward_into(&self, x: &[f64], s: &mut Scratch) {
        s.a[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = s.a.split_at_mut(l + 1);
            layer.affine(&before[l], &mut s.z[l]);
            let out = &mut after[0];
            if l == last {
                out.copy_from_slice(&s.z[l]);
                softmax_in_place(out);
            } else {
                for (o, &z) in out.iter_mut().zip(&s.z[l]) {
                    *o = self.activation.apply(z);
                }
            }
        }
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.scratch();
        self.forward_into(x, &mut s);
        s.a.pop().expect("output layer")
    }

    /// Adds this sample's gradient into `g`; returns its cross-entropy loss.
    fn backprop(&self, x: &[f64], y: usize, s: &mut Scratch, g: &mut Gradients) -> f64 {
        self.forward_into(x, s);
        let last = self.layers.len() - 1;
        let p = &s.a[last + 1];
        let loss = -p[y].max(f64::MIN_POSITIVE).ln();
        for (d, &pk) in s.delta[last].iter_mut().zip(p) {
            *d = pk;
        }
        s.delta[last][y] -= 1.0;
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let input = &s.a[l];
            for (o, &d) in s.delta[l].iter().enumerate() {
                g.biases[l][o] += d;
                let row = &mut g.weights[l][o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &xi) in row.iter_mut().zip(input) {
                    *gw += d * xi;
                }
            }
            if l > 0 {
                let (lower, upper) = s.delta.split_at_mut(l);
                let prev = &mut lower[l - 1];
                prev.fill(0.0);
                for (o, &d) in upper[0].iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (pd, &w) in prev.iter_mut().zip(row) {
                        *pd += w * d;
                    }
                }
                for ((pd, &z), &a) in prev.iter_mut().zip(&s.z[l - 1]).zip(&s.a[l]) {
                    *pd *= self.activation.derivative(z, a);
                }
            }
        }
        loss
    }

    /// Mean cross-entropy and its gradient over a batch.
    pub fn loss_and_gradients(&self, xs: &[Vec<f64>], ys: &[usize]) -> (f64, Gradients) {
        let mut g = Gradients::zeros_like(self);
        let mut s = self.scratch();
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            loss += self.backprop(x, y, &mut s, &mut g);
        }
        let inv = 1.0 / xs.len() as f64;
        g.weights
            .iter_mut()
            .chain(g.biases.iter_mut())
            .flatten()
            .for_each(|v| *v *= inv);
        (loss * inv, g)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn locate(&self, mut i: usize) -> (usize, bool, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if i < layer.weights.len() {
                return (l, true, i);
            }
            i -= layer.weights.len();
            if i < layer.biases.len() {
                return (l, false, i);
            }
            i -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameters in layer order, weights before biases within a layer.
    pub fn param(&self, i: usize) -> f64 {
        match self.locate(i) {
            (l, true, j) => self.layers[l].weights[j],
            (l, false, j) => self.layers[l].biases[j],
        }
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        match self.locate(i) {
            (l, true, j) => self.layers[l].weights[j] = v,
            (l, false, j) => self.layers[l].biases[j] = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub scaler: Standardizer,
    pub network: Network,
}

impl MlpModel {
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.network.input_dim() {
            return Err(Error::Shape {
                expected: self.network.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.network.forward(&self.scaler.transform(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

pub fn mlp_train(data: &LabeledDataset, params: &MlpParams) -> Result<MlpModel> {
    data.validate()?;
    params.validate()?;
    let mut sizes = vec![data.dim()];
    sizes.extend(&params.hidden);
    sizes.push(data.n_classes());
    let mut net = Network::new(&sizes, params.activation, params.seed)?;
    let scaler = Standardizer::fit(&data.vectors);
    let xs = scaler.transform_all(&data.vectors);

    let mut rng = prng(params.seed, Stream::Split);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut g = Gradients::zeros_like(&net);
    let mut velocity = Gradients::zeros_like(&net);
    let mut s = net.scratch();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch) {
            g.clear();
            for &i in batch {
                net.backprop(&xs[i], data.labels[i], &mut s, &mut g);
            }
            let step = params.learning_rate / batch.len() as f64;
            for (l, layer) in net.layers.iter_mut().enumerate() {
                for ((p, v), gr) in layer
                    .weights
                    .iter_mut()
                    .zip(&mut velocity.weights[l])
                    .zip(&g.weights[l])
                    .chain(
                        layer
                            .biases
                            .iter_mut()
                            .zip(&mut velocity.biases[l])
                            .zip(&g.biases[l]),
                    )
                {
                    *v = params.momentum * *v - step * gr;
                    *p += *v;
                }
            }
        }
    }
    Ok(MlpModel {
        params: params.clone(),
        scaler,
        network: net,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testdata::*;
    use super::*;

    /// Largest relative error between backprop and central differences.
    fn gradient_check(net: &Network, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        let (_, g) = net.loss_and_gradients(xs, ys);
        let analytic = g.flatten();
        let mut probe = net.clone();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..net.param_count() {
            let p = net.param(i);
            probe.set_param(i, p + h);
            let up = probe.loss_and_gradients(xs, ys).0;
            probe.set_param(i, p - h);
            let down = probe.loss_and_gradients(xs, ys).0;
            probe.set_param(i, p);
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
        worst
    }

    fn toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            vec![
                vec![0.5, -1.2, 0.3],
                vec![-0.7, 0.4, 1.1],
                vec![1.3, 0.9, -0.6],
            ],
            vec![0, 2, 1],
        )
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let (xs, ys) = toy();
        for act in [Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
            for sizes in [vec![3, 3], vec![3, 5, 3], vec![3, 6, 4, 3]] {
                let net = Network::new(&sizes, act, 7).unwrap();
                let err = gradient_check(&net, &xs, &ys);
                assert!(err <= 1e-4, "{act:?} {sizes:?}: {err}");
            }
        }
    }

    #[test]
    fn softmax_outputs_are_normalized() {
        let net = Network::new(&[4, 8, 5], Activation::Relu, 3).unwrap();
        for x in uniform_points(50, 4, 1) {
            let big: Vec<f64> = x.iter().map(|v| v * 300.0).collect();
            for p in [net.forward(&x), net.forward(&big)] {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            }
        }
    }

    #[test]
    fn logistic_regression_fits_separable_data() {
        let data = blobs(
            &[vec![-2.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0]],
            40,
            0.3,
            4,
        );
        let params = MlpParams {
            hidden: vec![],
            epochs: 100,
            ..MlpParams::nn()
        };
        let m = mlp_train(&data, &params).unwrap();
        assert_eq!(m.network.layers.len(), 1);
        for (x, &y) in data.vectors.iter().zip(&data.labels) {
            assert_eq!(m.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn hidden_layers_learn_xor() {
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for p in uniform_points(300, 2, 6) {
            if p[0].abs() > 0.1 && p[1].abs() > 0.1 {
                labels.push(usize::from((p[0] > 0.0) != (p[1] > 0.0)));
                vectors.push(p);
            }
        }
        let data =
            LabeledDataset::new(vectors, labels, vec!["same".into(), "diff".into()]).unwrap();
        let m = mlp_train(
            &data,
            &MlpParams {
                epochs: 200,
                ..MlpParams::ann()
            },
        )
        .unwrap();
        let correct = data
            .vectors
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| m.predict(x).unwrap() == y)
            .count();
        assert!(correct as f64 / data.len() as f64 > 0.95);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(&[vec![0.0, 0.0], vec![1.0, 1.0]], 20, 0.5, 2);
        let p = MlpParams {
            epochs: 5,
            ..MlpParams::nn()
        };
        assert_eq!(mlp_train(&data, &p).unwrap(), mlp_train(&data, &p).unwrap());
    }

    #[test]
    fn invalid_shapes_are_config_errors() {
        let data = blobs(&[vec![0.0], vec![1.0]], 5, 0.1, 2);
        let p = MlpParams {
            hidden: vec![4, 0],
            ..MlpParams::nn()
        };
        assert!(matches!(mlp_train(&data, &p), Err(Error::Config(_))));
        assert!(Network::new(&[3], Activation::Relu, 0).is_err());
    }
}
