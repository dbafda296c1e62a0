//! One-hidden-layer binary classifier stored as a flat genome.
//!
//! Genome layout (layer-major, weights before biases):
//!
//! ```text
//! [ W1 (n_hidden x n_inputs, row-major) | b1 (n_hidden) | w2 (n_hidden) | b2 ]
//! ```
//!
//! The hidden layer uses `tanh`, the output a logistic sigmoid.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::EncodedDataset;

/// Probability clamp used when computing cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("genome I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub n_inputs: usize,
    pub n_hidden: usize,
}

impl NetworkShape {
    pub fn new(n_inputs: usize, n_hidden: usize) -> Result<Self, ModelError> {
        if n_inputs == 0 || n_hidden == 0 {
            return Err(ModelError::InvalidShape(format!(
                "n_inputs = {n_inputs}, n_hidden = {n_hidden}; both must be >= 1"
            )));
        }
        Ok(NetworkShape { n_inputs, n_hidden })
    }

    pub fn genome_len(&self) -> usize {
        self.n_hidden * (self.n_inputs + 1) + self.n_hidden + 1
    }

    fn w1_len(&self) -> usize {
        self.n_hidden * self.n_inputs
    }
}

/// Decision vector: all weights and biases of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome(pub Vec<f64>);

impl Genome {
    pub fn zeros(shape: &NetworkShape) -> Genome {
        Genome(vec![0.0; shape.genome_len()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn encode(shape: &NetworkShape, w: &NetworkWeights) -> Result<Genome, ModelError> {
        let check = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(ModelError::ShapeMismatch { expected, got })
            }
        };
        check(shape.w1_len(), w.hidden_weights.len())?;
        check(shape.n_hidden, w.hidden_bias.len())?;
        check(shape.n_hidden, w.output_weights.len())?;
        let mut v = Vec::with_capacity(shape.genome_len());
        v.extend_from_slice(&w.hidden_weights);
        v.extend_from_slice(&w.hidden_bias);
        v.extend_from_slice(&w.output_weights);
        v.push(w.output_bias);
        Ok(Genome(v))
    }

    pub fn decode(&self, shape: &NetworkShape) -> Result<NetworkWeights, ModelError> {
        let net = Network::new(shape, self)?;
        Ok(NetworkWeights {
            hidden_weights: net.w1().to_vec(),
            hidden_bias: net.b1().to_vec(),
            output_weights: net.w2().to_vec(),
            output_bias: net.b2(),
        })
    }
}

/// Structured view of a genome's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

/// Borrowed network: a shape together with a matching genome.
#[derive(Clone, Copy)]
pub struct Network<'a> {
    shape: NetworkShape,
    params: &'a [f64],
}

impl<'a> Network<'a> {
    pub fn new(shape: &NetworkShape, genome: &'a Genome) -> Result<Network<'a>, ModelError> {
        if genome.len() != shape.genome_len() {
            return Err(ModelError::ShapeMismatch {
                expected: shape.genome_len(),
                got: genome.len(),
            });
        }
        Ok(Network {
            shape: *shape,
            params: &genome.0,
        })
    }

    fn w1(&self) -> &'a [f64] {
        &self.params[..self.shape.w1_len()]
    }

    fn b1(&self) -> &'a [f64] {
        let s = self.shape.w1_len();
        &self.params[s..s + self.shape.n_hidden]
    }

    fn w2(&self) -> &'a [f64] {
        let s = self.shape.w1_len() + self.shape.n_hidden;
        &self.params[s..s + self.shape.n_hidden]
    }

    fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn hidden_into(&self, x: &[f64], hidden: &mut [f64]) {
        let n_in = self.shape.n_inputs;
        for (j, (h, b)) in hidden.iter_mut().zip(self.b1()).enumerate() {
            let row = &self.w1()[j * n_in..(j + 1) * n_in];
            let a: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
            *h = a.tanh();
        }
    }

    fn logit(&self, hidden: &[f64]) -> f64 {
        self.w2().iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>() + self.b2()
    }

    /// Probability of the positive class.
    pub fn forward(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.shape.n_inputs {
            return Err(ModelError::ShapeMismatch {
                expected: self.shape.n_inputs,
                got: x.len(),
            });
        }
        let mut hidden = vec![0.0; self.shape.n_hidden];
        self.hidden_into(x, &mut hidden);
        Ok(sigmoid(self.logit(&hidden)))
    }

    /// Positive-class probability for every row.
    pub fn predict_proba(&self, data: &EncodedDataset) -> Result<Vec<f64>, ModelError> {
        if data.n_features() != self.shape.n_inputs {
            return Err(ModelError::ShapeMismatch {
                expected: self.shape.n_inputs,
                got: data.n_features(),
            });
        }
        let mut hidden = vec![0.0; self.shape.n_hidden];
        Ok((0..data.len())
            .map(|i| {
                self.hidden_into(data.row(i), &mut hidden);
                sigmoid(self.logit(&hidden))
            })
            .collect())
    }

    /// Per-sample log-loss `ln(1 + e^z) - y z` and its gradient with respect
    /// to every genome component, accumulated into `grad`.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        y: u8,
        hidden: &mut [f64],
        grad: &mut [f64],
    ) -> f64 {
        let sh = self.shape;
        self.hidden_into(x, hidden);
        let z = self.logit(hidden);
        let y = f64::from(y);
        let delta = sigmoid_unclamped(z) - y;

        let w1_len = sh.w1_len();
        let (g_w1, rest) = grad.split_at_mut(w1_len);
        let (g_b1, rest) = rest.split_at_mut(sh.n_hidden);
        let (g_w2, g_b2) = rest.split_at_mut(sh.n_hidden);
        g_b2[0] += delta;
        for j in 0..sh.n_hidden {
            let h = hidden[j];
            g_w2[j] += delta * h;
            let back = delta * self.w2()[j] * (1.0 - h * h);
            g_b1[j] += back;
            for (g, xi) in g_w1[j * sh.n_inputs..(j + 1) * sh.n_inputs]
                .iter_mut()
                .zip(x)
            {
                *g += back * xi;
            }
        }
        softplus(z) - y * z
    }
}

fn sigmoid_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic function kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    sigmoid_unclamped(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_genome(shape: &NetworkShape, rng: &mut impl Rng) -> Genome {
    let mut g = Genome::zeros(shape);
    let s1 = (6.0 / (shape.n_inputs + shape.n_hidden) as f64).sqrt();
    let s2 = (6.0 / (shape.n_hidden + 1) as f64).sqrt();
    let w1_len = shape.w1_len();
    for w in &mut g.0[..w1_len] {
        *w = rng.random_range(-s1..=s1);
    }
    let w2_start = w1_len + shape.n_hidden;
    for w in &mut g.0[w2_start..w2_start + shape.n_hidden] {
        *w = rng.random_range(-s2..=s2);
    }
    g
}

pub fn forward(shape: &NetworkShape, genome: &Genome, x: &[f64]) -> Result<f64, ModelError> {
    Network::new(shape, genome)?.forward(x)
}

/// Hard labels: 1 iff `p >= threshold`.
pub fn predict_labels(
    shape: &NetworkShape,
    genome: &Genome,
    data: &EncodedDataset,
    threshold: f64,
) -> Result<Vec<u8>, ModelError> {
    Ok(Network::new(shape, genome)?
        .predict_proba(data)?
        .into_iter()
        .map(|p| u8::from(p >= threshold))
        .collect())
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn cross_entropy_from_proba(proba: &[f64], labels: &[u8]) -> Result<f64, ModelError> {
    if proba.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let total: f64 = proba
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / proba.len() as f64)
}

pub fn cross_entropy(
    shape: &NetworkShape,
    genome: &Genome,
    data: &EncodedDataset,
) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let proba = Network::new(shape, genome)?.predict_proba(data)?;
    cross_entropy_from_proba(&proba, &data.labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            epochs: 1,
            batch_size: 32,
        }
    }
}

/// Minibatch SGD on cross-entropy. Rows are reshuffled every epoch.
pub fn partial_train(
    shape: &NetworkShape,
    genome: &Genome,
    train: &EncodedDataset,
    cfg: &TrainingConfig,
    rng: &mut impl Rng,
) -> Result<Genome, ModelError> {
    let mut params = genome.clone();
    Network::new(shape, &params)?;
    if train.n_features() != shape.n_inputs {
        return Err(ModelError::ShapeMismatch {
            expected: shape.n_inputs,
            got: train.n_features(),
        });
    }
    if train.is_empty() || cfg.epochs == 0 {
        return Ok(params);
    }
    let batch = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad = vec![0.0; shape.genome_len()];
    let mut hidden = vec![0.0; shape.n_hidden];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            {
                let net = Network::new(shape, &params)?;
                for &i in chunk {
                    net.accumulate_gradient(train.row(i), train.labels[i], &mut hidden, &mut grad);
                }
            }
            let step = cfg.learning_rate / chunk.len() as f64;
            for (p, g) in params.0.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
    }
    Ok(params)
}

/// Write `genome` as an 8-byte little-endian length followed by
/// little-endian `f64` values.
pub fn write_genome(w: &mut impl Write, genome: &Genome) -> Result<(), ModelError> {
    w.write_all(&(genome.len() as u64).to_le_bytes())?;
    for v in &genome.0 {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_genome(r: &mut impl Read) -> Result<Genome, ModelError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let n = u64::from_le_bytes(buf) as usize;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(Genome(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn toy_data(n: usize, d: usize, seed: u64) -> EncodedDataset {
        let mut r = rng::stream(seed, 99);
        let features: Vec<f64> = (0..n * d).map(|_| r.random_range(-2.0..2.0)).collect();
        let labels = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let groups = (0..n)
            .map(|i| if i % 2 == 0 { Group::Privileged } else { Group::Unprivileged })
            .collect();
        EncodedDataset::new(features, d, labels, groups)
    }

    #[test]
    fn genome_length_formula() {
        let shape = NetworkShape::new(2, 3).unwrap();
        assert_eq!(shape.genome_len(), 13);
        assert_eq!(init_genome(&shape, &mut rng::stream(1, 0)).len(), 13);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let shape = NetworkShape::new(5, 4).unwrap();
        let a = init_genome(&shape, &mut rng::stream(3, 0));
        let b = init_genome(&shape, &mut rng::stream(3, 0));
        assert_eq!(a, b);
        let w = a.decode(&shape).unwrap();
        assert!(w.hidden_bias.iter().all(|&b| b == 0.0));
        assert_eq!(w.output_bias, 0.0);
        let s1 = (6.0f64 / 9.0).sqrt();
        assert!(w.hidden_weights.iter().all(|v| v.abs() <= s1));
    }

    #[test]
    fn zero_shape_rejected() {
        assert!(NetworkShape::new(0, 3).is_err());
        assert!(NetworkShape::new(3, 0).is_err());
    }

    #[test]
    fn zero_genome_gives_one_half() {
        let shape = NetworkShape::new(3, 2).unwrap();
        let p = forward(&shape, &Genome::zeros(&shape), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn wrong_feature_length_is_shape_mismatch() {
        let shape = NetworkShape::new(3, 2).unwrap();
        assert!(matches!(
            forward(&shape, &Genome::zeros(&shape), &[1.0]),
            Err(ModelError::ShapeMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn negated_output_layer_flips_probability() {
        let shape = NetworkShape::new(4, 3).unwrap();
        let g = init_genome(&shape, &mut rng::stream(5, 0));
        let mut w = g.decode(&shape).unwrap();
        w.output_bias = 0.3;
        let g = Genome::encode(&shape, &w).unwrap();
        let mut neg = w.clone();
        neg.output_weights.iter_mut().for_each(|v| *v = -*v);
        neg.output_bias = -neg.output_bias;
        let gn = Genome::encode(&shape, &neg).unwrap();
        let x = [0.2, -1.0, 0.7, 1.5];
        let p = forward(&shape, &g, &x).unwrap();
        let q = forward(&shape, &gn, &x).unwrap();
        assert_abs_diff_eq!(p, 1.0 - q, epsilon = 1e-12);
    }

    #[test]
    fn saturated_output_stays_inside_unit_interval() {
        let shape = NetworkShape::new(1, 1).unwrap();
        let g = Genome(vec![0.0, 0.0, 0.0, 1e6]);
        let p = forward(&shape, &g, &[0.0]).unwrap();
        assert!(p < 1.0 && p > 0.0);
        let g = Genome(vec![0.0, 0.0, 0.0, -1e6]);
        let p = forward(&shape, &g, &[0.0]).unwrap();
        assert!(p > 0.0);
    }

    #[test]
    fn zero_genome_labels_everything_positive() {
        let shape = NetworkShape::new(3, 2).unwrap();
        let data = toy_data(20, 3, 1);
        let labels = predict_labels(&shape, &Genome::zeros(&shape), &data, 0.5).unwrap();
        assert!(labels.iter().all(|&l| l == 1));
        let g = init_genome(&shape, &mut rng::stream(2, 0));
        let labels = predict_labels(&shape, &g, &data, 0.0).unwrap();
        assert!(labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn cross_entropy_of_one_half_is_ln2() {
        let ce = cross_entropy_from_proba(&[0.5], &[1]).unwrap();
        assert_abs_diff_eq!(ce, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn cross_entropy_clamps_at_boundary() {
        let ce = cross_entropy_from_proba(&[1.0], &[1]).unwrap();
        assert_abs_diff_eq!(ce, 1e-7, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_is_weighted_mean_over_partition() {
        let shape = NetworkShape::new(3, 4).unwrap();
        let g = init_genome(&shape, &mut rng::stream(8, 0));
        let data = toy_data(30, 3, 4);
        let whole = cross_entropy(&shape, &g, &data).unwrap();
        let a: Vec<usize> = (0..11).collect();
        let b: Vec<usize> = (11..30).collect();
        let ca = cross_entropy(&shape, &g, &data.subset(&a)).unwrap();
        let cb = cross_entropy(&shape, &g, &data.subset(&b)).unwrap();
        assert_abs_diff_eq!(whole, (11.0 * ca + 19.0 * cb) / 30.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_empty() {
        let shape = NetworkShape::new(3, 4).unwrap();
        let empty = EncodedDataset::new(vec![], 3, vec![], vec![]);
        assert!(matches!(
            cross_entropy(&shape, &Genome::zeros(&shape), &empty),
            Err(ModelError::EmptyDataset)
        ));
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let shape = NetworkShape::new(3, 4).unwrap();
        let g = init_genome(&shape, &mut rng::stream(8, 0));
        let data = toy_data(50, 3, 4);
        let cfg = TrainingConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 8,
        };
        let out = partial_train(&shape, &g, &data, &cfg, &mut rng::stream(1, 1)).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn training_is_deterministic() {
        let shape = NetworkShape::new(3, 4).unwrap();
        let g = init_genome(&shape, &mut rng::stream(8, 0));
        let data = toy_data(50, 3, 4);
        let cfg = TrainingConfig::default();
        let a = partial_train(&shape, &g, &data, &cfg, &mut rng::stream(1, 1)).unwrap();
        let b = partial_train(&shape, &g, &data, &cfg, &mut rng::stream(1, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, g);
    }

    #[test]
    fn small_step_epoch_does_not_increase_loss() {
        let mut violations = 0;
        for seed in 0..20 {
            let shape = NetworkShape::new(4, 6).unwrap();
            let g = init_genome(&shape, &mut rng::stream(seed, 0));
            let data = toy_data(64, 4, seed + 100);
            let cfg = TrainingConfig {
                learning_rate: 1e-4,
                epochs: 1,
                batch_size: 32,
            };
            let before = cross_entropy(&shape, &g, &data).unwrap();
            let t = partial_train(&shape, &g, &data, &cfg, &mut rng::stream(seed, 1)).unwrap();
            let after = cross_entropy(&shape, &t, &data).unwrap();
            if after > before {
                violations += 1;
            }
        }
        assert!(violations <= 2, "{violations} violations");
    }

    #[test]
    fn genome_bytes_round_trip() {
        let g = Genome(vec![1.5, -0.0, f64::MIN_POSITIVE, 3e300]);
        let mut buf = Vec::new();
        write_genome(&mut buf, &g).unwrap();
        assert_eq!(buf.len(), 8 + 4 * 8);
        assert_eq!(&buf[..8], &4u64.to_le_bytes());
        let back = read_genome(&mut buf.as_slice()).unwrap();
        assert_eq!(back.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   g.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn truncated_genome_is_an_error() {
        let mut buf = Vec::new();
        write_genome(&mut buf, &Genome(vec![1.0, 2.0])).unwrap();
        buf.pop();
        assert!(read_genome(&mut buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_is_exact(values in proptest::collection::vec(-1e3f64..1e3, 13)) {
            let shape = NetworkShape::new(2, 3).unwrap();
            let g = Genome(values);
            let w = g.decode(&shape).unwrap();
            prop_assert_eq!(Genome::encode(&shape, &w).unwrap(), g);
        }

        #[test]
        fn forward_is_finite_and_open_interval(
            values in proptest::collection::vec(-50f64..50.0, 13),
            x in proptest::collection::vec(-100f64..100.0, 2),
        ) {
            let shape = NetworkShape::new(2, 3).unwrap();
            let p = forward(&shape, &Genome(values), &x).unwrap();
            prop_assert!(p.is_finite() && p > 0.0 && p < 1.0);
        }
    }
}
