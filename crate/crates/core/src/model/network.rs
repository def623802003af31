use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::{layer_backward, layer_forward, LayerTrace, LstmLayerParams, GATE_FORGET};
use super::Scalar;
use crate::error::{Error, Result};

/// Stacked LSTM layers followed by a dense softmax head reading the top
/// layer's final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f64> {
    pub layers: Vec<LstmLayerParams<T>>,
    /// `num_users × last_hidden`, row-major.
    pub head_weights: Vec<T>,
    pub head_bias: Vec<T>,
}

pub const FORGET_BIAS_INIT: f64 = 1.0;

impl<T: Scalar> Network<T> {
    pub fn zeros(input_width: usize, hidden_sizes: &[usize], num_users: usize) -> Self {
        let mut layers = Vec::with_capacity(hidden_sizes.len());
        let mut width = input_width;
        for &h in hidden_sizes {
            layers.push(LstmLayerParams::zeros(width, h));
            width = h;
        }
        Self {
            layers,
            head_weights: vec![T::zero(); num_users * width],
            head_bias: vec![T::zero(); num_users],
        }
    }

    /// Weights uniform in `±1/√fan_in`, forget-gate biases at
    /// [`FORGET_BIAS_INIT`], all other biases zero.
    pub fn init(input_width: usize, hidden_sizes: &[usize], num_users: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(input_width, hidden_sizes, num_users);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.cols() as f64).sqrt();
            for w in &mut layer.weights {
                *w = T::of(rng.random_range(-bound..bound));
            }
            let hs = layer.hidden_size;
            for b in &mut layer.bias[GATE_FORGET * hs..(GATE_FORGET + 1) * hs] {
                *b = T::of(FORGET_BIAS_INIT);
            }
        }
        let bound = 1.0 / (net.last_hidden() as f64).sqrt();
        for w in &mut net.head_weights {
            *w = T::of(rng.random_range(-bound..bound));
        }
        net
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input_size)
    }

    pub fn last_hidden(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden_size)
    }

    pub fn num_users(&self) -> usize {
        self.head_bias.len()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden_size).collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_width(), &self.hidden_sizes(), self.num_users())
    }

    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.head_weights);
        out.push(&self.head_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head_weights);
        out.push(&mut self.head_bias);
        out
    }

    /// Euclidean norm over all parameters, accumulated in 64-bit.
    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self.tensors().iter().flat_map(|t| t.iter()).map(|v| v.wide() * v.wide()).sum();
        sq.sqrt()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(LstmLayerParams::cast).collect(),
            head_weights: self.head_weights.iter().map(|w| U::of(w.wide())).collect(),
            head_bias: self.head_bias.iter().map(|w| U::of(w.wide())).collect(),
        }
    }

    /// `self += other`, tensor by tensor.
    pub fn accumulate(&mut self, other: &Network<T>) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x = *x * s;
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut width = self.input_width();
        let mut prev_hidden = usize::MAX;
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        for l in &self.layers {
            l.check()?;
            if l.input_size != width {
                return Err(Error::Shape(format!("layer expects {} inputs, gets {width}", l.input_size)));
            }
            if l.hidden_size > prev_hidden {
                return Err(Error::Shape("hidden sizes must be non-increasing".into()));
            }
            prev_hidden = l.hidden_size;
            width = l.hidden_size;
        }
        if self.head_weights.len() != self.num_users() * width || self.num_users() == 0 {
            return Err(Error::Shape("head does not match the top layer".into()));
        }
        Ok(())
    }

    fn head_logits(&self, h: &[T]) -> Vec<T> {
        let hs = h.len();
        self.head_weights
            .chunks_exact(hs)
            .zip(&self.head_bias)
            .map(|(row, b)| row.iter().zip(h).fold(*b, |acc, (w, v)| acc + *w * *v))
            .collect()
    }

    /// Log-probabilities for one standardized sequence (`steps × input`).
    pub fn log_probs(&self, xs: &[T], steps: usize) -> Vec<T> {
        let mut input: Vec<T> = xs.to_vec();
        for l in &self.layers {
            input = layer_forward(l, &input, steps).h;
        }
        let hs = self.last_hidden();
        log_softmax(&self.head_logits(&input[(steps - 1) * hs..]))
    }

    /// Cross-entropy of one sequence and its gradient.
    pub fn sample_loss_and_grad(&self, xs: &[T], steps: usize, label: usize) -> (T, Network<T>) {
        let mut traces: Vec<LayerTrace<T>> = Vec::with_capacity(self.layers.len());
        let mut inputs: Vec<Vec<T>> = vec![xs.to_vec()];
        for l in &self.layers {
            let tr = layer_forward(l, inputs.last().unwrap(), steps);
            inputs.push(tr.h.clone());
            traces.push(tr);
        }
        let hs = self.last_hidden();
        let top = traces.last().unwrap().last_hidden(hs).to_vec();
        let lp = log_softmax(&self.head_logits(&top));
        let loss = -lp[label];

        let mut grad = self.zeros_like();
        // d loss / d logits = softmax - onehot.
        let dlogits: Vec<T> = lp
            .iter()
            .enumerate()
            .map(|(u, v)| v.exp() - if u == label { T::one() } else { T::zero() })
            .collect();
        let mut dh_top = vec![T::zero(); hs];
        for (u, &d) in dlogits.iter().enumerate() {
            grad.head_bias[u] = d;
            let row = &self.head_weights[u * hs..(u + 1) * hs];
            let grow = &mut grad.head_weights[u * hs..(u + 1) * hs];
            for j in 0..hs {
                grow[j] = d * top[j];
                dh_top[j] = dh_top[j] + d * row[j];
            }
        }
        let mut dh = vec![T::zero(); steps * hs];
        dh[(steps - 1) * hs..].copy_from_slice(&dh_top);
        for k in (0..self.layers.len()).rev() {
            let dx = layer_backward(&self.layers[k], &inputs[k], &traces[k], &dh, &mut grad.layers[k], k > 0);
            if let Some(dx) = dx {
                dh = dx;
            }
        }
        (loss, grad)
    }
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).fold(T::zero(), |a, b| a + b).ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
