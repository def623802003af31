//! One LSTM layer: gate equations, a sequence forward pass that keeps what
//! the backward pass needs, and backpropagation through time.

use super::Scalar;
use crate::error::{Error, Result};

/// Parameters of one layer.
///
/// The four gate matrices (input, forget, cell candidate, output) are
/// stacked in that order into one `4H × (I + H)` row-major block acting on
/// `[x ; h]`; `bias` is the matching `4H` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams<T = f64> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Index of each gate's block of rows.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CELL: usize = 2;
pub const GATE_OUTPUT: usize = 3;

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> LstmLayerParams<T> {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            weights: vec![T::zero(); 4 * hidden_size * (input_size + hidden_size)],
            bias: vec![T::zero(); 4 * hidden_size],
        }
    }

    pub fn cols(&self) -> usize {
        self.input_size + self.hidden_size
    }

    /// Weight block of one gate, `H × (I + H)` row-major.
    pub fn gate_weights(&self, gate: usize) -> &[T] {
        let n = self.hidden_size * self.cols();
        &self.weights[gate * n..(gate + 1) * n]
    }

    pub fn gate_bias(&self, gate: usize) -> &[T] {
        &self.bias[gate * self.hidden_size..(gate + 1) * self.hidden_size]
    }

    pub fn check(&self) -> Result<()> {
        if self.weights.len() != 4 * self.hidden_size * self.cols() || self.bias.len() != 4 * self.hidden_size {
            return Err(Error::Shape(format!(
                "layer {}->{} has {} weights and {} biases",
                self.input_size,
                self.hidden_size,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> LstmLayerParams<U> {
        LstmLayerParams {
            input_size: self.input_size,
            hidden_size: self.hidden_size,
            weights: self.weights.iter().map(|w| U::of(w.wide())).collect(),
            bias: self.bias.iter().map(|w| U::of(w.wide())).collect(),
        }
    }

    /// Pre-activations `b + W [x ; h]` for all four gates.
    fn preactivations(&self, x: &[T], h: &[T], out: &mut [T]) {
        let cols = self.cols();
        for ((z, row), b) in out.iter_mut().zip(self.weights.chunks_exact(cols)).zip(&self.bias) {
            let (wx, wh) = row.split_at(self.input_size);
            let mut acc = *b;
            for (w, v) in wx.iter().zip(x) {
                acc = acc + *w * *v;
            }
            for (w, v) in wh.iter().zip(h) {
                acc = acc + *w * *v;
            }
            *z = acc;
        }
    }
}

/// Activates pre-activations in place: sigmoid for i, f, o and tanh for g.
fn activate<T: Scalar>(z: &mut [T], hidden: usize) {
    for (k, v) in z.iter_mut().enumerate() {
        *v = if k / hidden == GATE_CELL { v.tanh() } else { sigmoid(*v) };
    }
}

/// One step: `c' = f ⊙ c + i ⊙ g`, `h' = o ⊙ tanh(c')`.
pub fn lstm_cell<T: Scalar>(x: &[T], h: &[T], c: &[T], p: &LstmLayerParams<T>) -> Result<(Vec<T>, Vec<T>)> {
    p.check()?;
    let hs = p.hidden_size;
    if x.len() != p.input_size || h.len() != hs || c.len() != hs {
        return Err(Error::Shape(format!(
            "cell {}->{} given x {}, h {}, c {}",
            p.input_size,
            hs,
            x.len(),
            h.len(),
            c.len()
        )));
    }
    let mut z = vec![T::zero(); 4 * hs];
    p.preactivations(x, h, &mut z);
    activate(&mut z, hs);
    let mut h2 = vec![T::zero(); hs];
    let mut c2 = vec![T::zero(); hs];
    for j in 0..hs {
        let (i, f, g, o) = (z[j], z[hs + j], z[2 * hs + j], z[3 * hs + j]);
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    Ok((h2, c2))
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace<T> {
    pub steps: usize,
    /// `steps × H` hidden states.
    pub h: Vec<T>,
    /// `steps × H` cell states.
    pub c: Vec<T>,
    /// `steps × 4H` activated gates.
    pub gates: Vec<T>,
}

impl<T: Scalar> LayerTrace<T> {
    pub fn last_hidden(&self, hidden: usize) -> &[T] {
        &self.h[(self.steps - 1) * hidden..]
    }
}

/// Runs the layer over `xs` (`steps × I`, row-major) from zero state.
pub fn layer_forward<T: Scalar>(p: &LstmLayerParams<T>, xs: &[T], steps: usize) -> LayerTrace<T> {
    let (is, hs) = (p.input_size, p.hidden_size);
    debug_assert_eq!(xs.len(), steps * is);
    let mut trace = LayerTrace {
        steps,
        h: vec![T::zero(); steps * hs],
        c: vec![T::zero(); steps * hs],
        gates: vec![T::zero(); steps * 4 * hs],
    };
    let zero = vec![T::zero(); hs];
    for t in 0..steps {
        let x = &xs[t * is..(t + 1) * is];
        let (h_done, h_rest) = trace.h.split_at_mut(t * hs);
        let (c_done, c_rest) = trace.c.split_at_mut(t * hs);
        let h_prev = if t == 0 { &zero[..] } else { &h_done[(t - 1) * hs..] };
        let c_prev = if t == 0 { &zero[..] } else { &c_done[(t - 1) * hs..] };
        let z = &mut trace.gates[t * 4 * hs..(t + 1) * 4 * hs];
        p.preactivations(x, h_prev, z);
        activate(z, hs);
        for j in 0..hs {
            let (i, f, g, o) = (z[j], z[hs + j], z[2 * hs + j], z[3 * hs + j]);
            let c = f * c_prev[j] + i * g;
            c_rest[j] = c;
            h_rest[j] = o * c.tanh();
        }
    }
    trace
}

/// Backpropagation through time.
///
/// `dh` holds the loss gradient with respect to each output hidden state
/// (`steps × H`). Parameter gradients are accumulated into `grad`; the
/// gradient with respect to the inputs is returned when `want_dx`.
pub fn layer_backward<T: Scalar>(
    p: &LstmLayerParams<T>,
    xs: &[T],
    trace: &LayerTrace<T>,
    dh: &[T],
    grad: &mut LstmLayerParams<T>,
    want_dx: bool,
) -> Option<Vec<T>> {
    let (is, hs) = (p.input_size, p.hidden_size);
    let cols = p.cols();
    let steps = trace.steps;
    let mut dx = want_dx.then(|| vec![T::zero(); steps * is]);
    let mut dh_next = vec![T::zero(); hs];
    let mut dc_next = vec![T::zero(); hs];
    let mut dz = vec![T::zero(); 4 * hs];
    let mut dxh = vec![T::zero(); cols];
    let zero = vec![T::zero(); hs];

    for t in (0..steps).rev() {
        let gates = &trace.gates[t * 4 * hs..(t + 1) * 4 * hs];
        let c = &trace.c[t * hs..(t + 1) * hs];
        let c_prev = if t == 0 { &zero[..] } else { &trace.c[(t - 1) * hs..t * hs] };
        let h_prev = if t == 0 { &zero[..] } else { &trace.h[(t - 1) * hs..t * hs] };
        for j in 0..hs {
            let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
            let tc = c[j].tanh();
            let dhj = dh[t * hs + j] + dh_next[j];
            let dc = dc_next[j] + dhj * o * (T::one() - tc * tc);
            dz[j] = dc * g * i * (T::one() - i);
            dz[hs + j] = dc * c_prev[j] * f * (T::one() - f);
            dz[2 * hs + j] = dc * i * (T::one() - g * g);
            dz[3 * hs + j] = dhj * tc * o * (T::one() - o);
            dc_next[j] = dc * f;
        }
        let x = &xs[t * is..(t + 1) * is];
        dxh.iter_mut().for_each(|v| *v = T::zero());
        for (r, &d) in dz.iter().enumerate() {
            grad.bias[r] = grad.bias[r] + d;
            let row = &p.weights[r * cols..(r + 1) * cols];
            let grow = &mut grad.weights[r * cols..(r + 1) * cols];
            let (gx, gh) = grow.split_at_mut(is);
            for (gw, v) in gx.iter_mut().zip(x) {
                *gw = *gw + d * *v;
            }
            for (gw, v) in gh.iter_mut().zip(h_prev) {
                *gw = *gw + d * *v;
            }
            for (acc, w) in dxh.iter_mut().zip(row) {
                *acc = *acc + d * *w;
            }
        }
        if let Some(dx) = dx.as_mut() {
            dx[t * is..(t + 1) * is].copy_from_slice(&dxh[..is]);
        }
        dh_next.copy_from_slice(&dxh[is..]);
    }
    dx
}
