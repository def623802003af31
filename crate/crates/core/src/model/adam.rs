use super::network::Network;
use super::Scalar;

pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moment estimates for every parameter of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f64> {
    pub m: Network<T>,
    pub v: Network<T>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Network<T>, learning_rate: f64) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            learning_rate,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(params: &mut Network<T>, grads: &Network<T>, state: &mut AdamState<T>) {
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::of(state.beta1);
    let b2 = T::of(state.beta2);
    let c1 = T::of(1.0 - state.beta1.powi(t));
    let c2 = T::of(1.0 - state.beta2.powi(t));
    let lr = T::of(state.learning_rate);
    let eps = T::of(state.epsilon);
    let one = T::one();
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p = *p - lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Network<f64> {
        Network::init(3, &[4, 2], 3, 7)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = net();
        let before = p.clone();
        let mut s = AdamState::new(&p, 0.001);
        adam_step(&mut p, &before.zeros_like(), &mut s);
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = net();
        let before = p.clone();
        let mut g = p.zeros_like();
        for (k, t) in g.tensors_mut().into_iter().enumerate() {
            for (i, x) in t.iter_mut().enumerate() {
                *x = if (i + k) % 2 == 0 { 0.37 } else { -2.5 };
            }
        }
        let mut s = AdamState::new(&p, 0.001);
        adam_step(&mut p, &g, &mut s);
        for ((a, b), gt) in p.tensors().iter().zip(before.tensors()).zip(g.tensors()) {
            for ((x, y), gv) in a.iter().zip(b).zip(gt) {
                let moved = y - x;
                assert!((moved - 0.001 * gv.signum()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identical_calls_agree() {
        let g = {
            let mut g = net().zeros_like();
            g.head_bias.iter_mut().for_each(|b| *b = 0.2);
            g
        };
        let run = || {
            let mut p = net();
            let mut s = AdamState::new(&p, 0.001);
            adam_step(&mut p, &g, &mut s);
            adam_step(&mut p, &g, &mut s);
            (p, s)
        };
        assert_eq!(run(), run());
    }
}
