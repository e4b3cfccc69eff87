use ndarray::{Array1, Array2, Axis};
use rand::Rng;

/// Dense layer, `y = x W^T + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn uniform<R: Rng>(fan_in: usize, fan_out: usize, bound: f64, rng: &mut R) -> Self {
        Linear {
            weight: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..=bound)),
            bias: Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..=bound)),
        }
    }

    pub fn zeros_like(other: &Linear) -> Self {
        Linear { weight: Array2::zeros(other.weight.raw_dim()), bias: Array1::zeros(other.bias.raw_dim()) }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Accumulates parameter gradients for upstream `dy` and input `x`.
    fn grads(&self, x: &Array2<f64>, dy: &Array2<f64>) -> Linear {
        Linear { weight: dy.t().dot(x), bias: dy.sum_axis(Axis(0)) }
    }
}

/// The shared actor/critic topology: a state branch and an action branch
/// summed into one hidden layer, then a second hidden layer and a scalar
/// head. The actor squashes the head through a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub state_fc: Linear,
    pub action_fc: Linear,
    pub hidden_fc: Linear,
    pub out_fc: Linear,
    pub squash: bool,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    states: Array2<f64>,
    actions: Array2<f64>,
    h1_pre: Array2<f64>,
    h1: Array2<f64>,
    h2_pre: Array2<f64>,
    h2: Array2<f64>,
    pub output: Array1<f64>,
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn relu_mask(pre: &Array2<f64>, grad: Array2<f64>) -> Array2<f64> {
    let mut g = grad;
    g.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    g
}

pub(crate) const FINAL_INIT_BOUND: f64 = 3e-3;

impl MlpNet {
    pub fn new<R: Rng>(state_dim: usize, hidden1: usize, hidden2: usize, squash: bool, rng: &mut R) -> Self {
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        MlpNet {
            state_fc: Linear::uniform(state_dim, hidden1, fan(state_dim), rng),
            action_fc: Linear::uniform(1, hidden1, fan(1), rng),
            hidden_fc: Linear::uniform(hidden1, hidden2, fan(hidden1), rng),
            out_fc: Linear::uniform(hidden2, 1, FINAL_INIT_BOUND, rng),
            squash,
        }
    }

    pub fn zeros_like(other: &MlpNet) -> Self {
        MlpNet {
            state_fc: Linear::zeros_like(&other.state_fc),
            action_fc: Linear::zeros_like(&other.action_fc),
            hidden_fc: Linear::zeros_like(&other.hidden_fc),
            out_fc: Linear::zeros_like(&other.out_fc),
            squash: other.squash,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_fc.weight.ncols()
    }

    pub fn hidden_sizes(&self) -> (usize, usize) {
        (self.hidden_fc.weight.ncols(), self.hidden_fc.weight.nrows())
    }

    /// `states`: `B x state_dim`, `actions`: `B x 1`.
    pub fn forward(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Forward {
        let h1_pre = self.state_fc.forward(states) + self.action_fc.forward(actions);
        let h1 = relu(&h1_pre);
        let h2_pre = self.hidden_fc.forward(&h1);
        let h2 = relu(&h2_pre);
        let head = self.out_fc.forward(&h2).column(0).to_owned();
        let output = if self.squash { head.mapv(|z| 1.0 / (1.0 + (-z).exp())) } else { head };
        Forward { states: states.clone(), actions: actions.clone(), h1_pre, h1, h2_pre, h2, output }
    }

    pub fn predict(&self, state: &[f64], action: f64) -> f64 {
        let s = Array2::from_shape_vec((1, state.len()), state.to_vec()).expect("state row");
        let a = Array2::from_elem((1, 1), action);
        self.forward(&s, &a).output[0]
    }

    /// Gradients of `sum_i d_out[i] * output[i]` with respect to every
    /// parameter and to the action input.
    pub fn backward(&self, fwd: &Forward, d_out: &Array1<f64>) -> (MlpNet, Array1<f64>) {
        let dz = if self.squash { d_out * &fwd.output.mapv(|y| y * (1.0 - y)) } else { d_out.clone() };
        let dz = dz.insert_axis(Axis(1));
        let out_g = self.out_fc.grads(&fwd.h2, &dz);
        let dh2 = relu_mask(&fwd.h2_pre, dz.dot(&self.out_fc.weight));
        let hidden_g = self.hidden_fc.grads(&fwd.h1, &dh2);
        let dh1 = relu_mask(&fwd.h1_pre, dh2.dot(&self.hidden_fc.weight));
        let state_g = self.state_fc.grads(&fwd.states, &dh1);
        let action_g = self.action_fc.grads(&fwd.actions, &dh1);
        let d_action = dh1.dot(&self.action_fc.weight).column(0).to_owned();
        (
            MlpNet { state_fc: state_g, action_fc: action_g, hidden_fc: hidden_g, out_fc: out_g, squash: self.squash },
            d_action,
        )
    }

    /// Gradient with respect to the action input only.
    pub fn action_gradient(&self, fwd: &Forward, d_out: &Array1<f64>) -> Array1<f64> {
        let dz = if self.squash { d_out * &fwd.output.mapv(|y| y * (1.0 - y)) } else { d_out.clone() };
        let dz = dz.insert_axis(Axis(1));
        let dh2 = relu_mask(&fwd.h2_pre, dz.dot(&self.out_fc.weight));
        let dh1 = relu_mask(&fwd.h1_pre, dh2.dot(&self.hidden_fc.weight));
        dh1.dot(&self.action_fc.weight).column(0).to_owned()
    }

    pub const PARAM_NAMES: [&'static str; 8] = [
        "state_fc.weight",
        "state_fc.bias",
        "action_fc.weight",
        "action_fc.bias",
        "hidden_fc.weight",
        "hidden_fc.bias",
        "out_fc.weight",
        "out_fc.bias",
    ];

    pub fn param_dims(&self) -> [Vec<usize>; 8] {
        let d2 = |a: &Array2<f64>| a.shape().to_vec();
        let d1 = |a: &Array1<f64>| a.shape().to_vec();
        [
            d2(&self.state_fc.weight),
            d1(&self.state_fc.bias),
            d2(&self.action_fc.weight),
            d1(&self.action_fc.bias),
            d2(&self.hidden_fc.weight),
            d1(&self.hidden_fc.bias),
            d2(&self.out_fc.weight),
            d1(&self.out_fc.bias),
        ]
    }

    pub fn params(&self) -> [&[f64]; 8] {
        fn s(x: Option<&[f64]>) -> &[f64] {
            x.expect("standard layout")
        }
        [
            s(self.state_fc.weight.as_slice()),
            s(self.state_fc.bias.as_slice()),
            s(self.action_fc.weight.as_slice()),
            s(self.action_fc.bias.as_slice()),
            s(self.hidden_fc.weight.as_slice()),
            s(self.hidden_fc.bias.as_slice()),
            s(self.out_fc.weight.as_slice()),
            s(self.out_fc.bias.as_slice()),
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 8] {
        fn s(x: Option<&mut [f64]>) -> &mut [f64] {
            x.expect("standard layout")
        }
        [
            s(self.state_fc.weight.as_slice_mut()),
            s(self.state_fc.bias.as_slice_mut()),
            s(self.action_fc.weight.as_slice_mut()),
            s(self.action_fc.bias.as_slice_mut()),
            s(self.hidden_fc.weight.as_slice_mut()),
            s(self.hidden_fc.bias.as_slice_mut()),
            s(self.out_fc.weight.as_slice_mut()),
            s(self.out_fc.bias.as_slice_mut()),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update(&mut self, source: &MlpNet, tau: f64) {
        for (dst, src) in self.params_mut().into_iter().zip(source.params()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = tau * s + (1.0 - tau) * *d;
            }
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: MlpNet,
    pub v: MlpNet,
}

impl Adam {
    pub fn new(net: &MlpNet, lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam { lr, beta1, beta2, eps: 1e-8, t: 0, m: MlpNet::zeros_like(net), v: MlpNet::zeros_like(net) }
    }

    pub fn step(&mut self, net: &mut MlpNet, grads: &MlpNet) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in
            net.params_mut().into_iter().zip(grads.params()).zip(self.m.params_mut()).zip(self.v.params_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}
