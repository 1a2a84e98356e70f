//! A small fully connected network with hand-written backpropagation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    /// Logistic sigmoid, so outputs lie in (0, 1).
    Sigmoid,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub output: OutputActivation,
}

impl NetworkSpec {
    pub fn actor(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Self {
        Self {
            input_dim: state_dim,
            output_dim: action_dim,
            hidden: hidden.to_vec(),
            output: OutputActivation::Sigmoid,
        }
    }

    pub fn critic(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Self {
        Self {
            input_dim: state_dim + action_dim,
            output_dim: 1,
            hidden: hidden.to_vec(),
            output: OutputActivation::Identity,
        }
    }
}

/// Dense layer; `w` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
                self.b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

/// Intermediate values of one forward pass, needed for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of each layer (the network input first).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Parameter gradients laid out like the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(net: &Network) -> Self {
        Self {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Flattened in the same order as [`Network::params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl Network {
    /// Uniform initialization in `+-1/sqrt(fan_in)`.
    pub fn new(spec: NetworkSpec, rng: &mut seeds::Rng) -> Self {
        assert!(spec.input_dim > 0 && spec.output_dim > 0, "network dims must be positive");
        let mut widths = vec![spec.input_dim];
        widths.extend(&spec.hidden);
        widths.push(spec.output_dim);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let bound = 1.0 / (i as f64).sqrt();
                Layer {
                    inputs: i,
                    outputs: o,
                    w: (0..i * o).map(|_| rng.random_range(-bound..=bound)).collect(),
                    b: (0..o).map(|_| rng.random_range(-bound..=bound)).collect(),
                }
            })
            .collect();
        Self { spec, layers }
    }

    fn is_last(&self, i: usize) -> bool {
        i + 1 == self.layers.len()
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.spec.input_dim, "network input width");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&h);
            inputs.push(h);
            h = if self.is_last(i) {
                match self.spec.output {
                    OutputActivation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
                    OutputActivation::Identity => z.clone(),
                }
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
        }
        Trace { inputs, pre, output: h }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).output
    }

    /// Gradients of `upstream . output` with respect to the parameters and
    /// the input.
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> (Gradients, Vec<f64>) {
        assert_eq!(upstream.len(), self.spec.output_dim, "upstream width");
        let mut grads = Gradients::zeros(self);
        let n = self.layers.len();
        let mut delta: Vec<f64> = match self.spec.output {
            OutputActivation::Sigmoid => upstream.iter().zip(&trace.output).map(|(g, y)| g * y * (1.0 - y)).collect(),
            OutputActivation::Identity => upstream.to_vec(),
        };
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let input = &trace.inputs[i];
            for o in 0..layer.outputs {
                grads.b[i][o] = delta[o];
                let row = &mut grads.w[i][o * layer.inputs..(o + 1) * layer.inputs];
                for (g, x) in row.iter_mut().zip(input) {
                    *g = delta[o] * x;
                }
            }
            let mut back = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let row = &layer.w[o * layer.inputs..(o + 1) * layer.inputs];
                for (b, w) in back.iter_mut().zip(row) {
                    *b += delta[o] * w;
                }
            }
            if i > 0 {
                // through the ReLU of the previous layer
                for (b, z) in back.iter_mut().zip(&trace.pre[i - 1]) {
                    if *z <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        (grads, delta)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter count");
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
    }

    /// `self <- tau * main + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, main: &Network, tau: f64) {
        for (t, m) in self.layers.iter_mut().zip(&main.layers) {
            for (a, b) in t.w.iter_mut().zip(&m.w) {
                *a = tau * b + (1.0 - tau) * *a;
            }
            for (a, b) in t.b.iter_mut().zip(&m.b) {
                *a = tau * b + (1.0 - tau) * *a;
            }
        }
    }
}

/// Plain stochastic gradient descent with optional momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, velocity: Vec::new() }
    }

    /// Descends along `grads`.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        let g = grads.flat();
        if self.velocity.len() != g.len() {
            self.velocity = vec![0.0; g.len()];
        }
        let mut p = net.params();
        for ((p, v), g) in p.iter_mut().zip(&mut self.velocity).zip(&g) {
            *v = self.momentum * *v + g;
            *p -= self.lr * *v;
        }
        net.set_params(&p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(net: &Network, seed: u64) {
        let mut rng = seeds::rng(seed);
        let x: Vec<f64> = (0..net.spec.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..net.spec.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |n: &Network, x: &[f64]| n.forward(x).iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        let (g, gx) = net.backward(&net.forward_trace(&x), &up);
        let h = 1e-6;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-4 * a.abs().max(b.abs()) || (a - b).abs() <= 1e-6;
        let p = net.params();
        let flat = g.flat();
        let mut probe_net = net.clone();
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] += h;
            probe_net.set_params(&q);
            let up_l = loss(&probe_net, &x);
            q[i] -= 2.0 * h;
            probe_net.set_params(&q);
            let down_l = loss(&probe_net, &x);
            let fd = (up_l - down_l) / (2.0 * h);
            assert!(close(fd, flat[i]), "param {i}: fd {fd} vs {}", flat[i]);
        }
        for i in 0..x.len() {
            let mut a = x.clone();
            a[i] += h;
            let mut b = x.clone();
            b[i] -= h;
            let fd = (loss(net, &a) - loss(net, &b)) / (2.0 * h);
            assert!(close(fd, gx[i]), "input {i}: fd {fd} vs {}", gx[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let shapes = [
            NetworkSpec::actor(13, 20, &[64, 64]),
            NetworkSpec::critic(13, 20, &[64, 64]),
            NetworkSpec::actor(3, 2, &[]),
            NetworkSpec::critic(4, 5, &[7]),
        ];
        for (s, spec) in shapes.into_iter().enumerate() {
            let net = Network::new(spec, &mut seeds::rng(s as u64));
            for p in 0..3 {
                probe(&net, 100 * s as u64 + p);
            }
        }
    }

    #[test]
    fn zero_weights_give_bias_transform() {
        let mut net = Network::new(NetworkSpec::actor(3, 2, &[4]), &mut seeds::rng(1));
        let n = net.param_count();
        net.set_params(&vec![0.0; n]);
        net.layers[1].b = vec![0.0, 2.0];
        let y = net.forward(&[0.3, -1.0, 5.0]);
        assert_eq!(y, vec![0.5, sigmoid(2.0)]);
    }

    #[test]
    fn identity_single_layer() {
        let mut net = Network::new(NetworkSpec::critic(2, 1, &[]), &mut seeds::rng(1));
        net.layers[0].w = vec![1.0, 1.0, 1.0];
        net.layers[0].b = vec![0.0];
        assert_eq!(net.forward(&[0.25, 0.5, -2.0]), vec![-1.25]);
        let mut act = Network::new(NetworkSpec::actor(2, 2, &[]), &mut seeds::rng(1));
        act.layers[0].w = vec![1.0, 0.0, 0.0, 1.0];
        act.layers[0].b = vec![0.0, 0.0];
        assert_eq!(act.forward(&[0.4, -3.0]), vec![sigmoid(0.4), sigmoid(-3.0)]);
    }

    #[test]
    fn soft_update_contracts_exactly() {
        let main = Network::new(NetworkSpec::critic(3, 2, &[8]), &mut seeds::rng(1));
        let mut target = Network::new(NetworkSpec::critic(3, 2, &[8]), &mut seeds::rng(2));
        let dist = |a: &Network, b: &Network| {
            a.params().iter().zip(b.params()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let tau = 0.005;
        for _ in 0..10 {
            let before = dist(&target, &main);
            target.soft_update_from(&main, tau);
            let after = dist(&target, &main);
            assert!((after - (1.0 - tau) * before).abs() <= 1e-12 * before);
        }
        target.soft_update_from(&main, 1.0);
        assert_eq!(target.params(), main.params());
    }

    #[test]
    fn sgd_descends() {
        let mut net = Network::new(NetworkSpec::critic(2, 1, &[]), &mut seeds::rng(3));
        let x = [0.3, 0.7, 0.1];
        let mut opt = Sgd::new(0.1, 0.9);
        let loss = |n: &Network| (n.forward(&x)[0] - 2.0).powi(2);
        let start = loss(&net);
        for _ in 0..50 {
            let t = net.forward_trace(&x);
            let (g, _) = net.backward(&t, &[2.0 * (t.output[0] - 2.0)]);
            opt.step(&mut net, &g);
        }
        assert!(loss(&net) < start * 1e-3);
    }
}
