//! Single-hidden-layer perceptron shared by the NARX model and the
//! feedforward baseline: `b + v · tanh(W x + c)`.
//!
//! Flat parameter ordering (used by the Jacobian and the optimizer):
//! hidden weights row-major (neuron `j`, input `i` at `j * inputs + i`),
//! then hidden biases, then output weights, then the output bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `[hidden][inputs]`
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl Mlp {
    pub fn zeros(hidden: usize, inputs: usize) -> Self {
        Mlp {
            hidden_weights: vec![vec![0.0; inputs]; hidden],
            hidden_bias: vec![0.0; hidden],
            output_weights: vec![0.0; hidden],
            output_bias: 0.0,
        }
    }

    /// Uniform `[-0.5, 0.5]` draws scaled by `1/sqrt(fan_in)` per layer.
    pub fn random<R: Rng + ?Sized>(hidden: usize, inputs: usize, rng: &mut R) -> Self {
        let hs = 1.0 / (inputs as f64).sqrt();
        let os = 1.0 / (hidden as f64).sqrt();
        let mut draw = |scale: f64| (rng.random::<f64>() - 0.5) * scale;
        let hidden_weights = (0..hidden)
            .map(|_| (0..inputs).map(|_| draw(hs)).collect())
            .collect();
        let hidden_bias = (0..hidden).map(|_| draw(hs)).collect();
        let output_weights = (0..hidden).map(|_| draw(os)).collect();
        let output_bias = draw(os);
        Mlp {
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden_weights.first().map_or(0, Vec::len)
    }

    pub fn hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn n_params(&self) -> usize {
        let h = self.hidden();
        h * self.inputs() + 2 * h + 1
    }

    /// Caller guarantees `x.len() == self.inputs()`.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut y = self.output_bias;
        for ((w, c), v) in self.hidden_weights.iter().zip(&self.hidden_bias).zip(&self.output_weights) {
            let a = w.iter().zip(x).fold(*c, |acc, (wi, xi)| acc + wi * xi);
            y += v * a.tanh();
        }
        y
    }

    /// Writes `∂f/∂θ` into `grad` (flat ordering) and returns `f(x)`.
    pub fn forward_with_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let h = self.hidden();
        let n_in = self.inputs();
        let (gw, rest) = grad.split_at_mut(h * n_in);
        let (gb, rest) = rest.split_at_mut(h);
        let (gv, go) = rest.split_at_mut(h);
        let mut y = self.output_bias;
        for j in 0..h {
            let w = &self.hidden_weights[j];
            let a = w.iter().zip(x).fold(self.hidden_bias[j], |acc, (wi, xi)| acc + wi * xi);
            let z = a.tanh();
            let v = self.output_weights[j];
            y += v * z;
            let d = v * (1.0 - z * z);
            for (g, xi) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                *g = d * xi;
            }
            gb[j] = d;
            gv[j] = z;
        }
        go[0] = 1.0;
        y
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for row in &self.hidden_weights {
            p.extend_from_slice(row);
        }
        p.extend_from_slice(&self.hidden_bias);
        p.extend_from_slice(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    /// Inverse of [`Mlp::params`]. Panics if `p` has the wrong length.
    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        let n_in = self.inputs();
        let h = self.hidden();
        for (j, row) in self.hidden_weights.iter_mut().enumerate() {
            row.copy_from_slice(&p[j * n_in..(j + 1) * n_in]);
        }
        let off = h * n_in;
        self.hidden_bias.copy_from_slice(&p[off..off + h]);
        self.output_weights.copy_from_slice(&p[off + h..off + 2 * h]);
        self.output_bias = p[off + 2 * h];
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    pub fn shape_is_consistent(&self) -> bool {
        let n_in = self.inputs();
        let h = self.hidden();
        h >= 1
            && self.hidden_weights.iter().all(|r| r.len() == n_in)
            && self.output_weights.len() == h
    }

    /// Hex SHA-256 over the little-endian bytes of the flat parameters.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for v in self.params() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
