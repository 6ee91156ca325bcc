//! Fully connected branch networks (rows are samples).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::Sigmoid),
            1 => Ok(Activation::Identity),
            other => Err(Error::format(format!("unknown activation code {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `in × out`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.weights;
        for mut row in z.row_iter_mut() {
            row += self.bias.transpose();
        }
        z.map(|v| self.activation.apply(v))
    }
}

/// A stack of layers; hidden layers use the configured activation, the last is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub layers: Vec<Layer>,
}

/// Parameter gradients of one branch, aligned with its layers.
#[derive(Debug, Clone)]
pub struct BranchGrad {
    pub weights: Vec<DMatrix<f64>>,
    pub bias: Vec<DVector<f64>>,
}

impl Branch {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(input_dim: usize, sizes: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::param("a branch needs at least one layer"));
        }
        if sizes.contains(&0) || input_dim == 0 {
            return Err(Error::param("layer sizes must be positive"));
        }
        if sizes.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::param(format!("layer sizes must be non-increasing, got {sizes:?}")));
        }
        let mut layers = Vec::with_capacity(sizes.len());
        let mut fan_in = input_dim;
        for (k, &out) in sizes.iter().enumerate() {
            let limit = (6.0 / (fan_in + out) as f64).sqrt();
            let weights = DMatrix::from_fn(fan_in, out, |_, _| rng.random_range(-limit..limit));
            let activation = if k + 1 == sizes.len() { Activation::Identity } else { hidden };
            layers.push(Layer { weights, bias: DVector::zeros(out), activation });
            fan_in = out;
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.ncols())
    }

    /// `H = f(X; θ)`.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward_all(x)?.pop().expect("at least one layer"))
    }

    /// Outputs of every layer, in order.
    fn forward_all(&self, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::param(format!("input has {} columns, branch expects {}", x.ncols(), self.input_dim())));
        }
        let mut outs: Vec<DMatrix<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = layer.forward(outs.last().unwrap_or(x));
            outs.push(next);
        }
        Ok(outs)
    }

    /// Output and parameter gradients of `Σ grad_out ∘ H`.
    pub fn backward(&self, x: &DMatrix<f64>, grad_out: impl FnOnce(&DMatrix<f64>) -> Result<DMatrix<f64>>) -> Result<(DMatrix<f64>, BranchGrad)> {
        let outs = self.forward_all(x)?;
        let h = outs.last().expect("at least one layer").clone();
        let mut delta = grad_out(&h)?;
        let n = self.layers.len();
        let mut gw = vec![DMatrix::zeros(0, 0); n];
        let mut gb = vec![DVector::zeros(0); n];
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let out = &outs[k];
            delta.zip_apply(out, |d, h| *d *= layer.activation.derivative_from_output(h));
            let input = if k == 0 { x } else { &outs[k - 1] };
            gw[k] = input.tr_mul(&delta);
            gb[k] = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if k > 0 {
                delta = &delta * layer.weights.transpose();
            }
        }
        Ok((h, BranchGrad { weights: gw, bias: gb }))
    }

    pub fn ascend(&mut self, grad: &BranchGrad, lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grad.weights.iter().zip(&grad.bias)) {
            layer.weights += gw * lr;
            layer.bias += gb * lr;
        }
    }
}
