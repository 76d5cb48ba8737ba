//! Dense feed-forward networks trained by plain SGD.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Output layer only; paired with cross-entropy.
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`; the layer computes `x W + b`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
    pub fn init(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound));
        let biases = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-bound..bound));
        Dense {
            weights,
            biases,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights) + &self.biases;
        match self.activation {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Softmax => softmax_rows(&mut z),
        }
        z
    }
}

pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Mean cross-entropy of softmax outputs and its gradient w.r.t. the logits.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[u8]) -> (f64, Array2<f64>) {
    let n = labels.len() as f64;
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs[[i, y as usize]].max(f64::MIN_POSITIVE).ln();
        grad[[i, y as usize]] -= 1.0;
    }
    grad /= n;
    (loss / n, grad)
}

/// A chain of dense layers: a whole network or one side of a cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Dense>,
}

impl Network {
    /// Checks that layer dimensions chain and that softmax only ends the chain.
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer {l} outputs {} but layer {} takes {}",
                    pair[0].output_dim(),
                    l + 1,
                    pair[1].input_dim()
                )));
            }
            if pair[0].activation == Activation::Softmax {
                return Err(Error::Shape(format!("softmax layer {l} is not last")));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.biases.len() != layer.output_dim() {
                return Err(Error::Shape(format!("layer {l} bias length {}", layer.biases.len())));
            }
        }
        Ok(Network { layers })
    }

    /// Relu hidden layers, softmax output. `sizes` lists every width, input first.
    pub fn mlp(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Shape("need at least input and output widths".into()));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if l == last { Activation::Softmax } else { Activation::Relu };
                Dense::init(w[0], w[1], act, rng)
            })
            .collect();
        Network::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn ends_in_softmax(&self) -> bool {
        self.layers.last().unwrap().activation == Activation::Softmax
    }

    pub fn same_shape(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.dim() == b.weights.dim() && a.biases.len() == b.biases.len() && a.activation == b.activation
            })
    }

    pub(crate) fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.nrows() == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("input width {} but network takes {}", x.ncols(), self.input_dim())));
        }
        Ok(())
    }

    /// Output of every layer, in order.
    pub fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut outs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let out = layer.apply(outs.last().map_or(x, |a| a.view()));
            outs.push(out);
        }
        outs
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).pop().unwrap()
    }

    /// Backpropagates `grad_out` through the chain. For a relu-ended chain
    /// `grad_out` is w.r.t. the final activations; for a softmax-ended chain
    /// it is w.r.t. the logits (see [`cross_entropy`]). Returns per-layer
    /// gradients and, if asked, the gradient w.r.t. the input.
    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        outs: &[Array2<f64>],
        grad_out: Array2<f64>,
        want_input_grad: bool,
    ) -> (Vec<Gradient>, Option<Array2<f64>>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                Zip::from(&mut g).and(&outs[l]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            let input = if l == 0 { x } else { outs[l - 1].view() };
            grads.push(Gradient {
                weights: input.t().dot(&g),
                biases: g.sum_axis(Axis(0)),
            });
            if l > 0 || want_input_grad {
                g = g.dot(&layer.weights.t());
            }
        }
        grads.reverse();
        (grads, want_input_grad.then_some(g))
    }

    pub fn apply_gradients(&mut self, grads: &[Gradient], learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            layer.weights.scaled_add(-learning_rate, &g.weights);
            layer.biases.scaled_add(-learning_rate, &g.biases);
        }
    }

    /// Mean cross-entropy loss and parameter gradients on one batch.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, labels: &[u8]) -> Result<(f64, Vec<Gradient>)> {
        self.check_input(x)?;
        check_labels(x.nrows(), labels, self.output_dim())?;
        if !self.ends_in_softmax() {
            return Err(Error::Shape("loss needs a softmax output layer".into()));
        }
        let outs = self.forward(x);
        let (loss, grad) = cross_entropy(outs.last().unwrap(), labels);
        let (grads, _) = self.backward(x, &outs, grad, false);
        Ok((loss, grads))
    }

    /// One SGD step on the whole network; returns the pre-step loss.
    pub fn sgd_step(&mut self, x: ArrayView2<f64>, labels: &[u8], learning_rate: f64) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradients(x, labels)?;
        self.apply_gradients(&grads, learning_rate);
        Ok(loss)
    }

    pub fn loss(&self, x: ArrayView2<f64>, labels: &[u8]) -> Result<f64> {
        self.check_input(x)?;
        check_labels(x.nrows(), labels, self.output_dim())?;
        Ok(cross_entropy(&self.predict(x), labels).0)
    }
}

pub(crate) fn check_labels(rows: usize, labels: &[u8], classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Shape(format!("{} labels for {rows} samples", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(Error::Shape(format!("label {bad} but only {classes} classes")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_rows_sum_to_one_and_survive_large_logits() {
        let mut z = array![[1.0, 2.0, 3.0], [1000.0, 1000.0, -1000.0]];
        softmax_rows(&mut z);
        for row in z.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
        assert!((z[[1, 0]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_of_uniform_is_ln_classes() {
        let p = Array2::from_elem((4, 10), 0.1);
        let (loss, grad) = cross_entropy(&p, &[0, 3, 9, 9]);
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((grad[[0, 0]] - (0.1 - 1.0) / 4.0).abs() < 1e-15);
        assert!((grad[[0, 1]] - 0.1 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_broken_chains() {
        let mut rng = dsfl_core::rng::stream(0, &[]);
        let a = Dense::init(4, 3, Activation::Relu, &mut rng);
        let b = Dense::init(5, 2, Activation::Softmax, &mut rng);
        assert!(matches!(Network::new(vec![a.clone(), b]), Err(Error::Shape(_))));
        let s = Dense::init(4, 4, Activation::Softmax, &mut rng);
        assert!(Network::new(vec![s, a]).is_err());
        assert!(Network::new(vec![]).is_err());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = dsfl_core::rng::stream(1, &[]);
        let d = Dense::init(784, 128, Activation::Relu, &mut rng);
        let bound = 1.0 / 28.0;
        assert!(d.weights.iter().chain(d.biases.iter()).all(|w| w.abs() < bound));
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let mut rng = dsfl_core::rng::stream(2, &[]);
        let mut net = Network::mlp(&[6, 5, 3], &mut rng).unwrap();
        let before = net.clone();
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i * 6 + j) as f64 / 24.0);
        let loss = net.sgd_step(x.view(), &[0, 1, 2, 0], 0.0).unwrap();
        assert!(loss.is_finite());
        assert_eq!(net, before);
        assert!(net.sgd_step(x.view(), &[0, 1, 3, 0], 0.1).is_err());
    }
}
