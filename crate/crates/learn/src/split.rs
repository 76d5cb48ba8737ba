//! Networks cut into a device-side and a server-side part.

use ndarray::ArrayView2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{check_labels, cross_entropy, Dense, Network};

/// Layers `[0, cut_index)` run on the device, `[cut_index, L)` on the server.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitModel {
    pub layers: Vec<Dense>,
    pub cut_index: usize,
}

impl SplitModel {
    pub fn new(layers: Vec<Dense>, cut_index: usize) -> Result<Self> {
        let net = Network::new(layers)?;
        if cut_index == 0 || cut_index >= net.layers.len() {
            return Err(Error::Shape(format!(
                "cut_index {cut_index} outside 1..{}",
                net.layers.len()
            )));
        }
        Ok(SplitModel {
            layers: net.layers,
            cut_index,
        })
    }

    pub fn mlp(sizes: &[usize], cut_index: usize, rng: &mut impl Rng) -> Result<Self> {
        SplitModel::new(Network::mlp(sizes, rng)?.layers, cut_index)
    }

    pub fn from_parts(device: Network, server: Network) -> Result<Self> {
        let cut = device.layers.len();
        SplitModel::new(device.layers.into_iter().chain(server.layers).collect(), cut)
    }

    /// (device part, server part).
    pub fn into_parts(self) -> (Network, Network) {
        let mut device = self.layers;
        let server = device.split_off(self.cut_index);
        (Network { layers: device }, Network { layers: server })
    }

    pub fn monolithic(&self) -> Network {
        Network {
            layers: self.layers.clone(),
        }
    }
}

/// Width of the activations crossing the cut.
pub fn cut_width(device: &Network) -> usize {
    device.output_dim()
}

/// One SGD step across the cut. The device forwards to the cut, the server
/// finishes the forward pass, computes the loss, backpropagates to the cut
/// and updates itself; the device then backpropagates the returned cut
/// gradient and updates. Returns the pre-step loss.
pub fn split_training_step(
    device: &mut Network,
    server: &mut Network,
    x: ArrayView2<f64>,
    labels: &[u8],
    learning_rate: f64,
) -> Result<f64> {
    device.check_input(x)?;
    if device.output_dim() != server.input_dim() {
        return Err(Error::Shape(format!(
            "device part outputs {} but server part takes {}",
            device.output_dim(),
            server.input_dim()
        )));
    }
    if !server.ends_in_softmax() {
        return Err(Error::Shape("server part must end in softmax".into()));
    }
    check_labels(x.nrows(), labels, server.output_dim())?;

    let device_outs = device.forward(x);
    let cut = device_outs.last().unwrap();
    let server_outs = server.forward(cut.view());
    let (loss, grad) = cross_entropy(server_outs.last().unwrap(), labels);
    let (server_grads, cut_grad) = server.backward(cut.view(), &server_outs, grad, true);
    server.apply_gradients(&server_grads, learning_rate);

    let (device_grads, _) = device.backward(x, &device_outs, cut_grad.unwrap(), false);
    device.apply_gradients(&device_grads, learning_rate);
    Ok(loss)
}
