//! DSFL (edge + global aggregation) and single-level SFL training loops.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::fedavg::fedavg;
use crate::idx::Dataset;
use crate::nn::Network;
use crate::shard::ShardedDataset;
use crate::split::{cut_width, split_training_step, SplitModel};

const STREAM_INIT: u64 = 0x1417;
const STREAM_SHUFFLE: u64 = 0x5EF;
const EVAL_CHUNK: usize = 2000;
/// Wire size of one parameter or activation.
pub const BITS_PER_VALUE: u64 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainHyper {
    pub rounds: usize,
    /// Rounds between edge aggregations.
    pub edge_period: usize,
    /// Edge aggregations per global aggregation (`k`).
    pub global_period: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden widths between the 784 inputs and the 10 classes.
    pub hidden_layers: Vec<usize>,
    pub cut_index: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            rounds: 50,
            edge_period: 1,
            global_period: 2,
            batch_size: 32,
            learning_rate: 0.05,
            hidden_layers: vec![128],
            cut_index: 1,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("rounds", self.rounds),
            ("edge_period", self.edge_period),
            ("global_period", self.global_period),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(config(key, "must be >= 1"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(config("learning_rate", "must be finite and >= 0"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(config("hidden_layers", "widths must be >= 1"));
        }
        if self.cut_index == 0 || self.cut_index > self.hidden_layers.len() {
            return Err(config(
                "cut_index",
                format!("must be in 1..={} for {} hidden layers", self.hidden_layers.len(), self.hidden_layers.len()),
            ));
        }
        Ok(())
    }

    fn layer_sizes(&self, inputs: usize, classes: usize) -> Vec<usize> {
        std::iter::once(inputs)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(classes))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// 0 is the untrained model.
    pub round: usize,
    pub test_accuracy: f64,
    /// Mean per-sample loss over the round's steps (round 0: initial model over all device data).
    pub train_loss: f64,
    /// Cumulative rounds at which edge aggregation ran.
    pub edge_aggregations: usize,
    /// Cumulative global aggregations.
    pub global_aggregations: usize,
    /// Cumulative uplink: cut activations plus uploaded parameters.
    pub bits_uplinked: u64,
}

const NUM_CLASSES: usize = 10;

struct Run<'a> {
    train: &'a Dataset,
    test: &'a Dataset,
    shards: &'a ShardedDataset,
    hyper: &'a TrainHyper,
    samples: Vec<f64>,
}

impl<'a> Run<'a> {
    fn new(train: &'a Dataset, test: &'a Dataset, shards: &'a ShardedDataset, hyper: &'a TrainHyper) -> Result<Self> {
        hyper.validate()?;
        if shards.num_devices() == 0 {
            return Err(config("devices", "no devices to train"));
        }
        if train.image_size() != test.image_size() {
            return Err(Error::Shape(format!(
                "train images have {} pixels, test images {}",
                train.image_size(),
                test.image_size()
            )));
        }
        if let Some(&i) = shards.shards.iter().flatten().find(|&&i| i >= train.len()) {
            return Err(Error::Shape(format!("shard index {i} beyond {} training samples", train.len())));
        }
        let samples: Vec<f64> = (0..shards.num_devices()).map(|d| shards.device_samples(d) as f64).collect();
        if let Some(d) = samples.iter().position(|&s| s == 0.0) {
            return Err(config("shards", format!("device {d} holds no samples")));
        }
        Ok(Run {
            train,
            test,
            shards,
            hyper,
            samples,
        })
    }

    fn init(&self) -> Result<(Network, Network)> {
        let sizes = self.hyper.layer_sizes(self.train.image_size(), NUM_CLASSES);
        let mut rng = dsfl_core::rng::stream(self.hyper.seed, &[STREAM_INIT]);
        Ok(SplitModel::mlp(&sizes, self.hyper.cut_index, &mut rng)?.into_parts())
    }

    /// One local epoch of split steps for `device`; returns the summed per-sample loss.
    fn local_epoch(&self, d: usize, round: usize, device: &mut Network, server: &mut Network) -> Result<f64> {
        let mut idx = self.shards.device_indices(d);
        idx.shuffle(&mut dsfl_core::rng::stream(self.hyper.seed, &[STREAM_SHUFFLE, round as u64, d as u64]));
        let mut total = 0.0;
        for chunk in idx.chunks(self.hyper.batch_size) {
            let (x, y) = gather(self.train, chunk);
            total += chunk.len() as f64 * split_training_step(device, server, x.view(), &y, self.hyper.learning_rate)?;
        }
        Ok(total)
    }

    fn total_samples(&self) -> f64 {
        self.samples.iter().sum()
    }

    fn activation_bits(&self, device: &Network) -> u64 {
        self.samples.iter().map(|&s| s as u64).sum::<u64>() * cut_width(device) as u64 * BITS_PER_VALUE
    }

    fn initial_metrics(&self, device: &Network, server: &Network) -> Result<RoundMetrics> {
        let all: Vec<usize> = (0..self.shards.num_devices()).flat_map(|d| self.shards.device_indices(d)).collect();
        let mut loss = 0.0;
        for chunk in all.chunks(EVAL_CHUNK) {
            let (x, y) = gather(self.train, chunk);
            let cut = device.predict(x.view());
            loss += chunk.len() as f64 * server.loss(cut.view(), &y)?;
        }
        Ok(RoundMetrics {
            round: 0,
            test_accuracy: accuracy(device, server, self.test),
            train_loss: loss / all.len() as f64,
            edge_aggregations: 0,
            global_aggregations: 0,
            bits_uplinked: 0,
        })
    }
}

fn gather(ds: &Dataset, idx: &[usize]) -> (Array2<f64>, Vec<u8>) {
    let n = ds.image_size();
    let mut x = Array2::zeros((idx.len(), n));
    for (mut row, &i) in x.rows_mut().into_iter().zip(idx) {
        row.iter_mut().zip(ds.image(i)).for_each(|(r, &p)| *r = p as f64);
    }
    (x, idx.iter().map(|&i| ds.labels[i]).collect())
}

/// Top-1 accuracy of the joined model on `data`.
pub fn accuracy(device: &Network, server: &Network, data: &Dataset) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = gather(data, chunk);
        let probs = server.predict(device.predict(x.view()).view());
        for (row, &label) in probs.rows().into_iter().zip(&y) {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (k, &p)| if p > b.1 { (k, p) } else { b });
            correct += (best.0 == label as usize) as usize;
        }
    }
    correct as f64 / data.len().max(1) as f64
}

struct Edge {
    devices: Vec<usize>,
    device_part: Network,
    server_part: Network,
}

/// Hierarchical split federated learning. `association[d]` is device `d`'s
/// edge server. Each round every device runs one local epoch against its
/// edge's server-part replica (devices in id order); every `edge_period`
/// rounds each edge averages its devices' parts, and every `global_period`
/// edge aggregations all edges are averaged into one global model.
///
/// Metrics are taken on the sample-weighted average of the current edge
/// models, i.e. the model a global aggregation would produce at that round.
pub fn run_dsfl(
    association: &[Option<usize>],
    train: &Dataset,
    test: &Dataset,
    shards: &ShardedDataset,
    hyper: &TrainHyper,
) -> Result<Vec<RoundMetrics>> {
    let run = Run::new(train, test, shards, hyper)?;
    if association.len() != shards.num_devices() {
        return Err(config(
            "association",
            format!("{} entries for {} devices", association.len(), shards.num_devices()),
        ));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (d, a) in association.iter().enumerate() {
        let e = a.ok_or_else(|| config("association", format!("device {d} is not mapped to an edge server")))?;
        groups.entry(e).or_default().push(d);
    }

    let (device0, server0) = run.init()?;
    let mut metrics = vec![run.initial_metrics(&device0, &server0)?];
    let mut edges: Vec<Edge> = groups
        .into_values()
        .map(|devices| Edge {
            devices,
            device_part: device0.clone(),
            server_part: server0.clone(),
        })
        .collect();
    let edge_weights: Vec<f64> = edges
        .iter()
        .map(|e| e.devices.iter().map(|&d| run.samples[d]).sum())
        .collect();
    let device_bits = device0.num_params() as u64 * BITS_PER_VALUE;
    let edge_bits = (device0.num_params() + server0.num_params()) as u64 * BITS_PER_VALUE;
    let mut local: Vec<Network> = vec![device0.clone(); shards.num_devices()];
    let (mut edge_aggs, mut global_aggs, mut bits) = (0usize, 0usize, 0u64);

    for round in 1..=hyper.rounds {
        let mut loss = 0.0;
        for edge in &mut edges {
            for &d in &edge.devices {
                loss += run.local_epoch(d, round, &mut local[d], &mut edge.server_part)?;
            }
        }
        bits += run.activation_bits(&device0);

        let edge_round = round % hyper.edge_period == 0;
        for edge in &mut edges {
            let models: Vec<&Network> = edge.devices.iter().map(|&d| &local[d]).collect();
            let w: Vec<f64> = edge.devices.iter().map(|&d| run.samples[d]).collect();
            edge.device_part = fedavg(&models, &w)?;
            if edge_round {
                for &d in &edge.devices {
                    local[d] = edge.device_part.clone();
                }
            }
        }
        if edge_round {
            edge_aggs += 1;
            bits += shards.num_devices() as u64 * device_bits;
        }

        let device_parts: Vec<&Network> = edges.iter().map(|e| &e.device_part).collect();
        let server_parts: Vec<&Network> = edges.iter().map(|e| &e.server_part).collect();
        let global_device = fedavg(&device_parts, &edge_weights)?;
        let global_server = fedavg(&server_parts, &edge_weights)?;
        if edge_round && edge_aggs % hyper.global_period == 0 {
            global_aggs += 1;
            bits += edges.len() as u64 * edge_bits;
            for edge in &mut edges {
                edge.device_part = global_device.clone();
                edge.server_part = global_server.clone();
                for &d in &edge.devices {
                    local[d] = global_device.clone();
                }
            }
        }

        metrics.push(RoundMetrics {
            round,
            test_accuracy: accuracy(&global_device, &global_server, test),
            train_loss: loss / run.total_samples(),
            edge_aggregations: edge_aggs,
            global_aggregations: global_aggs,
            bits_uplinked: bits,
        });
    }
    Ok(metrics)
}

/// Single-level split federated learning: every device trains from the
/// global device part against one shared server part (devices in id order),
/// then the device parts are averaged every round.
pub fn run_sfl(
    train: &Dataset,
    test: &Dataset,
    shards: &ShardedDataset,
    hyper: &TrainHyper,
) -> Result<Vec<RoundMetrics>> {
    let run = Run::new(train, test, shards, hyper)?;
    let (mut device, mut server) = run.init()?;
    let mut metrics = vec![run.initial_metrics(&device, &server)?];
    let device_bits = device.num_params() as u64 * BITS_PER_VALUE;
    let mut bits = 0u64;

    for round in 1..=hyper.rounds {
        let mut loss = 0.0;
        let mut local = Vec::with_capacity(shards.num_devices());
        for d in 0..shards.num_devices() {
            let mut part = device.clone();
            loss += run.local_epoch(d, round, &mut part, &mut server)?;
            local.push(part);
        }
        bits += run.activation_bits(&device) + shards.num_devices() as u64 * device_bits;
        let refs: Vec<&Network> = local.iter().collect();
        device = fedavg(&refs, &run.samples)?;

        metrics.push(RoundMetrics {
            round,
            test_accuracy: accuracy(&device, &server, test),
            train_loss: loss / run.total_samples(),
            edge_aggregations: 0,
            global_aggregations: round,
            bits_uplinked: bits,
        });
    }
    Ok(metrics)
}

pub fn write_metrics_csv<W: std::io::Write>(out: W, metrics: &[RoundMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "accuracy", "loss", "edge_aggs", "global_aggs", "bits_up"])?;
    for m in metrics {
        w.write_record([
            m.round.to_string(),
            m.test_accuracy.to_string(),
            m.train_loss.to_string(),
            m.edge_aggregations.to_string(),
            m.global_aggregations.to_string(),
            m.bits_uplinked.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyper_validation_names_keys() {
        let ok = TrainHyper::default();
        ok.validate().unwrap();
        let bad = |h: TrainHyper, key: &str| match h.validate() {
            Err(Error::InvalidConfig { key: k, .. }) => assert_eq!(k, key),
            other => panic!("{other:?}"),
        };
        bad(TrainHyper { rounds: 0, ..ok.clone() }, "rounds");
        bad(TrainHyper { global_period: 0, ..ok.clone() }, "global_period");
        bad(TrainHyper { learning_rate: -1.0, ..ok.clone() }, "learning_rate");
        bad(TrainHyper { cut_index: 2, ..ok.clone() }, "cut_index");
        bad(TrainHyper { hidden_layers: vec![0], ..ok }, "hidden_layers");
    }
}
