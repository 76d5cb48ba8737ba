//! Per-device transmission latency and energy, local computation, and the
//! joint cost `(1 + theta) * (w_L * latency + w_E * energy)`.
//!
//! An infinite value marks an infeasible device (zero rate, no RB, no
//! server). It is never replaced by a large finite number.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::scenario::{Device, Scenario};
use crate::solution::AllocationSolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Bits uplinked per round (cut-layer payload).
    pub upload_bits: f64,
    pub weight_latency: f64,
    pub weight_energy: f64,
    /// `a` in I(theta) = ceil(a * ln(1 / theta)).
    pub iteration_coeff: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Adds local computation time and energy to the cost.
    pub include_local_compute: bool,
    pub cycles_per_sample: f64,
    /// Effective switched capacitance for compute energy, kappa * cycles * f^2.
    pub kappa: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            upload_bits: 1e5,
            weight_latency: 0.5,
            weight_energy: 0.5,
            iteration_coeff: 10.0,
            theta_min: 0.05,
            theta_max: 0.95,
            include_local_compute: false,
            cycles_per_sample: 1e6,
            kappa: 1e-28,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let cfg = |k: &str, r: String| Err(Error::config(k, r));
        if !(self.upload_bits.is_finite() && self.upload_bits > 0.0) {
            return cfg("upload_bits", format!("must be > 0, got {}", self.upload_bits));
        }
        for (k, w) in [("weight_latency", self.weight_latency), ("weight_energy", self.weight_energy)] {
            if !(w.is_finite() && w >= 0.0) {
                return cfg(k, format!("must be >= 0, got {w}"));
            }
        }
        if ((self.weight_latency + self.weight_energy) - 1.0).abs() > 1e-9 {
            return cfg(
                "weight_latency",
                format!(
                    "weight_latency + weight_energy must equal 1, got {}",
                    self.weight_latency + self.weight_energy
                ),
            );
        }
        if !(self.iteration_coeff.is_finite() && self.iteration_coeff >= 0.0) {
            return cfg("iteration_coeff", format!("must be >= 0, got {}", self.iteration_coeff));
        }
        if !(0.0 < self.theta_min && self.theta_min < self.theta_max && self.theta_max < 1.0) {
            return cfg(
                "theta_min",
                format!(
                    "need 0 < theta_min < theta_max < 1, got [{}, {}]",
                    self.theta_min, self.theta_max
                ),
            );
        }
        if !(self.cycles_per_sample.is_finite() && self.cycles_per_sample >= 0.0) {
            return cfg("cycles_per_sample", format!("must be >= 0, got {}", self.cycles_per_sample));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return cfg("kappa", format!("must be >= 0, got {}", self.kappa));
        }
        Ok(())
    }
}

/// Seconds to push `upload_bits` at `rate`; infinite when the rate is zero.
pub fn transmission_latency(upload_bits: f64, rate: f64) -> Result<f64> {
    if !(upload_bits > 0.0) {
        return Err(Error::InvalidArgument(format!("upload size must be > 0, got {upload_bits}")));
    }
    if !(rate >= 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be >= 0, got {rate}")));
    }
    if rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(upload_bits / rate)
}

/// Joules spent transmitting for `latency` seconds. Infinite latency stays infinite.
pub fn transmission_energy(tx_power: f64, latency: f64) -> Result<f64> {
    if !(tx_power >= 0.0 && tx_power.is_finite()) {
        return Err(Error::InvalidArgument(format!("tx power must be finite and >= 0, got {tx_power}")));
    }
    if !(latency >= 0.0) {
        return Err(Error::InvalidArgument(format!("latency must be >= 0, got {latency}")));
    }
    if latency.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(tx_power * latency)
}

/// Local iterations needed to reach relative accuracy `theta`.
pub fn local_iterations(theta: f64, coeff: f64) -> Result<u32> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {theta}")));
    }
    if !(coeff >= 0.0 && coeff.is_finite()) {
        return Err(Error::InvalidArgument(format!("iteration coefficient must be >= 0, got {coeff}")));
    }
    Ok((coeff * (1.0 / theta).ln()).ceil().max(0.0) as u32)
}

pub fn local_compute_time(
    dataset_size: f64,
    cycles_per_sample: f64,
    cpu_freq: f64,
    iterations: u32,
) -> Result<f64> {
    if !(cpu_freq > 0.0) {
        return Err(Error::InvalidArgument(format!("cpu frequency must be > 0, got {cpu_freq}")));
    }
    if !(dataset_size >= 0.0 && cycles_per_sample >= 0.0) {
        return Err(Error::InvalidArgument("dataset size and cycles must be >= 0".into()));
    }
    Ok(iterations as f64 * dataset_size * cycles_per_sample / cpu_freq)
}

pub fn local_compute_energy(
    kappa: f64,
    dataset_size: f64,
    cycles_per_sample: f64,
    cpu_freq: f64,
    iterations: u32,
) -> f64 {
    iterations as f64 * kappa * cycles_per_sample * dataset_size * cpu_freq * cpu_freq
}

/// `(1 + theta) * (w_L * latency + w_E * energy)`, the transmission-only cost.
pub fn device_cost(theta: f64, latency: f64, energy: f64, params: &CostParams) -> Result<f64> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be finite and >= 0, got {theta}")));
    }
    if !(latency >= 0.0 && energy >= 0.0) {
        return Err(Error::InvalidArgument("latency and energy must be >= 0".into()));
    }
    if latency.is_infinite() || energy.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 + theta) * (params.weight_latency * latency + params.weight_energy * energy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCost {
    pub device_id: usize,
    pub latency_trans: f64,
    pub energy_trans: f64,
    pub local_compute_time: f64,
    pub local_compute_energy: f64,
    pub theta: f64,
    pub cost: f64,
}

impl DeviceCost {
    pub fn is_feasible(&self) -> bool {
        self.cost.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub devices: Vec<DeviceCost>,
    /// Sum over all devices; infinite as soon as one device is infeasible.
    pub total_cost: f64,
    /// Sum over feasible devices only.
    pub served_cost: f64,
    pub unserved: Vec<usize>,
}

/// Local computation time/energy for one device at `theta`, zero in literal mode.
pub(crate) fn compute_terms(device: &Device, theta: f64, params: &CostParams) -> (f64, f64) {
    if !params.include_local_compute {
        return (0.0, 0.0);
    }
    let iters = local_iterations(theta, params.iteration_coeff).unwrap_or(0);
    let n = device.dataset_size as f64;
    let time = iters as f64 * n * params.cycles_per_sample / device.cpu_freq;
    let energy = local_compute_energy(params.kappa, n, params.cycles_per_sample, device.cpu_freq, iters);
    (time, energy)
}

/// Cost of one device given its choices. `rb`/`server` of `None` or a zero
/// rate make it infeasible. Inputs are assumed in range.
pub(crate) fn evaluate_device(
    scenario: &Scenario,
    channel: &ChannelState,
    params: &CostParams,
    device: usize,
    rb: Option<usize>,
    server: Option<usize>,
    power: f64,
    theta: f64,
) -> DeviceCost {
    let dev = &scenario.devices[device];
    let (compute_time, compute_energy) = compute_terms(dev, theta, params);
    let (latency, energy) = match (rb, server) {
        (Some(r), Some(s)) => {
            let sinr = channel.sinr_raw(device, r, s, power);
            let bw = scenario.resource_blocks[r].bandwidth;
            let rate = bw * sinr.ln_1p() / std::f64::consts::LN_2;
            if rate > 0.0 {
                let l = params.upload_bits / rate;
                (l, power * l)
            } else {
                (f64::INFINITY, f64::INFINITY)
            }
        }
        _ => (f64::INFINITY, f64::INFINITY),
    };
    let cost = if latency.is_finite() {
        (1.0 + theta)
            * (params.weight_latency * (latency + compute_time)
                + params.weight_energy * (energy + compute_energy))
    } else {
        f64::INFINITY
    };
    DeviceCost {
        device_id: device,
        latency_trans: latency,
        energy_trans: energy,
        local_compute_time: compute_time,
        local_compute_energy: compute_energy,
        theta,
        cost,
    }
}

/// Per-device and aggregate cost of a full allocation.
pub fn total_cost(
    solution: &AllocationSolution,
    scenario: &Scenario,
    channel: &ChannelState,
    params: &CostParams,
) -> Result<CostBreakdown> {
    solution.check_shape(scenario)?;
    for d in 0..scenario.num_devices() {
        if let Some(r) = solution.rb[d] {
            scenario.rb(r)?;
        }
        if let Some(s) = solution.server[d] {
            scenario.server(s)?;
        }
        let p = solution.power[d];
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("device {d} power {p} W")));
        }
        let t = solution.theta[d];
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidArgument(format!("device {d} theta {t} outside (0, 1]")));
        }
    }
    let devices: Vec<DeviceCost> = (0..scenario.num_devices())
        .map(|d| {
            evaluate_device(
                scenario,
                channel,
                params,
                d,
                solution.rb[d],
                solution.server[d],
                solution.power[d],
                solution.theta[d],
            )
        })
        .collect();
    let unserved: Vec<usize> = devices.iter().filter(|c| !c.is_feasible()).map(|c| c.device_id).collect();
    let served_cost = devices.iter().filter(|c| c.is_feasible()).map(|c| c.cost).sum();
    let total_cost = if unserved.is_empty() { served_cost } else { f64::INFINITY };
    Ok(CostBreakdown {
        devices,
        total_cost,
        served_cost,
        unserved,
    })
}

/// CSV rows `device_id,latency_s,energy_j,theta,cost`.
pub fn write_breakdown_csv<W: Write>(out: W, breakdown: &CostBreakdown) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["device_id", "latency_s", "energy_j", "theta", "cost"])?;
    for c in &breakdown.devices {
        w.write_record([
            c.device_id.to_string(),
            c.latency_trans.to_string(),
            c.energy_trans.to_string(),
            c.theta.to_string(),
            c.cost.to_string(),
        ])?;
    }
    w.flush()
}
