//! Free-space propagation, SINR and Shannon rate.
//!
//! Learning devices never share a resource block, so the only interference a
//! device sees on RB `r` is the cellular user that owns `r`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Position, Scenario};
use crate::units::SPEED_OF_LIGHT;

/// Distances below this are clamped so the gain stays bounded.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Free-space path loss in dB. `distance` is clamped to [`MIN_DISTANCE_M`].
pub fn path_loss_db(distance: f64, carrier_freq: f64) -> f64 {
    let d = distance.max(MIN_DISTANCE_M);
    20.0 * d.log10() + 20.0 * carrier_freq.log10() + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10()
}

/// Linear power gain, 10^(-PL/10).
pub fn channel_gain(distance: f64, carrier_freq: f64) -> f64 {
    10f64.powf(-path_loss_db(distance, carrier_freq) / 10.0)
}

fn gain_between(a: &Position, b: &Position, carrier_freq: f64) -> f64 {
    channel_gain(a.distance(b), carrier_freq)
}

/// Precomputed gains and interference for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    servers: usize,
    rbs: usize,
    /// Row-major devices x servers.
    gain: Vec<f64>,
    /// Row-major servers x RBs, watts received from the RB's cellular user.
    interference: Vec<f64>,
    /// Per-RB thermal noise power, watts.
    noise: Vec<f64>,
}

impl ChannelState {
    pub fn new(scenario: &Scenario) -> Self {
        let f = scenario.carrier_freq;
        let servers = scenario.num_servers();
        let rbs = scenario.num_rbs();
        let gain = scenario
            .devices
            .iter()
            .flat_map(|d| {
                scenario
                    .edge_servers
                    .iter()
                    .map(move |s| gain_between(&d.position, &s.position, f))
            })
            .collect();
        let interference = scenario
            .edge_servers
            .iter()
            .flat_map(|s| {
                scenario.resource_blocks.iter().map(move |rb| {
                    rb.cellular_tx_power * gain_between(&rb.cellular_user, &s.position, f)
                })
            })
            .collect();
        let noise = scenario
            .resource_blocks
            .iter()
            .map(|rb| scenario.noise_psd * rb.bandwidth)
            .collect();
        Self {
            servers,
            rbs,
            gain,
            interference,
            noise,
        }
    }

    pub fn gain(&self, device: usize, server: usize) -> f64 {
        self.gain[device * self.servers + server]
    }

    pub fn interference(&self, server: usize, rb: usize) -> f64 {
        self.interference[server * self.rbs + rb]
    }

    pub fn noise(&self, rb: usize) -> f64 {
        self.noise[rb]
    }

    /// SINR without id or power checks; callers guarantee both.
    pub(crate) fn sinr_raw(&self, device: usize, rb: usize, server: usize, tx_power: f64) -> f64 {
        tx_power * self.gain(device, server) / (self.noise(rb) + self.interference(server, rb))
    }
}

/// SINR of `device` transmitting on `rb` towards `server`.
pub fn sinr(
    device: usize,
    rb: usize,
    server: usize,
    tx_power: f64,
    scenario: &Scenario,
    channel: &ChannelState,
) -> Result<f64> {
    let dev = scenario.device(device)?;
    scenario.rb(rb)?;
    scenario.server(server)?;
    if !(0.0..=dev.max_tx_power).contains(&tx_power) {
        return Err(Error::InvalidArgument(format!(
            "tx power {tx_power} W outside [0, {}] for device {device}",
            dev.max_tx_power
        )));
    }
    Ok(channel.sinr_raw(device, rb, server, tx_power))
}

/// Shannon rate in bit/s.
pub fn achievable_rate(sinr: f64, bandwidth: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::InvalidArgument(format!("sinr must be >= 0, got {sinr}")));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    Ok(bandwidth * sinr.ln_1p() / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Device, EdgeServer, ResourceBlock};
    use crate::units::{dbm_to_watts, watts_to_dbm};
    use proptest::prelude::*;

    #[test]
    fn fspl_reference_points() {
        assert!((path_loss_db(1.0, 2e9) - 38.46).abs() < 0.05);
        assert!((path_loss_db(100.0, 2e9) - 78.46).abs() < 0.05);
        let d = 37.0;
        assert!((path_loss_db(10.0 * d, 2e9) - path_loss_db(d, 2e9) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn distance_clamped() {
        assert_eq!(path_loss_db(0.0, 2e9), path_loss_db(1.0, 2e9));
        assert!(channel_gain(0.0, 2e9) <= 1.0);
    }

    #[test]
    fn noise_floor_over_one_rb() {
        let noise_w = dbm_to_watts(-174.0) * 180e3;
        assert!((watts_to_dbm(noise_w) + 121.45).abs() < 0.01);
    }

    #[test]
    fn rate_reference_points() {
        assert!((achievable_rate(1.0, 180e3).unwrap() - 180_000.0).abs() < 1e-6);
        let b = 12_345.0;
        assert!((achievable_rate(3.0, b).unwrap() - 2.0 * b).abs() < 1e-9);
        assert_eq!(achievable_rate(0.0, b).unwrap(), 0.0);
        assert!(achievable_rate(-0.1, b).is_err());
        assert!(achievable_rate(1.0, 0.0).is_err());
    }

    fn two_point(device_at: Position, cell_at: Position, cell_power: f64, noise_psd: f64) -> Scenario {
        Scenario {
            area_side: 1000.0,
            devices: vec![Device {
                id: 0,
                position: device_at,
                max_tx_power: dbm_to_watts(46.0),
                cpu_freq: 1e9,
                dataset_size: 300,
            }],
            edge_servers: vec![EdgeServer {
                id: 0,
                position: Position::new(500.0, 500.0),
                capacity: 1,
            }],
            resource_blocks: vec![ResourceBlock {
                id: 0,
                bandwidth: 180e3,
                cellular_user: cell_at,
                cellular_tx_power: cell_power,
            }],
            carrier_freq: 2e9,
            noise_psd,
            seed: 0,
        }
    }

    #[test]
    fn sinr_without_interference_is_snr() {
        let s = two_point(Position::new(600.0, 500.0), Position::new(0.0, 0.0), 0.0, 1e-20);
        let ch = ChannelState::new(&s);
        let p = 0.1;
        let expected = p * ch.gain(0, 0) / (1e-20 * 180e3);
        let got = sinr(0, 0, 0, p, &s, &ch).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn symmetric_interferer_gives_unit_sinr() {
        let p = dbm_to_watts(46.0);
        let s = two_point(Position::new(600.0, 500.0), Position::new(400.0, 500.0), p, 1e-40);
        let ch = ChannelState::new(&s);
        let got = sinr(0, 0, 0, p, &s, &ch).unwrap();
        assert!((got - 1.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn sinr_checks_ids_and_power() {
        let s = two_point(Position::new(600.0, 500.0), Position::new(0.0, 0.0), 1.0, 1e-20);
        let ch = ChannelState::new(&s);
        assert_eq!(sinr(1, 0, 0, 0.1, &s, &ch), Err(Error::UnknownId { kind: "device", id: 1 }));
        assert!(matches!(sinr(0, 3, 0, 0.1, &s, &ch), Err(Error::UnknownId { .. })));
        assert!(matches!(sinr(0, 0, 0, 1e3, &s, &ch), Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #[test]
        fn gain_decreases_with_distance(d in 1.0f64..5000.0, extra in 1e-3f64..1000.0) {
            prop_assert!(channel_gain(d + extra, 2e9) < channel_gain(d, 2e9));
            prop_assert!(channel_gain(d, 2e9) > 0.0 && channel_gain(d, 2e9) <= 1.0);
        }

        #[test]
        fn sinr_monotone(p in 1e-4f64..1.0, dp in 1e-4f64..1.0, ci in 1e-3f64..40.0, dci in 1e-3f64..40.0) {
            let at = |cell_power: f64| {
                two_point(Position::new(650.0, 520.0), Position::new(100.0, 900.0), cell_power, 4e-21)
            };
            let s = at(ci);
            let ch = ChannelState::new(&s);
            let louder = at(ci + dci);
            let ch_louder = ChannelState::new(&louder);
            prop_assert!(sinr(0, 0, 0, p + dp, &s, &ch).unwrap() > sinr(0, 0, 0, p, &s, &ch).unwrap());
            prop_assert!(sinr(0, 0, 0, p, &louder, &ch_louder).unwrap() < sinr(0, 0, 0, p, &s, &ch).unwrap());
        }

        #[test]
        fn rate_increasing_and_concave(a in 0.0f64..1e3, b in 0.0f64..1e3) {
            prop_assume!((a - b).abs() > 1e-6);
            let r = |x: f64| achievable_rate(x, 180e3).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(r(hi) > r(lo));
            prop_assert!(r(0.5 * (lo + hi)) >= 0.5 * (r(lo) + r(hi)) - 1e-9);
        }
    }
}
