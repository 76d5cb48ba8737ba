//! Deployment scenarios: where devices, edge servers and the cellular users
//! whose resource blocks are reused sit, plus their radio parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::units::dbm_to_watts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    pub position: Position,
    /// Watts.
    pub max_tx_power: f64,
    /// CPU cycles per second.
    pub cpu_freq: f64,
    /// Number of local training samples.
    pub dataset_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeServer {
    pub id: usize,
    pub position: Position,
    /// Maximum number of devices the server may serve.
    pub capacity: usize,
}

/// An uplink resource block borrowed from a cellular user, who keeps
/// transmitting on it and therefore interferes at every edge server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceBlock {
    pub id: usize,
    /// Hz.
    pub bandwidth: f64,
    pub cellular_user: Position,
    /// Watts.
    pub cellular_tx_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Side of the square deployment region, meters.
    pub area_side: f64,
    pub devices: Vec<Device>,
    pub edge_servers: Vec<EdgeServer>,
    pub resource_blocks: Vec<ResourceBlock>,
    /// Hz.
    pub carrier_freq: f64,
    /// Thermal noise power spectral density, W/Hz.
    pub noise_psd: f64,
    pub seed: u64,
}

/// Generator parameters. Powers are given in dBm and converted on generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub devices: usize,
    pub servers: usize,
    pub resource_blocks: usize,
    pub area_side_m: f64,
    pub carrier_freq_hz: f64,
    /// 12 subcarriers x 15 kHz.
    pub rb_bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub cellular_tx_power_dbm: f64,
    pub device_max_tx_power_dbm: f64,
    pub device_cpu_hz: f64,
    pub device_dataset_size: usize,
    /// Per-server capacity; `None` means ceil(devices / servers).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub server_capacity: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            devices: 48,
            servers: 6,
            resource_blocks: 48,
            area_side_m: 1000.0,
            carrier_freq_hz: 2e9,
            rb_bandwidth_hz: 12.0 * 15e3,
            noise_psd_dbm_hz: -174.0,
            cellular_tx_power_dbm: 46.0,
            device_max_tx_power_dbm: 23.0,
            device_cpu_hz: 1e9,
            device_dataset_size: 300,
            server_capacity: None,
        }
    }
}

fn positive(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be a finite value > 0, got {value}")))
    }
}

fn finite(key: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite, got {value}")))
    }
}

fn at_least_one(key: &str, value: usize) -> Result<()> {
    if value >= 1 {
        Ok(())
    } else {
        Err(Error::config(key, "must be >= 1, got 0"))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        at_least_one("devices", self.devices)?;
        at_least_one("servers", self.servers)?;
        at_least_one("resource_blocks", self.resource_blocks)?;
        positive("area_side_m", self.area_side_m)?;
        positive("carrier_freq_hz", self.carrier_freq_hz)?;
        positive("rb_bandwidth_hz", self.rb_bandwidth_hz)?;
        finite("noise_psd_dbm_hz", self.noise_psd_dbm_hz)?;
        finite("cellular_tx_power_dbm", self.cellular_tx_power_dbm)?;
        finite("device_max_tx_power_dbm", self.device_max_tx_power_dbm)?;
        positive("device_cpu_hz", self.device_cpu_hz)?;
        if let Some(cap) = self.server_capacity {
            at_least_one("server_capacity", cap)?;
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.server_capacity
            .unwrap_or_else(|| self.devices.div_ceil(self.servers))
            .max(1)
    }
}

/// Fixed, seed-independent server sites: a row-major grid with
/// floor(sqrt(n)) rows, each site at the centre of its cell.
pub fn server_grid(count: usize, area_side: f64) -> Vec<Position> {
    let rows = ((count as f64).sqrt().floor() as usize).max(1);
    let cols = count.div_ceil(rows);
    let cell_w = area_side / cols as f64;
    let cell_h = area_side / rows as f64;
    (0..count)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            Position::new((c as f64 + 0.5) * cell_w, (r as f64 + 0.5) * cell_h)
        })
        .collect()
}

const STREAM_DEVICES: u64 = 1;
const STREAM_CELLULAR: u64 = 2;

pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let side = config.area_side_m;

    let mut dev_rng = rng::stream(seed, &[STREAM_DEVICES]);
    let max_tx_power = dbm_to_watts(config.device_max_tx_power_dbm);
    let devices = (0..config.devices)
        .map(|id| Device {
            id,
            position: Position::new(dev_rng.gen_range(0.0..=side), dev_rng.gen_range(0.0..=side)),
            max_tx_power,
            cpu_freq: config.device_cpu_hz,
            dataset_size: config.device_dataset_size,
        })
        .collect();

    let capacity = config.capacity();
    let edge_servers = server_grid(config.servers, side)
        .into_iter()
        .enumerate()
        .map(|(id, position)| EdgeServer {
            id,
            position,
            capacity,
        })
        .collect();

    let mut cell_rng = rng::stream(seed, &[STREAM_CELLULAR]);
    let cellular_tx_power = dbm_to_watts(config.cellular_tx_power_dbm);
    let resource_blocks = (0..config.resource_blocks)
        .map(|id| ResourceBlock {
            id,
            bandwidth: config.rb_bandwidth_hz,
            cellular_user: Position::new(
                cell_rng.gen_range(0.0..=side),
                cell_rng.gen_range(0.0..=side),
            ),
            cellular_tx_power,
        })
        .collect();

    Ok(Scenario {
        area_side: side,
        devices,
        edge_servers,
        resource_blocks,
        carrier_freq: config.carrier_freq_hz,
        noise_psd: dbm_to_watts(config.noise_psd_dbm_hz),
        seed,
    })
}

impl Scenario {
    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_servers(&self) -> usize {
        self.edge_servers.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.resource_blocks.len()
    }

    pub fn total_capacity(&self) -> usize {
        self.edge_servers.iter().map(|s| s.capacity).sum()
    }

    pub fn device(&self, id: usize) -> Result<&Device> {
        self.devices.get(id).ok_or(Error::UnknownId { kind: "device", id })
    }

    pub fn server(&self, id: usize) -> Result<&EdgeServer> {
        self.edge_servers
            .get(id)
            .ok_or(Error::UnknownId { kind: "server", id })
    }

    pub fn rb(&self, id: usize) -> Result<&ResourceBlock> {
        self.resource_blocks
            .get(id)
            .ok_or(Error::UnknownId { kind: "resource block", id })
    }

    /// Checks the structural invariants. Hand-built scenarios (tests, the
    /// cost-surface reference) should be run through this.
    pub fn validate(&self) -> Result<()> {
        positive("area_side", self.area_side)?;
        positive("carrier_freq", self.carrier_freq)?;
        positive("noise_psd", self.noise_psd)?;
        let inside = |p: &Position| {
            (0.0..=self.area_side).contains(&p.x) && (0.0..=self.area_side).contains(&p.y)
        };
        for d in &self.devices {
            if !inside(&d.position) {
                return Err(Error::config("devices.position", format!("device {} outside area", d.id)));
            }
            if !(d.max_tx_power >= 0.0) {
                return Err(Error::config("devices.max_tx_power", "must be >= 0"));
            }
            positive("devices.cpu_freq", d.cpu_freq)?;
        }
        for s in &self.edge_servers {
            if !inside(&s.position) {
                return Err(Error::config("edge_servers.position", format!("server {} outside area", s.id)));
            }
            at_least_one("edge_servers.capacity", s.capacity)?;
        }
        for rb in &self.resource_blocks {
            if !inside(&rb.cellular_user) {
                return Err(Error::config("resource_blocks.cellular_user", format!("rb {} interferer outside area", rb.id)));
            }
            positive("resource_blocks.bandwidth", rb.bandwidth)?;
        }
        let ids_ok = self.devices.iter().enumerate().all(|(i, d)| d.id == i)
            && self.edge_servers.iter().enumerate().all(|(i, s)| s.id == i)
            && self.resource_blocks.iter().enumerate().all(|(i, r)| r.id == i);
        if !ids_ok {
            return Err(Error::config("id", "ids must equal list positions"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(devices: usize, servers: usize, rbs: usize) -> ScenarioConfig {
        ScenarioConfig {
            devices,
            servers,
            resource_blocks: rbs,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn default_cardinalities() {
        let s = generate_scenario(&ScenarioConfig::default(), 3).unwrap();
        assert_eq!(s.num_devices(), 48);
        assert_eq!(s.num_servers(), 6);
        assert_eq!(s.num_rbs(), 48);
        assert!(s.edge_servers.iter().all(|e| e.capacity == 8));
        s.validate().unwrap();
    }

    #[test]
    fn same_seed_same_scenario() {
        let cfg = small(1, 1, 1);
        assert_eq!(generate_scenario(&cfg, 11).unwrap(), generate_scenario(&cfg, 11).unwrap());
    }

    #[test]
    fn devices_in_area_and_servers_fixed() {
        let cfg = small(4, 2, 4);
        let a = generate_scenario(&cfg, 7).unwrap();
        let b = generate_scenario(&cfg, 8).unwrap();
        for d in &a.devices {
            assert!((0.0..=1000.0).contains(&d.position.x));
            assert!((0.0..=1000.0).contains(&d.position.y));
        }
        let pa: Vec<_> = a.edge_servers.iter().map(|s| s.position).collect();
        let pb: Vec<_> = b.edge_servers.iter().map(|s| s.position).collect();
        assert_eq!(pa, pb);
        assert_ne!(a.devices[0].position, b.devices[0].position);
    }

    #[test]
    fn six_servers_on_three_by_two_grid() {
        let grid = server_grid(6, 1000.0);
        let xs: Vec<f64> = grid.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = grid.iter().map(|p| p.y).collect();
        let third = 1000.0 / 3.0;
        assert_eq!(xs, vec![third * 0.5, third * 1.5, third * 2.5, third * 0.5, third * 1.5, third * 2.5]);
        assert_eq!(ys, vec![250.0, 250.0, 250.0, 750.0, 750.0, 750.0]);
    }

    #[test]
    fn rejects_bad_config() {
        let err = generate_scenario(&small(0, 1, 1), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { ref key, .. } if key == "devices"));
        let cfg = ScenarioConfig {
            area_side_m: -5.0,
            ..ScenarioConfig::default()
        };
        assert!(matches!(generate_scenario(&cfg, 0), Err(Error::InvalidConfig { .. })));
        let cfg = ScenarioConfig {
            rb_bandwidth_hz: -1.0,
            ..ScenarioConfig::default()
        };
        let msg = generate_scenario(&cfg, 0).unwrap_err().to_string();
        assert!(msg.contains("bandwidth"), "{msg}");
    }
}
