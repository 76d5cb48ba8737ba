#![allow(dead_code)]

use dsfl_core::scenario::{Device, EdgeServer, Position, ResourceBlock};
use dsfl_core::units::dbm_to_watts;
use dsfl_core::{generate_scenario, Scenario, ScenarioConfig};

pub fn device(id: usize, x: f64, y: f64) -> Device {
    Device {
        id,
        position: Position::new(x, y),
        max_tx_power: dbm_to_watts(23.0),
        cpu_freq: 1e9,
        dataset_size: 300,
    }
}

pub fn server(id: usize, x: f64, y: f64, capacity: usize) -> EdgeServer {
    EdgeServer {
        id,
        position: Position::new(x, y),
        capacity,
    }
}

pub fn rb(id: usize, x: f64, y: f64) -> ResourceBlock {
    ResourceBlock {
        id,
        bandwidth: 180e3,
        cellular_user: Position::new(x, y),
        cellular_tx_power: dbm_to_watts(46.0),
    }
}

pub fn scenario(devices: Vec<Device>, servers: Vec<EdgeServer>, rbs: Vec<ResourceBlock>) -> Scenario {
    Scenario {
        area_side: 1000.0,
        devices,
        edge_servers: servers,
        resource_blocks: rbs,
        carrier_freq: 2e9,
        noise_psd: dbm_to_watts(-174.0),
        seed: 0,
    }
}

pub fn random(devices: usize, servers: usize, rbs: usize, capacity: Option<usize>, seed: u64) -> Scenario {
    let cfg = ScenarioConfig {
        devices,
        servers,
        resource_blocks: rbs,
        server_capacity: capacity,
        ..ScenarioConfig::default()
    };
    generate_scenario(&cfg, seed).unwrap()
}
