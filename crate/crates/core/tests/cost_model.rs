mod common;

use common::*;
use dsfl_core::cost::write_breakdown_csv;
use dsfl_core::{total_cost, AllocationSolution, ChannelState, CostParams, Error};

fn served(n: usize, theta: f64, power: f64) -> AllocationSolution {
    AllocationSolution {
        power: vec![power; n],
        rb: (0..n).map(Some).collect(),
        server: vec![Some(0); n],
        theta: vec![theta; n],
        feasible: true,
    }
}

#[test]
fn single_device_matches_hand_chain() {
    let s = scenario(vec![device(0, 300.0, 400.0)], vec![server(0, 500.0, 500.0, 1)], vec![rb(0, 900.0, 100.0)]);
    let ch = ChannelState::new(&s);
    let params = CostParams::default();
    let (p, theta) = (0.15, 0.2);

    // Independent evaluation from the formulas.
    let c = 2.998e8f64;
    let f = 2e9f64;
    let pl = |d: f64| 20.0 * d.log10() + 20.0 * f.log10() + 20.0 * (4.0 * std::f64::consts::PI / c).log10();
    let g = 10f64.powf(-pl((200.0f64.powi(2) + 100.0f64.powi(2)).sqrt()) / 10.0);
    let g_cell = 10f64.powf(-pl((400.0f64.powi(2) + 400.0f64.powi(2)).sqrt()) / 10.0);
    let noise = 10f64.powf((-174.0 - 30.0) / 10.0) * 180e3;
    let interference = 10f64.powf((46.0 - 30.0) / 10.0) * g_cell;
    let sinr = p * g / (noise + interference);
    let rate = 180e3 * (1.0 + sinr).log2();
    let latency = 1e5 / rate;
    let energy = p * latency;
    let expected = (1.0 + theta) * (0.5 * latency + 0.5 * energy);

    let got = total_cost(&served(1, theta, p), &s, &ch, &params).unwrap();
    assert!((got.total_cost - expected).abs() <= 1e-9 * expected, "{} vs {expected}", got.total_cost);
    let dev = &got.devices[0];
    assert!((dev.latency_trans - latency).abs() <= 1e-9 * latency);
    assert!((dev.energy_trans - energy).abs() <= 1e-9 * energy);
    assert_eq!(dev.local_compute_time, 0.0);
}

#[test]
fn higher_sinr_for_one_device_lowers_total() {
    let devices = vec![device(0, 200.0, 500.0), device(1, 800.0, 500.0)];
    let servers = vec![server(0, 500.0, 500.0, 2)];
    let near = scenario(devices.clone(), servers.clone(), vec![rb(0, 450.0, 450.0), rb(1, 100.0, 900.0)]);
    // Same everything, but device 0's interferer moves away.
    let far = scenario(devices, servers, vec![rb(0, 950.0, 50.0), rb(1, 100.0, 900.0)]);
    let params = CostParams::default();
    let sol = served(2, params.theta_min, 0.1);
    let a = total_cost(&sol, &near, &ChannelState::new(&near), &params).unwrap();
    let b = total_cost(&sol, &far, &ChannelState::new(&far), &params).unwrap();
    assert!(b.total_cost < a.total_cost);
    assert!(b.devices[0].cost < a.devices[0].cost);
    assert_eq!(b.devices[1].cost, a.devices[1].cost);
}

#[test]
fn identical_inputs_identical_breakdown() {
    let s = random(1, 1, 1, None, 5);
    let ch = ChannelState::new(&s);
    let p = CostParams::default();
    let sol = served(1, 0.3, 0.05);
    assert_eq!(total_cost(&sol, &s, &ch, &p).unwrap(), total_cost(&sol, &s, &ch, &p).unwrap());
}

#[test]
fn cost_increases_with_theta_and_scales_with_upload() {
    let s = random(4, 1, 4, Some(4), 9);
    let ch = ChannelState::new(&s);
    let params = CostParams::default();
    let mut sol = served(4, 0.1, 0.1);
    let base = total_cost(&sol, &s, &ch, &params).unwrap();
    sol.theta[2] = 0.4;
    let raised = total_cost(&sol, &s, &ch, &params).unwrap();
    assert!(raised.total_cost > base.total_cost);

    let doubled = CostParams {
        upload_bits: 2.0 * params.upload_bits,
        ..params.clone()
    };
    let d = total_cost(&sol, &s, &ch, &doubled).unwrap();
    for (x, y) in d.devices.iter().zip(&raised.devices) {
        assert!((x.latency_trans - 2.0 * y.latency_trans).abs() <= 1e-12 * x.latency_trans);
        assert!((x.energy_trans - 2.0 * y.energy_trans).abs() <= 1e-12 * x.energy_trans);
        assert!((x.cost - 2.0 * y.cost).abs() <= 1e-12 * x.cost);
    }
}

#[test]
fn total_is_sum_and_removal_is_exact() {
    let s = random(5, 2, 5, Some(5), 21);
    let ch = ChannelState::new(&s);
    let params = CostParams::default();
    let mut sol = served(5, 0.05, 0.12);
    sol.server = vec![Some(0), Some(1), Some(0), Some(1), Some(1)];
    let full = total_cost(&sol, &s, &ch, &params).unwrap();
    let sum: f64 = full.devices.iter().map(|c| c.cost).sum();
    assert!((full.total_cost - sum).abs() <= 1e-12 * sum);

    // Dropping device 3 removes exactly its contribution.
    let mut smaller = s.clone();
    smaller.devices.remove(3);
    for (i, d) in smaller.devices.iter_mut().enumerate() {
        d.id = i;
    }
    let mut sol4 = sol.clone();
    for v in [&mut sol4.rb, &mut sol4.server] {
        v.remove(3);
    }
    sol4.power.remove(3);
    sol4.theta.remove(3);
    let part = total_cost(&sol4, &smaller, &ChannelState::new(&smaller), &params).unwrap();
    assert!((full.total_cost - full.devices[3].cost - part.total_cost).abs() <= 1e-9 * full.total_cost);
}

#[test]
fn unserved_device_makes_total_infeasible() {
    let s = random(3, 1, 3, Some(3), 2);
    let ch = ChannelState::new(&s);
    let params = CostParams::default();
    let mut sol = served(3, 0.05, 0.1);
    sol.rb[1] = None;
    let b = total_cost(&sol, &s, &ch, &params).unwrap();
    assert!(b.total_cost.is_infinite());
    assert_eq!(b.unserved, vec![1]);
    assert!(b.devices[1].latency_trans.is_infinite());
    let served_sum = b.devices[0].cost + b.devices[2].cost;
    assert!((b.served_cost - served_sum).abs() < 1e-12 * served_sum);

    sol.rb[1] = Some(1);
    sol.power[1] = 0.0;
    let b = total_cost(&sol, &s, &ch, &params).unwrap();
    assert!(b.devices[1].cost.is_infinite());
}

#[test]
fn shape_mismatch_rejected() {
    let s = random(3, 1, 3, None, 2);
    let ch = ChannelState::new(&s);
    let sol = served(2, 0.05, 0.1);
    assert!(matches!(total_cost(&sol, &s, &ch, &CostParams::default()), Err(Error::Shape(_))));
}

#[test]
fn local_compute_terms_enter_extended_cost() {
    let s = random(1, 1, 1, None, 4);
    let ch = ChannelState::new(&s);
    let literal = CostParams::default();
    let extended = CostParams {
        include_local_compute: true,
        ..literal.clone()
    };
    let sol = served(1, 0.1, 0.1);
    let a = total_cost(&sol, &s, &ch, &literal).unwrap().devices[0].clone();
    let b = total_cost(&sol, &s, &ch, &extended).unwrap().devices[0].clone();
    // I(0.1) = 24 iterations of 300 samples at 1e6 cycles/sample on 1 GHz.
    assert!((b.local_compute_time - 24.0 * 0.3).abs() < 1e-12);
    let e = 24.0 * 1e-28 * 1e6 * 300.0 * 1e18;
    assert!((b.local_compute_energy - e).abs() < 1e-12);
    let expected = 1.1 * (0.5 * (a.latency_trans + b.local_compute_time) + 0.5 * (a.energy_trans + e));
    assert!((b.cost - expected).abs() <= 1e-12 * expected);
}

#[test]
fn breakdown_csv_layout() {
    let s = random(2, 1, 2, None, 1);
    let ch = ChannelState::new(&s);
    let b = total_cost(&served(2, 0.05, 0.1), &s, &ch, &CostParams::default()).unwrap();
    let mut buf = Vec::new();
    write_breakdown_csv(&mut buf, &b).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "device_id,latency_s,energy_j,theta,cost");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,"));
}
