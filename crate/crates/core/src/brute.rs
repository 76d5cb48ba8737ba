//! Exhaustive certifier for tiny instances.

use crate::bsum::SolverParams;
use crate::channel::ChannelState;
use crate::cost::evaluate_device;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::solution::AllocationSolution;

pub const MAX_DEVICES: usize = 4;
pub const MAX_RBS: usize = 3;
pub const MAX_SERVERS: usize = 2;
pub const MAX_LEVELS: usize = 16;

/// Grid-optimal allocation: every injective RB map, every capacity-feasible
/// association, theta in {theta_min, theta_max} and power on the grid
/// `p_max * k / levels`, `k = 1..=levels`.
///
/// Minimises (unserved devices, served cost) lexicographically, like the
/// solver. Given the RB map and association, power and theta separate per
/// device, so those two are searched per device without losing exactness.
pub fn brute_force(scenario: &Scenario, params: &SolverParams, levels: usize) -> Result<AllocationSolution> {
    let (n, r, s) = (scenario.num_devices(), scenario.num_rbs(), scenario.num_servers());
    if n > MAX_DEVICES || r > MAX_RBS || s > MAX_SERVERS || levels > MAX_LEVELS || levels == 0 {
        return Err(Error::TooLarge(format!(
            "{n} devices, {r} RBs, {s} servers, {levels} power levels \
             (limits {MAX_DEVICES}, {MAX_RBS}, {MAX_SERVERS}, 1..={MAX_LEVELS})"
        )));
    }
    params.cost.validate()?;
    let channel = ChannelState::new(scenario);
    let cp = &params.cost;
    let thetas = [cp.theta_min, cp.theta_max];

    // best[d][rb][server] = (cost, power, theta)
    let mut best = vec![vec![vec![(f64::INFINITY, 0.0, cp.theta_min); s]; r]; n];
    for d in 0..n {
        let p_max = scenario.devices[d].max_tx_power;
        for k in 0..r {
            for e in 0..s {
                for &theta in &thetas {
                    for level in 1..=levels {
                        let p = p_max * level as f64 / levels as f64;
                        let c = evaluate_device(scenario, &channel, cp, d, Some(k), Some(e), p, theta).cost;
                        if c < best[d][k][e].0 {
                            best[d][k][e] = (c, p, theta);
                        }
                    }
                }
            }
        }
    }

    let mut rb = vec![None; n];
    let mut server = vec![None; n];
    let mut incumbent: Option<(usize, f64, Vec<Option<usize>>, Vec<Option<usize>>)> = None;
    enumerate_rbs(0, &mut rb, &mut vec![false; r], &mut |rb| {
        enumerate_servers(0, &mut server, &mut vec![0; s], scenario, &mut |server| {
            let mut unserved = 0;
            let mut cost = 0.0;
            for d in 0..n {
                match (rb[d], server[d]) {
                    (Some(k), Some(e)) if best[d][k][e].0.is_finite() => cost += best[d][k][e].0,
                    _ => unserved += 1,
                }
            }
            let better = match &incumbent {
                None => true,
                Some((u, c, _, _)) => unserved < *u || (unserved == *u && cost < *c),
            };
            if better {
                incumbent = Some((unserved, cost, rb.to_vec(), server.to_vec()));
            }
        });
    });

    let (_, _, rb, server) = incumbent.expect("enumeration visits at least the empty allocation");
    let mut sol = AllocationSolution::empty(n, cp.theta_min);
    for d in 0..n {
        sol.power[d] = scenario.devices[d].max_tx_power;
        if let (Some(k), Some(e)) = (rb[d], server[d]) {
            let (c, p, theta) = best[d][k][e];
            if c.is_finite() {
                sol.power[d] = p;
                sol.theta[d] = theta;
            }
        }
    }
    sol.rb = rb;
    sol.server = server;
    sol.refresh_feasible();
    Ok(sol)
}

fn enumerate_rbs(d: usize, rb: &mut Vec<Option<usize>>, used: &mut Vec<bool>, visit: &mut dyn FnMut(&[Option<usize>])) {
    if d == rb.len() {
        visit(rb);
        return;
    }
    rb[d] = None;
    enumerate_rbs(d + 1, rb, used, visit);
    for k in 0..used.len() {
        if !used[k] {
            used[k] = true;
            rb[d] = Some(k);
            enumerate_rbs(d + 1, rb, used, visit);
            used[k] = false;
        }
    }
    rb[d] = None;
}

fn enumerate_servers(
    d: usize,
    server: &mut Vec<Option<usize>>,
    load: &mut Vec<usize>,
    scenario: &Scenario,
    visit: &mut dyn FnMut(&[Option<usize>]),
) {
    if d == server.len() {
        visit(server);
        return;
    }
    server[d] = None;
    enumerate_servers(d + 1, server, load, scenario, visit);
    for e in 0..load.len() {
        if load[e] < scenario.edge_servers[e].capacity {
            load[e] += 1;
            server[d] = Some(e);
            enumerate_servers(d + 1, server, load, scenario, visit);
            load[e] -= 1;
        }
    }
    server[d] = None;
}
