use serde::{Deserialize, Serialize};

use crate::cost::CostParams;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Joint allocation of transmit power, resource block, edge server and
/// relative local accuracy for every device.
///
/// RB and server choices are stored as one optional index per device, so a
/// device can never hold more than one of either; column exclusivity and
/// capacity are checked by [`AllocationSolution::violations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSolution {
    /// Watts.
    pub power: Vec<f64>,
    pub rb: Vec<Option<usize>>,
    pub server: Vec<Option<usize>>,
    pub theta: Vec<f64>,
    /// True when every device holds both an RB and a server.
    pub feasible: bool,
}

/// A broken constraint, reported by [`AllocationSolution::violations`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RbShared { rb: usize, devices: Vec<usize> },
    OverCapacity { server: usize, load: usize, capacity: usize },
    PowerOutOfRange { device: usize, power: f64 },
    ThetaOutOfRange { device: usize, theta: f64 },
    UnknownRb { device: usize, rb: usize },
    UnknownServer { device: usize, server: usize },
}

impl AllocationSolution {
    pub fn empty(devices: usize, theta: f64) -> Self {
        Self {
            power: vec![0.0; devices],
            rb: vec![None; devices],
            server: vec![None; devices],
            theta: vec![theta; devices],
            feasible: false,
        }
    }

    pub fn num_devices(&self) -> usize {
        self.power.len()
    }

    pub fn is_served(&self, device: usize) -> bool {
        self.rb[device].is_some() && self.server[device].is_some()
    }

    pub fn unserved(&self) -> Vec<usize> {
        (0..self.num_devices()).filter(|&d| !self.is_served(d)).collect()
    }

    pub(crate) fn refresh_feasible(&mut self) {
        self.feasible = (0..self.num_devices()).all(|d| self.is_served(d));
    }

    pub fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        let n = scenario.num_devices();
        let lens = [self.power.len(), self.rb.len(), self.server.len(), self.theta.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Shape(format!(
                "solution vectors have lengths {lens:?}, scenario has {n} devices"
            )));
        }
        Ok(())
    }

    /// Binary devices x RBs assignment matrix.
    pub fn rb_matrix(&self, rbs: usize) -> Vec<Vec<u8>> {
        one_hot(&self.rb, rbs)
    }

    /// Binary devices x servers association matrix.
    pub fn assoc_matrix(&self, servers: usize) -> Vec<Vec<u8>> {
        one_hot(&self.server, servers)
    }

    pub fn server_loads(&self, servers: usize) -> Vec<usize> {
        let mut load = vec![0; servers];
        for s in self.server.iter().flatten() {
            if *s < servers {
                load[*s] += 1;
            }
        }
        load
    }

    /// Every constraint the solution breaks against `scenario`.
    pub fn violations(&self, scenario: &Scenario, params: &CostParams) -> Result<Vec<Violation>> {
        self.check_shape(scenario)?;
        let mut out = Vec::new();
        let (n_rb, n_srv) = (scenario.num_rbs(), scenario.num_servers());

        for (device, (rb, server)) in self.rb.iter().zip(&self.server).enumerate() {
            if let Some(rb) = *rb {
                if rb >= n_rb {
                    out.push(Violation::UnknownRb { device, rb });
                }
            }
            if let Some(server) = *server {
                if server >= n_srv {
                    out.push(Violation::UnknownServer { device, server });
                }
            }
        }

        let rb_mat = self.rb_matrix(n_rb);
        for rb in 0..n_rb {
            let holders: Vec<usize> = (0..self.num_devices()).filter(|&d| rb_mat[d][rb] == 1).collect();
            if holders.len() > 1 {
                out.push(Violation::RbShared { rb, devices: holders });
            }
        }

        for (server, load) in self.server_loads(n_srv).into_iter().enumerate() {
            let capacity = scenario.edge_servers[server].capacity;
            if load > capacity {
                out.push(Violation::OverCapacity { server, load, capacity });
            }
        }

        for (device, dev) in scenario.devices.iter().enumerate() {
            let p = self.power[device];
            if !(0.0..=dev.max_tx_power).contains(&p) {
                out.push(Violation::PowerOutOfRange { device, power: p });
            }
            let t = self.theta[device];
            if !(params.theta_min..=params.theta_max).contains(&t) {
                out.push(Violation::ThetaOutOfRange { device, theta: t });
            }
        }
        Ok(out)
    }
}

fn one_hot(choice: &[Option<usize>], width: usize) -> Vec<Vec<u8>> {
    choice
        .iter()
        .map(|c| {
            let mut row = vec![0u8; width];
            if let Some(i) = *c {
                if i < width {
                    row[i] = 1;
                }
            }
            row
        })
        .collect()
}
