//! Block successive upper-bound minimisation over the four allocation blocks.
//!
//! Every block is minimised exactly with the other three held fixed:
//! association and RB assignment are min-cost assignment problems, power is a
//! per-device quasiconvex line search, and theta is either closed form
//! (transmission-only cost) or an exact search over the breakpoints of the
//! iteration count. Since each block's own objective is its tightest upper
//! bound, this is a valid BSUM step and the cost sequence never increases.
//!
//! The solver minimises the pair (unserved devices, cost of served devices)
//! lexicographically. When every device can be served this is just the total
//! cost.

use std::cmp::Ordering;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::channel::ChannelState;
use crate::cost::{evaluate_device, local_iterations, total_cost, CostBreakdown, CostParams};
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::Scenario;
use crate::solution::AllocationSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Assoc,
    Rb,
    Power,
    Theta,
}

impl Block {
    /// Update order within one cycle.
    pub const ORDER: [Block; 4] = [Block::Assoc, Block::Rb, Block::Power, Block::Theta];

    pub fn name(self) -> &'static str {
        match self {
            Block::Assoc => "assoc",
            Block::Rb => "rb",
            Block::Power => "power",
            Block::Theta => "theta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Stop once a full cycle improves the cost by less than this fraction.
    pub tolerance: f64,
    /// Maximum number of full block cycles.
    pub max_iterations: usize,
    /// Lower end of the power search, watts. Keeps the rate positive.
    pub min_power: f64,
    /// Fail with [`Error::Infeasible`] unless every device can be served.
    pub require_full_coverage: bool,
    /// Independent starting points per run; the best final objective wins.
    /// Start 0 is the deterministic default, the rest are seeded random
    /// RB/association draws.
    pub starts: usize,
    pub cost: CostParams,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 200,
            min_power: 1e-6,
            require_full_coverage: true,
            starts: 32,
            cost: CostParams::default(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::config("tolerance", format!("must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations < 1 {
            return Err(Error::config("max_iterations", "must be >= 1"));
        }
        if self.starts < 1 {
            return Err(Error::config("starts", "must be >= 1"));
        }
        if !(self.min_power > 0.0 && self.min_power.is_finite()) {
            return Err(Error::config("min_power_w", format!("must be > 0, got {}", self.min_power)));
        }
        self.cost.validate()
    }
}

/// Lexicographic solver objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub unserved: usize,
    pub cost: f64,
}

impl Objective {
    fn cmp(&self, other: &Objective) -> Ordering {
        self.unserved
            .cmp(&other.unserved)
            .then(self.cost.total_cmp(&other.cost))
    }

    fn improves_on(&self, other: &Objective) -> bool {
        self.cmp(other) == Ordering::Less
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Full cycle index, starting at 1.
    pub iteration: usize,
    /// Block update index across the whole run, starting at 1.
    pub step: usize,
    pub block: Block,
    /// Cost of served devices after the update.
    pub cost: f64,
    pub unserved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub initial_cost: f64,
    pub initial_unserved: usize,
    pub entries: Vec<TraceEntry>,
    pub converged: bool,
    /// Full cycles run.
    pub iterations_used: usize,
}

impl SolverTrace {
    pub fn final_cost(&self) -> f64 {
        self.entries.last().map_or(self.initial_cost, |e| e.cost)
    }

    /// Cost after each completed cycle, preceded by the initial cost.
    pub fn cycle_costs(&self) -> Vec<f64> {
        let mut out = vec![self.initial_cost];
        let mut last_cycle = 0;
        for e in &self.entries {
            if e.iteration != last_cycle {
                out.push(e.cost);
                last_cycle = e.iteration;
            } else {
                *out.last_mut().unwrap() = e.cost;
            }
        }
        out
    }

    /// True when no update raised (unserved, cost) by more than `slack`.
    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        let mut prev = (self.initial_unserved, self.initial_cost);
        for e in &self.entries {
            if e.unserved > prev.0 || (e.unserved == prev.0 && e.cost > prev.1 + slack) {
                return false;
            }
            prev = (e.unserved, e.cost);
        }
        true
    }
}

/// CSV rows `iteration,step,block,cost`; the first row is the starting point.
pub fn write_trace_csv<W: Write>(out: W, trace: &SolverTrace) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "step", "block", "cost"])?;
    w.write_record(["0", "0", "init", &trace.initial_cost.to_string()])?;
    for e in &trace.entries {
        w.write_record([
            e.iteration.to_string(),
            e.step.to_string(),
            e.block.name().to_string(),
            e.cost.to_string(),
        ])?;
    }
    w.flush()
}

const STREAM_BASELINE_A: u64 = 0xA;
const STREAM_BASELINE_R: u64 = 0xB;
const STREAM_STARTS: u64 = 0xC;

/// A scenario bound to its channel state and solver parameters.
pub struct Solver<'a> {
    scenario: &'a Scenario,
    channel: ChannelState,
    params: SolverParams,
}

impl<'a> Solver<'a> {
    pub fn new(scenario: &'a Scenario, params: &SolverParams) -> Result<Self> {
        scenario.validate()?;
        params.validate()?;
        Ok(Self {
            scenario,
            channel: ChannelState::new(scenario),
            params: params.clone(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn channel(&self) -> &ChannelState {
        &self.channel
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    fn cost_of(&self, device: usize, rb: Option<usize>, server: Option<usize>, power: f64, theta: f64) -> f64 {
        evaluate_device(
            self.scenario,
            &self.channel,
            &self.params.cost,
            device,
            rb,
            server,
            power,
            theta,
        )
        .cost
    }

    fn device_cost(&self, sol: &AllocationSolution, d: usize) -> f64 {
        self.cost_of(d, sol.rb[d], sol.server[d], sol.power[d], sol.theta[d])
    }

    pub fn objective(&self, sol: &AllocationSolution) -> Objective {
        let mut unserved = 0;
        let mut cost = 0.0;
        for d in 0..self.scenario.num_devices() {
            let c = self.device_cost(sol, d);
            if c.is_finite() {
                cost += c;
            } else {
                unserved += 1;
            }
        }
        Objective { unserved, cost }
    }

    pub fn evaluate(&self, sol: &AllocationSolution) -> Result<CostBreakdown> {
        total_cost(sol, self.scenario, &self.channel, &self.params.cost)
    }

    /// Starting point shared by the proposed scheme and both baselines:
    /// full power, theta at its upper bound, device `i` on RB `i`, and
    /// devices associated greedily (in id order) with the nearest server
    /// that still has room.
    pub fn initial_solution(&self) -> AllocationSolution {
        let s = self.scenario;
        let n = s.num_devices();
        let mut sol = AllocationSolution::empty(n, self.params.cost.theta_max);
        for (d, dev) in s.devices.iter().enumerate() {
            sol.power[d] = dev.max_tx_power;
            if d < s.num_rbs() {
                sol.rb[d] = Some(d);
            }
        }
        let mut room: Vec<usize> = s.edge_servers.iter().map(|e| e.capacity).collect();
        for d in 0..n {
            let nearest = (0..s.num_servers())
                .filter(|&k| room[k] > 0)
                .max_by(|&a, &b| {
                    self.channel
                        .gain(d, a)
                        .total_cmp(&self.channel.gain(d, b))
                        .then(b.cmp(&a))
                });
            if let Some(k) = nearest {
                room[k] -= 1;
                sol.server[d] = Some(k);
            }
        }
        sol.refresh_feasible();
        sol
    }

    /// Penalty scale that dominates any achievable served cost.
    fn penalty_scale(&self, costs: impl Iterator<Item = f64>) -> f64 {
        1.0 + 2.0 * costs.filter(|c| c.is_finite()).sum::<f64>()
    }

    /// Apply `candidate` only if it strictly improves the objective.
    fn accept(&self, sol: &mut AllocationSolution, candidate: AllocationSolution) {
        if self.objective(&candidate).improves_on(&self.objective(sol)) {
            *sol = candidate;
            sol.refresh_feasible();
        }
    }

    /// Exact minimisation over one-to-one device/RB pairings with power,
    /// association and theta fixed.
    pub fn update_rb_block(&self, sol: &mut AllocationSolution) {
        let n = self.scenario.num_devices();
        let r = self.scenario.num_rbs();
        if n == 0 {
            return;
        }
        let real: Vec<Vec<f64>> = (0..n)
            .map(|d| {
                (0..r)
                    .map(|k| self.cost_of(d, Some(k), sol.server[d], sol.power[d], sol.theta[d]))
                    .collect()
            })
            .collect();
        let big = self.penalty_scale(real.iter().map(|row| row.iter().copied().filter(|c| c.is_finite()).fold(0.0, f64::max)));
        let matrix = self.padded_matrix(n, &real, |d| sol.server[d].is_some(), big);
        let pick = min_cost_assignment(&matrix);
        let mut candidate = sol.clone();
        for d in 0..n {
            candidate.rb[d] = (pick[d] < r).then_some(pick[d]);
        }
        self.accept(sol, candidate);
    }

    /// Exact minimisation over capacity-respecting associations with power,
    /// RB and theta fixed. Each server contributes one column per unit of
    /// capacity.
    pub fn update_association_block(&self, sol: &mut AllocationSolution) {
        let s = self.scenario;
        let n = s.num_devices();
        if n == 0 {
            return;
        }
        let slots = self.capacity_slots();
        let per_server: Vec<Vec<f64>> = (0..n)
            .map(|d| {
                (0..s.num_servers())
                    .map(|k| self.cost_of(d, sol.rb[d], Some(k), sol.power[d], sol.theta[d]))
                    .collect()
            })
            .collect();
        let big = self.penalty_scale(per_server.iter().map(|row| row.iter().copied().filter(|c| c.is_finite()).fold(0.0, f64::max)));
        let real: Vec<Vec<f64>> = per_server
            .iter()
            .map(|row| slots.iter().map(|&k| row[k]).collect())
            .collect();
        let matrix = self.padded_matrix(n, &real, |d| sol.rb[d].is_some(), big);
        let pick = min_cost_assignment(&matrix);
        let mut candidate = sol.clone();
        for d in 0..n {
            candidate.server[d] = slots.get(pick[d]).copied();
        }
        self.accept(sol, candidate);
    }

    /// Real columns followed by one "leave unassigned" column per device.
    ///
    /// A device that holds the other resource (`holds_other`) pays `4 * big`
    /// for staying out, so coverage is maximised before cost. A device
    /// without it is unserved regardless; it may take a spare column for free
    /// but never displaces a device that would become served.
    fn padded_matrix(
        &self,
        n: usize,
        real: &[Vec<f64>],
        holds_other: impl Fn(usize) -> bool,
        big: f64,
    ) -> Vec<Vec<f64>> {
        (0..n)
            .map(|d| {
                let holds = holds_other(d);
                let out_penalty = if holds { 4.0 * big } else { big };
                let mut row: Vec<f64> = real[d]
                    .iter()
                    .map(|&c| match (holds, c.is_finite()) {
                        (true, true) => c,
                        (true, false) => out_penalty,
                        (false, _) => 0.0,
                    })
                    .collect();
                row.extend(std::iter::repeat_n(out_penalty, n));
                row
            })
            .collect()
    }

    /// Per-device power minimisation over `[min_power, max_tx_power]`.
    ///
    /// The per-device cost is (affine in p) / (concave in p), hence
    /// quasiconvex, so golden-section search finds its minimiser. Endpoints
    /// and the current value are compared explicitly and the device keeps
    /// its current power unless a candidate is strictly cheaper.
    pub fn update_power_block(&self, sol: &mut AllocationSolution) {
        for d in 0..self.scenario.num_devices() {
            if !sol.is_served(d) {
                continue;
            }
            let p_max = self.scenario.devices[d].max_tx_power;
            let p_min = self.params.min_power.min(p_max);
            let f = |p: f64| self.cost_of(d, sol.rb[d], sol.server[d], p, sol.theta[d]);
            let mut best = (sol.power[d], f(sol.power[d]));
            for p in [golden_section(f, p_min, p_max), p_max, p_min] {
                let c = f(p);
                if c < best.1 {
                    best = (p, c);
                }
            }
            sol.power[d] = best.0;
        }
    }

    /// Relative local accuracy. With the transmission-only cost the factor
    /// (1 + theta) makes `theta_min` optimal for everyone. With local
    /// computation included, the cost is increasing in theta between the
    /// breakpoints of ceil(a ln(1/theta)), so the minimiser is `theta_min` or
    /// one of the breakpoints exp(-k/a).
    pub fn update_theta_block(&self, sol: &mut AllocationSolution) {
        let cp = &self.params.cost;
        if !cp.include_local_compute {
            sol.theta.iter_mut().for_each(|t| *t = cp.theta_min);
            return;
        }
        let candidates = theta_candidates(cp);
        for d in 0..self.scenario.num_devices() {
            if !sol.is_served(d) {
                continue;
            }
            let f = |t: f64| self.cost_of(d, sol.rb[d], sol.server[d], sol.power[d], t);
            let mut best = (sol.theta[d], f(sol.theta[d]));
            for &t in &candidates {
                let c = f(t);
                if c < best.1 {
                    best = (t, c);
                }
            }
            sol.theta[d] = best.0;
        }
    }

    pub fn update_block(&self, block: Block, sol: &mut AllocationSolution) {
        match block {
            Block::Assoc => self.update_association_block(sol),
            Block::Rb => self.update_rb_block(sol),
            Block::Power => self.update_power_block(sol),
            Block::Theta => self.update_theta_block(sol),
        }
    }

    /// Cycle the non-frozen blocks from `start` until a full cycle improves
    /// the cost by less than the tolerance, or the cycle budget runs out.
    pub fn run_from(&self, start: AllocationSolution, frozen: &[Block]) -> (AllocationSolution, SolverTrace) {
        let mut sol = start;
        sol.refresh_feasible();
        let mut obj = self.objective(&sol);
        let mut trace = SolverTrace {
            initial_cost: obj.cost,
            initial_unserved: obj.unserved,
            entries: Vec::new(),
            converged: false,
            iterations_used: 0,
        };
        let mut step = 0;
        for iteration in 1..=self.params.max_iterations {
            let before = obj;
            for block in Block::ORDER.into_iter().filter(|b| !frozen.contains(b)) {
                self.update_block(block, &mut sol);
                obj = self.objective(&sol);
                step += 1;
                trace.entries.push(TraceEntry {
                    iteration,
                    step,
                    block,
                    cost: obj.cost,
                    unserved: obj.unserved,
                });
            }
            trace.iterations_used = iteration;
            if obj.unserved == before.unserved {
                let gain = before.cost - obj.cost;
                if gain <= self.params.tolerance * before.cost.abs() {
                    trace.converged = true;
                    break;
                }
            }
        }
        sol.refresh_feasible();
        (sol, trace)
    }

    fn capacity_slots(&self) -> Vec<usize> {
        let n = self.scenario.num_devices();
        self.scenario
            .edge_servers
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.id, e.capacity.min(n)))
            .collect()
    }

    /// `base` followed by `starts - 1` perturbed copies whose non-frozen
    /// RB and association blocks are redrawn at random.
    fn starting_points(&self, base: AllocationSolution, frozen: &[Block], tag: u64) -> Vec<AllocationSolution> {
        let mut out = vec![base.clone()];
        for k in 1..self.params.starts {
            let mut rng = rng::stream(self.scenario.seed, &[STREAM_STARTS, tag, k as u64]);
            let mut start = base.clone();
            // Random device order so every device subset can be served when resources run short.
            let mut order: Vec<usize> = (0..start.num_devices()).collect();
            order.shuffle(&mut rng);
            if !frozen.contains(&Block::Rb) {
                let mut rbs: Vec<usize> = (0..self.scenario.num_rbs()).collect();
                rbs.shuffle(&mut rng);
                for (k, &d) in order.iter().enumerate() {
                    start.rb[d] = rbs.get(k).copied();
                }
            }
            if !frozen.contains(&Block::Assoc) {
                let mut slots = self.capacity_slots();
                slots.shuffle(&mut rng);
                for (k, &d) in order.iter().enumerate() {
                    start.server[d] = slots.get(k).copied();
                }
            }
            out.push(start);
        }
        out
    }

    /// Runs BSUM from every starting point and keeps the best result
    /// (earliest start on ties).
    fn best_of(&self, starts: Vec<AllocationSolution>, frozen: &[Block]) -> (AllocationSolution, SolverTrace) {
        let mut best: Option<(Objective, AllocationSolution, SolverTrace)> = None;
        for start in starts {
            let (sol, trace) = self.run_from(start, frozen);
            let obj = self.objective(&sol);
            if best.as_ref().is_none_or(|(b, _, _)| obj.improves_on(b)) {
                best = Some((obj, sol, trace));
            }
        }
        let (_, sol, trace) = best.expect("at least one starting point");
        (sol, trace)
    }

    fn run_checked(&self, base: AllocationSolution, frozen: &[Block], tag: u64) -> Result<(AllocationSolution, SolverTrace)> {
        let result = self.best_of(self.starting_points(base, frozen, tag), frozen);
        if self.params.require_full_coverage && !result.0.unserved().is_empty() {
            return Err(Error::Infeasible {
                uncovered: result.0.unserved(),
            });
        }
        Ok(result)
    }

    /// The proposed scheme: all four blocks optimised.
    pub fn solve(&self) -> Result<(AllocationSolution, SolverTrace)> {
        self.run_checked(self.initial_solution(), &[], 0)
    }

    /// Random one-to-one RB assignment, frozen; the other blocks optimised.
    pub fn baseline_a(&self, seed: u64) -> Result<(AllocationSolution, SolverTrace)> {
        let mut start = self.initial_solution();
        let mut rbs: Vec<usize> = (0..self.scenario.num_rbs()).collect();
        rbs.shuffle(&mut rng::stream(seed, &[STREAM_BASELINE_A]));
        for (d, slot) in start.rb.iter_mut().enumerate() {
            *slot = rbs.get(d).copied();
        }
        self.run_checked(start, &[Block::Rb], STREAM_BASELINE_A)
    }

    /// Random capacity-respecting association, frozen; the other blocks optimised.
    pub fn baseline_r(&self, seed: u64) -> Result<(AllocationSolution, SolverTrace)> {
        let mut start = self.initial_solution();
        let mut slots = self.capacity_slots();
        slots.shuffle(&mut rng::stream(seed, &[STREAM_BASELINE_R]));
        for (d, slot) in start.server.iter_mut().enumerate() {
            *slot = slots.get(d).copied();
        }
        self.run_checked(start, &[Block::Assoc], STREAM_BASELINE_R)
    }
}

/// Candidate minimisers of the compute-coupled theta cost.
fn theta_candidates(cp: &CostParams) -> Vec<f64> {
    let mut out = vec![cp.theta_min];
    if cp.iteration_coeff <= 0.0 {
        return out;
    }
    let k_lo = local_iterations(cp.theta_max, cp.iteration_coeff).unwrap_or(0);
    let k_hi = local_iterations(cp.theta_min, cp.iteration_coeff).unwrap_or(0);
    for k in k_lo..=k_hi {
        let mut t = (-(k as f64) / cp.iteration_coeff).exp();
        // exp/ln round-trip can land just left of the breakpoint.
        while t < cp.theta_max && local_iterations(t, cp.iteration_coeff).is_ok_and(|i| i > k) {
            t = t.next_up();
        }
        if (cp.theta_min..=cp.theta_max).contains(&t) {
            out.push(t);
        }
    }
    out
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimiser of a unimodal `f` on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if hi <= lo {
        return hi;
    }
    let tol = 1e-12 * hi.abs().max(1e-300);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

pub fn solve(scenario: &Scenario, params: &SolverParams) -> Result<(AllocationSolution, SolverTrace)> {
    Solver::new(scenario, params)?.solve()
}

pub fn baseline_a(scenario: &Scenario, params: &SolverParams, seed: u64) -> Result<(AllocationSolution, SolverTrace)> {
    Solver::new(scenario, params)?.baseline_a(seed)
}

pub fn baseline_r(scenario: &Scenario, params: &SolverParams, seed: u64) -> Result<(AllocationSolution, SolverTrace)> {
    Solver::new(scenario, params)?.baseline_r(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-9);
        let x = golden_section(|x| -x, 0.0, 2.0);
        assert!((x - 2.0).abs() < 1e-9);
    }

    #[test]
    fn theta_candidates_sit_on_breakpoints() {
        let cp = CostParams::default();
        let c = theta_candidates(&cp);
        assert_eq!(c[0], cp.theta_min);
        for &t in &c[1..] {
            assert!((cp.theta_min..=cp.theta_max).contains(&t));
            let k = local_iterations(t, cp.iteration_coeff).unwrap();
            assert!((t - (-(k as f64) / cp.iteration_coeff).exp()).abs() < 1e-12, "t={t} k={k}");
        }
    }

    #[test]
    fn objective_ordering_is_lexicographic() {
        let a = Objective { unserved: 0, cost: 100.0 };
        let b = Objective { unserved: 1, cost: 1.0 };
        assert!(a.improves_on(&b));
        assert!(!b.improves_on(&a));
        assert!(!a.improves_on(&a));
    }
}
