//! The three experiments and their CSV products.

use std::fs;
use std::path::{Path, PathBuf};

use dsfl_core::scenario::{Device, EdgeServer, Position, ResourceBlock};
use dsfl_core::units::{dbm_to_watts, linear_to_db};
use dsfl_core::{
    generate_scenario, sinr, total_cost, AllocationSolution, ChannelState, Scenario, ScenarioConfig, Solver,
    SolverTrace,
};
use dsfl_learn::{run_dsfl, run_sfl, shard_non_iid, Mnist, RoundMetrics};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{io, Result};

pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub theta: f64,
    pub sinr_db: f64,
    pub cost: f64,
}

/// One device, one server and one resource block per SINR level; the
/// interferer distances are log-spaced so SINR levels are roughly even in dB.
pub fn cost_surface_scenario(cfg: &Config) -> Scenario {
    let c = &cfg.cost_surface;
    let s = &cfg.scenario;
    let centre = s.area_side_m / 2.0;
    let ratio = c.interferer_max_distance_m / c.interferer_min_distance_m;
    let resource_blocks = (0..c.sinr_points)
        .map(|k| {
            let t = k as f64 / (c.sinr_points - 1) as f64;
            let dist = c.interferer_min_distance_m * ratio.powf(t);
            ResourceBlock {
                id: k,
                bandwidth: s.rb_bandwidth_hz,
                cellular_user: Position::new(centre, centre + dist),
                cellular_tx_power: dbm_to_watts(s.cellular_tx_power_dbm),
            }
        })
        .collect();
    Scenario {
        area_side: s.area_side_m,
        devices: vec![Device {
            id: 0,
            position: Position::new(centre - c.device_distance_m, centre),
            max_tx_power: dbm_to_watts(s.device_max_tx_power_dbm),
            cpu_freq: s.device_cpu_hz,
            dataset_size: s.device_dataset_size,
        }],
        edge_servers: vec![EdgeServer {
            id: 0,
            position: Position::new(centre, centre),
            capacity: 1,
        }],
        resource_blocks,
        carrier_freq: s.carrier_freq_hz,
        noise_psd: dbm_to_watts(s.noise_psd_dbm_hz),
        seed: 0,
    }
}

/// Device cost at full power over a (theta, SINR) grid, theta-major.
pub fn run_cost_surface(cfg: &Config) -> Result<Vec<SurfacePoint>> {
    cfg.validate()?;
    let scenario = cost_surface_scenario(cfg);
    let channel = ChannelState::new(&scenario);
    let p = scenario.devices[0].max_tx_power;
    let (lo, hi) = (cfg.cost.theta_min, cfg.cost.theta_max);
    let n = cfg.cost_surface.theta_points;
    let mut out = Vec::with_capacity(n * scenario.num_rbs());
    for i in 0..n {
        let theta = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        for rb in 0..scenario.num_rbs() {
            let sol = AllocationSolution {
                power: vec![p],
                rb: vec![Some(rb)],
                server: vec![Some(0)],
                theta: vec![theta],
                feasible: true,
            };
            out.push(SurfacePoint {
                theta,
                sinr_db: linear_to_db(sinr(0, rb, 0, p, &scenario, &channel)?),
                cost: total_cost(&sol, &scenario, &channel, &cfg.cost)?.total_cost,
            });
        }
    }
    Ok(out)
}

pub const SCHEMES: [&str; 3] = ["proposed", "baseline_a", "baseline_r"];

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub scheme: &'static str,
    pub seed: u64,
    pub solution: AllocationSolution,
    pub trace: SolverTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSummary {
    pub scheme: &'static str,
    pub seeds: usize,
    pub mean_final_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverComparison {
    /// Ordered by scheme, then seed.
    pub runs: Vec<SchemeRun>,
    pub summary: Vec<SchemeSummary>,
}

/// Proposed solver and both baselines on the configured scenario, once per seed.
pub fn run_solver_compare(cfg: &Config) -> Result<SolverComparison> {
    cfg.validate()?;
    let params = cfg.solver_params();
    let per_seed: Vec<[SchemeRun; 3]> = cfg
        .experiment
        .solver_seeds
        .par_iter()
        .map(|&seed| -> Result<[SchemeRun; 3]> {
            let scenario = generate_scenario(&cfg.scenario, seed)?;
            let solver = Solver::new(&scenario, &params)?;
            let run = |scheme, (solution, trace)| SchemeRun {
                scheme,
                seed,
                solution,
                trace,
            };
            Ok([
                run(SCHEMES[0], solver.solve()?),
                run(SCHEMES[1], solver.baseline_a(seed)?),
                run(SCHEMES[2], solver.baseline_r(seed)?),
            ])
        })
        .collect::<Result<_>>()?;
    let runs: Vec<SchemeRun> = (0..SCHEMES.len())
        .flat_map(|s| per_seed.iter().map(move |r| r[s].clone()))
        .collect();
    let summary = SCHEMES
        .iter()
        .map(|&scheme| {
            let finals: Vec<f64> = runs.iter().filter(|r| r.scheme == scheme).map(|r| r.trace.final_cost()).collect();
            SchemeSummary {
                scheme,
                seeds: finals.len(),
                mean_final_cost: finals.iter().sum::<f64>() / finals.len() as f64,
            }
        })
        .collect();
    Ok(SolverComparison { runs, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub protocol: &'static str,
    /// None for SFL.
    pub k: Option<usize>,
    pub seed: u64,
    pub metrics: RoundMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCurves {
    /// Ordered by protocol (DSFL per k ascending, then SFL), seed, round.
    pub rows: Vec<CurveRow>,
    /// (seed, device, edge server) used by DSFL.
    pub association: Vec<(u64, usize, usize)>,
}

/// Scenario whose BSUM association groups the training devices into edges.
pub fn training_scenario(cfg: &Config, seed: u64) -> Result<Scenario> {
    let t = &cfg.training;
    let sc = ScenarioConfig {
        devices: t.devices,
        servers: t.servers,
        resource_blocks: t.devices.max(cfg.scenario.resource_blocks),
        ..cfg.scenario.clone()
    };
    Ok(generate_scenario(&sc, seed)?)
}

/// DSFL for every configured `k` and SFL, with shared seeds.
pub fn run_training_curves(cfg: &Config, data: &Mnist) -> Result<TrainingCurves> {
    cfg.validate()?;
    let t = &cfg.training;
    let mut ks = t.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let params = cfg.solver_params();

    let per_seed: Vec<(Vec<CurveRow>, Vec<(u64, usize, usize)>)> = cfg
        .experiment
        .training_seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let scenario = training_scenario(cfg, seed)?;
            let (sol, _) = Solver::new(&scenario, &params)?.solve()?;
            let shards = shard_non_iid(&data.train, t.num_shards, t.shard_size, t.devices, seed)?;
            let mut rows = Vec::new();
            for &k in &ks {
                let m = run_dsfl(&sol.server, &data.train, &data.test, &shards, &t.hyper(k, seed))?;
                rows.extend(m.into_iter().map(|metrics| CurveRow {
                    protocol: "dsfl",
                    k: Some(k),
                    seed,
                    metrics,
                }));
            }
            let m = run_sfl(&data.train, &data.test, &shards, &t.hyper(1, seed))?;
            rows.extend(m.into_iter().map(|metrics| CurveRow {
                protocol: "sfl",
                k: None,
                seed,
                metrics,
            }));
            let assoc = sol
                .server
                .iter()
                .enumerate()
                .filter_map(|(d, s)| s.map(|s| (seed, d, s)))
                .collect();
            Ok((rows, assoc))
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<CurveRow> = per_seed.iter().flat_map(|(r, _)| r.iter().cloned()).collect();
    let order = |r: &CurveRow| (r.protocol == "sfl", r.k, r.seed, r.metrics.round);
    rows.sort_by_key(order);
    let association = per_seed.into_iter().flat_map(|(_, a)| a).collect();
    Ok(TrainingCurves { rows, association })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path).map_err(io(path))?))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<PathBuf> {
    w.flush().map_err(io(path))?;
    Ok(path.to_path_buf())
}

pub fn write_cost_surface(dir: &Path, points: &[SurfacePoint]) -> Result<PathBuf> {
    let path = dir.join("cost_surface.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["theta", "sinr_db", "cost"])?;
    for p in points {
        w.write_record([p.theta.to_string(), p.sinr_db.to_string(), p.cost.to_string()])?;
    }
    finish(w, &path)
}

pub fn write_solver_compare(dir: &Path, cmp: &SolverComparison) -> Result<Vec<PathBuf>> {
    let path = dir.join("solver_traces.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["scheme", "seed", "iteration", "step", "block", "cost"])?;
    for run in &cmp.runs {
        let seed = run.seed.to_string();
        w.write_record([run.scheme, &seed, "0", "0", "init", &run.trace.initial_cost.to_string()])?;
        for e in &run.trace.entries {
            w.write_record([
                run.scheme,
                &seed,
                &e.iteration.to_string(),
                &e.step.to_string(),
                e.block.name(),
                &e.cost.to_string(),
            ])?;
        }
    }
    let traces = finish(w, &path)?;

    let path = dir.join("solver_summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["scheme", "seeds", "mean_final_cost"])?;
    for s in &cmp.summary {
        w.write_record([s.scheme, &s.seeds.to_string(), &s.mean_final_cost.to_string()])?;
    }
    Ok(vec![traces, finish(w, &path)?])
}

pub fn write_training_curves(dir: &Path, curves: &TrainingCurves) -> Result<Vec<PathBuf>> {
    let path = dir.join("training_curves.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "protocol",
        "k",
        "seed",
        "round",
        "accuracy",
        "loss",
        "edge_aggs",
        "global_aggs",
        "bits_up",
    ])?;
    for r in &curves.rows {
        let m = &r.metrics;
        w.write_record([
            r.protocol.to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.seed.to_string(),
            m.round.to_string(),
            m.test_accuracy.to_string(),
            m.train_loss.to_string(),
            m.edge_aggregations.to_string(),
            m.global_aggregations.to_string(),
            m.bits_uplinked.to_string(),
        ])?;
    }
    let curves_path = finish(w, &path)?;

    let path = dir.join("association.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["seed", "device_id", "server_id"])?;
    for (seed, d, s) in &curves.association {
        w.write_record([seed.to_string(), d.to_string(), s.to_string()])?;
    }
    Ok(vec![curves_path, finish(w, &path)?])
}

/// Per-device allocation: rb and server are empty for unserved devices.
pub fn write_allocation(dir: &Path, sol: &AllocationSolution) -> Result<PathBuf> {
    let path = dir.join("allocation.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["device_id", "rb_id", "server_id", "power_w", "theta"])?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for d in 0..sol.num_devices() {
        w.write_record([
            d.to_string(),
            opt(sol.rb[d]),
            opt(sol.server[d]),
            sol.power[d].to_string(),
            sol.theta[d].to_string(),
        ])?;
    }
    finish(w, &path)
}

/// Creates `dir` and writes the resolved configuration into it.
pub fn prepare_output(dir: &Path, cfg: &Config) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(CONFIG_ECHO);
    fs::write(&path, cfg.to_toml()).map_err(io(&path))?;
    Ok(path)
}
