//! Experiment configuration: one TOML file, every section optional.

use std::path::Path;

use dsfl_core::{CostParams, ScenarioConfig, SolverParams};
use dsfl_learn::TrainHyper;
use serde::{Deserialize, Serialize};

use crate::error::{config, io, Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub cost: CostParams,
    pub solver: SolverSection,
    pub training: TrainingSection,
    pub experiment: ExperimentSection,
    pub cost_surface: CostSurfaceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub min_power_w: f64,
    pub require_full_coverage: bool,
    pub starts: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let p = SolverParams::default();
        SolverSection {
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
            min_power_w: p.min_power,
            require_full_coverage: p.require_full_coverage,
            starts: p.starts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub devices: usize,
    pub servers: usize,
    pub num_shards: usize,
    pub shard_size: usize,
    pub rounds: usize,
    /// Rounds between edge aggregations.
    pub edge_period: usize,
    /// Edge aggregations per global aggregation; one DSFL curve per value.
    pub k_values: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_layers: Vec<usize>,
    pub cut_index: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let h = TrainHyper::default();
        TrainingSection {
            devices: 20,
            servers: 6,
            num_shards: 200,
            shard_size: 300,
            rounds: h.rounds,
            edge_period: h.edge_period,
            k_values: vec![2, 4],
            batch_size: h.batch_size,
            learning_rate: h.learning_rate,
            hidden_layers: h.hidden_layers,
            cut_index: h.cut_index,
        }
    }
}

impl TrainingSection {
    pub fn hyper(&self, k: usize, seed: u64) -> TrainHyper {
        TrainHyper {
            rounds: self.rounds,
            edge_period: self.edge_period,
            global_period: k,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            hidden_layers: self.hidden_layers.clone(),
            cut_index: self.cut_index,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub solver_seeds: Vec<u64>,
    pub training_seeds: Vec<u64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            solver_seeds: (0..20).collect(),
            training_seeds: vec![0, 1, 2],
        }
    }
}

/// Single-device reference geometry. SINR is swept by moving the
/// interferer of each resource block away from the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSurfaceSection {
    pub theta_points: usize,
    pub sinr_points: usize,
    pub device_distance_m: f64,
    pub interferer_min_distance_m: f64,
    pub interferer_max_distance_m: f64,
}

impl Default for CostSurfaceSection {
    fn default() -> Self {
        CostSurfaceSection {
            theta_points: 10,
            sinr_points: 10,
            device_distance_m: 50.0,
            interferer_min_distance_m: 100.0,
            interferer_max_distance_m: 3000.0,
        }
    }
}

impl Config {
    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            min_power: self.solver.min_power_w,
            require_full_coverage: self.solver.require_full_coverage,
            starts: self.solver.starts,
            cost: self.cost.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().map_err(prefix("scenario"))?;
        self.cost.validate().map_err(prefix("cost"))?;
        self.solver_params().validate().map_err(prefix("solver"))?;

        let t = &self.training;
        for (key, v) in [
            ("training.devices", t.devices),
            ("training.servers", t.servers),
            ("training.num_shards", t.num_shards),
            ("training.shard_size", t.shard_size),
        ] {
            if v == 0 {
                return Err(config(key, "must be >= 1"));
            }
        }
        if t.devices > t.num_shards {
            return Err(config("training.devices", format!("must be <= training.num_shards ({})", t.num_shards)));
        }
        if t.k_values.is_empty() || t.k_values.contains(&0) {
            return Err(config("training.k_values", "must be a nonempty list of values >= 1"));
        }
        t.hyper(1, 0).validate().map_err(|e| match e {
            dsfl_learn::Error::InvalidConfig { key, reason } => config(&format!("training.{key}"), reason),
            other => other.into(),
        })?;

        if self.experiment.solver_seeds.is_empty() {
            return Err(config("experiment.solver_seeds", "must not be empty"));
        }
        if self.experiment.training_seeds.is_empty() {
            return Err(config("experiment.training_seeds", "must not be empty"));
        }

        let c = &self.cost_surface;
        if c.theta_points < 2 {
            return Err(config("cost_surface.theta_points", "must be >= 2"));
        }
        if c.sinr_points < 2 {
            return Err(config("cost_surface.sinr_points", "must be >= 2"));
        }
        if !(c.device_distance_m.is_finite() && c.device_distance_m > 0.0) {
            return Err(config("cost_surface.device_distance_m", "must be > 0"));
        }
        if !(c.interferer_min_distance_m > 0.0 && c.interferer_max_distance_m > c.interferer_min_distance_m)
            || !c.interferer_max_distance_m.is_finite()
        {
            return Err(config(
                "cost_surface.interferer_min_distance_m",
                "need 0 < interferer_min_distance_m < interferer_max_distance_m",
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> std::result::Result<Config, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let cfg = Config::from_toml(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn prefix(section: &'static str) -> impl Fn(dsfl_core::Error) -> Error {
    move |e| match e {
        dsfl_core::Error::InvalidConfig { key, reason } => config(&format!("{section}.{key}"), reason),
        other => other.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        let cfg = Config::from_toml(text).unwrap();
        match cfg.validate() {
            Err(Error::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = Config::from_toml("").unwrap();
        assert_eq!(cfg, Config::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.scenario.devices, 48);
        assert_eq!(cfg.training.devices, 20);
        assert_eq!(cfg.experiment.solver_seeds.len(), 20);
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = Config {
            experiment: ExperimentSection {
                solver_seeds: vec![3, 9],
                training_seeds: vec![1],
            },
            ..Config::default()
        };
        let text = cfg.to_toml();
        let again = Config::from_toml(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), text);
        let mut capped = cfg.clone();
        capped.scenario.server_capacity = Some(5);
        assert_eq!(Config::from_toml(&capped.to_toml()).unwrap(), capped);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Config::from_toml("[solver]\ntolerence = 1e-3\n").unwrap_err();
        assert!(err.to_string().contains("tolerence"), "{err}");
        assert!(Config::from_toml("[nonsense]\n").is_err());
    }

    #[test]
    fn invalid_values_name_their_key() {
        assert!(key_of("[scenario]\nrb_bandwidth_hz = -180e3\n").contains("bandwidth"));
        assert_eq!(key_of("[cost]\nweight_latency = 0.9\n"), "cost.weight_latency");
        assert_eq!(key_of("[solver]\ntolerance = 0.0\n"), "solver.tolerance");
        assert_eq!(key_of("[training]\ncut_index = 3\n"), "training.cut_index");
        assert_eq!(key_of("[training]\nk_values = []\n"), "training.k_values");
        assert_eq!(key_of("[experiment]\nsolver_seeds = []\n"), "experiment.solver_seeds");
        assert_eq!(key_of("[cost_surface]\ntheta_points = 1\n"), "cost_surface.theta_points");
    }
}
