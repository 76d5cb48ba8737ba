use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dsfl_core::bsum::write_trace_csv;
use dsfl_core::cost::write_breakdown_csv;
use dsfl_core::{generate_scenario, total_cost, Solver};
use dsfl_learn::idx::DATA_DIR_ENV;
use dsfl_learn::Mnist;
use dsfl_sim::error::{exit, io};
use dsfl_sim::experiments::*;
use dsfl_sim::{Config, Result};

#[derive(Parser)]
#[command(name = "dsfl", version, about = "DSFL resource allocation and training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; the resolved configuration is written here too.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Proposed,
    BaselineA,
    BaselineR,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write a JSON snapshot.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve one allocation problem.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "proposed")]
        scheme: Scheme,
    },
    /// Tabulate device cost over a (theta, SINR) grid.
    CostSurface {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the proposed solver with both baselines.
    SolverCompare {
        #[command(flatten)]
        common: Common,
        /// Seeds as `a..b`, a comma list, or one value.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<Seeds>,
    },
    /// Train DSFL and SFL on non-IID MNIST.
    TrainCurves {
        #[command(flatten)]
        common: Common,
        /// Training seeds; same syntax as for solver-compare.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<Seeds>,
        /// Directory with the four MNIST IDX files.
        #[arg(long, env = DATA_DIR_ENV, default_value = "data/mnist")]
        data_dir: PathBuf,
    },
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let bad = |e: std::num::ParseIntError| format!("bad seed list `{s}`: {e}");
    let seeds: Vec<u64> = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(bad)?..b.trim().parse().map_err(bad)?).collect(),
        None => s.split(',').map(|x| x.trim().parse().map_err(bad)).collect::<std::result::Result<_, _>>()?,
    };
    if seeds.is_empty() {
        return Err(format!("seed list `{s}` is empty"));
    }
    Ok(Seeds(seeds))
}

fn load_config(common: &Common) -> Result<Config> {
    match &common.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default()),
    }
}

fn write_with(path: &Path, f: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<PathBuf> {
    let mut file = fs::File::create(path).map_err(io(path))?;
    f(&mut file).map_err(io(path))?;
    Ok(path.to_path_buf())
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Scenario { common, seed } => {
            let cfg = load_config(&common)?;
            let mut files = vec![prepare_output(&common.out, &cfg)?];
            let scenario = generate_scenario(&cfg.scenario, seed)?;
            let path = common.out.join("scenario.json");
            files.push(write_with(&path, |f| {
                serde_json::to_writer_pretty(f, &scenario).map_err(std::io::Error::other)
            })?);
            Ok(files)
        }
        Command::Optimize { common, seed, scheme } => {
            let cfg = load_config(&common)?;
            let mut files = vec![prepare_output(&common.out, &cfg)?];
            let scenario = generate_scenario(&cfg.scenario, seed)?;
            let solver = Solver::new(&scenario, &cfg.solver_params())?;
            let (sol, trace) = match scheme {
                Scheme::Proposed => solver.solve()?,
                Scheme::BaselineA => solver.baseline_a(seed)?,
                Scheme::BaselineR => solver.baseline_r(seed)?,
            };
            let breakdown = total_cost(&sol, &scenario, solver.channel(), &cfg.cost)?;
            println!(
                "total cost {} after {} cycles (converged: {})",
                breakdown.total_cost, trace.iterations_used, trace.converged
            );
            files.push(write_allocation(&common.out, &sol)?);
            files.push(write_with(&common.out.join("breakdown.csv"), |f| write_breakdown_csv(f, &breakdown))?);
            files.push(write_with(&common.out.join("trace.csv"), |f| write_trace_csv(f, &trace))?);
            Ok(files)
        }
        Command::CostSurface { common } => {
            let cfg = load_config(&common)?;
            let points = run_cost_surface(&cfg)?;
            Ok(vec![prepare_output(&common.out, &cfg)?, write_cost_surface(&common.out, &points)?])
        }
        Command::SolverCompare { common, seeds } => {
            let mut cfg = load_config(&common)?;
            if let Some(Seeds(seeds)) = seeds {
                cfg.experiment.solver_seeds = seeds;
            }
            let cmp = run_solver_compare(&cfg)?;
            for s in &cmp.summary {
                println!("{:<11} mean final cost {:.6} over {} seeds", s.scheme, s.mean_final_cost, s.seeds);
            }
            let mut files = vec![prepare_output(&common.out, &cfg)?];
            files.extend(write_solver_compare(&common.out, &cmp)?);
            Ok(files)
        }
        Command::TrainCurves { common, seeds, data_dir } => {
            let mut cfg = load_config(&common)?;
            if let Some(Seeds(seeds)) = seeds {
                cfg.experiment.training_seeds = seeds;
            }
            cfg.validate()?;
            let data = Mnist::load(&data_dir)?;
            let curves = run_training_curves(&cfg, &data)?;
            let mut files = vec![prepare_output(&common.out, &cfg)?];
            files.extend(write_training_curves(&common.out, &curves)?);
            Ok(files)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(exit::OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
