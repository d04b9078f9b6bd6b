use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ihomp::experiment::{
    fmt9, grid_label, parse_grids, partition_grid_csv, run_experiment, sweep_partitions, ExperimentConfig,
};
use ihomp::options::HierPolicy;
use ihomp::Error;

#[derive(Parser)]
#[command(name = "ihomp", version, about = "Option learning over state-space partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configured experiment.
    Run {
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the experiment once per partition grid and tabulate costs.
    Sweep {
        config: PathBuf,
        /// Comma-separated grids such as `1x1,2x2,3x3`.
        #[arg(long, default_value = "1x1,2x2,3x3,4x4")]
        grids: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the greedy option index over a raster of a saved policy.
    DumpPolicy {
        policy: PathBuf,
        /// Raster as `ROWSxCOLS`.
        #[arg(long, default_value = "20x20")]
        raster: String,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parse { .. } => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn load(config: &PathBuf, overrides: &[String]) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(config, overrides).map_err(|e| match e {
        Error::Io(_) => Failure::Config(e),
        other => Failure::from(other),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            overrides,
        } => {
            let mut cfg = load(&config, &overrides)?;
            if let Some(s) = seed {
                cfg.output.seeds = vec![s];
            }
            cfg.validate().map_err(Failure::Config)?;
            let results = run_experiment(&cfg, out.as_deref())?;
            println!("seed,final_mean_return,std,success_rate,dir");
            for r in &results {
                let p = r.last();
                println!(
                    "{},{},{},{},{}",
                    r.seed,
                    fmt9(p.mean_return),
                    fmt9(p.std),
                    fmt9(p.success_rate),
                    r.dir.display()
                );
            }
        }
        Command::Sweep {
            config,
            grids,
            out,
            overrides,
        } => {
            let cfg = load(&config, &overrides)?;
            let grids = parse_grids(&grids).map_err(Failure::Config)?;
            for g in &grids {
                let mut c = cfg.clone();
                c.partition.grid = Some(g.clone());
                c.partition.file = None;
                c.validate().map_err(Failure::Config)?;
            }
            let rows = sweep_partitions(&cfg, &grids, out.as_deref())?;
            println!("grid,mean_cost,std");
            for r in &rows {
                println!("{},{},{}", grid_label(&r.grid), fmt9(r.mean_cost), fmt9(r.std));
            }
        }
        Command::Validate { config } => {
            let cfg = load(&config, &[])?;
            cfg.validate().map_err(Failure::Config)?;
            println!("{}: ok", config.display());
        }
        Command::DumpPolicy { policy, raster } => {
            let hier = HierPolicy::load(&policy).map_err(Failure::Config)?;
            let dims = parse_grids(&raster).map_err(Failure::Config)?;
            let [rows, cols] = match dims.as_slice() {
                [d] if d.len() == 2 => [d[0], d[1]],
                _ => return Err(Failure::Config(Error::Config {
                    key: "raster".into(),
                    msg: format!("expected ROWSxCOLS, got `{raster}`"),
                })),
            };
            let bounds = hier.partition().bounds().clone();
            print!("{}", partition_grid_csv(&hier, &bounds, [rows, cols]));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
