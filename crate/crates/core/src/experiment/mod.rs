//! Config-driven experiment runner: parsing and validation, seeded runs,
//! baselines and CSV output.

mod config;
mod run;

pub use config::{
    apply_override, AlgorithmKind, AlgorithmSection, EnvironmentSection, ExperimentConfig, GridWorldSetup,
    LearningSection, OutputSection, PartitionSection, WallSection, World, ENVIRONMENTS,
};
pub use run::{
    continuous_settings, curve_csv, fmt9, grid_label, output_dir, parse_grids, partition_grid_csv, raster_points,
    run_experiment, run_seed, sweep_csv, sweep_partitions, value_grid_csv, SeedResult, SweepRow, OUTPUT_ROOT_VAR,
};
