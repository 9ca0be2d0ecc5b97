//! Scenario geometry and the simulation experiments.

mod bench;
mod drift;
mod geometry;
mod monte_carlo;

pub use bench::{
    bench, fit_slope, scaling_grids, BenchConfig, ScalingPoint, TimingPoint, TimingReport,
};
pub use drift::{
    drifting_gains, warmstart_experiment, DriftConfig, IterationStats, IterationsReport,
};
pub use geometry::{
    gains_from_geometry, minimal_intercept, relay_sweep_scenario, triangle_layout, PathLoss, Point,
    Scenario, DEFAULT_INTERCEPT,
};
pub use monte_carlo::{
    drop_nodes, monte_carlo, uniform_in_disk, MonteCarloConfig, Scheme, SchemeSummary, SweepReport,
};
