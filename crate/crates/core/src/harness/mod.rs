//! Experiment orchestration: configs, batch runs, CSV traces and SVG plots.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{ChannelRewardSpec, ExperimentConfig, DEFAULT_PRI_SECONDS};
pub use plot::{emit_plots, render_svg, PlotKind};
pub use run::{run_experiment, run_single, u_star, ExperimentOutput, Job, RunPlan, RunSummary, CONVERGENCE_TOL};
