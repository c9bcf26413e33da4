//! Decentralized multi-player bandit simulation for cognitive radars sharing
//! spectrum with a communications system.
//!
//! * [`channel`]: channel-quality reward model and LFM waveform.
//! * [`env`]: slotted environment with collision feedback.
//! * [`policies`]: Multiple UCB1, Musical Chairs, SIC and M-Etc-Elim.
//! * [`matching`]: optimal player/arm matchings.
//! * [`metrics`]: regret and collision statistics.
//! * [`harness`]: experiment configs, batch runs, CSV and SVG output.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod matching;
pub mod metrics;
pub mod policies;

pub use channel::{
    channel_quality, coherence, derive_mean_rewards, ideal_response, lfm_waveform, mean_power,
    normalize_rewards, BandPlan, ChannelDistortion, ChannelResponse, FrequencyGrid,
    IdealChannelSpec, MeanRewardMatrix, WaveformSpec,
};
pub use env::{Environment, JointAction, Observation, Scenario};
pub use error::{Error, Result};
pub use matching::{all_matchings, enumerate_optimal, hungarian_max, matching_utility, Matching, UtilityReport};
pub use metrics::{
    aggregate, convergence_index, cumulative_collisions, cumulative_regret, AggregateCurve, RegretMode,
    RunTrace, StepRecord,
};
pub use harness::{run_experiment, run_single, ExperimentConfig, RunPlan};
pub use policies::{build_policy, Algorithm, Policy, PolicyContext, PolicyFeedback, PolicyParams, PolicySnapshot, TieBreak};
