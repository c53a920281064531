//! Dependability estimates for a fixed decision policy under operating
//! conditions that differ from its test conditions.
//!
//! Test outcomes are tallied over a grid partition of the scenario space and
//! re-weighted with the analytic region masses of an operating condition.
//! The crate also carries a seeded robot/obstacle simulator, a scripted
//! policy and a goal-clipping safety function for running full campaigns.

pub mod config;
pub mod domain;
pub mod estimator;
pub mod normal;
pub mod policies;
pub mod rng;
pub mod safety;
pub mod simulator;

pub use config::{Config, ConfigError};
pub use domain::{
    partition_index, region_mass, validate_grid, ConditionSet, Dimension, DiscreteCondition,
    DomainError, DomainSpace, Marginal, MassModel, Partition, PartitionGrid, Region, Scenario,
};
pub use estimator::{
    brute_force_dependability, compare, observed_rates, predict, tally, BehaviorMode,
    DependabilityReport, EstimatorError, MetricDeltas, Metrics, ModeCounts, PartitionTally,
    PredictOptions, TestCampaign, TrialRecord,
};
pub use policies::{
    evaluate_policy, AlwaysForward, Policy, PolicyKind, ScriptedPolicy, ScriptedPolicyParams,
};
pub use safety::{wrap, SafetyFunction, Shielded};
pub use simulator::{run_episode, Action, EnvConfig, EnvState, Observation, SimError};
