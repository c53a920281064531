//! Goal-clipping safety function.
//!
//! Sits between the sensors and a policy and caps the goal the policy sees
//! at `goal_clip_max` (and floors it at 0). Success is still judged against
//! the true goal.

use serde::{Deserialize, Serialize};

use crate::policies::Policy;
use crate::simulator::{Action, Observation, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyFunction {
    pub goal_clip_max: f64,
    /// Margin below the risk threshold that produced `goal_clip_max`.
    pub delta: f64,
}

impl SafetyFunction {
    pub const DEFAULT_DELTA: f64 = 0.5;

    /// Clip at `risk_goal_threshold - delta`.
    pub fn below_threshold(risk_goal_threshold: f64, delta: f64) -> Self {
        Self {
            goal_clip_max: risk_goal_threshold - delta,
            delta,
        }
    }

    pub fn validate(&self, robot_max: f64) -> Result<(), SimError> {
        if !(0.0..=robot_max).contains(&self.goal_clip_max) {
            return Err(SimError::InvalidConfig(format!(
                "goal_clip_max {} must lie in [0, {robot_max}]",
                self.goal_clip_max
            )));
        }
        Ok(())
    }

    pub fn apply(&self, obs: &Observation) -> Observation {
        Observation {
            goal_noisy: obs.goal_noisy.clamp(0.0, self.goal_clip_max),
            ..*obs
        }
    }
}

impl Default for SafetyFunction {
    fn default() -> Self {
        Self::below_threshold(38.47, Self::DEFAULT_DELTA)
    }
}

/// A policy whose goal input passes through a [`SafetyFunction`].
#[derive(Debug, Clone)]
pub struct Shielded<P> {
    inner: P,
    sf: SafetyFunction,
}

impl<P> Shielded<P> {
    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn safety_function(&self) -> &SafetyFunction {
        &self.sf
    }
}

pub fn wrap<P: Policy>(policy: P, sf: SafetyFunction) -> Shielded<P> {
    Shielded { inner: policy, sf }
}

impl<P: Policy> Policy for Shielded<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn reset(&mut self) {
        self.inner.reset()
    }

    fn act(&mut self, obs: &Observation) -> Action {
        self.inner.act(&self.sf.apply(obs))
    }
}
