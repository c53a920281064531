//! Decision policies and campaign evaluation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Scenario;
use crate::estimator::TestCampaign;
use crate::rng::episode_seed;
use crate::simulator::{run_episode, Action, EnvConfig, Observation, SimError};

/// A decision policy. One instance serves one episode at a time and is
/// reset before each episode.
pub trait Policy: Send {
    fn name(&self) -> &str;
    fn reset(&mut self);
    fn act(&mut self, obs: &Observation) -> Action;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn reset(&mut self) {
        (**self).reset()
    }

    fn act(&mut self, obs: &Observation) -> Action {
        (**self).act(obs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedPolicyParams {
    /// Perceived goals at or above this switch the policy to always-forward.
    pub risk_goal_threshold: f64,
    /// Highest position the patient policy holds while the obstacle has not
    /// passed.
    pub safe_ceiling: f64,
    /// The obstacle counts as passed once its noisy trailing edge is more
    /// than this far beyond the robot column.
    pub passed_margin: f64,
}

impl Default for ScriptedPolicyParams {
    fn default() -> Self {
        Self {
            risk_goal_threshold: 38.47,
            safe_ceiling: 20.0,
            passed_margin: 0.0,
        }
    }
}

impl ScriptedPolicyParams {
    pub fn validate(&self, env: &EnvConfig) -> Result<(), SimError> {
        let [lo, hi] = env.robot_bounds;
        if !(self.safe_ceiling > lo && self.safe_ceiling < env.danger_height) {
            return Err(SimError::InvalidConfig(format!(
                "safe_ceiling {} must lie in ({lo}, {})",
                self.safe_ceiling, env.danger_height
            )));
        }
        if !(lo..=hi).contains(&self.risk_goal_threshold) {
            return Err(SimError::InvalidConfig(format!(
                "risk_goal_threshold {} must lie in [{lo}, {hi}]",
                self.risk_goal_threshold
            )));
        }
        if !(self.passed_margin.is_finite() && self.passed_margin >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "passed_margin must be non-negative, got {}",
                self.passed_margin
            )));
        }
        Ok(())
    }
}

/// Rule-based stand-in for a learned obstacle-avoidance controller.
///
/// The goal is latched from the first observation of an episode. Below the
/// risk threshold the policy is patient: it climbs no higher than the safe
/// ceiling until it sees the obstacle's trailing edge clear the robot
/// column, then drives forward for the rest of the episode. At or above the
/// threshold it drives forward unconditionally.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    params: ScriptedPolicyParams,
    obstacle_width: f64,
    step_inches: f64,
    latched_goal: Option<f64>,
    passed: bool,
}

impl ScriptedPolicy {
    pub fn new(params: ScriptedPolicyParams, env: &EnvConfig) -> Self {
        Self {
            params,
            obstacle_width: env.obstacle_width,
            step_inches: env.step_inches,
            latched_goal: None,
            passed: false,
        }
    }

    pub fn params(&self) -> &ScriptedPolicyParams {
        &self.params
    }

    pub fn latched_goal(&self) -> Option<f64> {
        self.latched_goal
    }

    /// Whether a latched goal puts the policy in always-forward mode.
    pub fn is_impatient(&self, latched_goal: f64) -> bool {
        latched_goal >= self.params.risk_goal_threshold
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> &str {
        "scripted"
    }

    fn reset(&mut self) {
        self.latched_goal = None;
        self.passed = false;
    }

    fn act(&mut self, obs: &Observation) -> Action {
        let goal = *self.latched_goal.get_or_insert(obs.goal_noisy);
        if self.is_impatient(goal) {
            return Action::Forward;
        }
        if !self.passed && obs.obstacle_pos_noisy + self.obstacle_width < -self.params.passed_margin
        {
            self.passed = true;
        }
        if self.passed || obs.robot_pos + self.step_inches <= self.params.safe_ceiling {
            Action::Forward
        } else {
            Action::Backward
        }
    }
}

/// Drives forward every second.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysForward;

impl Policy for AlwaysForward {
    fn name(&self) -> &str {
        "always-forward"
    }

    fn reset(&mut self) {}

    fn act(&mut self, _obs: &Observation) -> Action {
        Action::Forward
    }
}

/// Policy selection by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Scripted,
    AlwaysForward,
}

impl PolicyKind {
    pub fn build(self, params: &ScriptedPolicyParams, env: &EnvConfig) -> Box<dyn Policy> {
        match self {
            PolicyKind::Scripted => Box::new(ScriptedPolicy::new(params.clone(), env)),
            PolicyKind::AlwaysForward => Box::new(AlwaysForward),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Scripted => "scripted",
            PolicyKind::AlwaysForward => "always-forward",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(PolicyKind::Scripted),
            "always-forward" => Ok(PolicyKind::AlwaysForward),
            other => Err(format!(
                "unknown policy `{other}` (expected scripted or always-forward)"
            )),
        }
    }
}

/// Runs one episode per scenario with a fresh policy from `make_policy`.
///
/// Episode `i` is seeded with [`episode_seed`]`(master_seed, i)`, so the
/// campaign is identical however the episodes are scheduled.
pub fn evaluate_policy<P, F>(
    cfg: &EnvConfig,
    make_policy: F,
    condition_name: &str,
    scenarios: &[Scenario],
    master_seed: u64,
) -> Result<TestCampaign, SimError>
where
    P: Policy,
    F: Fn() -> P + Sync,
{
    let records = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut policy = make_policy();
            run_episode(cfg, &mut policy, x, episode_seed(master_seed, i as u64))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TestCampaign::new(condition_name, master_seed, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::BehaviorMode;

    fn obs(robot_pos: f64, obstacle_pos: f64, goal: f64) -> Observation {
        Observation {
            obstacle_pos_noisy: obstacle_pos,
            robot_pos,
            obstacle_speed_noisy: 1.0,
            goal_noisy: goal,
        }
    }

    fn scripted() -> ScriptedPolicy {
        ScriptedPolicy::new(ScriptedPolicyParams::default(), &EnvConfig::default())
    }

    #[test]
    fn patient_holds_below_danger() {
        let mut p = scripted();
        assert_eq!(p.act(&obs(20.0, 40.0, 10.0)), Action::Backward);
        assert_eq!(p.act(&obs(15.0, 40.0, 10.0)), Action::Forward);
    }

    #[test]
    fn impatient_always_forward() {
        let mut p = scripted();
        for pos in [0.0, 20.0, 45.0] {
            assert_eq!(p.act(&obs(pos, 0.0, 45.0)), Action::Forward);
        }
    }

    #[test]
    fn patient_advances_after_passage() {
        let mut p = scripted();
        assert_eq!(p.act(&obs(20.0, -10.5, 30.0)), Action::Forward);
        // Passage is sticky even if a later noisy reading disagrees.
        assert_eq!(p.act(&obs(25.0, -9.9, 30.0)), Action::Forward);
    }

    #[test]
    fn goal_is_latched_until_reset() {
        let mut p = scripted();
        p.act(&obs(0.0, 80.0, 10.0));
        assert_eq!(p.act(&obs(20.0, 80.0, 45.0)), Action::Backward);
        assert_eq!(p.latched_goal(), Some(10.0));
        p.reset();
        assert_eq!(p.act(&obs(20.0, 80.0, 45.0)), Action::Forward);
    }

    #[test]
    fn goal_already_met_is_success() {
        let cfg = EnvConfig::default();
        let r = run_episode(&cfg, &mut scripted(), &Scenario(vec![5.0, 3.0, 0.0]), 1).unwrap();
        assert_eq!(r.mode, BehaviorMode::Success);
    }

    #[test]
    fn stationary_obstacle_blocks_high_goal() {
        let cfg = EnvConfig::default();
        // A goal of 40 is above the default risk threshold; raise it so the
        // policy stays patient.
        let params = ScriptedPolicyParams {
            risk_goal_threshold: 50.0,
            ..Default::default()
        };
        for seed in 0..20 {
            let mut p = ScriptedPolicy::new(params.clone(), &cfg);
            let r = run_episode(&cfg, &mut p, &Scenario(vec![0.0, 0.0, 40.0]), seed).unwrap();
            assert_eq!(r.mode, BehaviorMode::TaskFailure);
            assert!(r.final_position <= 20.0);
            assert_eq!(r.steps, 100);
        }
    }

    #[test]
    fn episode_is_deterministic() {
        let cfg = EnvConfig::default();
        let x = Scenario(vec![2.5, 4.0, 33.0]);
        let a = run_episode(&cfg, &mut scripted(), &x, 99).unwrap();
        let b = run_episode(&cfg, &mut scripted(), &x, 99).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn params_validation() {
        let env = EnvConfig::default();
        assert!(ScriptedPolicyParams::default().validate(&env).is_ok());
        let bad = ScriptedPolicyParams {
            safe_ceiling: 25.0,
            ..Default::default()
        };
        assert!(bad.validate(&env).is_err());
    }

    #[test]
    fn policy_names_parse() {
        for k in [PolicyKind::Scripted, PolicyKind::AlwaysForward] {
            assert_eq!(k.to_string().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("dqn".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn empty_campaign() {
        let cfg = EnvConfig::default();
        let c = evaluate_policy(&cfg, scripted, "none", &[], 1).unwrap();
        assert!(c.records.is_empty());
    }
}
