//! Robot and obstacle episode.
//!
//! The robot moves along a vertical rail in `[0, 50]` inches, one step of
//! five inches up or down per second. An obstacle whose bottom edge sits at
//! the danger height travels right to left at speed `v` once the start time
//! `t` has elapsed. Horizontally the robot column is at 0; the obstacle's
//! leading edge starts at the spawn offset and the obstacle occupies the
//! column while `leading_edge <= 0 < leading_edge + width`. A robot at or
//! above the danger height while the column is occupied has collided.
//!
//! Scenarios are `(v, t, y)`: obstacle speed, obstacle start time and robot
//! goal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Dimension, DomainError, DomainSpace, Scenario};
use crate::estimator::{BehaviorMode, TrialRecord};
use crate::policies::Policy;
use crate::rng::observation_stream;

/// Upper bound of the obstacle speed dimension, inches per second.
pub const MAX_SPEED: f64 = 10.0;
/// Upper bound of the obstacle start-time dimension, seconds.
pub const MAX_START_TIME: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    OutOfDomain(#[from] DomainError),
    #[error("episode already terminated at time {time}")]
    SteppingTerminatedEpisode { time: u32 },
    #[error("episode not finished (time {time} of {episode_seconds})")]
    EpisodeNotFinished { time: u32, episode_seconds: u32 },
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub episode_seconds: u32,
    pub step_inches: f64,
    pub robot_bounds: [f64; 2],
    /// Robot positions at or above this height lie in the obstacle path.
    pub danger_height: f64,
    /// Horizontal distance from the robot column to the obstacle's leading
    /// edge at spawn.
    pub obstacle_spawn_offset: f64,
    pub obstacle_width: f64,
    pub noise_sigma_speed: f64,
    pub noise_sigma_obstacle_pos: f64,
    pub noise_sigma_goal: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            episode_seconds: 100,
            step_inches: 5.0,
            robot_bounds: [0.0, 50.0],
            danger_height: 25.0,
            obstacle_spawn_offset: 80.0,
            obstacle_width: 10.0,
            noise_sigma_speed: 0.1,
            noise_sigma_obstacle_pos: 0.1,
            noise_sigma_goal: 0.5,
        }
    }
}

impl EnvConfig {
    /// Same geometry with every noise sigma set to zero.
    pub fn noiseless(mut self) -> Self {
        self.noise_sigma_speed = 0.0;
        self.noise_sigma_obstacle_pos = 0.0;
        self.noise_sigma_goal = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let [lo, hi] = self.robot_bounds;
        let nonneg = [
            ("step_inches", self.step_inches),
            ("obstacle_spawn_offset", self.obstacle_spawn_offset),
            ("obstacle_width", self.obstacle_width),
            ("noise_sigma_speed", self.noise_sigma_speed),
            ("noise_sigma_obstacle_pos", self.noise_sigma_obstacle_pos),
            ("noise_sigma_goal", self.noise_sigma_goal),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(lo < self.danger_height && self.danger_height < hi) {
            return Err(SimError::InvalidConfig(format!(
                "need robot_bounds[0] < danger_height < robot_bounds[1], got {lo} < {} < {hi}",
                self.danger_height
            )));
        }
        if self.episode_seconds == 0 {
            return Err(SimError::InvalidConfig(
                "episode_seconds must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The scenario space `(v, t, y)` this environment accepts.
    pub fn domain(&self) -> DomainSpace {
        DomainSpace::new(vec![
            Dimension::new("v", 0.0, MAX_SPEED).with_unit("in/s"),
            Dimension::new("t", 0.0, MAX_START_TIME).with_unit("s"),
            Dimension::new("y", self.robot_bounds[0], self.robot_bounds[1]).with_unit("in"),
        ])
        .expect("robot domain is valid")
    }

    /// Leading-edge position of the obstacle at `time` seconds.
    pub fn leading_edge_at(&self, x: &RobotScenario, time: f64) -> f64 {
        self.obstacle_spawn_offset - x.v * (time - x.t).max(0.0)
    }

    /// Whether an obstacle with the given leading edge covers the robot
    /// column.
    pub fn occupies_column(&self, leading_edge: f64) -> bool {
        leading_edge <= 0.0 && 0.0 < leading_edge + self.obstacle_width
    }
}

/// A scenario of the robot task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotScenario {
    /// Obstacle speed, inches per second.
    pub v: f64,
    /// Obstacle start time, seconds.
    pub t: f64,
    /// Robot goal, inches.
    pub y: f64,
}

impl RobotScenario {
    pub fn from_scenario(cfg: &EnvConfig, x: &Scenario) -> Result<Self, SimError> {
        cfg.domain().check(x)?;
        let v = x.values();
        Ok(Self {
            v: v[0],
            t: v[1],
            y: v[2],
        })
    }

    pub fn to_scenario(self) -> Scenario {
        Scenario(vec![self.v, self.t, self.y])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    Backward,
}

/// What a policy sees each second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub obstacle_pos_noisy: f64,
    pub robot_pos: f64,
    pub obstacle_speed_noisy: f64,
    pub goal_noisy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub time: u32,
    pub robot_pos: f64,
    pub obstacle_leading_edge: f64,
    pub scenario: RobotScenario,
    /// Highest robot position reached so far.
    pub max_pos: f64,
    pub collision_time: Option<u32>,
}

impl EnvState {
    pub fn init(cfg: &EnvConfig, x: &Scenario) -> Result<Self, SimError> {
        let scenario = RobotScenario::from_scenario(cfg, x)?;
        let robot_pos = cfg.robot_bounds[0];
        Ok(Self {
            time: 0,
            robot_pos,
            obstacle_leading_edge: cfg.leading_edge_at(&scenario, 0.0),
            scenario,
            max_pos: robot_pos,
            collision_time: None,
        })
    }

    pub fn collided(&self) -> bool {
        self.collision_time.is_some()
    }

    pub fn finished(&self, cfg: &EnvConfig) -> bool {
        self.collided() || self.time >= cfg.episode_seconds
    }

    /// Fresh noisy observation of the current state.
    pub fn observe<R: Rng>(&self, cfg: &EnvConfig, rng: &mut R) -> Observation {
        let mut noise = || -> f64 { StandardNormal.sample(rng) };
        let (z_pos, z_speed, z_goal) = (noise(), noise(), noise());
        Observation {
            obstacle_pos_noisy: self.obstacle_leading_edge + cfg.noise_sigma_obstacle_pos * z_pos,
            robot_pos: self.robot_pos,
            obstacle_speed_noisy: self.scenario.v + cfg.noise_sigma_speed * z_speed,
            goal_noisy: self.scenario.y + cfg.noise_sigma_goal * z_goal,
        }
    }

    /// Advances one second. The move is applied first, then the collision
    /// check runs at the new position and time.
    pub fn step(&mut self, cfg: &EnvConfig, action: Action) -> Result<(), SimError> {
        if self.finished(cfg) {
            return Err(SimError::SteppingTerminatedEpisode { time: self.time });
        }
        let delta = match action {
            Action::Forward => cfg.step_inches,
            Action::Backward => -cfg.step_inches,
        };
        self.robot_pos = (self.robot_pos + delta).clamp(cfg.robot_bounds[0], cfg.robot_bounds[1]);
        self.max_pos = self.max_pos.max(self.robot_pos);
        self.time += 1;
        self.obstacle_leading_edge = cfg.leading_edge_at(&self.scenario, self.time as f64);
        if self.robot_pos >= cfg.danger_height && cfg.occupies_column(self.obstacle_leading_edge) {
            self.collision_time = Some(self.time);
        }
        Ok(())
    }

    /// Behavior mode of a finished episode. Collision dominates; otherwise
    /// the goal counts as met if the robot ever reached or exceeded it.
    pub fn classify(&self, cfg: &EnvConfig) -> Result<BehaviorMode, SimError> {
        if self.collided() {
            Ok(BehaviorMode::HarmfulFailure)
        } else if self.time < cfg.episode_seconds {
            Err(SimError::EpisodeNotFinished {
                time: self.time,
                episode_seconds: cfg.episode_seconds,
            })
        } else if self.max_pos >= self.scenario.y {
            Ok(BehaviorMode::Success)
        } else {
            Ok(BehaviorMode::TaskFailure)
        }
    }
}

/// Runs one full episode of `policy` in scenario `x`. Noise draws come from
/// the episode's own stream, so the record is a pure function of the inputs.
pub fn run_episode<P: Policy + ?Sized>(
    cfg: &EnvConfig,
    policy: &mut P,
    x: &Scenario,
    seed: u64,
) -> Result<TrialRecord, SimError> {
    let mut state = EnvState::init(cfg, x)?;
    let mut rng = observation_stream(seed);
    policy.reset();
    while !state.finished(cfg) {
        let obs = state.observe(cfg, &mut rng);
        let action = policy.act(&obs);
        state.step(cfg, action)?;
    }
    let mode = state.classify(cfg)?;
    Ok(TrialRecord {
        scenario: x.clone(),
        mode,
        seed,
        steps: state.time,
        final_position: state.robot_pos,
        collision_time: state.collision_time.map(f64::from),
    })
}

/// The first observation an episode with this seed produces; policies that
/// latch their goal read it from here.
pub fn first_observation(
    cfg: &EnvConfig,
    x: &Scenario,
    seed: u64,
) -> Result<Observation, SimError> {
    let state = EnvState::init(cfg, x)?;
    Ok(state.observe(cfg, &mut observation_stream(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(v: f64, t: f64, y: f64) -> EnvState {
        EnvState::init(&EnvConfig::default(), &Scenario(vec![v, t, y])).unwrap()
    }

    #[test]
    fn init_places_robot_and_obstacle() {
        let s = state(5.0, 0.0, 25.0);
        assert_eq!(s.robot_pos, 0.0);
        assert_eq!(s.obstacle_leading_edge, 80.0);
        assert_eq!(s.time, 0);
        assert!(!s.collided());
        assert!(EnvState::init(&EnvConfig::default(), &Scenario(vec![0.0, 10.0, 50.0])).is_ok());
        assert!(matches!(
            EnvState::init(&EnvConfig::default(), &Scenario(vec![11.0, 0.0, 0.0])),
            Err(SimError::OutOfDomain(_))
        ));
    }

    #[test]
    fn position_is_clipped() {
        let cfg = EnvConfig::default();
        let mut s = state(0.0, 0.0, 0.0);
        s.step(&cfg, Action::Backward).unwrap();
        assert_eq!(s.robot_pos, 0.0);
        s.robot_pos = 50.0;
        s.step(&cfg, Action::Forward).unwrap();
        assert_eq!(s.robot_pos, 50.0);
    }

    #[test]
    fn fast_obstacle_collides_with_high_robot() {
        let cfg = EnvConfig::default();
        let mut s = state(10.0, 0.0, 40.0);
        s.robot_pos = 30.0;
        // Hold at 30 by alternating; at even times the robot is back at 30.
        for k in 0..7 {
            let a = if k % 2 == 0 {
                Action::Forward
            } else {
                Action::Backward
            };
            s.step(&cfg, a).unwrap();
            assert!(!s.collided(), "early collision at {}", s.time);
        }
        s.step(&cfg, Action::Backward).unwrap();
        assert_eq!(s.time, 8);
        assert_eq!(s.robot_pos, 30.0);
        assert_eq!(s.obstacle_leading_edge, 0.0);
        assert!(s.collided());
        assert_eq!(s.collision_time, Some(8));
        assert_eq!(s.classify(&cfg), Ok(BehaviorMode::HarmfulFailure));
        assert!(matches!(
            s.step(&cfg, Action::Forward),
            Err(SimError::SteppingTerminatedEpisode { time: 8 })
        ));
    }

    #[test]
    fn trailing_edge_leaves_column() {
        let cfg = EnvConfig::default();
        let x = RobotScenario {
            v: 10.0,
            t: 0.0,
            y: 0.0,
        };
        assert!(cfg.occupies_column(cfg.leading_edge_at(&x, 8.0)));
        assert!(!cfg.occupies_column(cfg.leading_edge_at(&x, 9.0)));
        assert!(!cfg.occupies_column(cfg.leading_edge_at(&x, 7.0)));
    }

    #[test]
    fn classify_modes() {
        let cfg = EnvConfig::default();
        let mut s = state(0.0, 0.0, 25.0);
        assert!(matches!(
            s.classify(&cfg),
            Err(SimError::EpisodeNotFinished { .. })
        ));
        s.time = 100;
        s.max_pos = 30.0;
        assert_eq!(s.classify(&cfg), Ok(BehaviorMode::Success));
        let mut s = state(0.0, 0.0, 40.0);
        s.time = 100;
        s.max_pos = 20.0;
        assert_eq!(s.classify(&cfg), Ok(BehaviorMode::TaskFailure));
        let mut s = state(1.0, 0.0, 20.0);
        s.time = 40;
        s.max_pos = 50.0;
        s.collision_time = Some(40);
        assert_eq!(s.classify(&cfg), Ok(BehaviorMode::HarmfulFailure));
    }

    #[test]
    fn zero_noise_observation_is_exact() {
        let cfg = EnvConfig::default().noiseless();
        let s = state(3.0, 2.0, 17.0);
        let obs = s.observe(&cfg, &mut observation_stream(5));
        assert_eq!(
            obs,
            Observation {
                obstacle_pos_noisy: 80.0,
                robot_pos: 0.0,
                obstacle_speed_noisy: 3.0,
                goal_noisy: 17.0
            }
        );
    }

    #[test]
    fn observations_repeat_per_seed() {
        let cfg = EnvConfig::default();
        let s = state(3.0, 2.0, 17.0);
        let run = |seed| {
            let mut rng = observation_stream(seed);
            (0..20)
                .map(|_| s.observe(&cfg, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        let seq = run(3);
        assert_ne!(seq[0], seq[1]);
    }

    #[test]
    fn goal_noise_has_configured_spread() {
        let cfg = EnvConfig::default();
        let s = state(3.0, 2.0, 17.0);
        let mut rng = observation_stream(11);
        let n = 100_000;
        let goals: Vec<f64> = (0..n)
            .map(|_| s.observe(&cfg, &mut rng).goal_noisy)
            .collect();
        let mean = goals.iter().sum::<f64>() / n as f64;
        let var = goals.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Relative sd of the sample sd is about 1/sqrt(2n) = 0.22%.
        assert!((var.sqrt() / 0.5 - 1.0).abs() < 0.02, "sd {}", var.sqrt());
    }

    #[test]
    fn config_validation() {
        assert!(EnvConfig::default().validate().is_ok());
        let cfg = EnvConfig {
            danger_height: 60.0,
            ..EnvConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EnvConfig {
            noise_sigma_goal: -1.0,
            ..EnvConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
