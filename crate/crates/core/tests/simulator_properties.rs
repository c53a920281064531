use depgrid_core::rng::episode_seed;
use depgrid_core::simulator::first_observation;
use depgrid_core::{
    evaluate_policy, run_episode, wrap, Action, AlwaysForward, BehaviorMode, ConditionSet, Config,
    EnvConfig, EnvState, SafetyFunction, Scenario, ScriptedPolicy, ScriptedPolicyParams,
};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    (0.0..=10.0f64, 0.0..=10.0f64, 0.0..=50.0f64).prop_map(|(v, t, y)| Scenario(vec![v, t, y]))
}

fn scripted(cfg: &EnvConfig) -> ScriptedPolicy {
    ScriptedPolicy::new(ScriptedPolicyParams::default(), cfg)
}

/// First integer second in [first, last] at which an obstacle moving at `v`
/// from `t` covers the robot column, from the crossing window
/// v·(τ − t) ∈ [80, 90).
fn first_occupied_second(v: f64, t: f64, first: u32, last: u32) -> Option<u32> {
    if v <= 0.0 {
        return None;
    }
    (first..=last).find(|&tau| {
        let travelled = v * (tau as f64 - t).max(0.0);
        (80.0..90.0).contains(&travelled)
    })
}

fn testing_condition() -> ConditionSet {
    Config::builtin().condition("testing").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kinematics_stay_in_bounds(x in scenario(), actions in prop::collection::vec(any::<bool>(), 100)) {
        let cfg = EnvConfig::default();
        let mut s = EnvState::init(&cfg, &x).unwrap();
        let mut edge = s.obstacle_leading_edge;
        for fwd in actions {
            if s.finished(&cfg) {
                break;
            }
            s.step(&cfg, if fwd { Action::Forward } else { Action::Backward }).unwrap();
            prop_assert!((0.0..=50.0).contains(&s.robot_pos));
            prop_assert_eq!(s.robot_pos % 5.0, 0.0);
            prop_assert!(s.obstacle_leading_edge <= edge);
            edge = s.obstacle_leading_edge;
            if let Some(tc) = s.collision_time {
                prop_assert_eq!(tc, s.time);
                prop_assert!(s.robot_pos >= 25.0);
                prop_assert!(cfg.occupies_column(s.obstacle_leading_edge));
            }
        }
    }

    #[test]
    fn always_forward_collides_by_closed_form(x in scenario(), seed in any::<u64>()) {
        let cfg = EnvConfig::default();
        let r = run_episode(&cfg, &mut AlwaysForward, &x, seed).unwrap();
        let (v, t) = (x.values()[0], x.values()[1]);
        // Always-forward sits at 5τ, reaching the danger height at τ = 5.
        let expected = first_occupied_second(v, t, 5, 100);
        prop_assert_eq!(r.collision_time, expected.map(f64::from));
        prop_assert_eq!(r.mode == BehaviorMode::HarmfulFailure, expected.is_some());
    }

    #[test]
    fn impatient_scripted_matches_closed_form(x in scenario(), seed in any::<u64>()) {
        let cfg = EnvConfig::default();
        let g = first_observation(&cfg, &x, seed).unwrap().goal_noisy;
        let mut p = scripted(&cfg);
        let r = run_episode(&cfg, &mut p, &x, seed).unwrap();
        prop_assert_eq!(p.latched_goal(), Some(g));
        if p.is_impatient(g) {
            let expected = first_occupied_second(x.values()[0], x.values()[1], 5, 100);
            prop_assert_eq!(r.collision_time, expected.map(f64::from));
        } else {
            prop_assert_ne!(r.mode, BehaviorMode::HarmfulFailure);
        }
    }

    #[test]
    fn noiseless_episodes_ignore_the_seed(x in scenario(), a in any::<u64>(), b in any::<u64>()) {
        let cfg = EnvConfig::default().noiseless();
        let ra = run_episode(&cfg, &mut scripted(&cfg), &x, a).unwrap();
        let rb = run_episode(&cfg, &mut scripted(&cfg), &x, b).unwrap();
        prop_assert_eq!((ra.mode, ra.steps, ra.final_position, ra.collision_time),
                        (rb.mode, rb.steps, rb.final_position, rb.collision_time));
    }

    #[test]
    fn double_wrapping_changes_nothing(x in scenario(), seed in any::<u64>()) {
        let cfg = EnvConfig::default();
        let sf = SafetyFunction::default();
        let once = run_episode(&cfg, &mut wrap(scripted(&cfg), sf), &x, seed).unwrap();
        let twice = run_episode(&cfg, &mut wrap(wrap(scripted(&cfg), sf), sf), &x, seed).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn safe_goals_are_untouched_by_the_wrapper(x in scenario(), seed in any::<u64>()) {
        let cfg = EnvConfig::default();
        let sf = SafetyFunction::default();
        let g = first_observation(&cfg, &x, seed).unwrap().goal_noisy;
        let bare = run_episode(&cfg, &mut scripted(&cfg), &x, seed).unwrap();
        let wrapped = run_episode(&cfg, &mut wrap(scripted(&cfg), sf), &x, seed).unwrap();
        prop_assert_ne!(wrapped.mode, BehaviorMode::HarmfulFailure);
        if (0.0..sf.goal_clip_max).contains(&g) {
            prop_assert_eq!(bare, wrapped);
        }
    }
}

#[test]
fn evaluate_policy_matches_a_sequential_loop() {
    let cfg = EnvConfig::default();
    let scenarios = testing_condition().sample(3000, 5);
    let campaign = evaluate_policy(&cfg, || scripted(&cfg), "testing", &scenarios, 77).unwrap();
    let sequential: Vec<_> = scenarios
        .iter()
        .enumerate()
        .map(|(i, x)| {
            run_episode(&cfg, &mut scripted(&cfg), x, episode_seed(77, i as u64)).unwrap()
        })
        .collect();
    assert_eq!(campaign.records, sequential);
    assert_eq!(
        evaluate_policy(&cfg, || scripted(&cfg), "testing", &scenarios, 77).unwrap(),
        campaign
    );
    assert!(evaluate_policy(&cfg, || scripted(&cfg), "testing", &[], 1)
        .unwrap()
        .records
        .is_empty());
}

#[test]
fn safety_function_never_adds_harm() {
    let cfg = EnvConfig::default();
    let config = Config::builtin();
    for name in config.condition_names() {
        let scenarios = config.condition(name).unwrap().sample(4000, 11);
        let bare = evaluate_policy(&cfg, || scripted(&cfg), name, &scenarios, 3).unwrap();
        let wrapped = evaluate_policy(
            &cfg,
            || wrap(scripted(&cfg), SafetyFunction::default()),
            name,
            &scenarios,
            3,
        )
        .unwrap();
        let harmful = |c: &depgrid_core::TestCampaign| {
            c.records
                .iter()
                .filter(|r| r.mode == BehaviorMode::HarmfulFailure)
                .count()
        };
        assert!(harmful(&wrapped) <= harmful(&bare), "{name}");
        assert_eq!(harmful(&wrapped), 0, "{name}");
    }
}

/// Patient episodes never collide, task failures sit at slow obstacles and
/// harmful ones at high goals.
#[test]
fn failure_topology_under_testing_conditions() {
    let cfg = EnvConfig::default();
    let params = ScriptedPolicyParams::default();
    let scenarios = testing_condition().sample(20_000, 2021);
    let campaign = evaluate_policy(&cfg, || scripted(&cfg), "testing", &scenarios, 9).unwrap();
    let mut task_v = Vec::new();
    let mut harmful = 0;
    for r in &campaign.records {
        let g = first_observation(&cfg, &r.scenario, r.seed)
            .unwrap()
            .goal_noisy;
        match r.mode {
            BehaviorMode::HarmfulFailure => {
                harmful += 1;
                assert!(
                    g >= params.risk_goal_threshold,
                    "patient episode collided: {r:?}"
                );
                assert!(
                    r.scenario.values()[2]
                        >= params.risk_goal_threshold - 5.0 * cfg.noise_sigma_goal
                );
            }
            BehaviorMode::TaskFailure => task_v.push(r.scenario.values()[0]),
            BehaviorMode::Success => {}
        }
    }
    assert!(harmful > 0 && !task_v.is_empty());
    let slow = task_v.iter().filter(|&&v| v <= 1.5).count();
    assert!(
        slow as f64 >= 0.95 * task_v.len() as f64,
        "{slow} of {}",
        task_v.len()
    );
}
