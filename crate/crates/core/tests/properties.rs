use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use strider_core::annotation::{render_trajectory, TrajectoryLayout};
use strider_core::bridge::execute_recipe;
use strider_core::dataset::{load_package, validate, write_package, PackageMeta, SessionPackage};
use strider_core::geom::{Vec2, Vec3};
use strider_core::planner::{Planner, PlannerConfig, STEP_S};
use strider_core::protocol::{
    decode_command, decode_telemetry, encode_command, encode_telemetry, FrameSplitter, MetaCommand, TelemetrySample,
};
use strider_core::recipe::Recipe;
use strider_core::registry::Registry;

fn registry() -> Arc<Registry> {
    Arc::new(Registry::builtin())
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(-0.0), any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

fn unit_dir() -> impl Strategy<Value = Vec2> {
    (-PI..PI).prop_map(Vec2::from_angle)
}

fn command() -> impl Strategy<Value = MetaCommand> {
    (
        any::<u64>(),
        0usize..25,
        prop_oneof![Just(Vec2::ZERO), unit_dir()],
        unit_dir(),
        prop_oneof![0.0..5.0f64, Just(0.0)],
        0.01..2.0f64,
    )
        .prop_map(|(t, mode, mv, face, speed, height)| MetaCommand {
            timestamp_ms: t,
            mode_index: mode,
            movement_dir: mv,
            facing_dir: face,
            speed,
            pelvis_height: height,
        })
}

fn sample() -> impl Strategy<Value = TelemetrySample> {
    (
        any::<u64>(),
        0usize..25,
        (finite(), finite(), finite()),
        prop_oneof![(-PI..=PI).prop_filter("open at -pi", |h| *h > -PI), Just(PI)],
        (finite(), finite()),
        prop_oneof![1e-6..10.0f64, Just(f64::MIN_POSITIVE), Just(f64::MAX)],
        0.0..1.0f64,
        prop::collection::vec(finite(), 0..8),
    )
        .prop_map(|(t, mode, (x, y, z), heading, (vx, vy), h, phase, joints)| TelemetrySample {
            timestamp_ms: t,
            mode_index: mode,
            base_pos: Vec3::new(x, y, z),
            heading_rad: heading,
            base_vel: Vec2::new(vx, vy),
            pelvis_height: h,
            gait_phase: phase,
            joints,
        })
}

fn bits_cmd(c: &MetaCommand) -> Vec<u64> {
    vec![
        c.timestamp_ms,
        c.mode_index as u64,
        c.movement_dir.x.to_bits(),
        c.movement_dir.y.to_bits(),
        c.facing_dir.x.to_bits(),
        c.facing_dir.y.to_bits(),
        c.speed.to_bits(),
        c.pelvis_height.to_bits(),
    ]
}

fn bits_sample(s: &TelemetrySample) -> Vec<u64> {
    let mut v = vec![
        s.timestamp_ms,
        s.mode_index as u64,
        s.base_pos.x.to_bits(),
        s.base_pos.y.to_bits(),
        s.base_pos.z.to_bits(),
        s.heading_rad.to_bits(),
        s.base_vel.x.to_bits(),
        s.base_vel.y.to_bits(),
        s.pelvis_height.to_bits(),
        s.gait_phase.to_bits(),
    ];
    v.extend(s.joints.iter().map(|j| j.to_bits()));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn command_round_trip_is_bit_exact(c in command()) {
        let frame = encode_command(&c).unwrap();
        prop_assert_eq!(bits_cmd(&decode_command(&frame).unwrap()), bits_cmd(&c));
    }

    #[test]
    fn telemetry_round_trip_is_bit_exact(s in sample()) {
        let frame = encode_telemetry(&s).unwrap();
        prop_assert_eq!(bits_sample(&decode_telemetry(&frame).unwrap()), bits_sample(&s));
    }
}

proptest! {
    #[test]
    fn splitter_is_chunking_invariant(cmds in prop::collection::vec(command(), 1..20), cuts in prop::collection::vec(1usize..64, 1..40)) {
        let stream: Vec<u8> = cmds.iter().flat_map(|c| encode_command(c).unwrap()).collect();
        let mut splitter = FrameSplitter::new();
        let mut frames = Vec::new();
        let mut at = 0;
        for n in cuts.iter().cycle() {
            if at >= stream.len() {
                break;
            }
            let end = (at + n).min(stream.len());
            frames.extend(splitter.push(&stream[at..end]));
            at = end;
        }
        prop_assert!(splitter.pending().is_empty());
        let back: Vec<MetaCommand> = frames.iter().map(|f| decode_command(f).unwrap()).collect();
        prop_assert_eq!(back, cmds);
    }

    #[test]
    fn clamp_is_idempotent(c in command()) {
        let planner = Planner::new(registry(), PlannerConfig::default());
        let once = planner.clamp_command(&c).unwrap();
        prop_assert_eq!(planner.clamp_command(&once).unwrap(), once.clone());
        let mode = planner.registry().get(c.mode_index).unwrap();
        if let Some(r) = mode.speed_range {
            prop_assert!(r.contains(once.speed));
        } else {
            prop_assert_eq!(once.speed, mode.default_speed);
        }
        if !mode.supports_heading {
            prop_assert_eq!(once.movement_dir, Vec2::ZERO);
        }
    }

    /// Arbitrary command sequences, including abrupt mode switches, keep
    /// every per-step change inside the configured rate limits.
    #[test]
    fn state_continuity(cmds in prop::collection::vec((command(), 1usize..40), 1..12)) {
        let planner = Planner::new(registry(), PlannerConfig::default());
        let cfg = *planner.config();
        let reg = planner.registry().clone();
        let mut state = planner.initial_state(cmds[0].0.mode_index).unwrap();
        let envelope = reg.height_envelope();
        for (raw, steps) in &cmds {
            let eff = planner.clamp_command(raw).unwrap();
            for _ in 0..*steps {
                let (next, _) = planner.step(&state, &eff, STEP_S);
                let dp = (next.base_pos.xy() - state.base_pos.xy()).norm();
                prop_assert!(dp <= reg.max_speed() * STEP_S + 1e-9, "dp {}", dp);
                let dv = (next.body_vel - state.body_vel).norm();
                prop_assert!(dv <= cfg.max_accel * STEP_S + 1e-9, "dv {}", dv);
                let dh = strider_core::geom::wrap_angle(next.heading_rad - state.heading_rad).abs();
                prop_assert!(dh <= cfg.max_yaw_rate * STEP_S + 1e-9, "dh {}", dh);
                prop_assert!((next.pelvis_height - state.pelvis_height).abs() <= cfg.max_height_rate * STEP_S + 1e-9);
                prop_assert!(envelope.contains(next.pelvis_height));
                prop_assert!(next.blend_remaining_s >= 0.0 && next.blend_remaining_s <= cfg.blend_time);
                prop_assert!((0.0..1.0).contains(&next.gait_phase));
                prop_assert!(next.heading_rad > -PI && next.heading_rad <= PI);
                state = next;
            }
        }
    }

    /// A halt command brings any motion to rest within v / a_max seconds
    /// without speeding up on the way.
    #[test]
    fn halt_brings_motion_to_rest(c in command(), warm in 1usize..200) {
        let planner = Planner::new(registry(), PlannerConfig::default());
        let eff = planner.clamp_command(&c).unwrap();
        let mut state = planner.initial_state(eff.mode_index).unwrap();
        for _ in 0..warm {
            state = planner.step(&state, &eff, STEP_S).0;
        }
        let halt = MetaCommand { movement_dir: Vec2::ZERO, speed: 0.0, ..eff };
        let halt = planner.clamp_command(&halt).unwrap();
        let v0 = state.current_speed();
        let budget = (v0 / planner.config().max_accel / STEP_S).ceil() as usize + 1;
        for _ in 0..budget {
            let next = planner.step(&state, &halt, STEP_S).0;
            prop_assert!(next.current_speed() <= state.current_speed() + 1e-12);
            state = next;
        }
        prop_assert!(state.current_speed() < 1e-9, "speed {}", state.current_speed());
        let parked = planner.step(&state, &halt, STEP_S).0;
        prop_assert_eq!(parked.base_pos.xy(), state.base_pos.xy());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_recipes_package_cleanly(seed in any::<u64>()) {
        let reg = registry();
        let recipe = Recipe::random(&reg, seed, 4);
        let done = execute_recipe(reg.clone(), PlannerConfig::default(), recipe).unwrap();
        let meta = PackageMeta {
            session_id: format!("s{seed}"),
            created_at: "1970-01-01T00:00:00Z".into(),
            seed,
            backend_name: "reference".into(),
        };
        let pkg = SessionPackage::from_session(&done, &reg, meta).unwrap();
        prop_assert_eq!(validate(&pkg, &reg), vec![]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pkg");
        write_package(&pkg, &reg, &path).unwrap();
        prop_assert_eq!(load_package(&path, &reg).unwrap(), pkg);
    }

    #[test]
    fn annotations_are_deterministic(seed in any::<u64>(), rseed in any::<u64>()) {
        let reg = registry();
        let recipe = Recipe::random(&reg, rseed, 4);
        let done = execute_recipe(reg.clone(), PlannerConfig::default(), recipe).unwrap();
        let intents = done.recording.intents(&reg);
        let a = render_trajectory(&reg, &intents, seed, &TrajectoryLayout::default()).unwrap();
        let b = render_trajectory(&reg, &intents, seed, &TrajectoryLayout::default()).unwrap();
        prop_assert_eq!(a.to_json_pretty(), b.to_json_pretty());
        prop_assert_eq!(a.trajectory.len(), 17);
        prop_assert!(a.segments.iter().all(|r| r.len() == 8));
    }
}
