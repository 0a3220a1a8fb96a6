//! Reference kinematic backend.
//!
//! Integrates the effective command stream at a fixed step into a continuous
//! base trajectory. Heading, planar velocity and pelvis height each move
//! toward their command targets under a rate limit, so switching modes never
//! produces a jump in position, heading, height or realized speed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Vec2, Vec3};
use crate::protocol::{MetaCommand, TelemetrySample};
use crate::registry::{Registry, UnknownMode};

/// Integration step, matching the 50 Hz telemetry rate.
pub const STEP_S: f64 = 0.02;
pub const STEP_MS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Maximum yaw rate, rad/s.
    pub max_yaw_rate: f64,
    /// Maximum planar acceleration, m/s².
    pub max_accel: f64,
    /// Maximum pelvis-height rate, m/s.
    pub max_height_rate: f64,
    /// Duration of the speed blend after a mode switch, s.
    pub blend_time: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_yaw_rate: 1.5,
            max_accel: 2.0,
            max_height_rate: 0.5,
            blend_time: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub clock_ms: u64,
    pub base_pos: Vec3,
    pub heading_rad: f64,
    pub pelvis_height: f64,
    /// Realized planar velocity in the body frame.
    pub body_vel: Vec2,
    pub gait_phase: f64,
    pub active_mode: usize,
    pub blend_remaining_s: f64,
}

impl PlannerState {
    /// At rest at the origin, facing +x, at `height`.
    pub fn at_rest(mode: usize, height: f64) -> Self {
        Self {
            clock_ms: 0,
            base_pos: Vec3::new(0.0, 0.0, height),
            heading_rad: 0.0,
            pelvis_height: height,
            body_vel: Vec2::ZERO,
            gait_phase: 0.0,
            active_mode: mode,
            blend_remaining_s: 0.0,
        }
    }

    pub fn current_speed(&self) -> f64 {
        self.body_vel.norm()
    }

    /// Telemetry record for the current state.
    pub fn sample(&self) -> TelemetrySample {
        TelemetrySample {
            timestamp_ms: self.clock_ms,
            mode_index: self.active_mode,
            base_pos: self.base_pos,
            heading_rad: self.heading_rad,
            base_vel: self.body_vel.rotated(self.heading_rad),
            pelvis_height: self.pelvis_height,
            gait_phase: self.gait_phase,
            joints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planner {
    registry: Arc<Registry>,
    config: PlannerConfig,
}

fn approach(current: f64, target: f64, max_delta: f64) -> f64 {
    let d = target - current;
    if d.abs() <= max_delta {
        target
    } else {
        current + max_delta.copysign(d)
    }
}

impl Planner {
    pub fn new(registry: Arc<Registry>, config: PlannerConfig) -> Self {
        Self { registry, config }
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    /// Initial state for a session that starts in `mode`.
    pub fn initial_state(&self, mode: usize) -> Result<PlannerState, UnknownMode> {
        let spec = self.registry.get(mode)?;
        Ok(PlannerState::at_rest(mode, spec.default_height))
    }

    /// Applies the active mode's capability flags and ranges to `cmd`.
    ///
    /// Speed is clamped into the mode's range, or replaced by its default
    /// when the mode has no speed control; height likewise. Modes without
    /// heading control get a zero movement direction. The facing direction
    /// is kept as sent and ignored by [`Planner::step`] for such modes.
    pub fn clamp_command(&self, cmd: &MetaCommand) -> Result<MetaCommand, UnknownMode> {
        let spec = self.registry.get(cmd.mode_index)?;
        let mut out = cmd.clone();
        out.speed = match spec.speed_range {
            Some(r) if spec.supports_speed => r.clamp(cmd.speed),
            _ => spec.default_speed,
        };
        out.pelvis_height = match spec.height_range {
            Some(r) if spec.supports_height => r.clamp(cmd.pelvis_height),
            _ => spec.default_height,
        };
        if !spec.supports_heading {
            out.movement_dir = Vec2::ZERO;
        }
        Ok(out)
    }

    /// Advances `state` by `dt` seconds under an already clamped command.
    pub fn step(&self, state: &PlannerState, cmd: &MetaCommand, dt: f64) -> (PlannerState, TelemetrySample) {
        let cfg = &self.config;
        let mut next = state.clone();
        if cmd.mode_index != state.active_mode {
            next.active_mode = cmd.mode_index;
            next.blend_remaining_s = cfg.blend_time;
        }
        let spec = match self.registry.get(next.active_mode) {
            Ok(s) => s,
            Err(_) => {
                next.clock_ms += (dt * 1000.0).round() as u64;
                return (next.clone(), next.sample());
            }
        };

        if spec.supports_heading {
            let target = cmd.facing_dir.angle();
            let err = wrap_angle(target - state.heading_rad);
            let max = cfg.max_yaw_rate * dt;
            next.heading_rad = if err.abs() <= max {
                wrap_angle(target)
            } else {
                wrap_angle(state.heading_rad + max.copysign(err))
            };
        }

        let target_vel = cmd.movement_dir * cmd.speed;
        let mut desired = target_vel;
        if next.blend_remaining_s > 1e-9 {
            let frac = (dt / next.blend_remaining_s).min(1.0);
            desired = state.body_vel + (target_vel - state.body_vel) * frac;
            next.blend_remaining_s = (next.blend_remaining_s - dt).max(0.0);
            if next.blend_remaining_s <= 1e-9 {
                next.blend_remaining_s = 0.0;
            }
        }
        let delta = desired - state.body_vel;
        let max_dv = cfg.max_accel * dt;
        let dv = delta.norm();
        next.body_vel = if dv <= max_dv {
            desired
        } else {
            state.body_vel + delta * (max_dv / dv)
        };

        let world_vel = next.body_vel.rotated(next.heading_rad);
        next.pelvis_height = approach(state.pelvis_height, cmd.pelvis_height, cfg.max_height_rate * dt);
        next.base_pos = Vec3::new(
            state.base_pos.x + world_vel.x * dt,
            state.base_pos.y + world_vel.y * dt,
            next.pelvis_height,
        );

        let rate = if spec.default_speed > 0.0 {
            spec.gait_frequency * next.body_vel.norm() / spec.default_speed
        } else {
            spec.gait_frequency
        };
        let mut phase = (state.gait_phase + rate * dt).rem_euclid(1.0);
        if phase >= 1.0 {
            phase = 0.0;
        }
        next.gait_phase = phase;
        next.clock_ms += (dt * 1000.0).round() as u64;
        let sample = next.sample();
        (next, sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn planner() -> Planner {
        Planner::new(Arc::new(Registry::builtin()), PlannerConfig::default())
    }

    fn cmd(mode: usize, movement: Vec2, facing: Vec2, speed: f64, height: f64) -> MetaCommand {
        MetaCommand {
            timestamp_ms: 0,
            mode_index: mode,
            movement_dir: movement,
            facing_dir: facing,
            speed,
            pelvis_height: height,
        }
    }

    const FWD: Vec2 = Vec2::new(1.0, 0.0);

    #[test]
    fn clamp_run_speed() {
        let c = planner().clamp_command(&cmd(2, FWD, FWD, 5.0, 0.78)).unwrap();
        assert_eq!(c.speed, 3.0);
    }

    #[test]
    fn clamp_walk_uses_default_speed() {
        let p = planner();
        let c = p.clamp_command(&cmd(1, FWD, FWD, 2.0, 0.78)).unwrap();
        assert_eq!(c.speed, p.registry().get(1).unwrap().default_speed);
    }

    #[test]
    fn clamp_squat_zeroes_movement() {
        let c = planner().clamp_command(&cmd(6, FWD, FWD, 0.0, 0.1)).unwrap();
        assert_eq!(c.movement_dir, Vec2::ZERO);
        assert_eq!(c.pelvis_height, 0.35);
    }

    #[test]
    fn clamp_unknown_mode() {
        assert_eq!(planner().clamp_command(&cmd(25, FWD, FWD, 0.0, 0.7)), Err(UnknownMode(25)));
    }

    #[test]
    fn zero_input_holds_position() {
        let p = planner();
        let mut s = p.initial_state(1).unwrap();
        let c = p.clamp_command(&cmd(1, Vec2::ZERO, FWD, 0.0, 0.78)).unwrap();
        for _ in 0..100 {
            s = p.step(&s, &c, STEP_S).0;
        }
        assert_eq!(s.base_pos, Vec3::new(0.0, 0.0, 0.78));
        assert_eq!(s.gait_phase, 0.0);
        assert_eq!(s.clock_ms, 2000);
    }

    #[test]
    fn constant_velocity_one_second() {
        let p = planner();
        let mut s = p.initial_state(0).unwrap();
        s.active_mode = 2;
        s.body_vel = FWD;
        let c = cmd(2, FWD, FWD, 1.0, 0.78);
        // Run clamps to >= 1.5, so feed the raw command to hold 1.0 m/s.
        for _ in 0..50 {
            s = p.step(&s, &c, STEP_S).0;
        }
        assert!((s.base_pos.x - 1.0).abs() < 1e-9, "{}", s.base_pos.x);
        assert_eq!(s.base_pos.y, 0.0);
    }

    #[test]
    fn heading_turns_at_rate_limit_and_converges() {
        let p = planner();
        let mut s = p.initial_state(1).unwrap();
        let c = cmd(1, Vec2::ZERO, Vec2::new(-1.0, 0.0), 1.0, 0.78);
        let mut last_err = PI;
        let budget = ((PI / 1.5 + 1.0) / STEP_S).ceil() as usize;
        for _ in 0..budget {
            s = p.step(&s, &c, STEP_S).0;
            let err = wrap_angle(PI - s.heading_rad).abs();
            assert!(err <= last_err + 1e-12);
            last_err = err;
        }
        assert!(last_err < 1e-3);
    }

    #[test]
    fn mode_switch_carries_state() {
        let p = planner();
        let mut s = p.initial_state(1).unwrap();
        let walk = p.clamp_command(&cmd(1, FWD, FWD, 0.0, 0.78)).unwrap();
        for _ in 0..60 {
            s = p.step(&s, &walk, STEP_S).0;
        }
        let before = s.clone();
        let run = p.clamp_command(&cmd(2, FWD, FWD, 3.0, 0.78)).unwrap();
        let (after, sample) = p.step(&before, &run, STEP_S);
        assert_eq!(after.active_mode, 2);
        assert_eq!(sample.mode_index, 2);
        assert!((after.base_pos.x - before.base_pos.x) <= 3.0 * STEP_S + 1e-12);
        assert!((after.current_speed() - before.current_speed()).abs() <= 2.0 * STEP_S + 1e-12);
        assert!(after.blend_remaining_s <= 0.5);
    }

    #[test]
    fn phase_stays_in_unit_interval() {
        let p = planner();
        let mut s = p.initial_state(2).unwrap();
        let c = p.clamp_command(&cmd(2, FWD, FWD, 3.0, 0.78)).unwrap();
        for _ in 0..500 {
            s = p.step(&s, &c, STEP_S).0;
            assert!((0.0..1.0).contains(&s.gait_phase));
        }
    }
}
