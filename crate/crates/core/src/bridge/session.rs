use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use crate::geom::{wrap_angle, Vec2};
use crate::planner::Planner;
use crate::protocol::{Key, MetaCommand, StateRecord, TelemetrySample, UiEvent};
use crate::recipe::{Movement, Recipe};
use crate::registry::Registry;

use super::recording::{FinishedSession, Recording, SegmentTag, SessionKind};
use super::schedule::RecipeSchedule;
use super::{BridgeError, COMMAND_PERIOD_MS, FINISH_GRACE_MS, SNAP_DEG};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Idle,
    Keyboard,
    RecipeRunning,
    Finishing,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Idle => "idle",
            SessionStatus::Keyboard => "keyboard",
            SessionStatus::RecipeRunning => "recipe_running",
            SessionStatus::Finishing => "finishing",
        }
    }
}

/// Operator-facing control state.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub status: SessionStatus,
    pub held_keys: BTreeSet<Key>,
    /// Heading target in snap quanta from session start.
    pub snap_steps: i64,
    /// Continuous turn accumulated from A/D, radians.
    pub turn_offset_rad: f64,
    pub ui_mode: usize,
    pub ui_speed: f64,
    pub ui_height: f64,
}

impl SessionState {
    /// Snap target alone, radians, wrapped to (-π, π].
    pub fn heading_target_rad(&self) -> f64 {
        wrap_angle((self.snap_steps as f64 * SNAP_DEG).to_radians())
    }

    /// Snap target in degrees, in [0, 360).
    pub fn heading_target_deg(&self) -> f64 {
        (self.snap_steps as f64 * SNAP_DEG).rem_euclid(360.0)
    }

    /// Facing angle actually commanded: snap target plus A/D offset.
    pub fn facing_rad(&self) -> f64 {
        wrap_angle((self.snap_steps as f64 * SNAP_DEG).to_radians() + self.turn_offset_rad)
    }

    fn movement_dir(&self) -> Vec2 {
        let mut v = Vec2::ZERO;
        for k in &self.held_keys {
            v = v + match k {
                Key::W => Vec2::new(1.0, 0.0),
                Key::S => Vec2::new(-1.0, 0.0),
                Key::Comma => Vec2::new(0.0, 1.0),
                Key::Period => Vec2::new(0.0, -1.0),
                _ => Vec2::ZERO,
            };
        }
        v.normalized_or_zero()
    }

    fn turn_sign(&self) -> f64 {
        let a = self.held_keys.contains(&Key::A) as i32;
        let d = self.held_keys.contains(&Key::D) as i32;
        (a - d) as f64
    }

    /// Movement label for the held key set.
    pub fn movement(&self) -> Movement {
        let v = self.movement_dir();
        if v.x > 0.0 {
            Movement::Forward
        } else if v.x < 0.0 {
            Movement::Backward
        } else if v.y > 0.0 {
            Movement::StrafeLeft
        } else if v.y < 0.0 {
            Movement::StrafeRight
        } else if self.turn_sign() > 0.0 {
            Movement::TurnLeft
        } else if self.turn_sign() < 0.0 {
            Movement::TurnRight
        } else {
            Movement::None
        }
    }
}

#[derive(Debug)]
struct RecipeRun {
    recipe: Recipe,
    schedule: RecipeSchedule,
    /// Session time of the first tick; set by the first tick after dispatch.
    start_ms: Option<u64>,
    active_segment: Option<usize>,
}

#[derive(Debug)]
struct KeyboardCapture {
    open: Option<(u64, usize, Movement, f64)>,
}

#[derive(Debug)]
enum CaptureSource {
    Recipe(RecipeRun),
    Keyboard(KeyboardCapture),
}

#[derive(Debug)]
struct Capture {
    source: CaptureSource,
    recording: Recording,
    /// Session-time end once the capture has stopped commanding.
    end_ms: Option<u64>,
    dropped_at_start: u64,
}

/// Bridge session: owns the control state, the active recording and the
/// telemetry cache. Exactly one task drives a session.
#[derive(Debug)]
pub struct Session {
    registry: Arc<Registry>,
    planner: Planner,
    state: SessionState,
    record_keyboard: bool,
    capture: Option<Capture>,
    pending_halt: bool,
    latest: Option<TelemetrySample>,
    last_ts: Option<u64>,
    dropped: u64,
    received: VecDeque<u64>,
    finished: Vec<FinishedSession>,
}

impl Session {
    pub fn new(planner: Planner, initial_mode: usize) -> Result<Self, BridgeError> {
        let registry = planner.registry().clone();
        let spec = registry.get(initial_mode)?;
        let state = SessionState {
            status: SessionStatus::Idle,
            held_keys: BTreeSet::new(),
            snap_steps: 0,
            turn_offset_rad: 0.0,
            ui_mode: initial_mode,
            ui_speed: spec.default_speed,
            ui_height: spec.default_height,
        };
        Ok(Self {
            registry,
            planner,
            state,
            record_keyboard: false,
            capture: None,
            pending_halt: false,
            latest: None,
            last_ts: None,
            dropped: 0,
            received: VecDeque::new(),
            finished: Vec::new(),
        })
    }

    pub fn with_keyboard_recording(mut self, on: bool) -> Self {
        self.record_keyboard = on;
        self
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn status(&self) -> SessionStatus {
        self.state.status
    }

    pub fn latest(&self) -> Option<&TelemetrySample> {
        self.latest.as_ref()
    }

    /// Count of out-of-order telemetry samples dropped so far.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn is_recording(&self) -> bool {
        self.capture.is_some()
    }

    /// Recordings finalized since the last call.
    pub fn take_finished(&mut self) -> Vec<FinishedSession> {
        std::mem::take(&mut self.finished)
    }

    fn recipe_running(&self) -> bool {
        matches!(self.state.status, SessionStatus::RecipeRunning)
    }

    fn clamp_ui(&mut self) {
        let spec = self.registry.get(self.state.ui_mode).expect("ui mode validated");
        self.state.ui_speed = match spec.speed_range {
            Some(r) => r.clamp(self.state.ui_speed),
            None => spec.default_speed,
        };
        self.state.ui_height = match spec.height_range {
            Some(r) => r.clamp(self.state.ui_height),
            None => spec.default_height,
        };
    }

    fn halt(&mut self) {
        self.state.held_keys.clear();
        if self.state.status == SessionStatus::Keyboard {
            self.state.status = SessionStatus::Idle;
        }
        self.pending_halt = true;
    }

    fn abort_recipe(&mut self) {
        if let Some(Capture { source: CaptureSource::Recipe(run), .. }) = &self.capture {
            let heading = run.schedule.final_heading_rad();
            self.capture = None;
            self.adopt_heading(heading);
        }
        self.state.status = SessionStatus::Idle;
    }

    fn adopt_heading(&mut self, heading_rad: f64) {
        let steps = (heading_rad.to_degrees() / SNAP_DEG).round();
        self.state.snap_steps = steps as i64;
        self.state.turn_offset_rad = heading_rad - (steps * SNAP_DEG).to_radians();
    }

    pub fn apply_ui_event(&mut self, ev: UiEvent) -> Result<(), BridgeError> {
        match ev {
            UiEvent::KeyDown { key: Key::R } | UiEvent::Halt => {
                if self.recipe_running() {
                    self.abort_recipe();
                }
                self.halt();
            }
            UiEvent::KeyDown { key } => {
                if self.recipe_running() {
                    return Err(BridgeError::IgnoredDuringRecipe);
                }
                match key {
                    Key::Q => self.state.snap_steps += 1,
                    Key::E => self.state.snap_steps -= 1,
                    _ => {
                        self.state.held_keys.insert(key);
                        self.pending_halt = false;
                        if matches!(self.state.status, SessionStatus::Idle | SessionStatus::Finishing) {
                            self.state.status = SessionStatus::Keyboard;
                        }
                    }
                }
            }
            UiEvent::KeyUp { key } => {
                self.state.held_keys.remove(&key);
                if self.state.status == SessionStatus::Keyboard && self.state.held_keys.is_empty() {
                    self.state.status = SessionStatus::Idle;
                }
            }
            UiEvent::SetMode { mode } => {
                if self.recipe_running() {
                    return Err(BridgeError::IgnoredDuringRecipe);
                }
                self.registry.get(mode)?;
                self.state.ui_mode = mode;
                self.clamp_ui();
            }
            UiEvent::SetSpeed { value } => {
                if self.recipe_running() {
                    return Err(BridgeError::IgnoredDuringRecipe);
                }
                if value.is_finite() {
                    self.state.ui_speed = value;
                    self.clamp_ui();
                }
            }
            UiEvent::SetHeight { value } => {
                if self.recipe_running() {
                    return Err(BridgeError::IgnoredDuringRecipe);
                }
                if value.is_finite() {
                    self.state.ui_height = value;
                    self.clamp_ui();
                }
            }
            UiEvent::DispatchRecipe { recipe } => self.dispatch(recipe)?,
        }
        Ok(())
    }

    /// Queues `recipe` to start on the next command tick.
    pub fn dispatch(&mut self, recipe: Recipe) -> Result<(), BridgeError> {
        match self.state.status {
            SessionStatus::Idle => {}
            SessionStatus::Keyboard => return Err(BridgeError::Busy("keyboard control is active")),
            SessionStatus::RecipeRunning | SessionStatus::Finishing => {
                return Err(BridgeError::Busy("a recipe is running"))
            }
        }
        self.close_keyboard_capture();
        if self.capture.is_some() {
            return Err(BridgeError::Busy("a recording is still finishing"));
        }
        let schedule = RecipeSchedule::compile(
            &recipe,
            &self.registry,
            self.planner.config().max_yaw_rate,
            self.state.facing_rad(),
        )?;
        self.capture = Some(Capture {
            source: CaptureSource::Recipe(RecipeRun { recipe, schedule, start_ms: None, active_segment: None }),
            recording: Recording::new(0),
            end_ms: None,
            dropped_at_start: self.dropped,
        });
        self.state.status = SessionStatus::RecipeRunning;
        self.state.held_keys.clear();
        Ok(())
    }

    /// Index of the recipe segment currently commanded, if any.
    pub fn active_segment(&self) -> Option<usize> {
        match &self.capture {
            Some(Capture { source: CaptureSource::Recipe(run), end_ms: None, .. }) => run.active_segment,
            _ => None,
        }
    }

    fn idle_or_keyboard_command(&self, t_ms: u64) -> MetaCommand {
        let moving = self.state.status == SessionStatus::Keyboard;
        let movement_dir = if moving { self.state.movement_dir() } else { Vec2::ZERO };
        MetaCommand {
            timestamp_ms: t_ms,
            mode_index: self.state.ui_mode,
            movement_dir,
            facing_dir: Vec2::from_angle(self.state.facing_rad()),
            speed: if movement_dir == Vec2::ZERO { 0.0 } else { self.state.ui_speed },
            pelvis_height: self.state.ui_height,
        }
    }

    fn finalize(&mut self) {
        let Some(cap) = self.capture.take() else { return };
        let mut recording = cap.recording;
        let (kind, recipe) = match cap.source {
            CaptureSource::Recipe(run) => (SessionKind::Recipe, Some(run.recipe)),
            CaptureSource::Keyboard(_) => (SessionKind::Keyboard, None),
        };
        recording.truncate_to(recording.duration_ms());
        if kind == SessionKind::Recipe && self.state.status == SessionStatus::Finishing {
            self.state.status = SessionStatus::Idle;
        }
        if recording.segments.is_empty() {
            return;
        }
        self.finished.push(FinishedSession {
            kind,
            recipe,
            recording,
            dropped: self.dropped - cap.dropped_at_start,
        });
    }

    /// Synthesizes the effective command for the tick at session time
    /// `t_ms`. Must be called every [`COMMAND_PERIOD_MS`].
    pub fn tick_command(&mut self, t_ms: u64) -> MetaCommand {
        let yaw_step = self.planner.config().max_yaw_rate * COMMAND_PERIOD_MS as f64 / 1000.0;
        if self.state.status == SessionStatus::Keyboard {
            self.state.turn_offset_rad += yaw_step * self.state.turn_sign();
        }

        let mut recipe_cmd = None;
        let mut recipe_done = None;
        if let Some(Capture { source: CaptureSource::Recipe(run), recording, end_ms, .. }) = &mut self.capture {
            if end_ms.is_none() {
                let start = *run.start_ms.get_or_insert_with(|| {
                    recording.origin_ms = t_ms;
                    recording.segments = run
                        .schedule
                        .segments
                        .iter()
                        .map(|s| SegmentTag {
                            index: s.index,
                            mode: s.mode,
                            start_ms: s.start_ms,
                            end_ms: s.end_ms,
                            movement: s.movement,
                            turn_deg: s.turn_deg,
                            height: s.height_override,
                        })
                        .collect();
                    t_ms
                });
                let offset = t_ms - start;
                match run.schedule.command_at(offset, t_ms) {
                    Some((seg, cmd)) => {
                        run.active_segment = Some(seg);
                        let cmd = self.planner.clamp_command(&cmd).expect("schedule modes are valid");
                        recording.push_command(&cmd);
                        recipe_cmd = Some(cmd);
                    }
                    None => {
                        *end_ms = Some(start + run.schedule.total_ms);
                        let last = run.schedule.segments.last().expect("non-empty recipe");
                        recipe_done = Some((last.mode, run.schedule.final_heading_rad()));
                    }
                }
            }
        }
        if let Some((mode, heading)) = recipe_done {
            self.state.status = SessionStatus::Finishing;
            self.state.ui_mode = mode;
            self.clamp_ui();
            self.adopt_heading(heading);
        }
        if let Some(cmd) = recipe_cmd {
            return cmd;
        }

        let cmd = self.idle_or_keyboard_command(t_ms);
        let cmd = self.planner.clamp_command(&cmd).expect("ui mode validated");
        self.capture_keyboard(t_ms, &cmd);

        if let Some(end) = self.capture.as_ref().and_then(|c| c.end_ms) {
            if t_ms >= end + FINISH_GRACE_MS {
                self.finalize();
            }
        }
        cmd
    }

    /// Ends an open keyboard capture at its last command tick and finalizes it.
    fn close_keyboard_capture(&mut self) {
        let Some(Capture { source: CaptureSource::Keyboard(kb), recording, end_ms, .. }) = &mut self.capture else {
            return;
        };
        if end_ms.is_none() {
            let end = recording.commands.last().map_or(0, |c| c.timestamp_ms + COMMAND_PERIOD_MS);
            if let Some((start, mode, mv, _)) = kb.open.take() {
                if end > start {
                    let spec = self.registry.get(mode).expect("valid mode");
                    recording.segments.push(SegmentTag {
                        index: recording.segments.len(),
                        mode,
                        start_ms: start,
                        end_ms: end,
                        movement: mv,
                        turn_deg: None,
                        height: spec.supports_height.then_some(self.state.ui_height),
                    });
                }
            }
            *end_ms = Some(recording.origin_ms + end);
        }
        self.finalize();
    }

    fn capture_keyboard(&mut self, t_ms: u64, cmd: &MetaCommand) {
        if self.capture.is_none() && self.record_keyboard && self.state.status == SessionStatus::Keyboard {
            self.capture = Some(Capture {
                source: CaptureSource::Keyboard(KeyboardCapture { open: None }),
                recording: Recording::new(t_ms),
                end_ms: None,
                dropped_at_start: self.dropped,
            });
        }
        let halt = std::mem::take(&mut self.pending_halt);
        let movement = self.state.movement();
        let facing = self.state.facing_rad();
        let Some(Capture { source: CaptureSource::Keyboard(kb), recording, end_ms, .. }) = &mut self.capture else {
            return;
        };
        if end_ms.is_some() {
            return;
        }
        let offset = t_ms - recording.origin_ms;
        let key = (cmd.mode_index, movement);
        let changed = kb.open.is_none_or(|(_, m, mv, _)| (m, mv) != key);
        if changed || halt {
            if let Some((start, mode, mv, heading0)) = kb.open.take() {
                if offset > start {
                    let turn = wrap_angle(facing - heading0).to_degrees();
                    let spec = self.registry.get(mode).expect("valid mode");
                    recording.segments.push(SegmentTag {
                        index: recording.segments.len(),
                        mode,
                        start_ms: start,
                        end_ms: offset,
                        movement: mv,
                        turn_deg: (spec.supports_heading && turn.abs() > 1e-9).then_some(turn),
                        height: spec.supports_height.then_some(cmd.pelvis_height),
                    });
                }
            }
        }
        if halt {
            *end_ms = Some(t_ms);
            return;
        }
        if changed || kb.open.is_none() {
            kb.open = Some((offset, key.0, key.1, facing));
        }
        recording.push_command(cmd);
    }

    /// Feeds one telemetry sample (reference and executed channel).
    /// Samples not newer than the last accepted one are dropped and counted.
    pub fn on_telemetry(&mut self, reference: TelemetrySample, executed: TelemetrySample) {
        let t = reference.timestamp_ms;
        if self.last_ts.is_some_and(|last| t <= last) {
            self.dropped += 1;
            return;
        }
        self.last_ts = Some(t);
        self.received.push_back(t);
        while self.received.front().is_some_and(|&f| f + 1000 <= t) {
            self.received.pop_front();
        }
        let mut done = false;
        if let Some(cap) = &mut self.capture {
            let origin_set = match &cap.source {
                CaptureSource::Recipe(run) => run.start_ms.is_some(),
                CaptureSource::Keyboard(_) => true,
            };
            if origin_set {
                cap.recording.push_telemetry(&reference, &executed, cap.end_ms);
            }
            done = cap.end_ms.is_some_and(|e| t >= e);
        }
        self.latest = Some(executed);
        if done {
            self.finalize();
        }
    }

    /// Telemetry samples received over the last second.
    pub fn telemetry_fps(&self) -> f64 {
        self.received.len() as f64
    }

    pub fn state_record(&self, t_ms: u64) -> StateRecord {
        let (mode, speed, height) = match &self.latest {
            Some(s) => (s.mode_index, s.speed(), s.pelvis_height),
            None => (self.state.ui_mode, 0.0, self.state.ui_height),
        };
        let movement = match &self.capture {
            Some(Capture { source: CaptureSource::Recipe(run), end_ms: None, .. }) => run
                .active_segment
                .and_then(|i| run.schedule.segments.get(i))
                .map_or(Movement::None, |s| s.movement),
            _ if self.state.status == SessionStatus::Keyboard => self.state.movement(),
            _ => Movement::None,
        };
        StateRecord {
            t: t_ms,
            status: self.state.status.as_str().to_string(),
            mode,
            movement: movement.as_str().to_string(),
            heading_deg: self.state.facing_rad().to_degrees().rem_euclid(360.0),
            speed,
            height,
            fps: self.telemetry_fps(),
            segment: self.active_segment(),
        }
    }
}
