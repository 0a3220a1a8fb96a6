use std::sync::Arc;

use crate::planner::{Planner, PlannerConfig, PlannerState, STEP_S};
use crate::protocol::{decode_command, decode_telemetry, encode_command, encode_telemetry, MetaCommand, TelemetrySample};
use crate::recipe::Recipe;
use crate::registry::Registry;

use super::recording::FinishedSession;
use super::session::Session;
use super::{BridgeError, COMMAND_PERIOD_MS, FINISH_GRACE_MS, TELEMETRY_PERIOD_MS};

/// Kinematic reference and executed response for one telemetry tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryPair {
    pub reference: TelemetrySample,
    pub executed: TelemetrySample,
}

/// A planner backend driven on the session clock.
pub trait Backend {
    fn name(&self) -> &str;

    fn joints_dim(&self) -> usize;

    fn send_command(&mut self, cmd: &MetaCommand) -> Result<(), BridgeError>;

    /// Emits the sample for session time `t_ms`, then advances one step
    /// under the latest command.
    fn poll_telemetry(&mut self, t_ms: u64) -> Result<Vec<TelemetryPair>, BridgeError>;
}

/// In-process kinematic backend. The executed channel mirrors the reference.
#[derive(Debug)]
pub struct ReferenceBackend {
    planner: Planner,
    state: Option<PlannerState>,
    latest: Option<MetaCommand>,
}

impl ReferenceBackend {
    pub fn new(planner: Planner) -> Self {
        Self { planner, state: None, latest: None }
    }

    pub fn state(&self) -> Option<&PlannerState> {
        self.state.as_ref()
    }
}

impl Backend for ReferenceBackend {
    fn name(&self) -> &str {
        "reference-kinematic"
    }

    fn joints_dim(&self) -> usize {
        0
    }

    fn send_command(&mut self, cmd: &MetaCommand) -> Result<(), BridgeError> {
        let clamped = self.planner.clamp_command(cmd)?;
        self.latest = Some(clamped);
        Ok(())
    }

    fn poll_telemetry(&mut self, t_ms: u64) -> Result<Vec<TelemetryPair>, BridgeError> {
        let Some(cmd) = &self.latest else {
            return Ok(Vec::new());
        };
        let state = match self.state.take() {
            Some(s) => s,
            None => {
                let mut s = self.planner.initial_state(cmd.mode_index)?;
                s.clock_ms = t_ms;
                s
            }
        };
        let sample = state.sample();
        let (next, _) = self.planner.step(&state, cmd, STEP_S);
        self.state = Some(next);
        Ok(vec![TelemetryPair { reference: sample.clone(), executed: sample }])
    }
}

/// Routes every command and sample through the wire codec, as a socket
/// transport would.
#[derive(Debug)]
pub struct WireLoopback<B> {
    inner: B,
    pub bytes_out: usize,
    pub bytes_in: usize,
}

impl<B: Backend> WireLoopback<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, bytes_out: 0, bytes_in: 0 }
    }
}

impl<B: Backend> Backend for WireLoopback<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn joints_dim(&self) -> usize {
        self.inner.joints_dim()
    }

    fn send_command(&mut self, cmd: &MetaCommand) -> Result<(), BridgeError> {
        let frame = encode_command(cmd)?;
        self.bytes_out += frame.len();
        self.inner.send_command(&decode_command(&frame)?)
    }

    fn poll_telemetry(&mut self, t_ms: u64) -> Result<Vec<TelemetryPair>, BridgeError> {
        let mut out = Vec::new();
        for pair in self.inner.poll_telemetry(t_ms)? {
            let r = encode_telemetry(&pair.reference)?;
            let e = encode_telemetry(&pair.executed)?;
            self.bytes_in += r.len() + e.len();
            out.push(TelemetryPair {
                reference: decode_telemetry(&r)?,
                executed: decode_telemetry(&e)?,
            });
        }
        Ok(out)
    }
}

/// Runs `recipe` to completion on a virtual clock starting at 0.
///
/// Commands go out every 50 ms and telemetry is polled every 20 ms; at
/// instants where both fall due, the command is delivered first.
pub fn run_recipe(session: &mut Session, backend: &mut dyn Backend, recipe: Recipe) -> Result<FinishedSession, BridgeError> {
    session.dispatch(recipe)?;
    let limit = 10 * 3600 * 1000;
    let mut t = 0u64;
    while t <= limit {
        if t.is_multiple_of(COMMAND_PERIOD_MS) {
            let cmd = session.tick_command(t);
            backend.send_command(&cmd)?;
        }
        if t.is_multiple_of(TELEMETRY_PERIOD_MS) {
            for pair in backend.poll_telemetry(t)? {
                session.on_telemetry(pair.reference, pair.executed);
            }
        }
        if let Some(done) = session.take_finished().pop() {
            return Ok(done);
        }
        t += 10;
    }
    Err(BridgeError::BackendUnavailable(format!(
        "recording did not finish within {} ms of virtual time (grace {FINISH_GRACE_MS} ms)",
        limit
    )))
}

/// Executes `recipe` against the built-in backend through the wire codec.
pub fn execute_recipe(registry: Arc<Registry>, config: PlannerConfig, recipe: Recipe) -> Result<FinishedSession, BridgeError> {
    recipe.validate(&registry)?;
    let first = recipe.segments[0].mode.resolve(&registry).expect("validated").index;
    let planner = Planner::new(registry, config);
    let mut session = Session::new(planner.clone(), first)?;
    let mut backend = WireLoopback::new(ReferenceBackend::new(planner));
    run_recipe(&mut session, &mut backend, recipe)
}
