//! Real-time bridge: one task owning the [`Session`], paced by a 20 Hz
//! command tick and a 10 Hz state broadcast.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use strider_core::annotation::derive_seed;
use strider_core::bridge::{FinishedSession, Session, SessionKind, SessionStatus, COMMAND_PERIOD_MS};
use strider_core::dataset::{write_package, PackageMeta, SessionPackage};
use strider_core::planner::Planner;
use strider_core::protocol::{BridgeRecord, RecipeStatusRecord, RecipeStatusState, TelemetrySample, UiEvent};
use strider_core::registry::Registry;
use tokio::sync::{broadcast, mpsc};
use tokio::time::MissedTickBehavior;

use crate::link::BackendLink;

pub const STATE_PERIOD_MS: u64 = 100;

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub initial_mode: usize,
    pub record_keyboard: bool,
    /// Packages are written here; `None` discards finished recordings.
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub backend_name: String,
}

/// A frontend event plus the channel for replies meant only for its sender.
#[derive(Debug)]
pub struct Inbound {
    pub event: UiEvent,
    pub reply: mpsc::UnboundedSender<BridgeRecord>,
}

/// Handle shared with frontend connections.
#[derive(Debug, Clone)]
pub struct BridgeHandle {
    pub inbound: mpsc::Sender<Inbound>,
    pub records: broadcast::Sender<BridgeRecord>,
    pub registry: Arc<Registry>,
}

pub(crate) struct BridgeTask {
    pub session: Session,
    pub link: BackendLink,
    pub telemetry: mpsc::UnboundedReceiver<TelemetrySample>,
    pub inbound: mpsc::Receiver<Inbound>,
    pub records: broadcast::Sender<BridgeRecord>,
    pub registry: Arc<Registry>,
    pub config: BridgeConfig,
    pub running_recipe: Option<String>,
}

pub(crate) fn new_session(planner: Planner, config: &BridgeConfig) -> Result<Session, strider_core::bridge::BridgeError> {
    Ok(Session::new(planner, config.initial_mode)?.with_keyboard_recording(config.record_keyboard))
}

impl BridgeTask {
    pub async fn run(mut self) {
        let mut cmd_tick = tokio::time::interval(Duration::from_millis(COMMAND_PERIOD_MS));
        cmd_tick.set_missed_tick_behavior(MissedTickBehavior::Burst);
        let mut state_tick = tokio::time::interval(Duration::from_millis(STATE_PERIOD_MS));
        state_tick.set_missed_tick_behavior(MissedTickBehavior::Skip);
        let mut ticks: u64 = 0;
        let mut telemetry_open = true;
        let mut last_segment = None;
        let mut seq: u64 = 0;
        loop {
            tokio::select! {
                _ = cmd_tick.tick() => {
                    let t = ticks * COMMAND_PERIOD_MS;
                    ticks += 1;
                    let cmd = self.session.tick_command(t);
                    if let Err(e) = self.link.send(&cmd).await {
                        tracing::error!(error = %e, "command send failed");
                        self.broadcast(BridgeRecord::Error { message: e.to_string() });
                    }
                    let seg = self.session.active_segment();
                    if seg.is_some() && seg != last_segment {
                        self.recipe_status(RecipeStatusState::Segment, seg, None);
                    }
                    last_segment = seg;
                }
                _ = state_tick.tick() => {
                    let t = ticks.saturating_sub(1) * COMMAND_PERIOD_MS;
                    self.broadcast(BridgeRecord::State(self.session.state_record(t)));
                }
                sample = self.telemetry.recv(), if telemetry_open => {
                    match sample {
                        Some(s) => self.session.on_telemetry(s.clone(), s),
                        None => {
                            telemetry_open = false;
                            self.broadcast(BridgeRecord::Error { message: "telemetry channel closed".into() });
                        }
                    }
                }
                msg = self.inbound.recv() => {
                    let Some(Inbound { event, reply }) = msg else { return };
                    self.handle_event(event, &reply);
                }
            }
            for done in self.session.take_finished() {
                seq += 1;
                self.package(done, seq);
            }
        }
    }

    fn broadcast(&self, rec: BridgeRecord) {
        let _ = self.records.send(rec);
    }

    fn current_recipe(&self) -> String {
        self.running_recipe.clone().unwrap_or_default()
    }

    fn recipe_status(&self, state: RecipeStatusState, segment: Option<usize>, detail: Option<String>) {
        self.broadcast(BridgeRecord::RecipeStatus(RecipeStatusRecord {
            recipe: self.current_recipe(),
            state,
            segment,
            detail,
        }));
    }

    fn handle_event(&mut self, event: UiEvent, reply: &mpsc::UnboundedSender<BridgeRecord>) {
        let was_running = self.session.status() == SessionStatus::RecipeRunning;
        let name = match &event {
            UiEvent::DispatchRecipe { recipe } => Some(recipe.name.clone()),
            _ => None,
        };
        match self.session.apply_ui_event(event) {
            Ok(()) => {
                if let Some(name) = name {
                    self.running_recipe = Some(name);
                    self.recipe_status(RecipeStatusState::Started, None, None);
                } else if was_running && self.session.status() != SessionStatus::RecipeRunning {
                    self.recipe_status(RecipeStatusState::Aborted, None, Some("halted by operator".into()));
                }
            }
            Err(e) => {
                let _ = reply.send(BridgeRecord::Error { message: e.to_string() });
            }
        }
    }

    fn package(&self, done: FinishedSession, seq: u64) {
        let recipe_name = done.recipe.as_ref().map(|r| r.name.clone());
        let Some(out_dir) = self.config.out_dir.clone() else {
            if let Some(name) = recipe_name {
                self.broadcast_status(name, RecipeStatusState::Finished, None);
            }
            return;
        };
        let (label, salt) = match (&done.kind, &done.recipe) {
            (SessionKind::Recipe, Some(r)) => (sanitize(&r.name), r.seed),
            _ => ("keyboard".to_string(), seq),
        };
        let session_id = format!("{seq:04}-{label}");
        let meta = PackageMeta {
            session_id: session_id.clone(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            seed: derive_seed(self.config.seed, salt),
            backend_name: self.config.backend_name.clone(),
        };
        let registry = self.registry.clone();
        let records = self.records.clone();
        tokio::task::spawn_blocking(move || {
            let path = out_dir.join(&session_id);
            let result = SessionPackage::from_session(&done, &registry, meta)
                .and_then(|pkg| write_package(&pkg, &registry, &path));
            let (state, detail) = match result {
                Ok(()) => {
                    tracing::info!(path = %path.display(), "package written");
                    (RecipeStatusState::Finished, path.display().to_string())
                }
                Err(e) => {
                    tracing::error!(error = %e, "package rejected");
                    (RecipeStatusState::Failed, e.to_string())
                }
            };
            match recipe_name {
                Some(name) => {
                    let _ = records.send(BridgeRecord::RecipeStatus(RecipeStatusRecord {
                        recipe: name,
                        state,
                        segment: None,
                        detail: Some(detail),
                    }));
                }
                None if state == RecipeStatusState::Failed => {
                    let _ = records.send(BridgeRecord::Error { message: detail });
                }
                None => {}
            }
        });
    }

    fn broadcast_status(&self, recipe: String, state: RecipeStatusState, detail: Option<String>) {
        self.broadcast(BridgeRecord::RecipeStatus(RecipeStatusRecord { recipe, state, segment: None, detail }));
    }
}

/// File-name-safe form of a recipe name.
pub fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let s = s.trim_matches('-');
    if s.is_empty() {
        "recipe".into()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_names() {
        assert_eq!(sanitize("Walk / Run 2"), "walk---run-2");
        assert_eq!(sanitize("///"), "recipe");
        assert_eq!(sanitize("demo_1"), "demo_1");
    }
}
