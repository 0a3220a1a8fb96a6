use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::recipe::Recipe;

/// Keyboard bindings understood by the bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Key {
    #[serde(alias = "w")]
    W,
    #[serde(alias = "a")]
    A,
    #[serde(alias = "s")]
    S,
    #[serde(alias = "d")]
    D,
    #[serde(alias = "q")]
    Q,
    #[serde(alias = "e")]
    E,
    #[serde(rename = "comma", alias = ",")]
    Comma,
    #[serde(rename = "period", alias = ".")]
    Period,
    #[serde(alias = "r")]
    R,
}

impl Key {
    /// Keys that translate or rotate the robot while held.
    pub fn is_movement(self) -> bool {
        matches!(self, Key::W | Key::A | Key::S | Key::D | Key::Comma | Key::Period)
    }
}

/// Operator input arriving on the frontend channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UiEvent {
    KeyDown { key: Key },
    KeyUp { key: Key },
    SetMode { mode: usize },
    SetSpeed { value: f64 },
    SetHeight { value: f64 },
    DispatchRecipe { recipe: Recipe },
    Halt,
}

/// Periodic bridge status, broadcast at 10 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: u64,
    pub status: String,
    pub mode: usize,
    pub movement: String,
    pub heading_deg: f64,
    pub speed: f64,
    pub height: f64,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeStatusState {
    Started,
    Segment,
    Finished,
    Aborted,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeStatusRecord {
    pub recipe: String,
    pub state: RecipeStatusState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Registry entry as shown to the frontend mode selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub index: usize,
    pub name: String,
    pub group: String,
    pub supports_speed: bool,
    pub supports_heading: bool,
    pub supports_height: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_range: Option<[f64; 2]>,
    pub default_speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_range: Option<[f64; 2]>,
    pub default_height: f64,
}

/// Records sent from the bridge to frontend clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BridgeRecord {
    State(StateRecord),
    RecipeStatus(RecipeStatusRecord),
    Registry { modes: Vec<ModeSummary> },
    Error { message: String },
}

pub fn encode_ui_event(ev: &UiEvent) -> String {
    serde_json::to_string(ev).expect("ui event serialization")
}

pub fn decode_ui_event(text: &str) -> Result<UiEvent, ProtocolError> {
    serde_json::from_str(text).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))
}

pub fn encode_bridge_record(rec: &BridgeRecord) -> String {
    serde_json::to_string(rec).expect("bridge record serialization")
}

pub fn decode_bridge_record(text: &str) -> Result<BridgeRecord, ProtocolError> {
    serde_json::from_str(text).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_events_use_type_discriminator() {
        let ev = UiEvent::KeyDown { key: Key::Comma };
        let text = encode_ui_event(&ev);
        assert_eq!(text, r#"{"type":"key_down","key":"comma"}"#);
        assert_eq!(decode_ui_event(&text).unwrap(), ev);
        assert_eq!(decode_ui_event(r#"{"type":"key_up","key":"w"}"#).unwrap(), UiEvent::KeyUp { key: Key::W });
        assert_eq!(decode_ui_event(r#"{"type":"halt"}"#).unwrap(), UiEvent::Halt);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(decode_ui_event(r#"{"type":"key_down","key":"X"}"#).is_err());
    }

    #[test]
    fn state_record_shape() {
        let rec = BridgeRecord::State(StateRecord {
            t: 100,
            status: "idle".into(),
            mode: 1,
            movement: "none".into(),
            heading_deg: 30.0,
            speed: 0.0,
            height: 0.78,
            fps: 50.0,
            segment: None,
        });
        let text = encode_bridge_record(&rec);
        assert!(text.starts_with(r#"{"type":"state","t":100,"status":"idle""#), "{text}");
        assert_eq!(decode_bridge_record(&text).unwrap(), rec);
    }
}
