use serde::{Deserialize, Serialize};

use super::{ProtocolError, UNIT_TOLERANCE};
use crate::geom::{Vec2, Vec3};
use crate::registry::MODE_COUNT;

/// The five-field planner command, stamped with session time.
///
/// `movement_dir` is in the robot body frame (x forward, y left) and is
/// either a unit vector or zero. `facing_dir` is a world-frame unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaCommand {
    #[serde(rename = "t")]
    pub timestamp_ms: u64,
    #[serde(rename = "mode")]
    pub mode_index: usize,
    #[serde(rename = "move")]
    pub movement_dir: Vec2,
    #[serde(rename = "face")]
    pub facing_dir: Vec2,
    pub speed: f64,
    #[serde(rename = "height")]
    pub pelvis_height: f64,
}

impl MetaCommand {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::InvalidCommand(m));
        if self.mode_index >= MODE_COUNT {
            return bad(format!("mode index {} outside 0..{MODE_COUNT}", self.mode_index));
        }
        if !self.movement_dir.is_finite() || !self.facing_dir.is_finite() {
            return bad("non-finite direction".into());
        }
        let m = self.movement_dir.norm();
        if m > UNIT_TOLERANCE && (m - 1.0).abs() > UNIT_TOLERANCE {
            return bad(format!("movement_dir norm {m} is neither 0 nor 1"));
        }
        let f = self.facing_dir.norm();
        if (f - 1.0).abs() > UNIT_TOLERANCE {
            return bad(format!("facing_dir norm {f} is not 1"));
        }
        if !self.speed.is_finite() || self.speed < 0.0 {
            return bad(format!("speed {} must be finite and >= 0", self.speed));
        }
        if !self.pelvis_height.is_finite() || self.pelvis_height <= 0.0 {
            return bad(format!("pelvis_height {} must be finite and > 0", self.pelvis_height));
        }
        Ok(())
    }

    pub fn is_halt(&self) -> bool {
        self.movement_dir == Vec2::ZERO
    }
}

/// One telemetry record from the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetrySample {
    #[serde(rename = "t")]
    pub timestamp_ms: u64,
    #[serde(rename = "mode")]
    pub mode_index: usize,
    #[serde(rename = "pos")]
    pub base_pos: Vec3,
    #[serde(rename = "heading")]
    pub heading_rad: f64,
    #[serde(rename = "vel")]
    pub base_vel: Vec2,
    #[serde(rename = "h")]
    pub pelvis_height: f64,
    #[serde(rename = "phase")]
    pub gait_phase: f64,
    pub joints: Vec<f64>,
}

impl TelemetrySample {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        use std::f64::consts::PI;
        let bad = |m: String| Err(ProtocolError::InvalidSample(m));
        if self.mode_index >= MODE_COUNT {
            return bad(format!("mode index {} outside 0..{MODE_COUNT}", self.mode_index));
        }
        if !self.base_pos.is_finite() || !self.base_vel.is_finite() {
            return bad("non-finite position or velocity".into());
        }
        if !(self.heading_rad > -PI && self.heading_rad <= PI) {
            return bad(format!("heading {} outside (-pi, pi]", self.heading_rad));
        }
        if !(0.0..1.0).contains(&self.gait_phase) {
            return bad(format!("gait phase {} outside [0, 1)", self.gait_phase));
        }
        if !self.pelvis_height.is_finite() || self.pelvis_height <= 0.0 {
            return bad(format!("pelvis height {} must be finite and > 0", self.pelvis_height));
        }
        if self.joints.iter().any(|j| !j.is_finite()) {
            return bad("non-finite joint position".into());
        }
        Ok(())
    }

    /// Magnitude of the planar base velocity.
    pub fn speed(&self) -> f64 {
        self.base_vel.norm()
    }
}

fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    // Plain structs of numbers and arrays cannot fail to serialize.
    let mut out = serde_json::to_vec(value).expect("record serialization");
    out.push(b'\n');
    out
}

fn decode<'a, T: Deserialize<'a>>(frame: &'a [u8]) -> Result<T, ProtocolError> {
    let body = match frame.split_last() {
        Some((b'\n', body)) => body,
        _ => return Err(ProtocolError::MalformedFrame("missing line terminator".into())),
    };
    if body.contains(&b'\n') {
        return Err(ProtocolError::MalformedFrame("embedded newline".into()));
    }
    serde_json::from_slice(body).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))
}

/// Encodes a command as one newline-terminated record.
pub fn encode_command(cmd: &MetaCommand) -> Result<Vec<u8>, ProtocolError> {
    cmd.validate()?;
    Ok(encode(cmd))
}

pub fn decode_command(frame: &[u8]) -> Result<MetaCommand, ProtocolError> {
    let cmd: MetaCommand = decode(frame)?;
    cmd.validate()?;
    Ok(cmd)
}

pub fn encode_telemetry(sample: &TelemetrySample) -> Result<Vec<u8>, ProtocolError> {
    sample.validate()?;
    Ok(encode(sample))
}

pub fn decode_telemetry(frame: &[u8]) -> Result<TelemetrySample, ProtocolError> {
    let sample: TelemetrySample = decode(frame)?;
    sample.validate()?;
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn walk_forward() -> MetaCommand {
        MetaCommand {
            timestamp_ms: 150,
            mode_index: 1,
            movement_dir: Vec2::new(1.0, 0.0),
            facing_dir: Vec2::new(1.0, 0.0),
            speed: 1.0,
            pelvis_height: 0.78,
        }
    }

    fn sample() -> TelemetrySample {
        TelemetrySample {
            timestamp_ms: 20,
            mode_index: 2,
            base_pos: Vec3::new(0.5, -0.25, 0.78),
            heading_rad: PI,
            base_vel: Vec2::new(-2.0, 0.0),
            pelvis_height: 0.78,
            gait_phase: 0.5,
            joints: vec![],
        }
    }

    #[test]
    fn canonical_forward_walk_frame() {
        let bytes = encode_command(&walk_forward()).unwrap();
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            "{\"t\":150,\"mode\":1,\"move\":[1.0,0.0],\"face\":[1.0,0.0],\"speed\":1.0,\"height\":0.78}\n"
        );
        assert_eq!(decode_command(&bytes).unwrap(), walk_forward());
    }

    #[test]
    fn halt_round_trips() {
        let halt = MetaCommand { movement_dir: Vec2::ZERO, speed: 0.0, ..walk_forward() };
        assert!(halt.is_halt());
        assert_eq!(decode_command(&encode_command(&halt).unwrap()).unwrap(), halt);
    }

    #[test]
    fn mode_25_rejected() {
        let cmd = MetaCommand { mode_index: 25, ..walk_forward() };
        assert!(matches!(encode_command(&cmd), Err(ProtocolError::InvalidCommand(_))));
    }

    #[test]
    fn truncated_frame_is_malformed() {
        let bytes = encode_command(&walk_forward()).unwrap();
        for cut in [1, 10, bytes.len() - 2, bytes.len() - 1] {
            assert!(
                matches!(decode_command(&bytes[..cut]), Err(ProtocolError::MalformedFrame(_))),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn half_length_facing_is_invalid() {
        let frame = b"{\"t\":0,\"mode\":1,\"move\":[0.0,0.0],\"face\":[0.5,0.0],\"speed\":0.0,\"height\":0.78}\n";
        assert!(matches!(decode_command(frame), Err(ProtocolError::InvalidCommand(_))));
    }

    #[test]
    fn unknown_or_missing_fields_are_malformed() {
        let extra = b"{\"t\":0,\"mode\":1,\"move\":[0.0,0.0],\"face\":[1.0,0.0],\"speed\":0.0,\"height\":0.78,\"x\":1}\n";
        assert!(matches!(decode_command(extra), Err(ProtocolError::MalformedFrame(_))));
        let missing = b"{\"t\":0,\"mode\":1,\"move\":[0.0,0.0],\"face\":[1.0,0.0],\"speed\":0.0}\n";
        assert!(matches!(decode_command(missing), Err(ProtocolError::MalformedFrame(_))));
    }

    #[test]
    fn heading_pi_round_trips_exactly() {
        let s = sample();
        let back = decode_telemetry(&encode_telemetry(&s).unwrap()).unwrap();
        assert_eq!(back.heading_rad.to_bits(), PI.to_bits());
        assert_eq!(back, s);
    }

    #[test]
    fn phase_one_is_invalid() {
        let s = TelemetrySample { gait_phase: 1.0, ..sample() };
        assert!(matches!(encode_telemetry(&s), Err(ProtocolError::InvalidSample(_))));
    }

    #[test]
    fn heading_minus_pi_is_invalid() {
        let s = TelemetrySample { heading_rad: -PI, ..sample() };
        assert!(matches!(encode_telemetry(&s), Err(ProtocolError::InvalidSample(_))));
    }

    #[test]
    fn negative_zero_survives() {
        let cmd = MetaCommand { movement_dir: Vec2::new(-0.0, 0.0), ..walk_forward() };
        let back = decode_command(&encode_command(&cmd).unwrap()).unwrap();
        assert_eq!(back.movement_dir.x.to_bits(), (-0.0f64).to_bits());
    }
}
