//! Kinematic transition-quality filter.
//!
//! Scores a window of telemetry around a mode switch by its largest
//! finite-difference velocity jump and its largest pelvis-height rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::TelemetrySample;

/// Fewest samples required on each side of the switch.
pub const MIN_SIDE_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityThresholds {
    /// Largest allowed change of finite-difference velocity between
    /// consecutive samples, m/s.
    pub max_speed_jump: f64,
    /// Largest allowed pelvis-height rate, m/s.
    pub max_height_rate: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            max_speed_jump: 0.2,
            max_height_rate: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub switch_ms: u64,
    pub max_speed_jump: f64,
    pub max_height_rate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("window around {switch_ms} ms has {before} samples before and {after} after; need {MIN_SIDE_SAMPLES} each")]
pub struct WindowTooShort {
    pub switch_ms: u64,
    pub before: usize,
    pub after: usize,
}

pub fn transition_quality(
    samples: &[TelemetrySample],
    switch_ms: u64,
    thresholds: &QualityThresholds,
) -> Result<QualityReport, WindowTooShort> {
    let before = samples.iter().filter(|s| s.timestamp_ms < switch_ms).count();
    let after = samples.len() - before;
    if before < MIN_SIDE_SAMPLES || after < MIN_SIDE_SAMPLES {
        return Err(WindowTooShort { switch_ms, before, after });
    }

    let mut max_jump = 0.0_f64;
    let mut max_rate = 0.0_f64;
    let mut prev_vel = None;
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.timestamp_ms.saturating_sub(a.timestamp_ms) as f64 / 1000.0;
        if dt <= 0.0 {
            continue;
        }
        let vel = (b.base_pos.xy() - a.base_pos.xy()) * (1.0 / dt);
        if let Some(p) = prev_vel {
            max_jump = max_jump.max((vel - p).norm());
        }
        prev_vel = Some(vel);
        max_rate = max_rate.max((b.pelvis_height - a.pelvis_height).abs() / dt);
    }
    Ok(QualityReport {
        switch_ms,
        max_speed_jump: max_jump,
        max_height_rate: max_rate,
        pass: max_jump <= thresholds.max_speed_jump && max_rate <= thresholds.max_height_rate,
    })
}

/// Samples within `half_window_ms` of `switch_ms`.
pub fn window_around(samples: &[TelemetrySample], switch_ms: u64, half_window_ms: u64) -> &[TelemetrySample] {
    let lo = switch_ms.saturating_sub(half_window_ms);
    let hi = switch_ms + half_window_ms;
    let start = samples.partition_point(|s| s.timestamp_ms < lo);
    let end = samples.partition_point(|s| s.timestamp_ms < hi);
    &samples[start..end]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Vec2, Vec3};

    fn stream(xs: &[f64]) -> Vec<TelemetrySample> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| TelemetrySample {
                timestamp_ms: i as u64 * 20,
                mode_index: 1,
                base_pos: Vec3::new(x, 0.0, 0.78),
                heading_rad: 0.0,
                base_vel: Vec2::ZERO,
                pelvis_height: 0.78,
                gait_phase: 0.0,
                joints: vec![],
            })
            .collect()
    }

    #[test]
    fn constant_velocity_passes() {
        // 0.25 m per 20 ms keeps every difference exact in binary.
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let r = transition_quality(&stream(&xs), 200, &QualityThresholds::default()).unwrap();
        assert_eq!(r.max_speed_jump, 0.0);
        assert_eq!(r.max_height_rate, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn one_metre_per_second_jump_fails() {
        let xs: Vec<f64> = (0..20).map(|i| if i <= 10 { 0.0 } else { (i - 10) as f64 * 0.02 }).collect();
        let r = transition_quality(&stream(&xs), 200, &QualityThresholds::default()).unwrap();
        assert!((r.max_speed_jump - 1.0).abs() < 1e-9, "{}", r.max_speed_jump);
        assert!(!r.pass);
    }

    #[test]
    fn short_window() {
        let xs = [0.0; 8];
        let err = transition_quality(&stream(&xs), 20 * 6, &QualityThresholds::default()).unwrap_err();
        assert_eq!(err, WindowTooShort { switch_ms: 120, before: 6, after: 2 });
    }

    #[test]
    fn window_slicing() {
        let s = stream(&[0.0; 100]);
        let w = window_around(&s, 1000, 100);
        assert_eq!(w.first().unwrap().timestamp_ms, 900);
        assert_eq!(w.last().unwrap().timestamp_ms, 1080);
    }
}
