use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::events::TriggerRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimingError {
    #[error("time {t} outside frame window [{start}, {end})")]
    OutsideWindow { t: f64, start: f64, end: f64 },
    #[error("frame {0} has no camera-side trigger")]
    MissingTrigger(usize),
    #[error("frame {frame} has a degenerate window (span {span})")]
    DegenerateWindow { frame: usize, span: f64 },
}

/// Time span of one Mueller-matrix frame: a half turn of the light-side plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameWindow {
    pub frame: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub phi_dynamic: f64,
}

impl FrameWindow {
    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    /// Phase per second inside this window, `π / span`.
    pub fn phase_rate(&self) -> f64 {
        PI / self.span()
    }

    /// Camera-side offset `i2 = φ_calib2 − 5 φ_dynamic`.
    pub fn camera_offset(&self, phi_calib2: f64) -> f64 {
        phi_calib2 - crate::forward::SPEED_RATIO * self.phi_dynamic
    }

    /// [`angle_of_time`] without the bounds check; used for interval midpoints.
    pub fn phase_unchecked(&self, t: f64) -> f64 {
        PI * (t - self.t_start) / self.span()
    }
}

/// Where inside an inter-event interval the model row is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeAnchor {
    /// Midpoint of the refractory-corrected interval `[t_k + η, t_{k+1}]`.
    #[default]
    Midpoint,
    /// The opening event time `t_k`.
    EventStart,
}

/// One inter-event interval of a pixel, in phase units of its frame window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    /// Phase at which the model row is evaluated.
    pub tau: f64,
    /// Refractory-corrected gap in phase units (`ω·Δt`).
    pub dtau: f64,
    /// Polarity of the event closing the interval.
    pub polarity: crate::events::Polarity,
}

/// Intervals between consecutive events of one pixel that both fall inside
/// `window`. `events` must be time-sorted; gaps that the refractory
/// correction makes nonpositive are dropped.
pub fn window_intervals(
    events: &[crate::events::Event],
    window: &FrameWindow,
    eta: f64,
    anchor: TimeAnchor,
) -> Vec<Interval> {
    let start = events.partition_point(|e| e.t < window.t_start);
    let end = events.partition_point(|e| e.t < window.t_end);
    let rate = window.phase_rate();
    events[start..end]
        .windows(2)
        .filter_map(|pair| {
            let dt = corrected_dt(pair[0].t, pair[1].t, eta);
            if dt <= 0.0 {
                return None;
            }
            let t_eval = match anchor {
                TimeAnchor::Midpoint => 0.5 * (pair[0].t + eta + pair[1].t),
                TimeAnchor::EventStart => pair[0].t,
            };
            Some(Interval {
                tau: window.phase_unchecked(t_eval),
                dtau: rate * dt,
                polarity: pair[1].polarity,
            })
        })
        .collect()
}

/// Refractory-corrected gap `t_{k+1} − t_k − η`. Callers drop nonpositive gaps.
pub fn corrected_dt(t_k: f64, t_next: f64, eta: f64) -> f64 {
    t_next - t_k - eta
}

/// Light-side plate phase `ωt` at time `t`, from the enclosing frame's triggers.
pub fn angle_of_time(t: f64, window: &FrameWindow) -> Result<f64, TimingError> {
    if !window.contains(t) {
        return Err(TimingError::OutsideWindow {
            t,
            start: window.t_start,
            end: window.t_end,
        });
    }
    Ok(window.phase_unchecked(t))
}

/// Phase lag between the two plates for one frame.
pub fn dynamic_offset(t_on: f64, t_on_next: f64, t_off: f64) -> f64 {
    PI * (t_on - t_off) / (t_on_next - t_on)
}

/// Frame windows from a trigger record. A frame whose camera-side trigger is
/// missing, or whose span departs from the median span by more than 50%, is
/// reported as an error and must be skipped.
pub fn frame_windows(triggers: &TriggerRecord) -> Vec<Result<FrameWindow, TimingError>> {
    let n = triggers.frame_count();
    let mut spans: Vec<f64> = (0..n)
        .map(|f| triggers.on[f + 1] - triggers.on[f])
        .collect();
    let all_spans = spans.clone();
    spans.sort_by(|a, b| a.total_cmp(b));
    let median = if spans.is_empty() { 0.0 } else { spans[n / 2] };
    (0..n)
        .map(|f| {
            let span = all_spans[f];
            if !(span > 0.0) || (span - median).abs() > 0.5 * median {
                return Err(TimingError::DegenerateWindow { frame: f, span });
            }
            let t_off = triggers
                .off
                .get(f)
                .copied()
                .flatten()
                .ok_or(TimingError::MissingTrigger(f))?;
            Ok(FrameWindow {
                frame: f,
                t_start: triggers.on[f],
                t_end: triggers.on[f + 1],
                phi_dynamic: dynamic_offset(triggers.on[f], triggers.on[f + 1], t_off),
            })
        })
        .collect()
}
