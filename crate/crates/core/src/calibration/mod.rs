//! Sensor and system calibration: contrast thresholds, plate offsets,
//! refractory correction and trigger-to-angle correspondence.

mod offsets;
mod threshold;
mod timing;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::events::{Event, TriggerRecord};

pub use offsets::{
    calibrate_qwp_offsets, offset_samples, reference_qwp, GridSearchConfig, OffsetError, OffsetFit,
    OffsetSample, OffsetScorer,
};
pub use threshold::{
    fit_contrast_threshold, fit_line, median_threshold, LineFit, PixelThresholds, RampTrial,
};
pub use timing::{
    angle_of_time, corrected_dt, dynamic_offset, frame_windows, window_intervals, FrameWindow,
    Interval, TimeAnchor, TimingError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("threshold map has {got} entries, expected {expected}")]
    MapSize { expected: usize, got: usize },
    #[error("contrast threshold at pixel {pixel} must be positive and finite, got {value}")]
    BadContrast { pixel: usize, value: f64 },
    #[error("refractory period must be finite and nonnegative, got {0}")]
    BadRefractory(f64),
    #[error("offset angle must be finite, got {0}")]
    BadOffset(f64),
}

/// Pools offset-calibration samples from a reference recording. Pixels are
/// visited in row-major order with a stride chosen so that roughly
/// `max_samples` samples are kept; frames with unusable triggers are skipped.
pub fn collect_offset_samples(
    per_pixel: &[Vec<Event>],
    triggers: &TriggerRecord,
    calib: &CalibrationParams,
    max_samples: usize,
) -> Vec<OffsetSample> {
    let windows: Vec<FrameWindow> = frame_windows(triggers).into_iter().flatten().collect();
    let n = per_pixel.len().min(calib.pixel_count());
    let w = calib.width as usize;
    let sample_of = |p: usize| {
        let (c_on, c_off) = calib.contrast((p % w) as u16, (p / w) as u16);
        offset_samples(&per_pixel[p], &windows, c_on, c_off, calib.refractory)
    };
    let Some(first) = (0..n).find(|&p| !per_pixel[p].is_empty()) else {
        return Vec::new();
    };
    let per = sample_of(first).len().max(1);
    let stride = (n * per / max_samples.max(1)).max(1);
    let mut out = Vec::new();
    for p in (first..n).step_by(stride) {
        out.extend(sample_of(p));
        if out.len() >= max_samples {
            break;
        }
    }
    out
}

/// Reduces an angle to `[0, π)`.
pub fn reduce_offset(phi: f64) -> f64 {
    let r = phi.rem_euclid(PI);
    // rem_euclid can round up to exactly π for tiny negative inputs.
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Everything needed to turn events into constraint rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub width: u16,
    pub height: u16,
    /// Row-major per-pixel thresholds.
    pub contrast_on: Vec<f64>,
    pub contrast_off: Vec<f64>,
    /// Refractory period in seconds.
    pub refractory: f64,
    pub phi_calib1: f64,
    pub phi_calib2: f64,
}

impl CalibrationParams {
    /// Same thresholds on every pixel.
    pub fn uniform(
        width: u16,
        height: u16,
        contrast_on: f64,
        contrast_off: f64,
        refractory: f64,
        phi_calib1: f64,
        phi_calib2: f64,
    ) -> Result<Self, CalibrationError> {
        let n = width as usize * height as usize;
        Self::new(
            width,
            height,
            vec![contrast_on; n],
            vec![contrast_off; n],
            refractory,
            phi_calib1,
            phi_calib2,
        )
    }

    pub fn new(
        width: u16,
        height: u16,
        contrast_on: Vec<f64>,
        contrast_off: Vec<f64>,
        refractory: f64,
        phi_calib1: f64,
        phi_calib2: f64,
    ) -> Result<Self, CalibrationError> {
        let p = Self {
            width,
            height,
            contrast_on,
            contrast_off,
            refractory,
            phi_calib1: reduce_offset(phi_calib1),
            phi_calib2: reduce_offset(phi_calib2),
        };
        p.validate()?;
        if !phi_calib1.is_finite() {
            return Err(CalibrationError::BadOffset(phi_calib1));
        }
        if !phi_calib2.is_finite() {
            return Err(CalibrationError::BadOffset(phi_calib2));
        }
        Ok(p)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let n = self.pixel_count();
        for map in [&self.contrast_on, &self.contrast_off] {
            if map.len() != n {
                return Err(CalibrationError::MapSize {
                    expected: n,
                    got: map.len(),
                });
            }
            if let Some((pixel, &value)) = map
                .iter()
                .enumerate()
                .find(|(_, c)| !(c.is_finite() && **c > 0.0))
            {
                return Err(CalibrationError::BadContrast { pixel, value });
            }
        }
        if !(self.refractory.is_finite() && self.refractory >= 0.0) {
            return Err(CalibrationError::BadRefractory(self.refractory));
        }
        for phi in [self.phi_calib1, self.phi_calib2] {
            if !(phi.is_finite() && (0.0..PI).contains(&phi)) {
                return Err(CalibrationError::BadOffset(phi));
            }
        }
        Ok(())
    }

    /// Thresholds `(C_on, C_off)` of pixel `(x, y)`.
    pub fn contrast(&self, x: u16, y: u16) -> (f64, f64) {
        let i = y as usize * self.width as usize + x as usize;
        (self.contrast_on[i], self.contrast_off[i])
    }
}
