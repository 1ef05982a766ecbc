//! Two-stage Mueller-matrix video reconstruction.
//!
//! Stage one solves every pixel and frame independently: the stacked event
//! constraints are solved in the weighted least-squares sense, projected onto
//! physically valid matrices and reweighted against outliers. Stage two
//! exchanges solutions between spatio-temporal neighbours and tries random
//! multiplicative perturbations, accepting a candidate only when it lowers the
//! pixel's own L1 residual.

mod propagation;
mod solver;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    frame_windows, window_intervals, CalibrationError, CalibrationParams, FrameWindow, TimeAnchor,
};
use crate::events::{Event, EventStream, Polarity, TriggerRecord};
use crate::mueller::MuellerMatrix;
use crate::video::MuellerVideo;

pub use propagation::{
    color, perturb, propagate_and_refine, spatio_temporal_neighbors, Neighbors, PropagationStats,
};
pub use solver::{
    per_pixel_reconstruct, solve_homogeneous, update_irls_weights, update_l1_weights,
    CompactConstraint, PixelSystem, SolveError,
};

/// How the per-pixel stage reweights constraint rows between solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrlsWeighting {
    /// `w_k = 1/max(|B_k·M|, ε)` applied directly as the row scale.
    #[default]
    Residual,
    /// Row scales chosen so each solve minimizes a quadratic majorizer of
    /// `‖D·B·M‖₁`, the cost used by the refinement stage.
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub irls_iterations: usize,
    pub irls_weighting: IrlsWeighting,
    pub propagation_iterations: usize,
    pub sigma: f64,
    pub k_min: usize,
    pub seed: u64,
    pub skip_propagation: bool,
    pub skip_perturbation: bool,
    /// Disables the physical-validity projection in both stages.
    pub skip_cloude: bool,
    pub anchor: TimeAnchor,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            irls_iterations: 5,
            irls_weighting: IrlsWeighting::Residual,
            propagation_iterations: 10,
            sigma: 0.01,
            k_min: 16,
            seed: 0,
            skip_propagation: false,
            skip_perturbation: false,
            skip_cloude: false,
            anchor: TimeAnchor::Midpoint,
        }
    }
}

impl SolverConfig {
    /// Per-pixel stage only.
    pub fn per_pixel_only(mut self) -> Self {
        self.skip_propagation = true;
        self.skip_perturbation = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReconstructionError {
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("calibration is for a {cw}×{ch} sensor but the recording is {w}×{h}")]
    SizeMismatch { cw: u16, ch: u16, w: u16, h: u16 },
    #[error("recording has no complete frame")]
    NoFrames,
}

/// Compact constraints of every pixel and frame, indexed like [`MuellerVideo`].
#[derive(Debug, Clone, Default)]
pub struct SystemStore {
    offsets: Vec<usize>,
    constraints: Vec<CompactConstraint>,
    /// `(i1, i2)` per entry.
    offsets_angles: Vec<(f64, f64)>,
}

impl SystemStore {
    /// Builds constraints from per-pixel, time-sorted event lists.
    /// `windows[f]` is `None` for frames that must be skipped.
    pub fn build(
        per_pixel: &[Vec<Event>],
        width: usize,
        height: usize,
        windows: &[Option<FrameWindow>],
        calib: &CalibrationParams,
        anchor: TimeAnchor,
    ) -> Self {
        let mut store = SystemStore {
            offsets: vec![0],
            constraints: Vec::new(),
            offsets_angles: Vec::with_capacity(windows.len() * width * height),
        };
        for window in windows {
            let frame: Vec<Vec<CompactConstraint>> = (0..width * height)
                .into_par_iter()
                .map(|p| match window {
                    None => Vec::new(),
                    Some(w) => {
                        let (c_on, c_off) = (calib.contrast_on[p], calib.contrast_off[p]);
                        window_intervals(&per_pixel[p], w, calib.refractory, anchor)
                            .into_iter()
                            .map(|iv| {
                                let pc = match iv.polarity {
                                    Polarity::On => c_on,
                                    Polarity::Off => -c_off,
                                };
                                CompactConstraint {
                                    tau: iv.tau,
                                    dtau: iv.dtau,
                                    g: pc / iv.dtau,
                                }
                            })
                            .collect()
                    }
                })
                .collect();
            let i2 = window.map_or(0.0, |w| w.camera_offset(calib.phi_calib2));
            for list in frame {
                store.constraints.extend(list);
                store.offsets.push(store.constraints.len());
                store.offsets_angles.push((calib.phi_calib1, i2));
            }
        }
        store
    }

    pub fn len(&self) -> usize {
        self.offsets_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets_angles.is_empty()
    }

    /// Number of constraints of entry `i`.
    pub fn count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn constraints(&self, i: usize) -> &[CompactConstraint] {
        &self.constraints[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn total_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn system(&self, i: usize) -> PixelSystem {
        let (i1, i2) = self.offsets_angles[i];
        PixelSystem::from_constraints(self.constraints(i), i1, i2)
    }
}

/// Wall-clock time of each stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub build: Duration,
    pub per_pixel: Duration,
    pub refinement: Duration,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub video: MuellerVideo,
    /// Output of the per-pixel stage alone.
    pub initial: MuellerVideo,
    pub stats: PropagationStats,
    pub timings: StageTimings,
    /// Frames skipped for missing or inconsistent triggers.
    pub skipped_frames: Vec<usize>,
}

/// Runs the per-pixel stage over every entry of `systems`.
pub fn per_pixel_stage(
    systems: &SystemStore,
    frames: usize,
    height: usize,
    width: usize,
    cfg: &SolverConfig,
) -> MuellerVideo {
    let results: Vec<(MuellerMatrix, bool)> = (0..systems.len())
        .into_par_iter()
        .map(|i| match per_pixel_reconstruct(&systems.system(i), cfg) {
            Ok(m) => (m, true),
            Err(_) => (MuellerMatrix::identity(), false),
        })
        .collect();
    let (matrices, valid) = results.into_iter().unzip();
    MuellerVideo {
        frames,
        height,
        width,
        matrices,
        valid,
    }
}

/// Reconstruction from per-pixel event lists (row-major pixels, time-sorted).
pub fn reconstruct_pixels(
    per_pixel: &[Vec<Event>],
    width: u16,
    height: u16,
    triggers: &TriggerRecord,
    calib: &CalibrationParams,
    cfg: &SolverConfig,
) -> Result<Reconstruction, ReconstructionError> {
    calib.validate()?;
    if (calib.width, calib.height) != (width, height) {
        return Err(ReconstructionError::SizeMismatch {
            cw: calib.width,
            ch: calib.height,
            w: width,
            h: height,
        });
    }
    let windows: Vec<Option<FrameWindow>> = frame_windows(triggers)
        .into_iter()
        .map(Result::ok)
        .collect();
    if windows.is_empty() {
        return Err(ReconstructionError::NoFrames);
    }
    let skipped_frames = windows
        .iter()
        .enumerate()
        .filter_map(|(f, w)| w.is_none().then_some(f))
        .collect();
    let (w, h, frames) = (width as usize, height as usize, windows.len());

    let t = Instant::now();
    let systems = SystemStore::build(per_pixel, w, h, &windows, calib, cfg.anchor);
    let build = t.elapsed();

    let t = Instant::now();
    let initial = per_pixel_stage(&systems, frames, h, w, cfg);
    let per_pixel_time = t.elapsed();

    let t = Instant::now();
    let mut video = initial.clone();
    let stats = propagate_and_refine(&mut video, &systems, cfg);
    let refinement = t.elapsed();

    Ok(Reconstruction {
        video,
        initial,
        stats,
        timings: StageTimings {
            build,
            per_pixel: per_pixel_time,
            refinement,
        },
        skipped_frames,
    })
}

/// Full pipeline on an event stream.
pub fn reconstruct_video(
    stream: &EventStream,
    calib: &CalibrationParams,
    cfg: &SolverConfig,
) -> Result<Reconstruction, ReconstructionError> {
    reconstruct_pixels(
        &stream.per_pixel(),
        stream.width,
        stream.height,
        &stream.triggers,
        calib,
        cfg,
    )
}
