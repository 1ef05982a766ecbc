//! Grid search for the fixed plate offsets `φ_calib1`, `φ_calib2` against a
//! reference sample of known Mueller matrix.
//!
//! Each inter-event interval gives a measured phase log-derivative
//! `p·C / Δτ`. A candidate offset pair is scored by the mean squared
//! difference between that and the model log-derivative
//! `(∂A/∂τ · M_ref) / (A · M_ref)` of the reference at the same phase.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::timing::{window_intervals, FrameWindow, TimeAnchor};
use crate::events::{Event, Polarity};
use crate::mueller::{ideal_depolarizer, quarter_wave_plate, MuellerError, MuellerMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OffsetError {
    #[error("need at least {needed} intervals, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("score surface is flat (range {0:e}); offsets are not identifiable")]
    NotIdentifiable(f64),
    #[error("grid step {0} must be positive and below π")]
    BadStep(f64),
}

/// Reference target: a quarter-wave plate at 45° behind a depolarizer `D(α)`.
pub fn reference_qwp(alpha: f64) -> Result<MuellerMatrix, MuellerError> {
    Ok(ideal_depolarizer(alpha)? * quarter_wave_plate(PI / 4.0))
}

/// One interval reduced to what the score needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetSample {
    pub tau: f64,
    pub phi_dynamic: f64,
    /// `p·C / Δτ`.
    pub measured: f64,
}

/// Collects samples from one pixel's time-sorted events over the given windows.
pub fn offset_samples(
    events: &[Event],
    windows: &[FrameWindow],
    contrast_on: f64,
    contrast_off: f64,
    eta: f64,
) -> Vec<OffsetSample> {
    windows
        .iter()
        .flat_map(|w| {
            window_intervals(events, w, eta, TimeAnchor::Midpoint)
                .into_iter()
                .map(move |iv| {
                    let c = match iv.polarity {
                        Polarity::On => contrast_on,
                        Polarity::Off => -contrast_off,
                    };
                    OffsetSample {
                        tau: iv.tau,
                        phi_dynamic: w.phi_dynamic,
                        measured: c / iv.dtau,
                    }
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSearchConfig {
    /// Grid spacing in radians along both axes.
    pub step: f64,
    /// Golden-section polish of each axis around the best cell.
    pub refine: bool,
    /// Cells whose score is within this of the minimum count as tied.
    pub tie_tolerance: f64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            step: 0.5_f64.to_radians(),
            refine: true,
            tie_tolerance: 1e-6,
        }
    }
}

/// Result of the offset search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetFit {
    pub phi_calib1: f64,
    pub phi_calib2: f64,
    pub score: f64,
    /// Best grid cell before refinement.
    pub grid_phi1: f64,
    pub grid_phi2: f64,
    pub grid_score: f64,
    pub cells_per_axis: usize,
    pub score_min: f64,
    pub score_max: f64,
    /// Tied cells at least two cells away from the best one.
    pub distant_ties: Vec<(f64, f64)>,
}

impl OffsetFit {
    pub fn is_ambiguous(&self) -> bool {
        !self.distant_ties.is_empty()
    }
}

struct Precomputed {
    c1: f64,
    s1: f64,
    c2: f64,
    s2: f64,
    measured: f64,
}

/// Scores candidate offset pairs for a fixed reference.
pub struct OffsetScorer {
    m: [[f64; 4]; 4],
    samples: Vec<Precomputed>,
}

impl OffsetScorer {
    pub fn new(samples: &[OffsetSample], reference: &MuellerMatrix) -> Self {
        let samples = samples
            .iter()
            .map(|s| {
                let (s1, c1) = (2.0 * s.tau).sin_cos();
                let (s2, c2) = (10.0 * s.tau - 10.0 * s.phi_dynamic).sin_cos();
                Precomputed {
                    c1,
                    s1,
                    c2,
                    s2,
                    measured: s.measured,
                }
            })
            .collect();
        Self {
            m: reference.rows(),
            samples,
        }
    }

    /// Mean squared log-derivative residual; `+∞` when the model intensity
    /// is not positive at some sample.
    pub fn score(&self, phi1: f64, phi2: f64) -> f64 {
        let (sr1, cr1) = (2.0 * phi1).sin_cos();
        let (sr2, cr2) = (2.0 * phi2).sin_cos();
        let m = &self.m;
        let mut acc = 0.0;
        for p in &self.samples {
            let a1 = p.c1 * cr1 - p.s1 * sr1;
            let a2 = p.s1 * cr1 + p.c1 * sr1;
            let a3 = p.c2 * cr2 - p.s2 * sr2;
            let a4 = p.s2 * cr2 + p.c2 * sr2;
            let s = [1.0, a1 * a1, a1 * a2, a2];
            let ds = [0.0, -4.0 * a1 * a2, 2.0 * (a1 * a1 - a2 * a2), 2.0 * a1];
            let r = [1.0, a3 * a3, a3 * a4, -a4];
            let dr = [0.0, -20.0 * a3 * a4, 10.0 * (a3 * a3 - a4 * a4), -10.0 * a3];
            let mut intensity = 0.0;
            let mut rate = 0.0;
            for i in 0..4 {
                let ms = m[i][0] * s[0] + m[i][1] * s[1] + m[i][2] * s[2] + m[i][3] * s[3];
                let mds = m[i][1] * ds[1] + m[i][2] * ds[2] + m[i][3] * ds[3];
                intensity += r[i] * ms;
                rate += dr[i] * ms + r[i] * mds;
            }
            if !(intensity > 1e-12) {
                return f64::INFINITY;
            }
            let d = rate / intensity - p.measured;
            acc += d * d;
        }
        acc / self.samples.len() as f64
    }
}

fn wrap(phi: f64) -> f64 {
    phi.rem_euclid(PI)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Exhaustive search over `[0, π)²`, optionally polished per axis.
pub fn calibrate_qwp_offsets(
    samples: &[OffsetSample],
    reference: &MuellerMatrix,
    cfg: &GridSearchConfig,
) -> Result<OffsetFit, OffsetError> {
    if !(cfg.step > 0.0 && cfg.step < PI) {
        return Err(OffsetError::BadStep(cfg.step));
    }
    const MIN_SAMPLES: usize = 8;
    if samples.len() < MIN_SAMPLES {
        return Err(OffsetError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let scorer = OffsetScorer::new(samples, reference);
    let n = (PI / cfg.step).round().max(1.0) as usize;
    let cell = PI / n as f64;
    let grid: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| scorer.score((k / n) as f64 * cell, (k % n) as f64 * cell))
        .collect();

    let (best, &grid_score) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    let finite_max = grid
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !(finite_max - grid_score >= 1e-9) {
        return Err(OffsetError::NotIdentifiable(finite_max - grid_score));
    }
    let (bi, bj) = (best / n, best % n);
    let ring = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(n - d)
    };
    let distant_ties = grid
        .iter()
        .enumerate()
        .filter(|(k, v)| {
            **v <= grid_score + cfg.tie_tolerance && ring(k / n, bi).max(ring(k % n, bj)) >= 2
        })
        .map(|(k, _)| ((k / n) as f64 * cell, (k % n) as f64 * cell))
        .collect();

    let (grid_phi1, grid_phi2) = (bi as f64 * cell, bj as f64 * cell);
    let (mut phi1, mut phi2, mut score) = (grid_phi1, grid_phi2, grid_score);
    if cfg.refine {
        let tol = 1e-7;
        let p1 = golden_section(|x| scorer.score(x, phi2), phi1 - cell, phi1 + cell, tol);
        let p2 = golden_section(|x| scorer.score(p1, x), phi2 - cell, phi2 + cell, tol);
        let refined = scorer.score(p1, p2);
        if refined <= score {
            phi1 = p1;
            phi2 = p2;
            score = refined;
        }
    }
    Ok(OffsetFit {
        phi_calib1: wrap(phi1),
        phi_calib2: wrap(phi2),
        score,
        grid_phi1,
        grid_phi2,
        grid_score,
        cells_per_axis: n,
        score_min: grid_score,
        score_max: finite_max,
        distant_ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn too_few_samples() {
        let r = calibrate_qwp_offsets(
            &[],
            &reference_qwp(0.8).unwrap(),
            &GridSearchConfig::default(),
        );
        assert!(matches!(r, Err(OffsetError::TooFewSamples { .. })));
    }

    #[test]
    fn flat_surface_is_not_identifiable() {
        // The model log-derivative of a fully depolarizing sample is zero.
        let samples: Vec<OffsetSample> = (0..20)
            .map(|k| OffsetSample {
                tau: 0.1 * k as f64,
                phi_dynamic: 0.0,
                measured: 0.5,
            })
            .collect();
        let r = calibrate_qwp_offsets(
            &samples,
            &ideal_depolarizer(0.0).unwrap(),
            &GridSearchConfig {
                step: 0.1,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(OffsetError::NotIdentifiable(_))));
    }
}
