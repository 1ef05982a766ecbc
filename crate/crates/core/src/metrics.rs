//! Error metrics between Mueller-matrix videos.
//!
//! Both videos are compared entry by entry after normalizing every matrix to
//! `M00 = 1`; the mean runs over all 16 entries of every pixel that is valid
//! in both videos.

use serde::{Deserialize, Serialize};

use crate::mueller::MuellerMatrix;
use crate::video::MuellerVideo;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mse: f64,
    pub mae: f64,
    /// Pixels that entered the average.
    pub pixels: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VideoErrors {
    pub aggregate: ErrorStats,
    pub per_frame: Vec<ErrorStats>,
}

/// `M / M00`, or the raw matrix when `M00` is zero (kept finite for metrics).
fn normalized_or_raw(m: &MuellerMatrix) -> MuellerMatrix {
    let m00 = m.m00();
    if m00 != 0.0 && m00.is_finite() {
        m.scale(1.0 / m00)
    } else {
        *m
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    se: f64,
    ae: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, a: &MuellerMatrix, b: &MuellerMatrix) {
        let (a, b) = (normalized_or_raw(a), normalized_or_raw(b));
        for i in 0..4 {
            for j in 0..4 {
                let d = a[(i, j)] - b[(i, j)];
                self.se += d * d;
                self.ae += d.abs();
            }
        }
        self.n += 1;
    }

    fn stats(&self) -> ErrorStats {
        if self.n == 0 {
            return ErrorStats {
                mse: f64::NAN,
                mae: f64::NAN,
                pixels: 0,
            };
        }
        let entries = 16.0 * self.n as f64;
        ErrorStats {
            mse: self.se / entries,
            mae: self.ae / entries,
            pixels: self.n,
        }
    }
}

/// Entry-wise error of a single pair of matrices.
pub fn matrix_errors(a: &MuellerMatrix, b: &MuellerMatrix) -> ErrorStats {
    let mut acc = Acc::default();
    acc.add(a, b);
    acc.stats()
}

/// Per-frame and aggregate MSE/MAE over pixels valid in both videos.
pub fn video_errors(a: &MuellerVideo, b: &MuellerVideo) -> Result<VideoErrors, MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::ShapeMismatch {
            a: (a.frames, a.height, a.width),
            b: (b.frames, b.height, b.width),
        });
    }
    let per = a.height * a.width;
    let mut total = Acc::default();
    let mut per_frame = Vec::with_capacity(a.frames);
    for f in 0..a.frames {
        let mut acc = Acc::default();
        for i in f * per..(f + 1) * per {
            if a.valid[i] && b.valid[i] {
                acc.add(&a.matrices[i], &b.matrices[i]);
            }
        }
        total.se += acc.se;
        total.ae += acc.ae;
        total.n += acc.n;
        per_frame.push(acc.stats());
    }
    Ok(VideoErrors {
        aggregate: total.stats(),
        per_frame,
    })
}

/// Errors restricted to the pixels selected by `mask` (row-major, one frame).
pub fn masked_errors(
    a: &MuellerVideo,
    b: &MuellerVideo,
    mask: &[bool],
) -> Result<ErrorStats, MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::ShapeMismatch {
            a: (a.frames, a.height, a.width),
            b: (b.frames, b.height, b.width),
        });
    }
    let per = a.height * a.width;
    assert_eq!(mask.len(), per);
    let mut acc = Acc::default();
    for i in 0..a.len() {
        if mask[i % per] && a.valid[i] && b.valid[i] {
            acc.add(&a.matrices[i], &b.matrices[i]);
        }
    }
    Ok(acc.stats())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_vs_zero_convention() {
        let e = matrix_errors(&MuellerMatrix::zeros(), &MuellerMatrix::identity());
        assert_eq!(e.mse, 4.0 / 16.0);
        assert_eq!(e.mae, 4.0 / 16.0);
    }

    #[test]
    fn self_error_is_zero() {
        let v = MuellerVideo::filled(2, 2, 3, crate::mueller::linear_polarizer(0.2), true);
        let e = video_errors(&v, &v).unwrap();
        assert_eq!(e.aggregate.mse, 0.0);
        assert_eq!(e.per_frame.len(), 2);
        let other = MuellerVideo::filled(1, 2, 3, MuellerMatrix::identity(), true);
        assert!(video_errors(&v, &other).is_err());
    }
}
