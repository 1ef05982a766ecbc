//! Scalar maps and image output.
//!
//! Images are binary PGM (`P5`, 8-bit). Valid pixels map linearly from the
//! stated range onto gray levels 1–255; invalid pixels are written as gray
//! level 0. CSV mirrors carry the raw values with `nan` for invalid pixels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::IoError;
use crate::mueller::lu_chipman_maps;
use crate::video::MuellerVideo;

/// Gray level written for invalid pixels.
pub const INVALID_GRAY: u8 = 0;

/// Decomposition maps of one frame, row-major. Entries that could not be
/// computed are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMaps {
    pub width: usize,
    pub height: usize,
    pub diattenuation: Vec<f64>,
    pub polarizance: Vec<f64>,
    pub rho: Vec<f64>,
    pub retardance: Vec<f64>,
}

impl FrameMaps {
    /// Retardance modulated by polarization preservation.
    pub fn modulated_retardance(&self) -> Vec<f64> {
        self.retardance
            .iter()
            .zip(&self.rho)
            .map(|(r, p)| r * p)
            .collect()
    }
}

pub fn decompose_video(video: &MuellerVideo) -> Vec<FrameMaps> {
    let per = video.width * video.height;
    (0..video.frames)
        .map(|f| {
            let mut maps = FrameMaps {
                width: video.width,
                height: video.height,
                diattenuation: vec![f64::NAN; per],
                polarizance: vec![f64::NAN; per],
                rho: vec![f64::NAN; per],
                retardance: vec![f64::NAN; per],
            };
            for p in 0..per {
                let i = f * per + p;
                if !video.valid[i] {
                    continue;
                }
                match lu_chipman_maps(&video.matrices[i]) {
                    Ok(m) => {
                        maps.diattenuation[p] = m.diattenuation;
                        maps.polarizance[p] = m.polarizance;
                        maps.rho[p] = m.rho;
                        maps.retardance[p] = m.retardance;
                    }
                    Err(e) => {
                        if let Some((d, pz)) = e.partial_maps() {
                            maps.diattenuation[p] = d;
                            maps.polarizance[p] = pz;
                        }
                    }
                }
            }
            maps
        })
        .collect()
}

/// Writes `values` (row-major, `NaN` = invalid) as a PGM scaled from
/// `[lo, hi]`.
pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    values: &[f64],
    lo: f64,
    hi: f64,
) -> Result<(), IoError> {
    assert_eq!(values.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if v.is_finite() {
            let u = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            1 + (u * 254.0).round() as u8
        } else {
            INVALID_GRAY
        }
    }));
    fs::write(path, out)?;
    Ok(())
}

/// Writes `x,y,value` rows.
pub fn write_csv(path: &Path, width: usize, values: &[f64], name: &str) -> Result<(), IoError> {
    let mut s = format!("x,y,{name}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", i % width, i / width, v);
    }
    fs::write(path, s)?;
    Ok(())
}

/// Frame `f` as a `4W × 4H` mosaic: tile `(i, j)` holds entry `M_ij` of
/// every pixel. Invalid pixels are `NaN`.
pub fn mueller_mosaic(video: &MuellerVideo, f: usize) -> (usize, usize, Vec<f64>) {
    let (w, h) = (video.width, video.height);
    let mut out = vec![f64::NAN; 16 * w * h];
    for y in 0..h {
        for x in 0..w {
            if !video.is_valid(x, y, f) {
                continue;
            }
            let m = video.get(x, y, f);
            for i in 0..4 {
                for j in 0..4 {
                    out[(i * h + y) * 4 * w + j * w + x] = m[(i, j)];
                }
            }
        }
    }
    (4 * w, 4 * h, out)
}
