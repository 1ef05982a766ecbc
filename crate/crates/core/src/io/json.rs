use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::calibration::{CalibrationParams, OffsetFit, PixelThresholds};
use crate::sim::Scene;

pub const SCENE_VERSION: u32 = 1;
pub const CALIBRATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub version: u32,
    #[serde(flatten)]
    pub scene: Scene,
}

/// Calibration parameters plus the diagnostics of the fits that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub version: u32,
    #[serde(flatten)]
    pub params: CalibrationParams,
    /// Pixels whose threshold fit failed and were filled with the median.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncalibrated_pixels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_thresholds: Option<Vec<PixelThresholds>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_fit: Option<OffsetFit>,
}

impl CalibrationFile {
    pub fn new(params: CalibrationParams) -> Self {
        Self {
            version: CALIBRATION_VERSION,
            params,
            uncalibrated_pixels: Vec::new(),
            raw_thresholds: None,
            offset_fit: None,
        }
    }
}

fn check_version(found: u32, expected: u32, kind: &'static str) -> Result<(), IoError> {
    if found != expected {
        return Err(IoError::VersionMismatch {
            kind,
            found,
            expected,
        });
    }
    Ok(())
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

pub fn read_scene(path: &Path) -> Result<Scene, IoError> {
    let text = fs::read_to_string(path)?;
    let probe: VersionProbe = serde_json::from_str(&text)?;
    check_version(probe.version, SCENE_VERSION, "scene")?;
    let file: SceneFile = serde_json::from_str(&text)?;
    Ok(file.scene)
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<(), IoError> {
    let file = SceneFile {
        version: SCENE_VERSION,
        scene: scene.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(())
}

pub fn read_calibration(path: &Path) -> Result<CalibrationFile, IoError> {
    let text = fs::read_to_string(path)?;
    let probe: VersionProbe = serde_json::from_str(&text)?;
    check_version(probe.version, CALIBRATION_VERSION, "calibration")?;
    let file: CalibrationFile = serde_json::from_str(&text)?;
    file.params
        .validate()
        .map_err(|e| IoError::Malformed(e.to_string()))?;
    Ok(file)
}

pub fn write_calibration(path: &Path, file: &CalibrationFile) -> Result<(), IoError> {
    fs::write(path, serde_json::to_string_pretty(file)? + "\n")?;
    Ok(())
}
