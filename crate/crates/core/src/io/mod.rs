//! On-disk formats. Binary files are little-endian with a four-byte magic and
//! a `u16` version; configuration and calibration files are JSON. Byte
//! layouts are documented in `docs/formats.md`.

mod binary;
mod images;
mod json;

pub use binary::{
    read_event_file, read_video_file, write_event_file, write_video_file, EventFile, RampMeta,
    RecordingMetadata, EVENT_FILE_VERSION, EVENT_MAGIC, VIDEO_FILE_VERSION, VIDEO_MAGIC,
};
pub use images::{decompose_video, mueller_mosaic, write_csv, write_pgm, FrameMaps, INVALID_GRAY};
pub use json::{
    read_calibration, read_scene, write_calibration, write_scene, CalibrationFile, SceneFile,
    CALIBRATION_VERSION, SCENE_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a {expected} file (magic {found:?})")]
    BadMagic {
        expected: &'static str,
        found: [u8; 4],
    },
    #[error("{kind} file version {found} is not supported (expected {expected})")]
    VersionMismatch {
        kind: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IoError {
    fn malformed(msg: impl Into<String>) -> Self {
        IoError::Malformed(msg.into())
    }
}
