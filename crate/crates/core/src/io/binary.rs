use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::calibration::RampTrial;
use crate::events::{Event, EventStream, Polarity, TriggerRecord};
use crate::mueller::{MuellerMatrix, VectorizedMueller};
use crate::video::MuellerVideo;

pub const EVENT_MAGIC: [u8; 4] = *b"EMEV";
pub const EVENT_FILE_VERSION: u16 = 1;
pub const VIDEO_MAGIC: [u8; 4] = *b"EMMV";
pub const VIDEO_FILE_VERSION: u16 = 1;

/// Sentinel for a missing camera-side trigger.
const MISSING_TRIGGER: i64 = i64::MIN;

/// One linear ramp of a threshold-calibration recording. Events with
/// `t0 ≤ t ≤ t0 + duration` belong to it; `I(t) = a·(t − t0) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampMeta {
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub duration: f64,
}

/// What a recording contains; decides which commands accept it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RecordingMetadata {
    /// A scene for reconstruction.
    Scene {
        frames: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Linear-ramp stimuli for contrast-threshold calibration.
    Ramp { trials: Vec<RampMeta> },
    /// A reference target `D(α)·Q(π/4)` for plate-offset calibration.
    Reference { alpha: f64 },
}

impl RecordingMetadata {
    pub fn kind(&self) -> &'static str {
        match self {
            RecordingMetadata::Scene { .. } => "scene",
            RecordingMetadata::Ramp { .. } => "ramp",
            RecordingMetadata::Reference { .. } => "reference",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub width: u16,
    pub height: u16,
    pub omega: f64,
    /// Refractory period the recording was made with, in seconds.
    pub refractory: f64,
    pub metadata: RecordingMetadata,
    /// Globally time-sorted; timestamps are stored at 1 µs resolution.
    pub events: Vec<Event>,
    pub triggers: TriggerRecord,
}

impl EventFile {
    /// The events and triggers as an in-memory stream.
    pub fn stream(&self) -> EventStream {
        EventStream::new(
            self.width,
            self.height,
            self.events.clone(),
            self.triggers.clone(),
        )
    }

    /// Splits a ramp recording into its trials; `None` for other kinds.
    pub fn ramp_trials(&self) -> Option<Vec<RampTrial>> {
        let RecordingMetadata::Ramp { trials } = &self.metadata else {
            return None;
        };
        Some(
            trials
                .iter()
                .map(|r| RampTrial {
                    a: r.a,
                    b: r.b,
                    t0: r.t0,
                    events: self
                        .events
                        .iter()
                        .filter(|e| e.t >= r.t0 && e.t <= r.t0 + r.duration)
                        .copied()
                        .collect(),
                })
                .collect(),
        )
    }
}

fn to_us(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

fn from_us(t: i64) -> f64 {
    t as f64 / 1e6
}

fn read_magic(r: &mut impl Read, expected: [u8; 4], kind: &'static str) -> Result<(), IoError> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if found != expected {
        return Err(IoError::BadMagic {
            expected: kind,
            found,
        });
    }
    Ok(())
}

fn read_version(r: &mut impl Read, expected: u16, kind: &'static str) -> Result<(), IoError> {
    let found = r.read_u16::<LE>()?;
    if found != expected {
        return Err(IoError::VersionMismatch {
            kind,
            found: found as u32,
            expected: expected as u32,
        });
    }
    Ok(())
}

fn expect_eof(r: &mut impl Read) -> Result<(), IoError> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(IoError::malformed("trailing bytes after declared records")),
    }
}

fn truncated(e: std::io::Error) -> IoError {
    if e.kind() == ErrorKind::UnexpectedEof {
        IoError::malformed("file is truncated")
    } else {
        IoError::Io(e)
    }
}

pub fn write_event_file(path: &Path, file: &EventFile) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_events_to(&mut w, file)?;
    w.flush()?;
    Ok(())
}

fn write_events_to(w: &mut impl Write, file: &EventFile) -> Result<(), IoError> {
    if file.events.windows(2).any(|p| p[1].t < p[0].t) {
        return Err(IoError::malformed("events must be sorted by timestamp"));
    }
    if file.triggers.off.len() != file.triggers.on.len() {
        return Err(IoError::malformed("trigger columns differ in length"));
    }
    let meta = serde_json::to_vec(&file.metadata)?;
    w.write_all(&EVENT_MAGIC)?;
    w.write_u16::<LE>(EVENT_FILE_VERSION)?;
    w.write_u16::<LE>(file.width)?;
    w.write_u16::<LE>(file.height)?;
    w.write_f64::<LE>(file.omega)?;
    w.write_f64::<LE>(file.refractory)?;
    w.write_u32::<LE>(meta.len() as u32)?;
    w.write_all(&meta)?;
    w.write_u64::<LE>(file.events.len() as u64)?;
    w.write_u32::<LE>(file.triggers.len() as u32)?;
    for e in &file.events {
        w.write_u16::<LE>(e.x)?;
        w.write_u16::<LE>(e.y)?;
        w.write_i64::<LE>(to_us(e.t))?;
        w.write_i8(e.polarity.as_i8())?;
    }
    for (f, (on, off)) in file.triggers.on.iter().zip(&file.triggers.off).enumerate() {
        w.write_u32::<LE>(f as u32)?;
        w.write_i64::<LE>(to_us(*on))?;
        w.write_i64::<LE>(off.map_or(MISSING_TRIGGER, to_us))?;
    }
    Ok(())
}

pub fn read_event_file(path: &Path) -> Result<EventFile, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    read_events_from(&mut r)
}

fn read_events_from(r: &mut impl Read) -> Result<EventFile, IoError> {
    read_magic(r, EVENT_MAGIC, "event").map_err(|e| match e {
        IoError::Io(e) => truncated(e),
        other => other,
    })?;
    read_version(r, EVENT_FILE_VERSION, "event")?;
    let mut body = || -> Result<EventFile, IoError> {
        let width = r.read_u16::<LE>()?;
        let height = r.read_u16::<LE>()?;
        let omega = r.read_f64::<LE>()?;
        let refractory = r.read_f64::<LE>()?;
        let meta_len = r.read_u32::<LE>()? as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let metadata: RecordingMetadata = serde_json::from_slice(&meta)?;
        let n_events = r.read_u64::<LE>()? as usize;
        let n_triggers = r.read_u32::<LE>()? as usize;
        let mut events = Vec::with_capacity(n_events.min(1 << 28));
        for _ in 0..n_events {
            let x = r.read_u16::<LE>()?;
            let y = r.read_u16::<LE>()?;
            let t = from_us(r.read_i64::<LE>()?);
            let p = r.read_i8()?;
            let polarity = Polarity::from_i8(p)
                .ok_or_else(|| IoError::malformed(format!("polarity byte {p}")))?;
            if x >= width || y >= height {
                return Err(IoError::malformed(format!(
                    "event at ({x}, {y}) outside sensor"
                )));
            }
            events.push(Event::new(x, y, t, polarity));
        }
        if events.windows(2).any(|p| p[1].t < p[0].t) {
            return Err(IoError::malformed("events are not sorted by timestamp"));
        }
        let mut triggers = TriggerRecord::default();
        for k in 0..n_triggers {
            let f = r.read_u32::<LE>()? as usize;
            if f != k {
                return Err(IoError::malformed(format!(
                    "trigger record {k} has frame index {f}"
                )));
            }
            triggers.on.push(from_us(r.read_i64::<LE>()?));
            let off = r.read_i64::<LE>()?;
            triggers
                .off
                .push((off != MISSING_TRIGGER).then(|| from_us(off)));
        }
        expect_eof(r)?;
        Ok(EventFile {
            width,
            height,
            omega,
            refractory,
            metadata,
            events,
            triggers,
        })
    };
    body().map_err(|e| match e {
        IoError::Io(e) => truncated(e),
        other => other,
    })
}

pub fn write_video_file(path: &Path, video: &MuellerVideo) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&VIDEO_MAGIC)?;
    w.write_u16::<LE>(VIDEO_FILE_VERSION)?;
    w.write_u32::<LE>(video.frames as u32)?;
    w.write_u32::<LE>(video.height as u32)?;
    w.write_u32::<LE>(video.width as u32)?;
    // Matrices are always stored normalized to M00 = 1 where valid.
    w.write_u8(1)?;
    for (m, valid) in video.matrices.iter().zip(&video.valid) {
        for v in m.to_vectorized().0 {
            w.write_f64::<LE>(v)?;
        }
        w.write_u8(*valid as u8)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_video_file(path: &Path) -> Result<MuellerVideo, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let res = (|| -> Result<MuellerVideo, IoError> {
        read_magic(&mut r, VIDEO_MAGIC, "Mueller video")?;
        read_version(&mut r, VIDEO_FILE_VERSION, "Mueller video")?;
        let frames = r.read_u32::<LE>()? as usize;
        let height = r.read_u32::<LE>()? as usize;
        let width = r.read_u32::<LE>()? as usize;
        let normalized = r.read_u8()?;
        if normalized > 1 {
            return Err(IoError::malformed(format!(
                "normalization flag {normalized}"
            )));
        }
        let n = frames
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| IoError::malformed("dimensions overflow"))?;
        let mut matrices = Vec::with_capacity(n.min(1 << 24));
        let mut valid = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let mut v = [0.0; 16];
            for x in v.iter_mut() {
                *x = r.read_f64::<LE>()?;
            }
            matrices.push(MuellerMatrix::from_vectorized(&VectorizedMueller(v)));
            valid.push(match r.read_u8()? {
                0 => false,
                1 => true,
                b => return Err(IoError::malformed(format!("validity byte {b}"))),
            });
        }
        expect_eof(&mut r)?;
        Ok(MuellerVideo {
            frames,
            height,
            width,
            matrices,
            valid,
        })
    })();
    res.map_err(|e| match e {
        IoError::Io(e) => truncated(e),
        other => other,
    })
}
