//! Declarative synthetic scenes: rectangular regions of known materials seen
//! through the rotating-plate schedule.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    emit_triggers, inject_pixel_noise, jitter_triggers, quantize_us, simulate_signal, NoiseConfig,
    PixelSensor, Schedule, SimError,
};
use crate::calibration::CalibrationParams;
use crate::events::{Event, EventStream};
use crate::forward::DEFAULT_OMEGA;
use crate::mueller::{
    ideal_depolarizer, linear_polarizer, quarter_wave_plate, MuellerMatrix, VectorizedMueller,
};
use crate::video::MuellerVideo;

/// A material given by name or by its 16 row-major entries.
///
/// Names are `air`, `lp@<deg>`, `qwp@<deg>` and `depolarizer@<α>`; factors
/// joined by `*` multiply left to right, so `depolarizer@0.8*qwp@45` is
/// `D(0.8)·Q(45°)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Named(String),
    Explicit([f64; 16]),
}

/// Alias kept for readability at call sites that build scenes in code.
pub type Material = MaterialSpec;

impl MaterialSpec {
    pub fn named(s: &str) -> Self {
        Self::Named(s.to_string())
    }

    pub fn matrix(&self) -> Result<MuellerMatrix, SimError> {
        let m = match self {
            Self::Explicit(v) => MuellerMatrix::from_vectorized(&VectorizedMueller(*v)),
            Self::Named(s) => {
                let mut acc = MuellerMatrix::identity();
                for factor in s.split('*') {
                    acc = acc * parse_factor(factor.trim())?;
                }
                acc
            }
        };
        if !m.is_finite() {
            return Err(SimError::BadScene(format!(
                "material {self:?} is not finite"
            )));
        }
        Ok(m)
    }
}

fn parse_factor(s: &str) -> Result<MuellerMatrix, SimError> {
    let bad = || SimError::BadScene(format!("unknown material '{s}'"));
    let lower = s.to_ascii_lowercase();
    if lower == "air" || lower == "identity" {
        return Ok(MuellerMatrix::identity());
    }
    let (name, arg) = lower.split_once('@').ok_or_else(bad)?;
    let value: f64 = arg.trim().parse().map_err(|_| bad())?;
    match name.trim() {
        "lp" => Ok(linear_polarizer(value.to_radians())),
        "qwp" => Ok(quarter_wave_plate(value.to_radians())),
        "depolarizer" | "dep" => {
            ideal_depolarizer(value).map_err(|e| SimError::BadScene(e.to_string()))
        }
        _ => Err(bad()),
    }
}

/// Half-open pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u16,
    pub y: u16,
    pub width: u16,
    pub height: u16,
}

impl Rect {
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x >= self.x
            && y >= self.y
            && (x as u32) < self.x as u32 + self.width as u32
            && (y as u32) < self.y as u32 + self.height as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub rect: Rect,
    pub material: MaterialSpec,
    /// Radiometric scale of the region; events depend only on log ratios.
    #[serde(default = "one")]
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub contrast_on: f64,
    pub contrast_off: f64,
    /// Refractory period in seconds.
    pub refractory: f64,
    pub phi_calib1: f64,
    pub phi_calib2: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            contrast_on: 0.14,
            contrast_off: 0.19,
            refractory: 2e-6,
            phi_calib1: 0.3,
            phi_calib2: 1.1,
        }
    }
}

impl SensorConfig {
    pub fn pixel_sensor(&self) -> PixelSensor {
        PixelSensor::new(self.contrast_on, self.contrast_off, self.refractory)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: u16,
    pub height: u16,
    pub frames: usize,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub t_start: f64,
    /// Dynamic phase lag of the camera-side plate, constant over the recording.
    #[serde(default)]
    pub phi_dynamic: f64,
    pub regions: Vec<Region>,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default = "NoiseConfig::none")]
    pub noise: NoiseConfig,
    /// Simulation steps per frame.
    #[serde(default = "default_steps")]
    pub steps_per_frame: usize,
    /// Round event timestamps to 1 µs.
    #[serde(default = "default_true")]
    pub quantize: bool,
    /// Gaussian trigger timing noise in seconds.
    #[serde(default)]
    pub trigger_jitter: f64,
}

fn default_omega() -> f64 {
    DEFAULT_OMEGA
}

fn default_steps() -> usize {
    100_000
}

fn default_true() -> bool {
    true
}

impl Scene {
    /// A scene filled by a single material.
    pub fn uniform(width: u16, height: u16, frames: usize, material: MaterialSpec) -> Self {
        Self {
            width,
            height,
            frames,
            omega: DEFAULT_OMEGA,
            t_start: 0.0,
            phi_dynamic: 0.0,
            regions: vec![Region {
                rect: Rect {
                    x: 0,
                    y: 0,
                    width,
                    height,
                },
                material,
                gain: 1.0,
            }],
            sensor: SensorConfig::default(),
            noise: NoiseConfig::none(),
            steps_per_frame: default_steps(),
            quantize: true,
            trigger_jitter: 0.0,
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            omega: self.omega,
            t_start: self.t_start,
            phi_calib1: self.sensor.phi_calib1,
            phi_calib2: self.sensor.phi_calib2,
            phi_dynamic: vec![self.phi_dynamic; self.frames],
        }
    }

    /// Region index of every pixel, row-major. Errors unless the regions tile
    /// the image exactly.
    pub fn region_map(&self) -> Result<Vec<usize>, SimError> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut map = vec![usize::MAX; w * h];
        for (r, region) in self.regions.iter().enumerate() {
            for y in 0..self.height {
                for x in 0..self.width {
                    if region.rect.contains(x, y) {
                        let cell = &mut map[y as usize * w + x as usize];
                        if *cell != usize::MAX {
                            return Err(SimError::BadScene(format!(
                                "regions {} and {r} overlap at ({x}, {y})",
                                *cell
                            )));
                        }
                        *cell = r;
                    }
                }
            }
        }
        if let Some(i) = map.iter().position(|r| *r == usize::MAX) {
            return Err(SimError::BadScene(format!(
                "pixel ({}, {}) is not covered by any region",
                i % w,
                i / w
            )));
        }
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.frames == 0 {
            return Err(SimError::EmptyRecording);
        }
        if self.width == 0 || self.height == 0 {
            return Err(SimError::BadScene("image has no pixels".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(SimError::BadScene(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if self.steps_per_frame == 0 {
            return Err(SimError::BadStep(0.0));
        }
        if !(self.trigger_jitter >= 0.0 && self.trigger_jitter.is_finite()) {
            return Err(SimError::BadScene(
                "trigger jitter must be nonnegative".into(),
            ));
        }
        self.noise.validate().map_err(SimError::BadScene)?;
        for r in &self.regions {
            if !(r.gain > 0.0 && r.gain.is_finite()) {
                return Err(SimError::BadScene(format!(
                    "region gain {} must be positive",
                    r.gain
                )));
            }
            r.material.matrix()?;
        }
        self.sensor.pixel_sensor().validate()?;
        self.region_map()?;
        Ok(())
    }
}

/// Output of [`simulate_scene`]: the event stream together with the truth.
#[derive(Debug, Clone)]
pub struct SimulatedRecording {
    pub stream: EventStream,
    pub ground_truth: MuellerVideo,
    /// Sensor parameters the events were generated with.
    pub sensor: CalibrationParams,
    pub schedule: Schedule,
}

/// Simulates every pixel of `scene`. The noiseless event train is computed
/// once per region; each pixel then receives its own noise realization.
pub fn simulate_scene(scene: &Scene) -> Result<SimulatedRecording, SimError> {
    scene.validate()?;
    let map = scene.region_map()?;
    let schedule = scene.schedule();
    let sensor = scene.sensor.pixel_sensor();
    let step = PI / scene.omega / scene.steps_per_frame as f64;

    let base: Vec<Vec<(f64, crate::events::Polarity)>> = scene
        .regions
        .par_iter()
        .enumerate()
        .map(|(r, region)| {
            let m = region.material.matrix()?.scale(region.gain).to_vectorized();
            simulate_signal(
                |t| schedule.intensity(t, &m),
                schedule.t_start,
                schedule.t_end(),
                step,
                &sensor,
            )
            .map_err(|e| match e {
                SimError::NonPositiveIntensity { t, value } => SimError::NonPositiveRegion {
                    region: r,
                    t,
                    value,
                },
                other => other,
            })
        })
        .collect::<Result<_, _>>()?;

    let w = scene.width as usize;
    let per_pixel: Vec<Vec<Event>> = map
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            let (x, y) = ((i % w) as u16, (i / w) as u16);
            let mut ev: Vec<Event> = base[r]
                .iter()
                .map(|&(t, p)| Event::new(x, y, t, p))
                .collect();
            inject_pixel_noise(
                &mut ev,
                &scene.noise,
                sensor.contrast_on,
                sensor.contrast_off,
                sensor.refractory,
                scene.omega,
                &[x as u64, y as u64],
            );
            if scene.quantize {
                for e in &mut ev {
                    e.t = quantize_us(e.t);
                }
            }
            ev
        })
        .collect();
    let events: Vec<Event> = per_pixel.into_iter().flatten().collect();

    let mut triggers = emit_triggers(scene.omega, scene.t_start, &schedule.phi_dynamic);
    jitter_triggers(&mut triggers, scene.trigger_jitter, scene.noise.seed);

    let truth: Vec<MuellerMatrix> = scene
        .regions
        .iter()
        .map(|r| {
            r.material.matrix().and_then(|m| {
                m.normalized()
                    .map_err(|e| SimError::BadScene(e.to_string()))
            })
        })
        .collect::<Result<_, _>>()?;
    let (h, frames) = (scene.height as usize, scene.frames);
    let mut ground_truth = MuellerVideo::filled(frames, h, w, MuellerMatrix::identity(), true);
    for f in 0..frames {
        for (i, &r) in map.iter().enumerate() {
            ground_truth.matrices[f * w * h + i] = truth[r];
        }
    }

    let calib = CalibrationParams::uniform(
        scene.width,
        scene.height,
        sensor.contrast_on,
        sensor.contrast_off,
        sensor.refractory,
        scene.sensor.phi_calib1,
        scene.sensor.phi_calib2,
    )
    .map_err(|e| SimError::BadSensor(e.to_string()))?;

    Ok(SimulatedRecording {
        stream: EventStream::new(scene.width, scene.height, events, triggers),
        ground_truth,
        sensor: calib,
        schedule,
    })
}
