//! Event noise expressed on a per-event reciprocal gap.
//!
//! Each interval `Δt` between consecutive events of a pixel carries a rate
//! quantity `q(Δt)`. Noise of standard deviation `σ` on `q` is realized by
//! moving timestamps: a shift `δ` changes the adjacent gaps by `∓δ`, so to
//! first order every timestamp is perturbed with
//!
//! ```text
//! δ_k ~ N(0, (σ · s_k / √2)²),    s_k = 1 / |∂q/∂Δt| at Δ_k
//! ```
//!
//! where `Δ_k` is the local corrected gap preceding event `k` (the following
//! one for the first event) and the `√2` accounts for each gap sharing two
//! perturbed endpoints. Two units for `q` are provided ([`NoiseUnit`]):
//!
//! * `frame-rate`: `q = (π/ω) / Δt`, the reciprocal gap measured in frame
//!   windows, giving `s_k = ω·Δ_k² / π`;
//! * `log-derivative`: `q = p·C / (ω·Δt)`, the phase log-derivative the
//!   solver consumes, giving `s_k = ω·Δ_k² / C_k`.
//!
//! Outlier events replace the additive term by one of standard deviation
//! `σ_out · s_k`. The optional jitter term adds `N(0, (j · Δ_k)²)` on top.
//! Timestamps are re-sorted per pixel afterwards.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationParams;
use crate::events::{sort_events, Event, Polarity};
use crate::rng::{keyed_rng, stream};

/// Quantity the additive and outlier sigmas are expressed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseUnit {
    /// Reciprocal gap in units of frame windows.
    #[default]
    FrameRate,
    /// Phase log-derivative `p·C / (ω·Δt)`.
    LogDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Timing jitter as a multiple of the local gap.
    pub timestamp_jitter_sigma: f64,
    /// Standard deviation on the per-event rate quantity.
    pub additive_event_noise_sigma: f64,
    pub outlier_fraction: f64,
    pub outlier_sigma: f64,
    pub unit: NoiseUnit,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            timestamp_jitter_sigma: 0.0,
            additive_event_noise_sigma: 0.5,
            outlier_fraction: 0.05,
            outlier_sigma: 5.0,
            unit: NoiseUnit::FrameRate,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    /// No perturbation at all.
    pub fn none() -> Self {
        Self {
            timestamp_jitter_sigma: 0.0,
            additive_event_noise_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_sigma: 0.0,
            unit: NoiseUnit::FrameRate,
            seed: 0,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.timestamp_jitter_sigma == 0.0
            && self.additive_event_noise_sigma == 0.0
            && self.outlier_fraction == 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        let sigmas = [
            self.timestamp_jitter_sigma,
            self.additive_event_noise_sigma,
            self.outlier_sigma,
        ];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(format!(
                "noise sigmas must be finite and nonnegative: {self:?}"
            ));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(format!(
                "outlier fraction {} outside [0, 1]",
                self.outlier_fraction
            ));
        }
        Ok(())
    }
}

/// Perturbs one pixel's time-sorted events in place.
///
/// `key` selects the random stream; the simulator uses the pixel coordinates.
pub fn inject_pixel_noise(
    events: &mut [Event],
    cfg: &NoiseConfig,
    contrast_on: f64,
    contrast_off: f64,
    refractory: f64,
    omega: f64,
    key: &[u64],
) {
    if cfg.is_silent() || events.len() < 2 {
        return;
    }
    let mut k = Vec::with_capacity(key.len() + 1);
    k.push(stream::EVENT_NOISE);
    k.extend_from_slice(key);
    let mut rng = keyed_rng(cfg.seed, &k);
    let gaps: Vec<f64> = events
        .windows(2)
        .map(|w| (w[1].t - w[0].t - refractory).max(0.0))
        .collect();
    let shifts: Vec<f64> = (0..events.len())
        .map(|i| {
            // Fixed draw order keeps streams aligned across configurations.
            let u: f64 = rng.random();
            let n_add: f64 = StandardNormal.sample(&mut rng);
            let n_jit: f64 = StandardNormal.sample(&mut rng);
            let gap = if i == 0 { gaps[0] } else { gaps[i - 1] };
            let scale = match cfg.unit {
                NoiseUnit::FrameRate => omega * gap * gap / std::f64::consts::PI,
                NoiseUnit::LogDerivative => {
                    let c = match events[i].polarity {
                        Polarity::On => contrast_on,
                        Polarity::Off => contrast_off,
                    };
                    omega * gap * gap / c
                }
            };
            let base = if u < cfg.outlier_fraction {
                cfg.outlier_sigma * scale
            } else {
                cfg.additive_event_noise_sigma * scale / std::f64::consts::SQRT_2
            };
            base * n_add + cfg.timestamp_jitter_sigma * gap * n_jit
        })
        .collect();
    for (e, d) in events.iter_mut().zip(shifts) {
        e.t += d;
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
}

/// Applies [`inject_pixel_noise`] to every pixel of a stream with per-pixel
/// streams derived from `cfg.seed`, then re-sorts globally.
pub fn inject_noise(
    events: &[Event],
    cfg: &NoiseConfig,
    sensor: &CalibrationParams,
    omega: f64,
) -> Vec<Event> {
    if cfg.is_silent() {
        return events.to_vec();
    }
    let w = sensor.width as usize;
    let mut per_pixel = vec![Vec::new(); sensor.pixel_count()];
    for e in events {
        per_pixel[e.y as usize * w + e.x as usize].push(*e);
    }
    let mut out = Vec::with_capacity(events.len());
    for (i, mut list) in per_pixel.into_iter().enumerate() {
        let (x, y) = ((i % w) as u16, (i / w) as u16);
        let (c_on, c_off) = sensor.contrast(x, y);
        inject_pixel_noise(
            &mut list,
            cfg,
            c_on,
            c_off,
            sensor.refractory,
            omega,
            &[x as u64, y as u64],
        );
        out.extend(list);
    }
    sort_events(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> Vec<Event> {
        (0..50)
            .map(|k| {
                Event::new(
                    0,
                    0,
                    1e-3 * k as f64 * (1.0 + 0.01 * k as f64),
                    Polarity::On,
                )
            })
            .collect()
    }

    #[test]
    fn silent_config_is_identity() {
        let mut ev = stream();
        let orig = ev.clone();
        inject_pixel_noise(&mut ev, &NoiseConfig::none(), 0.1, 0.1, 0.0, 1.0, &[0]);
        assert_eq!(ev, orig);
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = NoiseConfig {
            seed: 42,
            ..NoiseConfig::default()
        };
        let mut a = stream();
        let mut b = stream();
        inject_pixel_noise(&mut a, &cfg, 0.1, 0.1, 0.0, 94.0, &[1, 2]);
        inject_pixel_noise(&mut b, &cfg, 0.1, 0.1, 0.0, 94.0, &[1, 2]);
        assert_eq!(a, b);
        assert_ne!(a, stream());
        assert!(a.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn validation() {
        assert!(NoiseConfig::default().validate().is_ok());
        let bad = NoiseConfig {
            outlier_fraction: 1.5,
            ..NoiseConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
