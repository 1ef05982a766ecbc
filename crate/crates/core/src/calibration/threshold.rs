//! Contrast-threshold calibration from linear intensity ramps.
//!
//! Under `I(t) = a·t + b` the log-derivative is `a / (a·t + b)`, so consecutive
//! events satisfy `Δt = p·C·(t + b/a)`: a line through the origin whose slope
//! is the signed threshold. Each gap is paired with the midpoint of its
//! refractory-corrected interval. Over such an interval the intensity grows
//! by exactly `e^{±C}`, so gap over midpoint is `2·tanh(C/2)` rather than
//! `C`; the fitted slope is mapped back through `C = 2·atanh(slope/2)`.

use serde::{Deserialize, Serialize};

use super::timing::corrected_dt;
use crate::events::{Event, Polarity};

/// Events recorded during one ramp. `t0` is the time at which `I = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RampTrial {
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub events: Vec<Event>,
}

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub samples: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        samples: n,
    })
}

/// Per-pixel thresholds; `None` marks a pixel left uncalibrated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PixelThresholds {
    pub on: Option<f64>,
    pub off: Option<f64>,
}

#[derive(Default)]
struct Samples {
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Regression samples `(t_mid + b/a, Δt)` of one pixel, split by polarity.
fn ramp_samples(trials: &[(&RampTrial, &[Event])], eta: f64) -> (Samples, Samples) {
    let mut on = Samples::default();
    let mut off = Samples::default();
    for (trial, events) in trials {
        let shift = trial.b / trial.a;
        for pair in events.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            if prev.polarity != next.polarity {
                continue;
            }
            let dt = corrected_dt(prev.t, next.t, eta);
            if dt <= 0.0 {
                continue;
            }
            let mid = 0.5 * (prev.t + eta + next.t) - trial.t0;
            let bucket = match next.polarity {
                Polarity::On => &mut on,
                Polarity::Off => &mut off,
            };
            bucket.x.push(mid + shift);
            bucket.y.push(dt);
        }
    }
    (on, off)
}

fn signed_threshold(s: &Samples, polarity: Polarity) -> Option<f64> {
    let fit = fit_line(&s.x, &s.y)?;
    let slope = polarity.sign() * fit.slope;
    if !(slope > 0.0 && slope < 2.0) {
        return None;
    }
    Some(2.0 * (0.5 * slope).atanh())
}

/// Fits `C_on` and `C_off` for every pixel of a `width × height` sensor,
/// pooling all ramp trials.
pub fn fit_contrast_threshold(
    trials: &[RampTrial],
    width: u16,
    height: u16,
    eta: f64,
) -> Vec<PixelThresholds> {
    use rayon::prelude::*;

    let n = width as usize * height as usize;
    // Per trial, per pixel event lists.
    let grouped: Vec<Vec<Vec<Event>>> = trials
        .iter()
        .map(|trial| {
            let mut per_pixel = vec![Vec::new(); n];
            for e in &trial.events {
                if e.x < width && e.y < height {
                    per_pixel[e.y as usize * width as usize + e.x as usize].push(*e);
                }
            }
            for list in &mut per_pixel {
                list.sort_by(|a, b| a.t.total_cmp(&b.t));
            }
            per_pixel
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|p| {
            let pixel_trials: Vec<(&RampTrial, &[Event])> = trials
                .iter()
                .zip(&grouped)
                .map(|(t, g)| (t, g[p].as_slice()))
                .collect();
            let (on, off) = ramp_samples(&pixel_trials, eta);
            PixelThresholds {
                on: signed_threshold(&on, Polarity::On),
                off: signed_threshold(&off, Polarity::Off),
            }
        })
        .collect()
}

/// Median of the calibrated values, ignoring uncalibrated pixels.
pub fn median_threshold(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    Some(v[v.len() / 2])
}
