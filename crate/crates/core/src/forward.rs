//! Analytic model of the dual rotating retarder ellipsometer.
//!
//! The light-side quarter-wave plate sits at `θ1 = ωt + i1` and the camera-side
//! plate at `θ2 = 5ωt + i2`. Both are framed by horizontal linear polarizers.
//! The sensor intensity is `I = A_t · vec(M)` with the 16-entry system row
//! below. `A_t` omits the two polarizer factors of ½, so
//! `I = 4 · [L(0) Q(θ2) M Q(θ1) L(0) s]_0`; the event constraints are
//! homogeneous, so the global scale never matters.
//!
//! Derivatives are taken with respect to the phase `τ = ωt`, which keeps the
//! trig arguments `2τ` and `10τ` and the derivative coefficients 2, 4, 10, 20
//! as they appear in the closed forms. A time derivative in seconds is `ω`
//! times the phase derivative; [`constraint_row`] performs that conversion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::events::Polarity;
use crate::mueller::{MuellerMatrix, VectorizedMueller};

/// Angular velocity of the light-side plate used by the prototype (rad/s).
pub const DEFAULT_OMEGA: f64 = 30.0 * PI;

/// Camera-side plate turns this many times faster than the light-side plate.
pub const SPEED_RATIO: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForwardError {
    #[error("time difference must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("contrast threshold must be positive, got {0}")]
    NonPositiveContrast(f64),
}

/// Angle and time symbols needed to evaluate the system row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    /// Light-side angular velocity (rad/s).
    pub omega: f64,
    /// Time since the light-side plate passed its reference angle (s).
    pub t: f64,
    /// Light-side offset angle (rad).
    pub i1: f64,
    /// Camera-side offset angle (rad).
    pub i2: f64,
}

impl ModulationState {
    pub fn new(omega: f64, t: f64, i1: f64, i2: f64) -> Self {
        debug_assert!(omega > 0.0);
        Self { omega, t, i1, i2 }
    }

    /// State at phase `tau = ωt` with unit angular velocity.
    pub fn from_phase(tau: f64, i1: f64, i2: f64) -> Self {
        Self {
            omega: 1.0,
            t: tau,
            i1,
            i2,
        }
    }

    /// `τ = ωt`.
    pub fn phase(&self) -> f64 {
        self.omega * self.t
    }

    /// Light-side plate angle `ωt + i1`.
    pub fn theta1(&self) -> f64 {
        self.phase() + self.i1
    }

    /// Camera-side plate angle `5ωt + i2`.
    pub fn theta2(&self) -> f64 {
        SPEED_RATIO * self.phase() + self.i2
    }
}

/// `(α1, α2, α3, α4) = (cos, sin)(2i1 + 2ωt), (cos, sin)(2i2 + 10ωt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alphas {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

pub fn alphas(state: &ModulationState) -> Alphas {
    let tau = state.phase();
    let (a2, a1) = (2.0 * state.i1 + 2.0 * tau).sin_cos();
    let (a4, a3) = (2.0 * state.i2 + 10.0 * tau).sin_cos();
    Alphas { a1, a2, a3, a4 }
}

/// System row `A_t` and its phase derivative `∂A_t/∂τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemRow {
    pub a: [f64; 16],
    pub da: [f64; 16],
}

impl SystemRow {
    pub fn from_alphas(al: &Alphas) -> Self {
        let Alphas { a1, a2, a3, a4 } = *al;
        // A_t is the outer product of the analyzer row r and the generator
        // column s, both of which are affine in the α's.
        let s = [1.0, a1 * a1, a1 * a2, a2];
        let r = [1.0, a3 * a3, a3 * a4, -a4];
        let ds = [0.0, -4.0 * a1 * a2, 2.0 * a1 * a1 - 2.0 * a2 * a2, 2.0 * a1];
        let dr = [
            0.0,
            -20.0 * a3 * a4,
            10.0 * a3 * a3 - 10.0 * a4 * a4,
            -10.0 * a3,
        ];
        let mut a = [0.0; 16];
        let mut da = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                a[4 * i + j] = r[i] * s[j];
                da[4 * i + j] = dr[i] * s[j] + r[i] * ds[j];
            }
        }
        Self { a, da }
    }

    /// `A_t · vec(M)`.
    pub fn intensity(&self, m: &VectorizedMueller) -> f64 {
        m.dot(&self.a)
    }

    /// `∂A_t/∂τ · vec(M)`.
    pub fn intensity_rate(&self, m: &VectorizedMueller) -> f64 {
        m.dot(&self.da)
    }

    /// Phase log-derivative `(∂A/∂τ · M) / (A · M)`.
    pub fn log_derivative(&self, m: &VectorizedMueller) -> f64 {
        self.intensity_rate(m) / self.intensity(m)
    }
}

pub fn system_row(state: &ModulationState) -> SystemRow {
    SystemRow::from_alphas(&alphas(state))
}

/// Sensor intensity `A_t · vec(M)`.
pub fn intensity(state: &ModulationState, m: &MuellerMatrix) -> f64 {
    system_row(state).intensity(&m.to_vectorized())
}

/// Homogeneous event constraint `B = ∂A/∂τ − (p·C / (ω·Δt)) · A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow {
    pub b: [f64; 16],
}

impl ConstraintRow {
    /// Builds the row from a phase-domain gap `dtau = ω·Δt`.
    pub fn from_phase_gap(row: &SystemRow, polarity: Polarity, contrast: f64, dtau: f64) -> Self {
        let g = polarity.sign() * contrast / dtau;
        let b = std::array::from_fn(|k| row.da[k] - g * row.a[k]);
        Self { b }
    }

    pub fn residual(&self, m: &VectorizedMueller) -> f64 {
        m.dot(&self.b)
    }

    pub fn norm(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Constraint row for an event whose refractory-corrected gap is `dt` seconds.
pub fn constraint_row(
    state: &ModulationState,
    polarity: Polarity,
    contrast: f64,
    dt: f64,
) -> Result<ConstraintRow, ForwardError> {
    if !(dt > 0.0) {
        return Err(ForwardError::NonPositiveDt(dt));
    }
    if !(contrast > 0.0) {
        return Err(ForwardError::NonPositiveContrast(contrast));
    }
    Ok(ConstraintRow::from_phase_gap(
        &system_row(state),
        polarity,
        contrast,
        state.omega * dt,
    ))
}
