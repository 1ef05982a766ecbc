//! Stokes/Mueller polarization algebra.
//!
//! Angles are in radians. Element matrices follow the usual convention where
//! the Stokes vector is `[s0, s1, s2, s3]` with `s0` the intensity and a
//! rotation by `θ` enters through `cos 2θ` and `sin 2θ`.

mod cloude;
mod decomposition;

use std::fmt;
use std::ops::{Index, Mul};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

pub use cloude::{
    cloude_filter, coherency_eigenvalues, coherency_matrix, from_coherency, is_physically_valid,
    VALIDITY_TOLERANCE,
};
pub use decomposition::{
    diattenuation, lu_chipman, lu_chipman_maps, polarizance, DecompositionError, DecompositionMaps,
    LuChipman,
};

/// Errors raised by the element constructors and the validity projection.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MuellerError {
    #[error("depolarization factor {0} outside [-1, 1]")]
    DepolarizationOutOfRange(f64),
    #[error("Mueller matrix has non-finite entries")]
    NonFinite,
    #[error("cannot normalize a Mueller matrix with M00 = {0}")]
    NonPositiveM00(f64),
}

/// A Stokes vector `[s0, s1, s2, s3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector(pub [f64; 4]);

impl StokesVector {
    /// Unpolarized light of unit intensity.
    pub const UNPOLARIZED: StokesVector = StokesVector([1.0, 0.0, 0.0, 0.0]);

    pub fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        Self([s0, s1, s2, s3])
    }

    pub fn intensity(&self) -> f64 {
        self.0[0]
    }

    /// Degree of polarization `sqrt(s1² + s2² + s3²) / s0`.
    pub fn degree_of_polarization(&self) -> f64 {
        let [s0, s1, s2, s3] = self.0;
        (s1 * s1 + s2 * s2 + s3 * s3).sqrt() / s0
    }

    fn as_vector(&self) -> Vector4<f64> {
        Vector4::from(self.0)
    }
}

/// 16 entries of a Mueller matrix in row-major order `[M00, M01, ..., M33]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorizedMueller(pub [f64; 16]);

impl VectorizedMueller {
    pub fn as_slice(&self) -> &[f64; 16] {
        &self.0
    }

    pub fn dot(&self, row: &[f64; 16]) -> f64 {
        self.0.iter().zip(row).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<MuellerMatrix> for VectorizedMueller {
    fn from(m: MuellerMatrix) -> Self {
        m.to_vectorized()
    }
}

impl From<VectorizedMueller> for MuellerMatrix {
    fn from(v: VectorizedMueller) -> Self {
        MuellerMatrix::from_vectorized(&v)
    }
}

/// A 4×4 real Mueller matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct MuellerMatrix(Matrix4<f64>);

impl fmt::Debug for MuellerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("MuellerMatrix").field(&self.rows()).finish()
    }
}

impl MuellerMatrix {
    pub fn from_matrix(m: Matrix4<f64>) -> Self {
        Self(m)
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Self {
        Self(Matrix4::from_fn(|i, j| rows[i][j]))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn zeros() -> Self {
        Self(Matrix4::zeros())
    }

    pub fn from_vectorized(v: &VectorizedMueller) -> Self {
        Self(Matrix4::from_row_slice(&v.0))
    }

    pub fn to_vectorized(&self) -> VectorizedMueller {
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[4 * i + j] = self.0[(i, j)];
            }
        }
        VectorizedMueller(out)
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[(i, j)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn m00(&self) -> f64 {
        self.0[(0, 0)]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0 * k)
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &MuellerMatrix) -> Self {
        Self(self.0.component_mul(&other.0))
    }

    pub fn apply(&self, s: &StokesVector) -> StokesVector {
        let v = self.0 * s.as_vector();
        StokesVector([v[0], v[1], v[2], v[3]])
    }

    /// `M / M00`. Fails when `M00` is not strictly positive.
    pub fn normalized(&self) -> Result<Self, MuellerError> {
        let m00 = self.m00();
        if !(m00 > 0.0) || !m00.is_finite() {
            return Err(MuellerError::NonPositiveM00(m00));
        }
        let mut out = self.0 / m00;
        out[(0, 0)] = 1.0;
        Ok(Self(out))
    }

    pub fn frobenius_distance(&self, other: &MuellerMatrix) -> f64 {
        (self.0 - other.0).norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Index<(usize, usize)> for MuellerMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl Mul for MuellerMatrix {
    type Output = MuellerMatrix;

    fn mul(self, rhs: MuellerMatrix) -> MuellerMatrix {
        MuellerMatrix(self.0 * rhs.0)
    }
}

impl Mul<StokesVector> for MuellerMatrix {
    type Output = StokesVector;

    fn mul(self, rhs: StokesVector) -> StokesVector {
        self.apply(&rhs)
    }
}

/// Linear polarizer with transmission axis at `theta`.
pub fn linear_polarizer(theta: f64) -> MuellerMatrix {
    let (s, c) = (2.0 * theta).sin_cos();
    MuellerMatrix::from_rows([
        [0.5, 0.5 * c, 0.5 * s, 0.0],
        [0.5 * c, 0.5 * c * c, 0.5 * s * c, 0.0],
        [0.5 * s, 0.5 * s * c, 0.5 * s * s, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
}

/// Quarter-wave plate with fast axis at `theta`.
pub fn quarter_wave_plate(theta: f64) -> MuellerMatrix {
    let (s, c) = (2.0 * theta).sin_cos();
    MuellerMatrix::from_rows([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c * c, s * c, -s],
        [0.0, s * c, s * s, c],
        [0.0, s, -c, 0.0],
    ])
}

/// Ideal depolarizer `diag(1, α, α, α)`.
pub fn ideal_depolarizer(alpha: f64) -> Result<MuellerMatrix, MuellerError> {
    if !(alpha.abs() <= 1.0) {
        return Err(MuellerError::DepolarizationOutOfRange(alpha));
    }
    Ok(MuellerMatrix::from_matrix(Matrix4::from_diagonal(
        &Vector4::new(1.0, alpha, alpha, alpha),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, PI};

    fn assert_rows(m: &MuellerMatrix, expected: [[f64; 4]; 4], tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (m[(i, j)] - expected[i][j]).abs() <= tol,
                    "entry ({i},{j}): {} vs {}",
                    m[(i, j)],
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn polarizer_closed_forms() {
        assert_rows(
            &linear_polarizer(0.0),
            [
                [0.5, 0.5, 0.0, 0.0],
                [0.5, 0.5, 0.0, 0.0],
                [0.0; 4],
                [0.0; 4],
            ],
            0.0,
        );
        assert_rows(
            &linear_polarizer(FRAC_PI_4),
            [
                [0.5, 0.0, 0.5, 0.0],
                [0.0; 4],
                [0.5, 0.0, 0.5, 0.0],
                [0.0; 4],
            ],
            1e-16,
        );
        // cos(π/3) = 1/2, sin(π/3) = √3/2
        let (c, s) = (0.5, 3f64.sqrt() / 2.0);
        assert_rows(
            &linear_polarizer(FRAC_PI_6),
            [
                [0.5, 0.5 * c, 0.5 * s, 0.0],
                [0.5 * c, 0.5 * c * c, 0.5 * s * c, 0.0],
                [0.5 * s, 0.5 * s * c, 0.5 * s * s, 0.0],
                [0.0; 4],
            ],
            1e-15,
        );
    }

    #[test]
    fn wave_plate_closed_forms() {
        assert_rows(
            &quarter_wave_plate(0.0),
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0, 0.0],
            ],
            0.0,
        );
        assert_rows(
            &quarter_wave_plate(FRAC_PI_4),
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, -1.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
            ],
            1e-15,
        );
    }

    #[test]
    fn two_quarter_waves_make_a_half_wave() {
        // A half-wave plate at π/8 maps horizontal light to +45° linear light.
        let q = quarter_wave_plate(FRAC_PI_8);
        let out = (q * q) * StokesVector::new(1.0, 1.0, 0.0, 0.0);
        let expected = [1.0, 0.0, 1.0, 0.0];
        for (a, b) in out.0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn wave_plate_has_period_pi() {
        for k in 0..50 {
            let theta = -3.0 + 0.13 * k as f64;
            let d = quarter_wave_plate(theta).frobenius_distance(&quarter_wave_plate(theta + PI));
            assert!(d < 1e-14);
        }
    }

    #[test]
    fn depolarizer_forms() {
        assert_eq!(ideal_depolarizer(1.0).unwrap(), MuellerMatrix::identity());
        let d = ideal_depolarizer(0.8).unwrap();
        assert_rows(
            &d,
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.8, 0.0, 0.0],
                [0.0, 0.0, 0.8, 0.0],
                [0.0, 0.0, 0.0, 0.8],
            ],
            0.0,
        );
        let z = ideal_depolarizer(0.0).unwrap();
        assert_eq!(z.m00(), 1.0);
        assert_eq!(z.frobenius_norm(), 1.0);
        assert!(matches!(
            ideal_depolarizer(1.2),
            Err(MuellerError::DepolarizationOutOfRange(_))
        ));
        assert!(ideal_depolarizer(f64::NAN).is_err());
    }

    #[test]
    fn vectorized_is_row_major() {
        let m = MuellerMatrix::from_rows([
            [0.0, 1.0, 2.0, 3.0],
            [4.0, 5.0, 6.0, 7.0],
            [8.0, 9.0, 10.0, 11.0],
            [12.0, 13.0, 14.0, 15.0],
        ]);
        let v = m.to_vectorized();
        for (k, value) in v.0.iter().enumerate() {
            assert_eq!(*value, k as f64);
        }
        assert_eq!(MuellerMatrix::from_vectorized(&v), m);
    }

    #[test]
    fn polarized_light_stays_physical() {
        let s = quarter_wave_plate(0.3) * (linear_polarizer(0.0) * StokesVector::UNPOLARIZED);
        assert!(s.degree_of_polarization() <= 1.0 + 1e-9);
        assert!((s.intensity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalization_rejects_nonpositive_m00() {
        assert!(MuellerMatrix::zeros().normalized().is_err());
        let m = linear_polarizer(0.2).normalized().unwrap();
        assert_eq!(m.m00(), 1.0);
    }
}
