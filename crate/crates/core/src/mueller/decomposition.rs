//! Lu–Chipman polar decomposition `M = M_Δ · M_R · M_D` and the scalar maps
//! derived from it.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::MuellerMatrix;

const MIN_M00: f64 = 1e-12;
const PURE_DIATTENUATION: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecompositionError {
    #[error("M00 = {0} is too small to normalize")]
    DegenerateM00(f64),
    #[error("pure diattenuator (D = {diattenuation}); depolarization/retardance undefined")]
    PureDiattenuator {
        diattenuation: f64,
        polarizance: f64,
    },
    #[error("depolarizing factor is singular; retardance undefined")]
    SingularDepolarizer {
        diattenuation: f64,
        polarizance: f64,
    },
}

impl DecompositionError {
    /// `(D, P)` when they could still be computed.
    pub fn partial_maps(&self) -> Option<(f64, f64)> {
        match *self {
            DecompositionError::DegenerateM00(_) => None,
            DecompositionError::PureDiattenuator {
                diattenuation,
                polarizance,
            }
            | DecompositionError::SingularDepolarizer {
                diattenuation,
                polarizance,
            } => Some((diattenuation, polarizance)),
        }
    }
}

/// Scalar polarization maps of one Mueller matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionMaps {
    /// Diattenuation.
    pub diattenuation: f64,
    /// Polarizance.
    pub polarizance: f64,
    /// Polarization preservation: mean of the depolarizer's diagonal.
    pub rho: f64,
    /// Retardance in radians, within `[0, π]`.
    pub retardance: f64,
}

/// Factors of the decomposition. `diattenuator` carries the `M00` scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuChipman {
    pub depolarizer: MuellerMatrix,
    pub retarder: MuellerMatrix,
    pub diattenuator: MuellerMatrix,
    pub maps: DecompositionMaps,
}

impl LuChipman {
    pub fn recompose(&self) -> MuellerMatrix {
        self.depolarizer * self.retarder * self.diattenuator
    }
}

fn diattenuation_vector(m: &MuellerMatrix) -> Vector3<f64> {
    Vector3::new(m[(0, 1)], m[(0, 2)], m[(0, 3)]) / m.m00()
}

fn polarizance_vector(m: &MuellerMatrix) -> Vector3<f64> {
    Vector3::new(m[(1, 0)], m[(2, 0)], m[(3, 0)]) / m.m00()
}

pub fn diattenuation(m: &MuellerMatrix) -> f64 {
    diattenuation_vector(m).norm()
}

pub fn polarizance(m: &MuellerMatrix) -> f64 {
    polarizance_vector(m).norm()
}

fn block(top_left: f64, row: Vector3<f64>, col: Vector3<f64>, m: Matrix3<f64>) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    out[(0, 0)] = top_left;
    for k in 0..3 {
        out[(0, k + 1)] = row[k];
        out[(k + 1, 0)] = col[k];
    }
    out.fixed_view_mut::<3, 3>(1, 1).copy_from(&m);
    out
}

pub fn lu_chipman(m: &MuellerMatrix) -> Result<LuChipman, DecompositionError> {
    let m00 = m.m00();
    if !(m00 > MIN_M00) {
        return Err(DecompositionError::DegenerateM00(m00));
    }
    let n = m.matrix() / m00;
    let d_vec = diattenuation_vector(m);
    let p_vec = polarizance_vector(m);
    let d = d_vec.norm();
    let p = p_vec.norm();
    if d >= PURE_DIATTENUATION {
        return Err(DecompositionError::PureDiattenuator {
            diattenuation: d,
            polarizance: p,
        });
    }
    let singular = DecompositionError::SingularDepolarizer {
        diattenuation: d,
        polarizance: p,
    };

    let k = (1.0 - d * d).sqrt();
    let m_d = if d > 0.0 {
        let u = d_vec / d;
        Matrix3::identity() * k + u * u.transpose() * (1.0 - k)
    } else {
        Matrix3::identity()
    };
    let diattenuator = block(1.0, d_vec, d_vec, m_d);
    let diattenuator_inv = diattenuator.try_inverse().ok_or(singular.clone())?;

    let m_prime = n * diattenuator_inv;
    let mp: Matrix3<f64> = m_prime.fixed_view::<3, 3>(1, 1).into_owned();
    let lower: Matrix3<f64> = n.fixed_view::<3, 3>(1, 1).into_owned();
    let p_delta = (p_vec - lower * d_vec) / (1.0 - d * d);

    let gram = mp * mp.transpose();
    let eig = SymmetricEigen::new(gram);
    let l: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let r: Vec<f64> = l.iter().map(|v| v.sqrt()).collect();
    let s1 = r[0] + r[1] + r[2];
    let s2 = r[0] * r[1] + r[1] * r[2] + r[2] * r[0];
    let s3 = r[0] * r[1] * r[2];
    if s2 <= 1e-12 {
        return Err(singular);
    }
    let sign = if mp.determinant() < 0.0 { -1.0 } else { 1.0 };
    let lhs = (gram + Matrix3::identity() * s2)
        .try_inverse()
        .ok_or(singular.clone())?;
    let m_delta = lhs * (gram * s1 + Matrix3::identity() * s3) * sign;
    let depolarizer = block(1.0, Vector3::zeros(), p_delta, m_delta);
    let retarder = depolarizer.try_inverse().ok_or(singular.clone())? * m_prime;
    if !retarder.iter().all(|v| v.is_finite()) {
        return Err(singular);
    }

    let rho = m_delta.trace() / 3.0;
    let retardance = (retarder.trace() / 2.0 - 1.0).clamp(-1.0, 1.0).acos();
    Ok(LuChipman {
        depolarizer: MuellerMatrix::from_matrix(depolarizer),
        retarder: MuellerMatrix::from_matrix(retarder),
        diattenuator: MuellerMatrix::from_matrix(diattenuator * m00),
        maps: DecompositionMaps {
            diattenuation: d,
            polarizance: p,
            rho,
            retardance,
        },
    })
}

pub fn lu_chipman_maps(m: &MuellerMatrix) -> Result<DecompositionMaps, DecompositionError> {
    lu_chipman(m).map(|f| f.maps)
}
