//! Coherency-matrix projection onto physically realizable Mueller matrices.
//!
//! The coherency matrix is `H = ¼ Σ_ij M_ij (σ_i ⊗ σ_j*)` with the Pauli
//! matrices ordered to match the Stokes components:
//!
//! ```text
//! σ0 = [1 0; 0 1]   σ1 = [1 0; 0 -1]   σ2 = [0 1; 1 0]   σ3 = [0 -i; i 0]
//! ```
//!
//! `H` is Hermitian and `M_ij = Re tr(H (σ_i ⊗ σ_j*))`. A Mueller matrix is
//! realizable as an incoherent sum of deterministic (Jones) systems iff `H`
//! is positive semidefinite; the filter clamps negative eigenvalues to zero.

use std::sync::OnceLock;

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen, Vector4};

use super::{MuellerError, MuellerMatrix};

type C64 = Complex<f64>;

/// Relative eigenvalue tolerance used by [`is_physically_valid`].
pub const VALIDITY_TOLERANCE: f64 = 1e-9;

fn pauli() -> [Matrix2<C64>; 4] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        Matrix2::new(one, z, z, one),
        Matrix2::new(one, z, z, -one),
        Matrix2::new(z, one, one, z),
        Matrix2::new(z, -i, i, z),
    ]
}

fn basis() -> &'static [[Matrix4<C64>; 4]; 4] {
    static BASIS: OnceLock<[[Matrix4<C64>; 4]; 4]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let s = pauli();
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let k = s[i].kronecker(&s[j].map(|c| c.conj()));
                Matrix4::from_fn(|r, c| k[(r, c)])
            })
        })
    })
}

/// Hermitian coherency matrix of `m`.
pub fn coherency_matrix(m: &MuellerMatrix) -> Matrix4<C64> {
    let b = basis();
    let mut h = Matrix4::<C64>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let w = m[(i, j)];
            if w != 0.0 {
                h += b[i][j] * C64::new(0.25 * w, 0.0);
            }
        }
    }
    h
}

/// Inverse of [`coherency_matrix`].
pub fn from_coherency(h: &Matrix4<C64>) -> MuellerMatrix {
    let b = basis();
    let mut rows = [[0.0; 4]; 4];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // tr(H P) = Σ_rc H_rc P_cr
            let p = &b[i][j];
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..4 {
                for c in 0..4 {
                    acc += h[(r, c)] * p[(c, r)];
                }
            }
            *v = acc.re;
        }
    }
    MuellerMatrix::from_rows(rows)
}

fn hermitian_eigen(m: &MuellerMatrix) -> SymmetricEigen<C64, nalgebra::U4> {
    SymmetricEigen::new(coherency_matrix(m))
}

/// Coherency eigenvalues in ascending order.
pub fn coherency_eigenvalues(m: &MuellerMatrix) -> [f64; 4] {
    let e = hermitian_eigen(m);
    let mut v = [
        e.eigenvalues[0],
        e.eigenvalues[1],
        e.eigenvalues[2],
        e.eigenvalues[3],
    ];
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// True when every coherency eigenvalue is at least `-1e-9 · λ_max`.
pub fn is_physically_valid(m: &MuellerMatrix) -> bool {
    if !m.is_finite() {
        return false;
    }
    let ev = coherency_eigenvalues(m);
    let largest = ev[3].abs().max(ev[0].abs());
    ev[0] >= -VALIDITY_TOLERANCE * largest
}

/// Projects `m` onto the physically realizable set by zeroing the negative
/// eigenvalues of its coherency matrix.
pub fn cloude_filter(m: &MuellerMatrix) -> Result<MuellerMatrix, MuellerError> {
    if !m.is_finite() {
        return Err(MuellerError::NonFinite);
    }
    let e = hermitian_eigen(m);
    if e.eigenvalues.iter().all(|&l| l >= 0.0) {
        return Ok(*m);
    }
    let clamped = Vector4::from_fn(|i, _| C64::new(e.eigenvalues[i].max(0.0), 0.0));
    let v = &e.eigenvectors;
    let h = v * Matrix4::from_diagonal(&clamped) * v.adjoint();
    Ok(from_coherency(&h))
}
