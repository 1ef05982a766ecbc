use nalgebra::DMatrix;

use super::{IrlsWeighting, SolverConfig};
use crate::forward::{ModulationState, SystemRow};
use crate::mueller::{cloude_filter, MuellerError, MuellerMatrix, VectorizedMueller};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("{got} constraints, at least {needed} required")]
    InsufficientEvents { needed: usize, got: usize },
    #[error("null space has more than one dimension")]
    Ambiguous,
    #[error("solution has no M00 component to normalize by")]
    DegenerateM00,
    #[error(transparent)]
    Mueller(#[from] MuellerError),
}

/// One inter-event constraint in compact form; rows are rebuilt on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactConstraint {
    /// Evaluation phase `τ`.
    pub tau: f64,
    /// Corrected gap in phase units; the diagonal of `D`.
    pub dtau: f64,
    /// Measured log-derivative `p·C / Δτ`.
    pub g: f64,
}

/// Stacked constraint rows of one pixel in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSystem {
    /// `K × 16` rows `B_k`.
    pub rows: Vec<[f64; 16]>,
    /// `Δτ_k`, strictly positive.
    pub dt_weights: Vec<f64>,
    /// IRLS weights `w_k`, the diagonal of `W`.
    pub irls_weights: Vec<f64>,
}

impl PixelSystem {
    pub fn new(rows: Vec<[f64; 16]>, dt_weights: Vec<f64>) -> Self {
        assert_eq!(rows.len(), dt_weights.len());
        debug_assert!(dt_weights.iter().all(|d| *d > 0.0));
        let k = rows.len();
        Self {
            rows,
            dt_weights,
            irls_weights: vec![1.0; k],
        }
    }

    /// Builds rows `B = ∂A/∂τ − g·A` at the given plate offsets.
    pub fn from_constraints(constraints: &[CompactConstraint], i1: f64, i2: f64) -> Self {
        let mut rows = Vec::with_capacity(constraints.len());
        let mut dts = Vec::with_capacity(constraints.len());
        for c in constraints {
            let row = crate::forward::system_row(&ModulationState::from_phase(c.tau, i1, i2));
            rows.push(constraint(&row, c.g));
            dts.push(c.dtau);
        }
        Self::new(rows, dts)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `B_k · M` for every row.
    pub fn residuals(&self, m: &VectorizedMueller) -> Vec<f64> {
        self.rows.iter().map(|r| m.dot(r)).collect()
    }

    /// `‖D·B·M‖₁`.
    pub fn l1_cost(&self, m: &VectorizedMueller) -> f64 {
        self.rows
            .iter()
            .zip(&self.dt_weights)
            .map(|(r, d)| (d * m.dot(r)).abs())
            .sum()
    }

    /// Rows of `W·D·B`.
    pub fn weighted(&self) -> DMatrix<f64> {
        let k = self.rows.len().max(16);
        let mut a = DMatrix::zeros(k, 16);
        for (i, ((r, d), w)) in self
            .rows
            .iter()
            .zip(&self.dt_weights)
            .zip(&self.irls_weights)
            .enumerate()
        {
            let s = d * w;
            for j in 0..16 {
                a[(i, j)] = s * r[j];
            }
        }
        a
    }
}

fn constraint(row: &SystemRow, g: f64) -> [f64; 16] {
    std::array::from_fn(|k| row.da[k] - g * row.a[k])
}

/// Right singular vector of `W·D·B` for the smallest singular value,
/// sign-fixed and scaled so that `M00 = 1`.
pub fn solve_homogeneous(system: &PixelSystem) -> Result<VectorizedMueller, SolveError> {
    let a = system.weighted();
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let largest = s[order[s.len() - 1]];
    let (s0, s1) = (s[order[0]], s[order[1]]);
    if !(largest > 0.0) || (s0 < 1e-12 * largest && s1 < 1e-12 * largest) {
        return Err(SolveError::Ambiguous);
    }
    let row = v_t.row(order[0]);
    let mut v = [0.0; 16];
    for j in 0..16 {
        v[j] = row[j];
    }
    normalize_m00(v)
}

fn normalize_m00(mut v: [f64; 16]) -> Result<VectorizedMueller, SolveError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(v[0].abs() > 1e-12 * norm) || !v[0].is_finite() {
        return Err(SolveError::DegenerateM00);
    }
    let inv = 1.0 / v[0];
    for x in v.iter_mut() {
        *x *= inv;
    }
    v[0] = 1.0;
    Ok(VectorizedMueller(v))
}

/// `w_k = 1 / max(|B_k · M|, ε)`.
pub fn update_irls_weights(system: &PixelSystem, m: &VectorizedMueller, epsilon: f64) -> Vec<f64> {
    system
        .rows
        .iter()
        .map(|r| 1.0 / m.dot(r).abs().max(epsilon))
        .collect()
}

/// `w_k = 1 / √max(|Δτ_k·B_k·M|, ε)`: the squared weighted norm then equals
/// the L1 cost `‖D·B·M‖₁` at the current estimate.
pub fn update_l1_weights(system: &PixelSystem, m: &VectorizedMueller, epsilon: f64) -> Vec<f64> {
    system
        .rows
        .iter()
        .zip(&system.dt_weights)
        .map(|(r, d)| 1.0 / (d * m.dot(r)).abs().max(epsilon).sqrt())
        .collect()
}

/// Alternates weighted solve, physical-validity projection and reweighting.
pub fn per_pixel_reconstruct(
    system: &PixelSystem,
    cfg: &SolverConfig,
) -> Result<MuellerMatrix, SolveError> {
    if system.len() < cfg.k_min.max(1) {
        return Err(SolveError::InsufficientEvents {
            needed: cfg.k_min.max(1),
            got: system.len(),
        });
    }
    let mut sys = system.clone();
    sys.irls_weights.iter_mut().for_each(|w| *w = 1.0);
    let mut m = MuellerMatrix::identity();
    for _ in 0..cfg.irls_iterations.max(1) {
        let v = solve_homogeneous(&sys)?;
        m = MuellerMatrix::from_vectorized(&v);
        if !cfg.skip_cloude {
            m = cloude_filter(&m)?.normalized()?;
        }
        let v = m.to_vectorized();
        sys.irls_weights = match cfg.irls_weighting {
            IrlsWeighting::Residual => update_irls_weights(&sys, &v, cfg.epsilon),
            IrlsWeighting::L1 => update_l1_weights(&sys, &v, cfg.epsilon),
        };
    }
    Ok(m)
}
