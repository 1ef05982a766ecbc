//! Independent oracles shared by the integration tests. Nothing here calls the
//! closed forms under test: polarization elements are built by rotating the
//! axis-aligned element, and physical matrices come from Jones matrices.
#![allow(dead_code)]

use std::f64::consts::PI;

use ellipsometer::mueller::MuellerMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type M4 = [[f64; 4]; 4];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mul(a: &M4, b: &M4) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn apply(a: &M4, s: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = (0..4).map(|k| a[i][k] * s[k]).sum();
    }
    out
}

/// Frame rotation of the Stokes basis by `theta`.
pub fn rotator(theta: f64) -> M4 {
    let (s, c) = (2.0 * theta).sin_cos();
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, s, 0.0],
        [0.0, -s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Element `m0` turned so its axis sits at `theta`: `R(−θ)·M0·R(θ)`.
pub fn rotated(m0: &M4, theta: f64) -> M4 {
    mul(&rotator(-theta), &mul(m0, &rotator(theta)))
}

pub fn horizontal_polarizer() -> M4 {
    [
        [0.5, 0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
}

/// Quarter-wave plate with horizontal fast axis.
pub fn horizontal_qwp() -> M4 {
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
}

pub fn polarizer_at(theta: f64) -> M4 {
    rotated(&horizontal_polarizer(), theta)
}

pub fn qwp_at(theta: f64) -> M4 {
    rotated(&horizontal_qwp(), theta)
}

/// `[L(0)·Q(θ2)·M·Q(θ1)·L(0)·s]_0` for unpolarized `s`.
pub fn chain_intensity(theta1: f64, theta2: f64, m: &M4) -> f64 {
    let l = horizontal_polarizer();
    let s = [1.0, 0.0, 0.0, 0.0];
    let chain = mul(
        &l,
        &mul(&qwp_at(theta2), &mul(m, &mul(&qwp_at(theta1), &l))),
    );
    apply(&chain, s)[0]
}

#[derive(Clone, Copy)]
struct C {
    re: f64,
    im: f64,
}

impl C {
    fn new(re: f64, im: f64) -> Self {
        C { re, im }
    }
    fn mul(self, o: C) -> C {
        C::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn add(self, o: C) -> C {
        C::new(self.re + o.re, self.im + o.im)
    }
    fn conj(self) -> C {
        C::new(self.re, -self.im)
    }
}

type J = [[C; 2]; 2];

fn jmul(a: &J, b: &J) -> J {
    let mut out = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0].mul(b[0][j]).add(a[i][1].mul(b[1][j]));
        }
    }
    out
}

fn dagger(a: &J) -> J {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn pauli(k: usize) -> J {
    let z = C::new(0.0, 0.0);
    let one = C::new(1.0, 0.0);
    match k {
        0 => [[one, z], [z, one]],
        1 => [[one, z], [z, C::new(-1.0, 0.0)]],
        2 => [[z, one], [one, z]],
        _ => [[z, C::new(0.0, -1.0)], [C::new(0.0, 1.0), z]],
    }
}

/// Mueller matrix of a Jones matrix: `M_ij = ½·tr(σ_i J σ_j J†)`.
fn jones_to_mueller(j: &J) -> M4 {
    let jd = dagger(j);
    let mut out = [[0.0; 4]; 4];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let p = jmul(&pauli(a), &jmul(j, &jmul(&pauli(b), &jd)));
            *v = 0.5 * (p[0][0].re + p[1][1].re);
        }
    }
    out
}

fn random_jones(rng: &mut impl Rng) -> J {
    let mut c = || C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    [[c(), c()], [c(), c()]]
}

/// Physically realizable matrix: a random positive mixture of one to four
/// nondepolarizing (Jones) matrices, normalized to `M00 = 1`.
pub fn random_physical(rng: &mut impl Rng) -> MuellerMatrix {
    let terms = rng.random_range(1..=4);
    let mut acc = [[0.0; 4]; 4];
    for _ in 0..terms {
        let w: f64 = rng.random_range(0.05..1.0);
        let m = jones_to_mueller(&random_jones(rng));
        for i in 0..4 {
            for j in 0..4 {
                acc[i][j] += w * m[i][j];
            }
        }
    }
    let m00 = acc[0][0];
    for row in acc.iter_mut() {
        for v in row.iter_mut() {
            *v /= m00;
        }
    }
    MuellerMatrix::from_rows(acc)
}

/// Arbitrary 4×4 matrix with `M00 = 1` and other entries in `[-1, 1]`.
pub fn random_matrix(rng: &mut impl Rng) -> MuellerMatrix {
    let mut rows = [[0.0; 4]; 4];
    for row in rows.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    rows[0][0] = 1.0;
    MuellerMatrix::from_rows(rows)
}

pub fn to_m4(m: &MuellerMatrix) -> M4 {
    m.rows()
}

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Known factors of a product `M_Δ·M_R·M_D` and the maps they imply.
pub struct Composed {
    pub matrix: MuellerMatrix,
    pub diattenuation: f64,
    pub retardance: f64,
    pub rho: f64,
}

/// Builds `M_Δ·M_R·M_D` from a random diattenuation vector, retarder
/// (axis-angle rotation of the Poincaré sphere) and symmetric depolarizer.
pub fn random_composed(rng: &mut impl Rng) -> Composed {
    let d_mag: f64 = rng.random_range(0.0..0.9);
    let u = unit_vector(rng);
    let d = [d_mag * u[0], d_mag * u[1], d_mag * u[2]];
    let k = (1.0 - d_mag * d_mag).sqrt();
    let mut md = [[0.0; 4]; 4];
    md[0][0] = 1.0;
    for i in 0..3 {
        md[0][i + 1] = d[i];
        md[i + 1][0] = d[i];
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            md[i + 1][j + 1] = k * delta + (1.0 - k) * u[i] * u[j];
        }
    }

    let r: f64 = rng.random_range(0.1..2.8);
    let n = unit_vector(rng);
    let (s, c) = r.sin_cos();
    let cross = [[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]];
    let mut mr = [[0.0; 4]; 4];
    mr[0][0] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            mr[i + 1][j + 1] = c * delta + (1.0 - c) * n[i] * n[j] + s * cross[i][j];
        }
    }

    // Symmetric positive depolarizer Q·diag(λ)·Qᵀ with Q a rotation.
    let lambda: [f64; 3] = [
        rng.random_range(0.2..0.95),
        rng.random_range(0.2..0.95),
        rng.random_range(0.2..0.95),
    ];
    let q_axis = unit_vector(rng);
    let q_angle: f64 = rng.random_range(0.0..PI);
    let (qs, qc) = q_angle.sin_cos();
    let qx = [
        [0.0, -q_axis[2], q_axis[1]],
        [q_axis[2], 0.0, -q_axis[0]],
        [-q_axis[1], q_axis[0], 0.0],
    ];
    let mut q = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            q[i][j] = qc * delta + (1.0 - qc) * q_axis[i] * q_axis[j] + qs * qx[i][j];
        }
    }
    let mut mdep = [[0.0; 4]; 4];
    mdep[0][0] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            mdep[i + 1][j + 1] = (0..3).map(|k| q[i][k] * lambda[k] * q[j][k]).sum();
        }
    }
    let m = mul(&mdep, &mul(&mr, &md));
    Composed {
        matrix: MuellerMatrix::from_rows(m),
        diattenuation: d_mag,
        retardance: r,
        rho: (lambda[0] + lambda[1] + lambda[2]) / 3.0,
    }
}

/// Mean absolute entry difference after normalizing both to `M00 = 1`.
pub fn mean_abs_diff(a: &MuellerMatrix, b: &MuellerMatrix) -> f64 {
    let (a, b) = (a.scale(1.0 / a.m00()), b.scale(1.0 / b.m00()));
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += (a[(i, j)] - b[(i, j)]).abs();
        }
    }
    s / 16.0
}
