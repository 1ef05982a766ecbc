mod common;

use std::f64::consts::{FRAC_PI_4, PI};

use approx::assert_relative_eq;
use ellipsometer::events::Polarity;
use ellipsometer::forward::{
    alphas, constraint_row, intensity, system_row, Alphas, ConstraintRow, ModulationState,
};
use ellipsometer::mueller::{linear_polarizer, MuellerMatrix};
use proptest::prelude::*;
use rand::Rng;

/// Derivative of every system-row entry, written out by hand from
/// `dα1 = −2α2`, `dα2 = 2α1`, `dα3 = −10α4`, `dα4 = 10α3`.
fn derivative_table(al: &Alphas) -> [f64; 16] {
    let Alphas { a1, a2, a3, a4 } = *al;
    let c2 = a1 * a1 - a2 * a2;
    let c10 = a3 * a3 - a4 * a4;
    [
        0.0,
        -4.0 * a1 * a2,
        2.0 * c2,
        2.0 * a1,
        -20.0 * a3 * a4,
        -4.0 * a1 * a2 * a3 * a3 - 20.0 * a1 * a1 * a3 * a4,
        2.0 * c2 * a3 * a3 - 20.0 * a1 * a2 * a3 * a4,
        2.0 * a1 * a3 * a3 - 20.0 * a2 * a3 * a4,
        10.0 * c10,
        -4.0 * a1 * a2 * a3 * a4 + 10.0 * a1 * a1 * c10,
        2.0 * c2 * a3 * a4 + 10.0 * a1 * a2 * c10,
        2.0 * a1 * a3 * a4 + 10.0 * a2 * c10,
        -10.0 * a3,
        4.0 * a1 * a2 * a4 - 10.0 * a1 * a1 * a3,
        -2.0 * c2 * a4 - 10.0 * a1 * a2 * a3,
        -2.0 * a1 * a4 - 10.0 * a2 * a3,
    ]
}

fn state(tau: f64, i1: f64, i2: f64) -> ModulationState {
    ModulationState::from_phase(tau, i1, i2)
}

#[test]
fn alphas_at_reference_angles() {
    let a = alphas(&state(0.0, 0.0, 0.0));
    assert_eq!((a.a1, a.a2, a.a3, a.a4), (1.0, 0.0, 1.0, 0.0));
    let a = alphas(&state(0.0, FRAC_PI_4, 0.0));
    assert!(a.a1.abs() < 1e-15 && (a.a2 - 1.0).abs() < 1e-15);
    assert_eq!((a.a3, a.a4), (1.0, 0.0));
}

#[test]
fn system_row_at_zero() {
    let row = system_row(&state(0.0, 0.0, 0.0));
    let a = [
        1., 1., 0., 0., 1., 1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.,
    ];
    let da = [
        0., 0., 2., 2., 0., 0., 2., 2., 10., 10., 0., 0., -10., -10., 0., 0.,
    ];
    assert_eq!(row.a, a);
    assert_eq!(row.da, da);
}

#[test]
fn identity_intensity_at_zero_matches_chain() {
    let id = MuellerMatrix::identity();
    let i = intensity(&state(0.0, 0.0, 0.0), &id);
    assert_eq!(i, 2.0);
    let chain = common::chain_intensity(0.0, 0.0, &common::to_m4(&id));
    assert_relative_eq!(i, 4.0 * chain, max_relative = 1e-15);
    assert_eq!(
        intensity(&state(0.3, 0.1, 0.2), &MuellerMatrix::zeros()),
        0.0
    );
}

#[test]
fn polarizer_sweep_matches_chain() {
    let m = linear_polarizer(0.0);
    let m4 = common::to_m4(&m);
    for k in 0..100 {
        let s = ModulationState::new(30.0 * PI, k as f64 * 1e-3 / 3.0, 0.2, 0.7);
        let model = intensity(&s, &m);
        let chain = common::chain_intensity(s.theta1(), s.theta2(), &m4);
        assert!(
            (model - 4.0 * chain).abs() <= 1e-10 * m.m00() * 4.0,
            "state {k}"
        );
    }
}

#[test]
fn derivative_matches_hand_table() {
    let mut rng = common::rng(11);
    for _ in 0..1000 {
        let s = state(
            rng.random_range(-10.0..10.0),
            rng.random_range(0.0..PI),
            rng.random_range(0.0..PI),
        );
        let row = system_row(&s);
        let table = derivative_table(&alphas(&s));
        for (k, (d, t)) in row.da.iter().zip(table).enumerate() {
            assert!((d - t).abs() < 1e-12, "entry {k}");
        }
    }
}

#[test]
fn constraint_row_limits_and_polarity() {
    let s = ModulationState::new(30.0 * PI, 0.004, 0.3, 1.1);
    let row = system_row(&s);
    let far = constraint_row(&s, Polarity::On, 0.2, 1e12).unwrap();
    for k in 0..16 {
        assert!((far.b[k] - row.da[k]).abs() < 1e-9);
    }
    let on = constraint_row(&s, Polarity::On, 0.2, 1e-3).unwrap();
    let off = constraint_row(&s, Polarity::Off, 0.2, 1e-3).unwrap();
    for k in 0..16 {
        assert!((on.b[k] + off.b[k] - 2.0 * row.da[k]).abs() < 1e-9);
    }
    assert!(constraint_row(&s, Polarity::On, 0.2, 0.0).is_err());
    assert!(constraint_row(&s, Polarity::On, 0.2, -1e-6).is_err());
    assert!(constraint_row(&s, Polarity::On, 0.0, 1e-3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn intensity_is_linear(
        tau in -5.0..5.0f64,
        i1 in 0.0..PI,
        i2 in 0.0..PI,
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let m1 = common::random_matrix(&mut rng);
        let m2 = common::random_matrix(&mut rng);
        let s = state(tau, i1, i2);
        let combo = MuellerMatrix::from_matrix(m1.matrix() * alpha + m2.matrix() * beta);
        let lhs = intensity(&s, &combo);
        let rhs = alpha * intensity(&s, &m1) + beta * intensity(&s, &m2);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn derivative_matches_finite_differences(
        tau in -5.0..5.0f64,
        i1 in 0.0..PI,
        i2 in 0.0..PI,
    ) {
        let h = 1e-5;
        let plus = system_row(&state(tau + h, i1, i2)).a;
        let minus = system_row(&state(tau - h, i1, i2)).a;
        let da = system_row(&state(tau, i1, i2)).da;
        let mut err = 0.0;
        let mut norm = 0.0;
        for k in 0..16 {
            let fd = (plus[k] - minus[k]) / (2.0 * h);
            err += (fd - da[k]).powi(2);
            norm += da[k] * da[k];
        }
        prop_assert!(err.sqrt() <= 1e-6 * norm.sqrt().max(1.0));
    }

    #[test]
    fn log_derivative_matches_finite_differences(
        tau in -5.0..5.0f64,
        i1 in 0.0..PI,
        i2 in 0.0..PI,
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let m = common::random_physical(&mut rng).to_vectorized();
        let row = system_row(&state(tau, i1, i2));
        let i0 = row.intensity(&m);
        prop_assume!(i0 > 1e-3);
        let h = 1e-6;
        let lp = system_row(&state(tau + h, i1, i2)).intensity(&m).ln();
        let lm = system_row(&state(tau - h, i1, i2)).intensity(&m).ln();
        let fd = (lp - lm) / (2.0 * h);
        let analytic = row.log_derivative(&m);
        prop_assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0));
    }

    #[test]
    fn exact_event_term_zeroes_residual(
        tau in -5.0..5.0f64,
        i1 in 0.0..PI,
        i2 in 0.0..PI,
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let m = common::random_physical(&mut rng).to_vectorized();
        let row = system_row(&state(tau, i1, i2));
        prop_assume!(row.intensity(&m) > 1e-3);
        let g = row.log_derivative(&m);
        prop_assume!(g.abs() > 1e-6);
        let (polarity, c) = if g > 0.0 { (Polarity::On, 0.15) } else { (Polarity::Off, 0.15) };
        let dtau = c / g.abs();
        let b = ConstraintRow::from_phase_gap(&row, polarity, c, dtau);
        prop_assert!(b.residual(&m).abs() <= 1e-12 * b.norm() * m.norm());
    }
}
