use dsii_core::darboux::{derive_params, orbit, DarbouxParams, Sign};
use dsii_core::evolve::{integrate, integrate_with, measure_growth, EvolutionConfig, Scheme};
use dsii_core::model::{validate_params, ModelParams, PdeCoefficients, RawParams};
use dsii_core::spectral::{Parity, TorusField, TorusGrid};
use dsii_core::{Complex64, Error};

fn omega() -> f64 {
    2f64.sqrt() / 2.0 + 0.11
}

fn grid(n: usize) -> TorusGrid {
    TorusGrid::new(n, n, 1.0, 2f64.sqrt()).unwrap()
}

fn free(w: f64) -> PdeCoefficients {
    PdeCoefficients {
        omega: w,
        epsilon: 0.0,
        alpha: 0.0,
        beta: 0.0,
    }
}

fn reference(eps: f64) -> ModelParams {
    validate_params(
        RawParams {
            omega: omega(),
            alpha_damp: 5.645,
            beta_drive: 11.336,
            epsilon: eps,
            kappa1: 1.0,
            kappa2: 2f64.sqrt(),
        },
        false,
    )
    .unwrap()
}

fn darboux() -> DarbouxParams {
    derive_params(omega(), 1.0, 2f64.sqrt(), 0.0, 1.1, 0.0, Sign::Plus, Sign::Plus).unwrap()
}

fn cfg(dt: f64, t: f64, scheme: Scheme) -> EvolutionConfig {
    EvolutionConfig {
        dt,
        scheme,
        t_final: t,
        snapshot_stride: 0,
    }
}

#[test]
fn circle_point_is_stationary() {
    let g = grid(16);
    let q0 = TorusField::constant(g, Complex64::from_polar(omega(), 0.7));
    for s in [Scheme::Etdrk4, Scheme::SplitStep2] {
        let r = integrate_with(&q0, &free(omega()), &cfg(1e-2, 1.0, s)).unwrap();
        assert!(r.last().sub(&q0).max_abs() < 1e-10);
    }
}

#[test]
fn plane_wave_rotates_at_the_right_rate() {
    let g = grid(16);
    let eta = 0.9;
    let q0 = TorusField::constant(g, Complex64::from_polar(eta, 0.3));
    let r = integrate_with(&q0, &free(omega()), &cfg(1e-3, 1.0, Scheme::Etdrk4)).unwrap();
    let exact = Complex64::from_polar(eta, -2.0 * (eta * eta - omega() * omega()) + 0.3);
    let err = r.last().values().iter().map(|z| (z - exact).norm()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn evolves_onto_the_analytic_orbit() {
    let p = darboux();
    let g = grid(64);
    let q0 = orbit(&p, -2.0, &g).unwrap();
    let r = integrate_with(&q0, &free(omega()), &cfg(1e-3, 1.0, Scheme::Etdrk4)).unwrap();
    let err = r.last().sub(&orbit(&p, -1.0, &g).unwrap()).l2_norm();
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn fourth_order_in_time() {
    let p = darboux();
    let g = grid(32);
    let q0 = orbit(&p, 0.0, &g).unwrap();
    let exact = orbit(&p, 0.5, &g).unwrap();
    let errs: Vec<f64> = [0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| {
            let r = integrate_with(&q0, &free(omega()), &cfg(dt, 0.5, Scheme::Etdrk4)).unwrap();
            r.last().sub(&exact).l2_norm()
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    println!("errors {errs:?} orders {orders:?}");
    assert!(orders[0] > 3.5, "{orders:?}");
}

#[test]
fn split_step_is_second_order() {
    let p = darboux();
    let g = grid(32);
    let q0 = orbit(&p, 0.0, &g).unwrap();
    let exact = orbit(&p, 0.5, &g).unwrap();
    let e: Vec<f64> = [0.01, 0.005]
        .iter()
        .map(|&dt| {
            let r = integrate_with(&q0, &free(omega()), &cfg(dt, 0.5, Scheme::SplitStep2)).unwrap();
            r.last().sub(&exact).l2_norm()
        })
        .collect();
    let order = (e[0] / e[1]).log2();
    assert!((order - 2.0).abs() < 0.2, "{e:?}");
}

#[test]
fn even_data_stays_even() {
    let p = darboux();
    let g = grid(32);
    let q0 = orbit(&p, -0.5, &g).unwrap();
    assert_eq!(q0.parity(), Parity::EVEN);
    let c = EvolutionConfig {
        snapshot_stride: 100,
        ..cfg(1e-3, 1.0, Scheme::Etdrk4)
    };
    let r = integrate(&q0, &reference(1e-2), &c).unwrap();
    assert_eq!(r.snapshots.len(), 11);
    for s in &r.snapshots {
        let (dx, dy) = s.q.parity_defect();
        assert!(dx < 1e-10 && dy < 1e-10, "t = {}: {dx:e} {dy:e}", s.t);
    }
}

#[test]
fn unstable_mode_grows_at_the_linear_rate() {
    let p = reference(0.0);
    let fit = measure_growth(&p, (1, 0), 1e-6).unwrap();
    let expect = 2.0 * p.kappa1 * p.lambda0();
    assert!((fit.exponent / expect - 1.0).abs() < 1e-2, "{fit:?} vs {expect}");
    let fit = measure_growth(&p, (0, 1), 1e-6).unwrap();
    assert!((fit.exponent / fit.predicted - 1.0).abs() < 1e-2, "{fit:?}");
}

#[test]
fn damping_shifts_the_exponent() {
    let p0 = reference(0.0);
    let p = reference(1e-3);
    let a = measure_growth(&p0, (1, 0), 1e-6).unwrap().exponent;
    let b = measure_growth(&p, (1, 0), 1e-6).unwrap().exponent;
    let shift = -1e-3 * (p.alpha_damp + p.kappa1 * p.kappa1);
    assert!(((b - a) / shift - 1.0).abs() < 0.05, "{} vs {shift}", b - a);
}

#[test]
fn neutral_mode_does_not_grow() {
    let p = validate_params(
        RawParams {
            omega: 0.8,
            alpha_damp: 1.0,
            beta_drive: 2.0,
            epsilon: 0.0,
            kappa1: 1.0,
            kappa2: 1.5,
        },
        false,
    )
    .unwrap();
    let fit = measure_growth(&p, (3, 2), 1e-6).unwrap();
    assert!(fit.exponent.abs() < 1e-6, "{fit:?}");
}

#[test]
fn oversized_perturbation_is_rejected() {
    assert!(matches!(
        measure_growth(&reference(0.0), (1, 0), 1e-3),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn blow_up_is_reported() {
    let g = grid(16);
    let q0 = TorusField::constant(g, Complex64::new(1.0, 0.0));
    let c = PdeCoefficients {
        omega: 1.0,
        epsilon: 1e-2,
        alpha: -3000.0,
        beta: 0.0,
    };
    let r = integrate_with(&q0, &c, &cfg(1e-2, 1.0, Scheme::Etdrk4));
    assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
}
