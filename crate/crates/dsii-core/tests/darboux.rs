use std::f64::consts::PI;

use dsii_core::darboux::{
    derive_params, first_darboux, first_phase_limit, iterate_darboux, iterated_phase_limit,
    lax_residual, orbit, transform_potentials, DarbouxParams, Sign,
};
use dsii_core::model::PdeCoefficients;
use dsii_core::spectral::{dsii_rhs_with, solve_u, TorusGrid};
use dsii_core::Complex64;

fn omega() -> f64 {
    2f64.sqrt() / 2.0 + 0.11
}

fn params(sx: Sign, sy: Sign) -> DarbouxParams {
    derive_params(omega(), 1.0, 2f64.sqrt(), 0.0, 1.1, 0.0, sx, sy).unwrap()
}

fn grid(n: usize) -> TorusGrid {
    TorusGrid::new(n, n, 1.0, 2f64.sqrt()).unwrap()
}

fn residual(p: &DarbouxParams, g: &TorusGrid, t: f64) -> f64 {
    let h = 1e-4;
    let c = PdeCoefficients {
        omega: omega(),
        epsilon: 0.0,
        alpha: 0.0,
        beta: 0.0,
    };
    let q = orbit(p, t, g).unwrap();
    let dq = orbit(p, t + h, g)
        .unwrap()
        .sub(&orbit(p, t - h, g).unwrap())
        .scale(Complex64::new(0.5 / h, 0.0));
    dsii_rhs_with(&q, &c).sub(&dq).l2_norm() / q.l2_norm()
}

#[test]
fn orbit_solves_dsii() {
    let p = params(Sign::Plus, Sign::Plus);
    let g = grid(64);
    for t in [-1.0, 0.0, 1.0] {
        let r = residual(&p, &g, t);
        assert!(r < 1e-5, "t = {t}: residual {r:e}");
    }
}

#[test]
fn residual_drops_under_refinement() {
    let p = params(Sign::Plus, Sign::Plus);
    let r16 = residual(&p, &grid(16), 0.3);
    let r32 = residual(&p, &grid(32), 0.3);
    assert!(r32 < r16 * 1e-2, "{r16:e} -> {r32:e}");
}

#[test]
fn orbit_is_even_for_every_branch_choice() {
    let g = grid(64);
    for sx in [Sign::Plus, Sign::Minus] {
        for sy in [Sign::Plus, Sign::Minus] {
            let s = iterate_darboux(&params(sx, sy), 0.4, &g).unwrap();
            let (dx, dy) = s.b_i_val.parity_defect();
            assert!(dx < 1e-12 && dy < 1e-12, "{sx:?} {sy:?}: {dx:e} {dy:e}");
            assert!(s.q_field.parity().even_x && s.q_field.parity().even_y);
        }
    }
}

#[test]
fn first_transform_parity_and_denominator() {
    let p = params(Sign::Plus, Sign::Plus);
    let g = grid(64);
    for t in [-6.0, -1.0, 0.0, 2.0, 6.0] {
        let f = first_darboux(&p, t, &g);
        assert!(f.a[0].abs() < 1e-15);
        let n = f.a.len();
        for i in 1..n {
            assert!((f.a[i] + f.a[n - i]).abs() < 1e-14);
            assert!((f.b[i] - f.b[n - i]).norm() < 1e-14);
        }
        assert!(f.denominator_min >= 1.0 - p.vartheta1.sin() - 1e-15);
    }
}

#[test]
fn phase_shift_of_first_transform() {
    let p = params(Sign::Plus, Sign::Plus);
    for tau in [-40.0, 40.0] {
        let (m, e) = first_phase_limit(&p, tau);
        assert!((m - e).norm() < 1e-10, "{tau}: {m} vs {e}");
        assert!((m.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn phase_shift_of_iterated_transform() {
    let p = params(Sign::Plus, Sign::Plus);
    let g = grid(32);
    for tau in [-40.0, 40.0] {
        let (err, _) = iterated_phase_limit(&p, tau, &g).unwrap();
        assert!(err < 1e-10, "{tau}: {err:e}");
    }
}

#[test]
fn replacements_leave_the_orbit_unchanged() {
    let p = params(Sign::Plus, Sign::Plus);
    let g = grid(32);
    let q = orbit(&p, 0.3, &g).unwrap();
    for r in [p.rptr(), p.krptr()] {
        let d = orbit(&r, 0.3, &g).unwrap().sub(&q).max_abs();
        assert!(d < 1e-13, "{d:e}");
    }
}

#[test]
fn lax_residuals_of_transformed_eigenfunctions() {
    let p = params(Sign::Plus, Sign::Plus);
    let g = grid(64);
    let t = 0.3;
    let s = iterate_darboux(&p, t, &g).unwrap();
    let sh = iterate_darboux(&p.rptr(), t, &g).unwrap();
    let st = iterate_darboux(&p.krptr(), t, &g).unwrap();
    let q = &s.q_field;
    let l0 = Complex64::new(p.lambda0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let half = 0.5 * p.kappa1;
    let cases = [
        ("psi", lax_residual(&s.psi_plus, q, l0, (half, 0.0), false)),
        ("psi_hat", lax_residual(&sh.psi_plus, q, l0, (half, 0.0), true)),
        ("phi", lax_residual(&s.phi_plus, q, zero, (p.xi10, 0.5 * p.kappa2), false)),
        ("phi_tilde", lax_residual(&st.phi_plus, q, zero, (-p.xi10, 0.5 * p.kappa2), false)),
        ("phi_hat", lax_residual(&sh.phi_plus, q, zero, (p.xi10, 0.5 * p.kappa2), true)),
    ];
    for (name, r) in cases {
        assert!(r < 1e-8, "{name}: {r:e}");
    }
}

#[test]
fn transformed_potentials_match_the_u_equation() {
    // R₂ − R₁ = 2(|Q|² − ω²) + u_y up to a spatial constant.
    let p = params(Sign::Plus, Sign::Plus);
    let g = grid(64);
    let t = -0.4;
    let (r1, r2) = transform_potentials(&p, t, &g).unwrap();
    let q = orbit(&p, t, &g).unwrap();
    let u = solve_u(&q);
    let uy = dsii_core::spectral::derivative(&u, 1, (0.0, 0.0));
    let w = omega() * omega();
    let lhs = r2.sub(&r1);
    let rhs = q.zip_map(&uy, |z, d| 2.0 * (z.norm_sqr() - w) + d);
    let diff = lhs.sub(&rhs);
    let m = diff.mean();
    let osc = diff.map(|z| z - m).max_abs();
    assert!(osc < 1e-10 * rhs.max_abs(), "{osc:e}");
    // R₁ + R₂ = iũ is purely imaginary.
    let sum = r1.add(&r2);
    let re = sum.values().iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    assert!(re < 1e-10 * sum.max_abs().max(1.0), "{re:e}");
}

#[test]
fn degenerate_time_is_finite_everywhere() {
    let p = params(Sign::Plus, Sign::Plus);
    let g = grid(32);
    for k in -60..=60 {
        let s = iterate_darboux(&p, k as f64 * 0.1, &g).unwrap();
        assert!(s.w_ratio > 0.0);
        assert!(s.q_field.values().iter().all(|z| z.is_finite()));
    }
    let far = orbit(&p, p.t_of_tau(600.0), &g).unwrap();
    assert!(far.values().iter().all(|z| z.is_finite()));
    let _ = PI;
}
