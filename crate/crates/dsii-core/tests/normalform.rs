use dsii_core::normalform::{
    assemble_and_solve, homological_verify, lattice_scan, Mode, NormalFormParams, NormalFormTable,
};
use dsii_core::spectral::{TorusField, TorusGrid};
use dsii_core::{Complex64, Error};

fn params(eps: f64) -> NormalFormParams {
    NormalFormParams {
        omega: 2f64.sqrt() / 2.0 + 0.11,
        epsilon: eps,
        alpha: 5.645,
        kappa1: 1.0,
        kappa2: 2f64.sqrt(),
    }
}

fn grid() -> TorusGrid {
    TorusGrid::new(16, 16, 1.0, 2f64.sqrt()).unwrap()
}

fn table_for(f: &TorusField, p: &NormalFormParams) -> NormalFormTable {
    let g = f.grid();
    let s = f.spectrum();
    let mut modes: Vec<Mode> = Vec::new();
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if s[i * g.ny() + j].norm() > 1e-13 {
                modes.push((g.mode_x(i), g.mode_y(j)));
            }
        }
    }
    NormalFormTable::solve_for(&modes, p).unwrap()
}

#[test]
fn back_substitution_at_the_reference_pair() {
    let e = assemble_and_solve((1, 0), (0, 1), &params(0.0)).unwrap();
    assert!(e.residual < 1e-12, "{e:?}");
    assert!(e.cond < 1e10);
}

#[test]
fn solutions_are_even() {
    for eps in [0.0, 1e-2] {
        for (k, l) in [((1, 0), (0, 1)), ((2, -3), (1, 1)), ((4, 2), (-1, 3))] {
            let a = assemble_and_solve(k, l, &params(eps)).unwrap();
            let b = assemble_and_solve((-k.0, -k.1), (-l.0, -l.1), &params(eps)).unwrap();
            let s = a.max_coefficient();
            for (x, y) in [(a.k1, b.k1), (a.k2_kl, b.k2_kl), (a.k2_lk, b.k2_lk), (a.k3, b.k3)] {
                assert!((x - y).norm() < 1e-12 * s);
            }
        }
    }
}

#[test]
fn swapping_the_pair_swaps_the_mixed_coefficients() {
    let p = params(1e-3);
    let (k, l) = ((3, 1), (-1, 2));
    let a = assemble_and_solve(k, l, &p).unwrap();
    let b = assemble_and_solve(l, k, &p).unwrap();
    let s = a.max_coefficient();
    assert!((a.k1 - b.k1).norm() < 1e-12 * s);
    assert!((a.k3 - b.k3).norm() < 1e-12 * s);
    assert!((a.k2_kl - b.k2_lk).norm() < 1e-12 * s);
    assert!((a.k2_lk - b.k2_kl).norm() < 1e-12 * s);
}

#[test]
fn certificate_on_a_single_mode() {
    let p = params(0.0);
    let k1 = 1.0;
    let f = TorusField::from_fn(grid(), |x, _| Complex64::new(0.7, 0.0) * (k1 * x).cos());
    let d = homological_verify(&table_for(&f, &p), &f, &p).unwrap();
    assert!(d < 1e-10, "{d:e}");
}

#[test]
fn certificate_on_two_modes() {
    for eps in [0.0, 1e-2] {
        let p = params(eps);
        let k2 = 2f64.sqrt();
        let f = TorusField::from_fn(grid(), |x, y| Complex64::new(x.cos() + (k2 * y).cos(), 0.0));
        let d = homological_verify(&table_for(&f, &p), &f, &p).unwrap();
        assert!(d < 1e-10, "eps {eps}: {d:e}");
    }
}

#[test]
fn certificate_on_complex_data() {
    let p = params(1e-2);
    let k2 = 2f64.sqrt();
    let f = TorusField::from_fn(grid(), |x, y| {
        Complex64::new(0.3, 0.2) * x.cos()
            + Complex64::new(-0.1, 0.5) * (2.0 * k2 * y).cos()
            + Complex64::new(0.05, -0.02) * (2.0 * x + k2 * y).sin()
    });
    let d = homological_verify(&table_for(&f, &p), &f, &p).unwrap();
    assert!(d < 1e-10, "{d:e}");
}

#[test]
fn zero_sample_is_exact() {
    let p = params(0.0);
    let f = TorusField::zeros(grid());
    assert_eq!(homological_verify(&NormalFormTable::default(), &f, &p).unwrap(), 0.0);
}

#[test]
fn missing_entries_are_reported() {
    let p = params(0.0);
    let f = TorusField::from_fn(grid(), |x, _| Complex64::new(x.cos(), 0.0));
    let t = NormalFormTable::default();
    assert!(matches!(homological_verify(&t, &f, &p), Err(Error::MissingEntry { .. })));
}

#[test]
fn coefficients_depend_linearly_on_small_epsilon() {
    let (k, l) = ((2, 1), (1, -1));
    let base = assemble_and_solve(k, l, &params(0.0)).unwrap();
    let diff = |eps: f64| {
        let e = assemble_and_solve(k, l, &params(eps)).unwrap();
        [(e.k1, base.k1), (e.k2_kl, base.k2_kl), (e.k2_lk, base.k2_lk), (e.k3, base.k3)]
            .iter()
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    };
    let ratio = diff(0.5e-6) / diff(1e-6);
    assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
}

#[test]
fn small_scan_is_complete_and_accurate() {
    let r = lattice_scan(&params(0.0), 4).unwrap();
    let n = 9 * 9 - 1;
    assert_eq!(r.rows.len(), n * n - n);
    assert!(r.max_residual_well_conditioned < 1e-12, "{}", r.max_residual_well_conditioned);
    println!(
        "singular {} near {} rays {:?}",
        r.singular.len(),
        r.near_singular.len(),
        r.rays.iter().map(|f| (f.name.clone(), f.exponent)).collect::<Vec<_>>()
    );
    assert_eq!(r.rays.len(), 6);
}

#[test]
fn scan_rejects_tiny_kmax() {
    assert!(lattice_scan(&params(0.0), 3).is_err());
}
