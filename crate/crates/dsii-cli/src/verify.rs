//! Fast oracle suite behind `dsii verify`.

use dsii_core::darboux::{
    first_phase_limit, iterate_darboux, iterated_phase_limit, lax_residual, orbit, DarbouxParams,
};
use dsii_core::evolve::{integrate_with, measure_growth, EvolutionConfig, Scheme};
use dsii_core::melnikov::{melnikov_components, melnikov_direct, QuadratureConfig};
use dsii_core::model::{linear_spectrum, PdeCoefficients};
use dsii_core::normalform::{assemble_and_solve, homological_verify, NormalFormParams, NormalFormTable};
use dsii_core::spectral::{dsii_rhs_with, TorusField, TorusGrid};
use dsii_core::Complex64;
use serde_json::Value;

use crate::commands::Outcome;
use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_f64, num, obj, to_json_bytes, Csv};

pub const PHASE_TOL: f64 = 1e-10;

pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    /// "<" or "==".
    pub op: &'static str,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            pass: value < tol,
            op: "<",
        }
    }

    pub fn to_json(&self) -> Value {
        obj([
            ("name", self.name.clone().into()),
            ("value", num(self.value)),
            ("tol", num(self.tol)),
            ("op", self.op.into()),
            ("pass", self.pass.into()),
        ])
    }
}

/// First and iterated phase limits at τ = ±40.
pub fn phase_checks(p: &DarbouxParams, g: &TorusGrid) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    for tau in [-40.0, 40.0] {
        let (m, e) = first_phase_limit(p, tau);
        out.push(Check::below(format!("phase_first_tau{tau:+}"), (m - e).norm(), PHASE_TOL));
        let (err, _) = iterated_phase_limit(p, tau, g)?;
        out.push(Check::below(format!("phase_iterated_tau{tau:+}"), err, PHASE_TOL));
    }
    Ok(out)
}

fn free(omega: f64) -> PdeCoefficients {
    PdeCoefficients {
        omega,
        epsilon: 0.0,
        alpha: 0.0,
        beta: 0.0,
    }
}

fn orbit_residual(p: &DarbouxParams, g: &TorusGrid, t: f64) -> Result<f64, CliError> {
    let h = 1e-4;
    let q = orbit(p, t, g)?;
    let dq = orbit(p, t + h, g)?
        .sub(&orbit(p, t - h, g)?)
        .scale(Complex64::new(0.5 / h, 0.0));
    Ok(dsii_rhs_with(&q, &free(p.eta)).sub(&dq).l2_norm() / q.l2_norm())
}

fn checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let p = cfg.darboux()?;
    let g = cfg.grid()?;
    let model = cfg.model()?;
    let mut out = Vec::new();

    let circle = TorusField::constant(g, Complex64::from_polar(cfg.omega, cfg.gamma));
    out.push(Check::below("circle_invariance", dsii_rhs_with(&circle, &free(cfg.omega)).max_abs(), 1e-12));

    let q0 = orbit(&p, 0.0, &g)?;
    let parseval = (q0.l2_norm() - q0.l2_norm_spectral()).abs() / q0.l2_norm();
    out.push(Check::below("parseval", parseval, 1e-12));

    for t in [-1.0, 0.0, 1.0] {
        out.push(Check::below(format!("orbit_residual_t{t:+}"), orbit_residual(&p, &g, t)?, 1e-5));
    }
    out.extend(phase_checks(&p, &g)?);

    let t = 0.3;
    let s = iterate_darboux(&p, t, &g)?;
    let sh = iterate_darboux(&p.rptr(), t, &g)?;
    let st = iterate_darboux(&p.krptr(), t, &g)?;
    let q = &s.q_field;
    let l0 = Complex64::new(p.lambda0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let half = 0.5 * p.kappa1;
    let y = 0.5 * p.kappa2;
    for (name, r) in [
        ("lax_psi", lax_residual(&s.psi_plus, q, l0, (half, 0.0), false)),
        ("lax_psi_hat", lax_residual(&sh.psi_plus, q, l0, (half, 0.0), true)),
        ("lax_phi", lax_residual(&s.phi_plus, q, zero, (p.xi10, y), false)),
        ("lax_phi_tilde", lax_residual(&st.phi_plus, q, zero, (-p.xi10, y), false)),
        ("lax_phi_hat", lax_residual(&sh.phi_plus, q, zero, (p.xi10, y), true)),
    ] {
        out.push(Check::below(name, r, 1e-8));
    }

    let evo = EvolutionConfig {
        dt: 1e-3,
        scheme: Scheme::Etdrk4,
        t_final: 1.0,
        snapshot_stride: 0,
    };
    let run = integrate_with(&orbit(&p, -2.0, &g)?, &free(p.eta), &evo)?;
    let err = run.last().sub(&orbit(&p, -1.0, &g)?).l2_norm();
    out.push(Check::below("evolve_orbit_l2", err, 1e-4));

    let unstable = linear_spectrum(&model, 4).iter().filter(|e| e.is_unstable()).count();
    out.push(Check {
        name: "unstable_modes".into(),
        value: unstable as f64,
        tol: 2.0,
        pass: unstable == 2,
        op: "==",
    });
    let fit = measure_growth(&model, (1, 0), 1e-6)?;
    let expect = 2.0 * model.kappa1 * model.lambda0();
    out.push(Check::below("growth_mode_1_0", (fit.exponent / expect - 1.0).abs(), 1e-2));

    let nf = NormalFormParams::from(&model);
    let e = assemble_and_solve((1, 0), (0, 1), &nf)?;
    out.push(Check::below("normalform_back_substitution", e.residual, 1e-12));
    let small = TorusGrid::new(16, 16, cfg.kappa1, cfg.kappa2)?;
    let (k1, k2) = (cfg.kappa1, cfg.kappa2);
    let f = TorusField::from_fn(small, |x, y| Complex64::new((k1 * x).cos() + (k2 * y).cos(), 0.0));
    let table = NormalFormTable::solve_for(&[(1, 0), (-1, 0), (0, 1), (0, -1)], &nf)?;
    out.push(Check::below("normalform_homological", homological_verify(&table, &f, &nf)?, 1e-10));

    // Decomposition against direct integration on a coarse grid.
    let quick = QuadratureConfig {
        check_convergence: false,
        ..cfg.quadrature()
    };
    let c = melnikov_components(&p, &small, &quick)?;
    out.push(Check::below("melnikov_imag_ratio", c.imag_ratio, 1e-8));
    let (a, b, gam) = (0.7, 2.0, 0.4);
    let d = melnikov_direct(&p, &small, &quick, a, b, gam)?;
    let m = c.assemble(a, b, gam);
    let rel = (0..2).map(|j| (d[j] - m[j]).abs()).fold(0.0, f64::max) / c.scale();
    out.push(Check::below("melnikov_decomposition", rel, 1e-8));
    Ok(out)
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let list = checks(cfg)?;
    let failed: Vec<&str> = list.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let width = list.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut summary = String::new();
    for c in &list {
        summary.push_str(&format!(
            "{:<width$}  {}  {:>24}  {} {:e}\n",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            fmt_f64(c.value),
            c.op,
            c.tol
        ));
    }
    let file = match cfg.format {
        Format::Csv => {
            let mut t = Csv::new(&["check", "value", "tol", "pass"]);
            for c in &list {
                t.row(&[c.name.clone(), fmt_f64(c.value), fmt_f64(c.tol), c.pass.to_string()]);
            }
            ("verify.csv".to_string(), t.into_bytes())
        }
        Format::Json => (
            "verify.json".to_string(),
            to_json_bytes(&Value::Array(list.iter().map(Check::to_json).collect())),
        ),
    };
    let tolerances = Value::Object(list.iter().map(|c| (c.name.clone(), num(c.tol))).collect());
    let results = obj([
        ("checks", Value::Array(list.iter().map(Check::to_json).collect())),
        ("failed", Value::from(failed.clone())),
        ("all_pass", failed.is_empty().into()),
    ]);
    Ok(Outcome {
        files: vec![file],
        tolerances,
        results,
        summary,
    })
}

/// Names of failed checks in a verify outcome.
pub fn failures(o: &Outcome) -> Vec<String> {
    o.results["failed"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default()
}
