//! Subcommand bodies. Each returns an [`Outcome`]; writing and the manifest
//! are handled by the caller.

use std::fs::File;
use std::io::BufReader;

use dsii_core::darboux::orbit;
use dsii_core::evolve::integrate;
use dsii_core::melnikov::{appendix_chi, domain_scan, melnikov_components, solve_alpha_beta};
use dsii_core::model::{linear_spectrum, saddle_refined};
use dsii_core::normalform::{lattice_scan, NormalFormParams, SINGULAR_COND};
use dsii_core::spectral::{read_field_csv, write_field_csv, TorusField};
use dsii_core::Complex64;
use serde_json::Value;

use crate::config::{Format, Initial, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_f64, num, nums, obj, to_json_bytes, Csv};

pub struct Outcome {
    /// File name (relative to the output directory) and contents.
    pub files: Vec<(String, Vec<u8>)>,
    pub tolerances: Value,
    pub results: Value,
    /// Human-readable summary for stdout.
    pub summary: String,
}

/// Writes `rows` as CSV or as a JSON array of objects keyed by `header`.
fn table(name: &str, format: Format, header: &[&str], rows: &[Vec<Value>]) -> (String, Vec<u8>) {
    match format {
        Format::Csv => {
            let mut c = Csv::new(header);
            for r in rows {
                c.row(&r.iter().map(cell).collect::<Vec<_>>());
            }
            (format!("{name}.csv"), c.into_bytes())
        }
        Format::Json => {
            let arr = rows
                .iter()
                .map(|r| {
                    Value::Object(
                        header
                            .iter()
                            .zip(r)
                            .map(|(k, v)| (k.to_string(), v.clone()))
                            .collect(),
                    )
                })
                .collect();
            (format!("{name}.json"), to_json_bytes(&Value::Array(arr)))
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => n.as_f64().map_or_else(|| n.to_string(), fmt_f64),
        other => other.to_string(),
    }
}

fn snapshot_bytes(q: &TorusField) -> Vec<u8> {
    let mut buf = Vec::new();
    write_field_csv(q, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.model()?;
    let entries = linear_spectrum(&p, cfg.spectrum_kmax);
    let rows: Vec<Vec<Value>> = entries
        .iter()
        .map(|e| {
            vec![
                e.k1.into(),
                e.k2.into(),
                num(e.xi.0),
                num(e.xi.1),
                num(e.mu_plus),
                num(e.mu_minus),
            ]
        })
        .collect();
    let header = ["k1", "k2", "xi1", "xi2", "mu_plus", "mu_minus"];
    let unstable: Vec<Value> = entries
        .iter()
        .filter(|e| e.is_unstable())
        .map(|e| Value::from(vec![e.k1, e.k2]))
        .collect();
    let summary = format!(
        "branch {} with {} unstable modes; lambda0 = {}\n",
        p.branch.name(),
        p.unstable_modes,
        fmt_f64(p.lambda0())
    );
    Ok(Outcome {
        files: vec![table("spectrum", cfg.format, &header, &rows)],
        tolerances: obj([]),
        results: obj([
            ("branch", p.branch.name().into()),
            ("unstable_modes", p.unstable_modes.into()),
            ("unstable", Value::Array(unstable)),
            ("lambda0", num(p.lambda0())),
            ("entries", entries.len().into()),
        ]),
        summary,
    })
}

pub fn orbit_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.darboux()?;
    let g = cfg.grid()?;
    let mut files = Vec::new();
    let mut samples = Vec::new();
    for (i, &t) in cfg.times.iter().enumerate() {
        let q = orbit(&p, t, &g)?;
        let name = format!("orbit_{i:03}.csv");
        samples.push(obj([
            ("t", num(t)),
            ("tau", num(p.tau(t))),
            ("file", name.clone().into()),
            ("max_abs", num(q.max_abs())),
            ("l2_norm", num(q.l2_norm())),
        ]));
        files.push((name, snapshot_bytes(&q)));
    }
    let phase = crate::verify::phase_checks(&p, &g)?;
    let phase_ok = phase.iter().all(|c| c.pass);
    let summary = format!(
        "{} snapshots; phase-shift checks {}\n",
        files.len(),
        if phase_ok { "pass" } else { "FAIL" }
    );
    Ok(Outcome {
        files,
        tolerances: obj([("phase_limit", num(crate::verify::PHASE_TOL))]),
        results: obj([
            ("lambda0", num(p.lambda0)),
            ("vartheta1", num(p.vartheta1)),
            ("vartheta2", num(p.vartheta2)),
            ("rho_hat", num(p.rho_hat)),
            ("samples", Value::Array(samples)),
            ("phase_checks", Value::Array(phase.iter().map(|c| c.to_json()).collect())),
        ]),
        summary,
    })
}

pub fn melnikov(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.darboux()?;
    let g = cfg.grid()?;
    let c = melnikov_components(&p, &g, &cfg.quadrature())?;
    let file = match cfg.format {
        Format::Json => (
            "melnikov.json".to_string(),
            to_json_bytes(&obj([("m", Value::Array(c.m.iter().map(|r| nums(r)).collect()))])),
        ),
        Format::Csv => {
            let mut t = Csv::new(&["row", "m1", "m2", "m3", "m4"]);
            for (j, r) in c.m.iter().enumerate() {
                let mut cells = vec![(j + 1).to_string()];
                cells.extend(r.iter().map(|&x| fmt_f64(x)));
                t.row(&cells);
            }
            ("melnikov.csv".to_string(), t.into_bytes())
        }
    };
    let summary = format!(
        "M1 = {:?}\nM2 = {:?}\n",
        c.m[0].map(fmt_f64),
        c.m[1].map(fmt_f64)
    );
    Ok(Outcome {
        files: vec![file],
        tolerances: obj([
            ("convergence", num(cfg.quad_tol)),
            ("tail", num(cfg.quad_tail_tol)),
        ]),
        results: obj([
            ("m", Value::Array(c.m.iter().map(|r| nums(r)).collect())),
            ("imag_ratio", num(c.imag_ratio)),
            ("t_range", nums(&[c.t_range.0, c.t_range.1])),
            ("nodes", c.nodes.into()),
            ("convergence_change", c.convergence_change.map_or(Value::Null, num)),
        ]),
        summary,
    })
}

fn flags(f: &[String]) -> Value {
    if f.is_empty() {
        "".into()
    } else {
        f.join(";").into()
    }
}

pub fn solve_params(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.darboux()?;
    let g = cfg.grid()?;
    let c = melnikov_components(&p, &g, &cfg.quadrature())?;
    let s = solve_alpha_beta(&c, cfg.gamma)?;
    let chi = appendix_chi(&c)?;
    let row = vec![
        num(s.gamma),
        num(s.alpha_star),
        num(s.beta_star),
        num(chi.chi.unwrap_or(f64::NAN)),
        s.admissible.into(),
        flags(&s.flags),
    ];
    let header = ["gamma", "alpha", "beta", "chi", "admissible", "flags"];
    let summary = format!(
        "alpha={} beta={} chi={} admissible={}\n",
        fmt_f64(s.alpha_star),
        fmt_f64(s.beta_star),
        fmt_f64(chi.chi.unwrap_or(f64::NAN)),
        s.admissible
    );
    Ok(Outcome {
        files: vec![table("solve_params", cfg.format, &header, &[row])],
        tolerances: obj([("convergence", num(cfg.quad_tol))]),
        results: obj([
            ("alpha", num(s.alpha_star)),
            ("beta", num(s.beta_star)),
            ("gamma", num(s.gamma)),
            ("chi", num(chi.chi.unwrap_or(f64::NAN))),
            ("chi_alpha", num(chi.alpha_star)),
            ("chi_beta", num(chi.beta_star)),
            ("chi_gamma", num(chi.gamma)),
            ("admissible", s.admissible.into()),
            ("flags", flags(&s.flags)),
            ("m", Value::Array(c.m.iter().map(|r| nums(r)).collect())),
        ]),
        summary,
    })
}

pub fn scan_domain(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = cfg.grid()?;
    let cells = domain_scan(
        &cfg.scan_omega,
        &cfg.scan_delta_rho,
        &cfg.scan_gamma,
        cfg.kappa1,
        cfg.kappa2,
        &g,
        &cfg.quadrature(),
    );
    let rows: Vec<Vec<Value>> = cells
        .iter()
        .map(|c| {
            vec![
                num(c.omega),
                num(c.delta_rho),
                num(c.gamma),
                num(c.alpha),
                num(c.beta),
                c.admissible.into(),
                flags(&c.flags),
            ]
        })
        .collect();
    let header = ["omega", "delta_rho", "gamma", "alpha", "beta", "admissible", "flags"];
    let admissible = cells.iter().filter(|c| c.admissible).count();
    let flagged = cells.iter().filter(|c| !c.flags.is_empty()).count();
    Ok(Outcome {
        files: vec![table("scan_domain", cfg.format, &header, &rows)],
        tolerances: obj([("convergence", num(cfg.quad_tol))]),
        results: obj([
            ("cells", cells.len().into()),
            ("admissible", admissible.into()),
            ("flagged", flagged.into()),
        ]),
        summary: format!("{} cells, {admissible} admissible, {flagged} flagged\n", cells.len()),
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.model()?;
    let g = cfg.grid()?;
    let q0 = match &cfg.initial {
        Initial::Orbit => orbit(&cfg.darboux()?, cfg.t0, &g)?,
        Initial::Circle => TorusField::constant(g, Complex64::from_polar(cfg.omega, cfg.gamma)),
        Initial::File(path) => {
            let f = File::open(path).map_err(|e| CliError::io(path, e))?;
            read_field_csv(BufReader::new(f))?
        }
    };
    let run = integrate(&q0, &p, &cfg.evolution())?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (i, s) in run.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:05}.csv");
        let t = cfg.t0 + s.t;
        rows.push(vec![num(t), name.clone().into(), num(s.q.l2_norm()), num(s.q.max_abs())]);
        files.push((name, snapshot_bytes(&s.q)));
    }
    let (index, bytes) = table("simulate", cfg.format, &["t", "file", "l2_norm", "max_abs"], &rows);
    files.push((index, bytes));

    let t_end = cfg.t0 + cfg.t_final;
    let mut results = vec![
        ("steps", Value::from(run.steps)),
        ("snapshots", Value::from(run.snapshots.len())),
        ("t_end", num(t_end)),
        ("final_l2_norm", num(run.last().l2_norm())),
    ];
    // Against the analytic orbit when that is the exact solution.
    if cfg.initial == Initial::Orbit && cfg.epsilon == 0.0 {
        let exact = orbit(&cfg.darboux()?, t_end, &run.last().grid().clone())?;
        results.push(("orbit_l2_error", num(run.last().sub(&exact).l2_norm())));
    }
    if let Ok(s) = saddle_refined(&p) {
        results.push(("saddle_i", num(s.i_val)));
    }
    let summary = format!("{} steps, {} snapshots\n", run.steps, run.snapshots.len());
    Ok(Outcome {
        files,
        tolerances: obj([("parity", num(1e-10))]),
        results: Value::Object(results.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
        summary,
    })
}

pub fn normalform(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.model()?;
    let nf = NormalFormParams::from(&p);
    let r = lattice_scan(&nf, cfg.nf_kmax)?;
    let rows: Vec<Vec<Value>> = r
        .rows
        .iter()
        .map(|x| {
            vec![
                x.k.0.into(),
                x.k.1.into(),
                x.ell.0.into(),
                x.ell.1.into(),
                num(x.cond),
                num(x.residual),
                num(x.max_k),
            ]
        })
        .collect();
    let header = ["k1", "k2", "l1", "l2", "cond", "residual", "maxK"];
    let singular: Vec<Value> = r
        .singular
        .iter()
        .map(|s| {
            obj([
                ("k", Value::from(vec![s.k.0, s.k.1])),
                ("l", Value::from(vec![s.ell.0, s.ell.1])),
                ("cond", num(s.cond)),
                ("null_dim", s.null_dim.into()),
            ])
        })
        .collect();
    let near: Vec<Value> = r
        .near_singular
        .iter()
        .map(|(k, l, c)| {
            obj([
                ("k", Value::from(vec![k.0, k.1])),
                ("l", Value::from(vec![l.0, l.1])),
                ("cond", num(*c)),
            ])
        })
        .collect();
    let rays: Vec<Value> = r
        .rays
        .iter()
        .map(|f| {
            obj([
                ("name", f.name.clone().into()),
                ("exponent", num(f.exponent)),
                ("fit_residual", num(f.fit_residual)),
                ("points", f.points.into()),
            ])
        })
        .collect();
    let max_cond = r.rows.iter().map(|x| x.cond).fold(0.0, f64::max);
    let summary_json = obj([
        ("kmax", r.kmax.into()),
        ("pairs", r.rows.len().into()),
        ("singular_pairs", Value::Array(singular.clone())),
        ("near_singular_pairs", Value::Array(near)),
        ("max_cond", num(max_cond)),
        ("max_residual_well_conditioned", num(r.max_residual_well_conditioned)),
        ("fitted_exponents", Value::Array(rays)),
    ]);
    let summary = format!(
        "{} pairs, {} singular, max residual {}\n",
        r.rows.len(),
        r.singular.len(),
        fmt_f64(r.max_residual_well_conditioned)
    );
    Ok(Outcome {
        files: vec![
            table("normalform", cfg.format, &header, &rows),
            ("normalform_summary.json".to_string(), to_json_bytes(&summary_json)),
        ],
        tolerances: obj([
            ("singular_cond", num(SINGULAR_COND)),
            ("near_singular_cond", num(dsii_core::normalform::NEAR_SINGULAR_COND)),
        ]),
        results: summary_json,
        summary,
    })
}
