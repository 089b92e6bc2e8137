//! Flat `key = value` run configuration.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use dsii_core::darboux::{derive_params_delta_rho, DarbouxParams, Sign};
use dsii_core::evolve::{EvolutionConfig, Scheme};
use dsii_core::melnikov::QuadratureConfig;
use dsii_core::model::{validate_params, ModelParams, RawParams};
use dsii_core::spectral::TorusGrid;
use serde_json::{Map, Value};

use crate::error::CliError;
use crate::output::num;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// How `simulate` builds its initial field.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// Analytic orbit at t0.
    Orbit,
    /// The circle point ω e^{iγ}.
    Circle,
    /// A field in the spectral CSV format.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub kappa1: f64,
    pub kappa2: f64,

    pub rho: f64,
    pub delta_rho: f64,
    pub gamma: f64,
    pub sign_x: Sign,
    pub sign_y: Sign,

    pub nx: usize,
    pub ny: usize,

    pub quad_nodes: usize,
    pub quad_panel_tau: f64,
    pub quad_tail_tol: f64,
    pub quad_t_cut_scale: f64,
    pub quad_tol: f64,
    pub quad_check: bool,

    pub dt: f64,
    pub scheme: Scheme,
    pub t0: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub initial: Initial,

    pub times: Vec<f64>,
    pub spectrum_kmax: u32,
    pub nf_kmax: i32,

    pub scan_omega: Vec<f64>,
    pub scan_delta_rho: Vec<f64>,
    pub scan_gamma: Vec<f64>,

    pub out: PathBuf,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let omega = 2f64.sqrt() / 2.0 + 0.11;
        Self {
            omega,
            alpha: 5.645,
            beta: 11.336,
            epsilon: 0.0,
            kappa1: 1.0,
            kappa2: 2f64.sqrt(),
            rho: 0.0,
            delta_rho: 1.1,
            gamma: FRAC_PI_2,
            sign_x: Sign::Plus,
            sign_y: Sign::Plus,
            nx: 64,
            ny: 64,
            quad_nodes: QuadratureConfig::default().nodes_per_panel,
            quad_panel_tau: 0.5,
            quad_tail_tol: 1e-12,
            quad_t_cut_scale: 1.0,
            quad_tol: 1e-6,
            quad_check: true,
            dt: 1e-3,
            scheme: Scheme::Etdrk4,
            t0: -2.0,
            t_final: 1.0,
            snapshot_stride: 100,
            initial: Initial::Orbit,
            times: vec![-1.0, 0.0, 1.0],
            spectrum_kmax: 4,
            nf_kmax: 8,
            scan_omega: linspace(0.72, 0.86, 5),
            scan_delta_rho: linspace(0.5, 2.5, 5),
            scan_gamma: linspace(0.0, std::f64::consts::PI, 5),
            out: PathBuf::from("dsii-out"),
            format: Format::Csv,
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value}: {why}"))
}

fn float(key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = v.parse().map_err(|_| bad(key, v, "not a number"))?;
    if !x.is_finite() {
        return Err(bad(key, v, "not finite"));
    }
    Ok(x)
}

fn uint(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse().map_err(|_| bad(key, v, "not a non-negative integer"))
}

/// `a,b,c` or `lo:hi:n`.
fn list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = v.split(':').collect();
    let out = if parts.len() == 3 {
        let n = uint(key, parts[2].trim())?;
        linspace(float(key, parts[0].trim())?, float(key, parts[1].trim())?, n)
    } else {
        v.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| float(key, s.trim()))
            .collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(bad(key, v, "empty list"));
    }
    Ok(out)
}

fn sign(key: &str, v: &str) -> Result<Sign, CliError> {
    match v {
        "+" | "+1" | "1" | "plus" => Ok(Sign::Plus),
        "-" | "-1" | "minus" => Ok(Sign::Minus),
        _ => Err(bad(key, v, "expected + or -")),
    }
}

fn sign_str(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "+",
        Sign::Minus => "-",
    }
}

fn boolean(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

pub const KEYS: &[&str] = &[
    "omega",
    "alpha",
    "beta",
    "epsilon",
    "kappa1",
    "kappa2",
    "rho",
    "delta_rho",
    "gamma",
    "sign_x",
    "sign_y",
    "nx",
    "ny",
    "quad_nodes",
    "quad_panel_tau",
    "quad_tail_tol",
    "quad_t_cut_scale",
    "quad_tol",
    "quad_check",
    "dt",
    "scheme",
    "t0",
    "t_final",
    "snapshot_stride",
    "initial",
    "times",
    "spectrum_kmax",
    "nf_kmax",
    "scan_omega",
    "scan_delta_rho",
    "scan_gamma",
    "out",
    "format",
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "omega" => self.omega = float(key, v)?,
            "alpha" => self.alpha = float(key, v)?,
            "beta" => self.beta = float(key, v)?,
            "epsilon" => self.epsilon = float(key, v)?,
            "kappa1" => self.kappa1 = float(key, v)?,
            "kappa2" => self.kappa2 = float(key, v)?,
            "rho" => self.rho = float(key, v)?,
            "delta_rho" => self.delta_rho = float(key, v)?,
            "gamma" => self.gamma = float(key, v)?,
            "sign_x" => self.sign_x = sign(key, v)?,
            "sign_y" => self.sign_y = sign(key, v)?,
            "nx" => self.nx = uint(key, v)?,
            "ny" => self.ny = uint(key, v)?,
            "quad_nodes" => self.quad_nodes = uint(key, v)?,
            "quad_panel_tau" => self.quad_panel_tau = float(key, v)?,
            "quad_tail_tol" => self.quad_tail_tol = float(key, v)?,
            "quad_t_cut_scale" => self.quad_t_cut_scale = float(key, v)?,
            "quad_tol" => self.quad_tol = float(key, v)?,
            "quad_check" => self.quad_check = boolean(key, v)?,
            "dt" => self.dt = float(key, v)?,
            "scheme" => self.scheme = Scheme::parse(v).ok_or_else(|| bad(key, v, "expected etdrk4 or split2"))?,
            "t0" => self.t0 = float(key, v)?,
            "t_final" => self.t_final = float(key, v)?,
            "snapshot_stride" => self.snapshot_stride = uint(key, v)?,
            "initial" => {
                self.initial = match v {
                    "orbit" => Initial::Orbit,
                    "circle" => Initial::Circle,
                    _ => match v.strip_prefix("file:") {
                        Some(p) if !p.is_empty() => Initial::File(PathBuf::from(p)),
                        _ => return Err(bad(key, v, "expected orbit, circle or file:PATH")),
                    },
                }
            }
            "times" => self.times = list(key, v)?,
            "spectrum_kmax" => self.spectrum_kmax = uint(key, v)? as u32,
            "nf_kmax" => self.nf_kmax = uint(key, v)? as i32,
            "scan_omega" => self.scan_omega = list(key, v)?,
            "scan_delta_rho" => self.scan_delta_rho = list(key, v)?,
            "scan_gamma" => self.scan_gamma = list(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "format" => {
                self.format = match v {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad(key, v, "expected csv or json")),
                }
            }
            _ => {
                return Err(CliError::Config(format!(
                    "unknown key '{key}' (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are
    /// skipped; repeated keys are an error.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(CliError::Config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
            self.set(k, v).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// `key=value` from the command line.
    pub fn apply_assignment(&mut self, s: &str) -> Result<(), CliError> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("'{s}': expected key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn raw_params(&self) -> RawParams {
        RawParams {
            omega: self.omega,
            alpha_damp: self.alpha,
            beta_drive: self.beta,
            epsilon: self.epsilon,
            kappa1: self.kappa1,
            kappa2: self.kappa2,
        }
    }

    pub fn model(&self) -> Result<ModelParams, CliError> {
        Ok(validate_params(self.raw_params(), false)?)
    }

    pub fn grid(&self) -> Result<TorusGrid, CliError> {
        Ok(TorusGrid::new(self.nx, self.ny, self.kappa1, self.kappa2)?)
    }

    pub fn darboux(&self) -> Result<DarbouxParams, CliError> {
        self.darboux_at(self.omega, self.delta_rho, self.gamma)
    }

    pub fn darboux_at(&self, omega: f64, delta_rho: f64, gamma: f64) -> Result<DarbouxParams, CliError> {
        Ok(derive_params_delta_rho(
            omega,
            self.kappa1,
            self.kappa2,
            self.rho,
            delta_rho,
            gamma,
            self.sign_x,
            self.sign_y,
        )?)
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            nodes_per_panel: self.quad_nodes,
            panel_width_tau: self.quad_panel_tau,
            tail_tol: self.quad_tail_tol,
            t_cut_scale: self.quad_t_cut_scale,
            check_convergence: self.quad_check,
            convergence_tol: self.quad_tol,
        }
    }

    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.dt,
            scheme: self.scheme,
            t_final: self.t_final,
            snapshot_stride: self.snapshot_stride,
        }
    }

    /// Every key with its resolved value, for manifests.
    pub fn to_json(&self) -> Value {
        let floats = |v: &[f64]| Value::Array(v.iter().map(|&x| num(x)).collect());
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("omega", num(self.omega));
        put("alpha", num(self.alpha));
        put("beta", num(self.beta));
        put("epsilon", num(self.epsilon));
        put("kappa1", num(self.kappa1));
        put("kappa2", num(self.kappa2));
        put("rho", num(self.rho));
        put("delta_rho", num(self.delta_rho));
        put("gamma", num(self.gamma));
        put("sign_x", sign_str(self.sign_x).into());
        put("sign_y", sign_str(self.sign_y).into());
        put("nx", self.nx.into());
        put("ny", self.ny.into());
        put("quad_nodes", self.quad_nodes.into());
        put("quad_panel_tau", num(self.quad_panel_tau));
        put("quad_tail_tol", num(self.quad_tail_tol));
        put("quad_t_cut_scale", num(self.quad_t_cut_scale));
        put("quad_tol", num(self.quad_tol));
        put("quad_check", self.quad_check.into());
        put("dt", num(self.dt));
        put("scheme", self.scheme.name().into());
        put("t0", num(self.t0));
        put("t_final", num(self.t_final));
        put("snapshot_stride", self.snapshot_stride.into());
        put(
            "initial",
            match &self.initial {
                Initial::Orbit => "orbit".to_string(),
                Initial::Circle => "circle".to_string(),
                Initial::File(p) => format!("file:{}", p.display()),
            }
            .into(),
        );
        put("times", floats(&self.times));
        put("spectrum_kmax", self.spectrum_kmax.into());
        put("nf_kmax", self.nf_kmax.into());
        put("scan_omega", floats(&self.scan_omega));
        put("scan_delta_rho", floats(&self.scan_delta_rho));
        put("scan_gamma", floats(&self.scan_gamma));
        put("out", self.out.display().to_string().into());
        put("format", self.format.name().into());
        Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips_through_the_manifest() {
        let c = RunConfig::default();
        let j = c.to_json();
        let obj = j.as_object().unwrap();
        assert_eq!(obj.len(), KEYS.len());
        for k in KEYS {
            assert!(obj.contains_key(*k), "{k}");
        }
    }

    #[test]
    fn file_syntax() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nomega = 0.8  # trailing\n\nscan_gamma = 0:1:3\nsign_y = -\n")
            .unwrap();
        assert_eq!(c.omega, 0.8);
        assert_eq!(c.scan_gamma, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.sign_y, Sign::Minus);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("omgea = 1").is_err());
        assert!(c.apply_text("omega = 1\nomega = 2").is_err());
        assert!(c.apply_text("omega").is_err());
        assert!(c.apply_text("omega = abc").is_err());
        assert!(c.apply_text("nx = -4").is_err());
        assert!(c.apply_text("format = xml").is_err());
    }
}
