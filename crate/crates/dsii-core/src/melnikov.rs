//! Melnikov integrals along the homoclinic orbit and the parameter
//! conditions M₁ = M₂ = 0.
//!
//! With P = (Ψ₁⁺Ψ̂₁⁺, Ψ₂⁺Ψ̂₂⁺) for the first row and (Φ̃₊⁽¹⁾Φ̂₊⁽¹⁾, Φ̃₊⁽²⁾Φ̂₊⁽²⁾)
//! for the second,
//!
//! ```text
//! M_j = ∫dt ∫∫dxdy Re{P₂ f + P₁ f̄},   f = ΔQ − αQ + β
//!     = M_j¹ + α M_j² + β cos γ M_j³ + β sin γ M_j⁴
//! ```
//!
//! M¹ and M² come from f = ΔQ and f = −Q. The orbit and the eigenfunctions
//! carry the phase γ, so the constant forcing sees it through the products;
//! M³ and M⁴ are obtained by evaluating the f = 1 integral with the orbit
//! built at γ = 0 and γ = π/2.

use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::darboux::{iterate_darboux, DarbouxParams};
use crate::model::constraint_branch;
use crate::spectral::{laplacian, TorusField, TorusGrid};
use crate::sum::Neumaier;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss-Legendre nodes per panel.
    pub nodes_per_panel: usize,
    /// Panel width measured in τ = 2κ₁λ₀t.
    pub panel_width_tau: f64,
    /// Integrand tail relative to its peak at the cut.
    pub tail_tol: f64,
    /// Multiplies the cut-off time; 2.0 doubles T_cut.
    pub t_cut_scale: f64,
    /// Run again with twice the nodes and compare.
    pub check_convergence: bool,
    pub convergence_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes_per_panel: 16,
            panel_width_tau: 0.5,
            tail_tol: 1e-12,
            t_cut_scale: 1.0,
            check_convergence: true,
            convergence_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionSet {
    pub t: f64,
    pub q: TorusField,
    pub psi_plus: [TorusField; 2],
    pub psi_hat_plus: [TorusField; 2],
    pub phi_tilde_plus: [TorusField; 2],
    pub phi_hat_plus: [TorusField; 2],
}

/// Ψ⁺ from the orbit parameters, Ψ̂⁺ and Φ̂₊ after the α-replacement, Φ̃₊
/// after the ξ-replacement.
pub fn build_eigenfunctions(p: &DarbouxParams, t: f64, grid: &TorusGrid) -> Result<EigenfunctionSet> {
    let s = iterate_darboux(p, t, grid)?;
    let sh = iterate_darboux(&p.rptr(), t, grid)?;
    let st = iterate_darboux(&p.krptr(), t, grid)?;
    Ok(EigenfunctionSet {
        t,
        q: s.q_field,
        psi_plus: s.psi_plus,
        psi_hat_plus: sh.psi_plus,
        phi_tilde_plus: st.phi_plus,
        phi_hat_plus: sh.phi_plus,
    })
}

impl EigenfunctionSet {
    /// Products (P₁, P₂) for row j ∈ {0, 1}.
    pub fn products(&self, row: usize) -> (TorusField, TorusField) {
        let (a, b) = if row == 0 {
            (&self.psi_plus, &self.psi_hat_plus)
        } else {
            (&self.phi_tilde_plus, &self.phi_hat_plus)
        };
        (a[0].zip_map(&b[0], |u, v| u * v), a[1].zip_map(&b[1], |u, v| u * v))
    }
}

/// Variations of the integrand used by the robustness checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandOptions {
    /// Constant multiplying both products of each row.
    pub row_scale: [Complex64; 2],
    /// Replace the products by their even-even parts.
    pub even_parts: bool,
}

impl Default for IntegrandOptions {
    fn default() -> Self {
        Self {
            row_scale: [Complex64::new(1.0, 0.0); 2],
            even_parts: false,
        }
    }
}

fn even_part(f: &TorusField) -> TorusField {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mut v = vec![Complex64::default(); g.len()];
    for i in 0..nx {
        let im = (nx - i) % nx;
        for j in 0..ny {
            let jm = (ny - j) % ny;
            v[i * ny + j] = 0.25 * (f.at(i, j) + f.at(im, j) + f.at(i, jm) + f.at(im, jm));
        }
    }
    TorusField::new(g, v).expect("grid size")
}

/// ∫∫ (P₂ g + P₁ ḡ) dx dy.
fn pair(p1: &TorusField, p2: &TorusField, g: &TorusField) -> Complex64 {
    let grid = g.grid();
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for ((&a, &b), &c) in p1.values().iter().zip(p2.values()).zip(g.values()) {
        let z = b * c + a * c.conj();
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value()) * (grid.dx() * grid.dy())
}

fn rows(es: &EigenfunctionSet, opts: &IntegrandOptions) -> [(TorusField, TorusField); 2] {
    [0, 1].map(|r| {
        let (mut a, mut b) = es.products(r);
        if opts.even_parts {
            a = even_part(&a);
            b = even_part(&b);
        }
        let c = opts.row_scale[r];
        (a.scale(c), b.scale(c))
    })
}

/// Spatial integrals at one time: the four generators per row, as complex
/// numbers whose real parts are the integrand of M_j^(l).
pub fn integrand(
    p: &DarbouxParams,
    t: f64,
    grid: &TorusGrid,
    opts: &IntegrandOptions,
) -> Result<[[Complex64; 4]; 2]> {
    let es0 = build_eigenfunctions(&p.with_gamma(0.0), t, grid)?;
    let es1 = build_eigenfunctions(&p.with_gamma(FRAC_PI_2), t, grid)?;
    let q = &es0.q;
    let dq = laplacian(q);
    let mq = q.scale(Complex64::new(-1.0, 0.0));
    let one = TorusField::constant(*grid, Complex64::new(1.0, 0.0));
    let r0 = rows(&es0, opts);
    let r1 = rows(&es1, opts);
    let mut out = [[Complex64::default(); 4]; 2];
    for j in 0..2 {
        let (a, b) = &r0[j];
        out[j][0] = pair(a, b, &dq);
        out[j][1] = pair(a, b, &mq);
        out[j][2] = pair(a, b, &one);
        let (a, b) = &r1[j];
        out[j][3] = pair(a, b, &one);
    }
    Ok(out)
}

/// Real parts of ∫∫ Re{P₂ f + P₁ f̄} with f = ΔQ − αQ + β on the orbit at phase γ.
pub fn direct_integrand(
    p: &DarbouxParams,
    t: f64,
    grid: &TorusGrid,
    alpha: f64,
    beta: f64,
) -> Result<[f64; 2]> {
    let es = build_eigenfunctions(p, t, grid)?;
    let dq = laplacian(&es.q);
    let f = dq.zip_map(&es.q, |d, q| d - alpha * q + beta);
    let opts = IntegrandOptions::default();
    let r = rows(&es, &opts);
    Ok([pair(&r[0].0, &r[0].1, &f).re, pair(&r[1].0, &r[1].1, &f).re])
}

type Components = [[Complex64; 4]; 2];

/// Integration window (lo, hi) and composite Gauss-Legendre nodes (t, w).
pub type TimeNodes = (f64, f64, Vec<(f64, f64)>);

pub fn time_nodes(p: &DarbouxParams, quad: &QuadratureConfig) -> Result<TimeNodes> {
    if quad.nodes_per_panel == 0 || !(quad.panel_width_tau > 0.0) || !(quad.tail_tol > 0.0 && quad.tail_tol < 1.0)
    {
        return Err(Error::InvalidInput(format!("bad quadrature config {quad:?}")));
    }
    let r1 = p.kappa1 * p.lambda0;
    let r2 = p.kappa2 * p.xi1.abs();
    let t_cut = quad.t_cut_scale * (1.0 / quad.tail_tol).ln() / (2.0 * r1.min(r2));
    let c1 = p.t_of_tau(0.0);
    let c2 = -p.rho_hat / (2.0 * p.alpha_lax.i_alpha() * p.kappa2 * p.xi1);
    let lo = c1.min(c2) - t_cut;
    let hi = c1.max(c2) + t_cut;
    let width_t = quad.panel_width_tau / (2.0 * r1);
    let panels = ((hi - lo) / width_t).ceil().max(1.0) as usize;
    let h = (hi - lo) / panels as f64;
    let rule = GaussLegendre::new(NonZeroUsize::new(quad.nodes_per_panel).expect("nonzero"));
    let mut nodes = Vec::with_capacity(panels * quad.nodes_per_panel);
    for k in 0..panels {
        let a = lo + k as f64 * h;
        for &(x, w) in rule.as_node_weight_pairs() {
            nodes.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    Ok((lo, hi, nodes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelnikovComponents {
    /// m[j][l] = M_{j+1}^{(l+1)}.
    pub m: [[f64; 4]; 2],
    /// Largest |Im| of the complex integrals relative to the row scale;
    /// near zero means a complex normalization only rescales rows.
    pub imag_ratio: f64,
    pub params: DarbouxParams,
    pub t_range: (f64, f64),
    pub nodes: usize,
    pub grid: (usize, usize),
    pub quad: QuadratureConfig,
    /// Relative change against the run with doubled nodes, if performed.
    pub convergence_change: Option<f64>,
}

impl MelnikovComponents {
    /// M_j(γ; α, β) from the decomposition.
    pub fn assemble(&self, alpha: f64, beta: f64, gamma: f64) -> [f64; 2] {
        let m = &self.m;
        [0, 1].map(|j| m[j][0] + alpha * m[j][1] + beta * gamma.cos() * m[j][2] + beta * gamma.sin() * m[j][3])
    }

    pub fn scale(&self) -> f64 {
        self.m.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    /// Copy with every component multiplied by c.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.m.iter_mut().flatten() {
            *v *= c;
        }
        out
    }

    pub fn omega(&self) -> f64 {
        self.params.eta
    }
}

fn integrate(
    p: &DarbouxParams,
    grid: &TorusGrid,
    quad: &QuadratureConfig,
    opts: &IntegrandOptions,
) -> Result<(Components, (f64, f64), usize)> {
    let (lo, hi, nodes) = time_nodes(p, quad)?;
    let vals: Vec<Components> = nodes
        .par_iter()
        .map(|&(t, w)| integrand(p, t, grid, opts).map(|v| v.map(|r| r.map(|z| z * w))))
        .collect::<Result<_>>()?;
    let mut out = [[Complex64::default(); 4]; 2];
    for j in 0..2 {
        for l in 0..4 {
            let mut re = Neumaier::default();
            let mut im = Neumaier::default();
            for v in &vals {
                re.add(v[j][l].re);
                im.add(v[j][l].im);
            }
            out[j][l] = Complex64::new(re.value(), im.value());
        }
    }
    Ok((out, (lo, hi), nodes.len()))
}

pub fn melnikov_components(
    p: &DarbouxParams,
    grid: &TorusGrid,
    quad: &QuadratureConfig,
) -> Result<MelnikovComponents> {
    melnikov_components_with(p, grid, quad, &IntegrandOptions::default())
}

pub fn melnikov_components_with(
    p: &DarbouxParams,
    grid: &TorusGrid,
    quad: &QuadratureConfig,
    opts: &IntegrandOptions,
) -> Result<MelnikovComponents> {
    let (c, range, n) = integrate(p, grid, quad, opts)?;
    let m = c.map(|r| r.map(|z| z.re));
    let mut imag_ratio = 0.0f64;
    for j in 0..2 {
        let s = m[j].iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for z in &c[j] {
            imag_ratio = imag_ratio.max(z.im.abs() / s);
        }
    }
    let mut out = MelnikovComponents {
        m,
        imag_ratio,
        params: *p,
        t_range: range,
        nodes: n,
        grid: (grid.nx(), grid.ny()),
        quad: *quad,
        convergence_change: None,
    };
    if quad.check_convergence {
        let fine = QuadratureConfig {
            nodes_per_panel: 2 * quad.nodes_per_panel,
            check_convergence: false,
            ..*quad
        };
        let (c2, _, _) = integrate(p, grid, &fine, opts)?;
        let change = relative_change(&m, &c2.map(|r| r.map(|z| z.re)));
        out.convergence_change = Some(change);
        if change > quad.convergence_tol {
            return Err(Error::QuadratureNotConverged {
                change,
                tol: quad.convergence_tol,
            });
        }
    }
    Ok(out)
}

/// Largest componentwise change, relative to each row's largest entry.
pub fn relative_change(a: &[[f64; 4]; 2], b: &[[f64; 4]; 2]) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..2 {
        let s = a[j].iter().fold(0.0f64, |x, y| x.max(y.abs()));
        for l in 0..4 {
            worst = worst.max((a[j][l] - b[j][l]).abs() / s);
        }
    }
    worst
}

/// M₁, M₂ by direct time integration of Re{P₂f + P₁f̄} for the given
/// (α, β, γ), without the decomposition.
pub fn melnikov_direct(
    p: &DarbouxParams,
    grid: &TorusGrid,
    quad: &QuadratureConfig,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<[f64; 2]> {
    let pg = p.with_gamma(gamma);
    let (_, _, nodes) = time_nodes(&pg, quad)?;
    let vals: Vec<[f64; 2]> = nodes
        .par_iter()
        .map(|&(t, w)| direct_integrand(&pg, t, grid, alpha, beta).map(|v| v.map(|x| x * w)))
        .collect::<Result<_>>()?;
    let mut out = [0.0; 2];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = Neumaier::default();
        for v in &vals {
            acc.add(v[j]);
        }
        *o = acc.value();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSolution {
    pub alpha_star: f64,
    pub beta_star: f64,
    pub gamma: f64,
    pub chi: Option<f64>,
    pub admissible: bool,
    pub flags: Vec<String>,
}

fn admissibility(alpha: f64, beta: f64, omega: f64, kappa1: f64, kappa2: f64) -> (bool, Vec<String>) {
    let mut flags = Vec::new();
    if !(alpha > 0.0) {
        flags.push("alpha<=0".to_string());
    }
    if !(beta > 0.0) {
        flags.push("beta<=0".to_string());
    }
    if !(alpha * omega < beta) {
        flags.push("no_saddle".to_string());
    }
    if constraint_branch(kappa1, kappa2, omega).is_none() {
        flags.push("constraint".to_string());
    }
    (flags.is_empty(), flags)
}

/// α and β from M₁ = M₂ = 0 at fixed γ:
///
/// ```text
/// C_j = cos γ M_j³ + sin γ M_j⁴
/// α = (M₁¹C₂ − M₂¹C₁) / (M₂²C₁ − M₁²C₂)
/// β = (M₁¹M₂² − M₂¹M₁²) / (M₁²C₂ − M₂²C₁)
/// ```
pub fn solve_alpha_beta(c: &MelnikovComponents, gamma: f64) -> Result<ParameterSolution> {
    let m = &c.m;
    let cj = |j: usize| gamma.cos() * m[j][2] + gamma.sin() * m[j][3];
    let (c1, c2) = (cj(0), cj(1));
    let den = m[1][1] * c1 - m[0][1] * c2;
    let s = c.scale();
    if !(den.abs() > 1e-13 * s * s) {
        return Err(Error::SingularDenominator("alpha/beta"));
    }
    let alpha = (m[0][0] * c2 - m[1][0] * c1) / den;
    let beta = (m[0][0] * m[1][1] - m[1][0] * m[0][1]) / -den;
    let p = &c.params;
    let (admissible, flags) = admissibility(alpha, beta, p.eta, p.kappa1, p.kappa2);
    Ok(ParameterSolution {
        alpha_star: alpha,
        beta_star: beta,
        gamma,
        chi: None,
        admissible,
        flags,
    })
}

/// Δγ = −4(ϑ₁ − ϑ₂).
pub fn delta_gamma(p: &DarbouxParams) -> f64 {
    -4.0 * (p.vartheta1 - p.vartheta2)
}

/// Second-measurement solution, where γ is eliminated through
/// β cos γ = −αωΔγ / (2 sin(Δγ/2)); returns χ with α = 1/χ.
pub fn appendix_chi(c: &MelnikovComponents) -> Result<ParameterSolution> {
    let m = &c.m;
    let p = &c.params;
    let w = p.eta;
    let dg = delta_gamma(p);
    let sh = (0.5 * dg).sin();
    if sh.abs() < 1e-14 {
        return Err(Error::SingularDenominator("sin(delta_gamma/2)"));
    }
    let k = dg / (2.0 * sh);
    let den = m[1][0] * m[0][3] - m[0][0] * m[1][3];
    let s = c.scale();
    if !(den.abs() > 1e-13 * s * s) {
        return Err(Error::SingularDenominator("chi"));
    }
    let chi = (m[0][1] * m[1][3] - m[1][1] * m[0][3] - w * k * (m[0][2] * m[1][3] - m[1][2] * m[0][3])) / den;
    if chi == 0.0 {
        return Err(Error::SingularDenominator("chi = 0"));
    }
    let alpha = 1.0 / chi;
    let bc = -alpha * w * k;
    let bs = -(m[0][0] + alpha * (m[0][1] - w * k * m[0][2])) / m[0][3];
    let beta = bc.hypot(bs);
    let gamma = bs.atan2(bc);
    let (admissible, flags) = admissibility(alpha, beta, w, p.kappa1, p.kappa2);
    Ok(ParameterSolution {
        alpha_star: alpha,
        beta_star: beta,
        gamma,
        chi: Some(chi),
        admissible,
        flags,
    })
}

/// Fitted exponential decay rates of the two rows of the integrand on the
/// far tail (t well past both centers), from |integrand| at `ts`.
pub fn tail_decay_rates(p: &DarbouxParams, grid: &TorusGrid, ts: &[f64]) -> Result<[f64; 2]> {
    let opts = IntegrandOptions::default();
    let mut logs = [Vec::new(), Vec::new()];
    for &t in ts {
        let v = integrand(p, t, grid, &opts)?;
        for j in 0..2 {
            let mag = v[j].iter().map(|z| z.norm()).fold(0.0, f64::max);
            logs[j].push(mag.ln());
        }
    }
    Ok([0, 1].map(|j| -slope(ts, &logs[j])))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub omega: f64,
    pub delta_rho: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub admissible: bool,
    pub flags: Vec<String>,
}

/// Tabulates (α, β) over a lattice. Components are computed once per
/// (ω, Δρ) and reused for every γ. Failures become flagged cells.
pub fn domain_scan(
    omegas: &[f64],
    delta_rhos: &[f64],
    gammas: &[f64],
    kappa1: f64,
    kappa2: f64,
    grid: &TorusGrid,
    quad: &QuadratureConfig,
) -> Vec<ScanCell> {
    let pairs: Vec<(f64, f64)> = omegas
        .iter()
        .flat_map(|&w| delta_rhos.iter().map(move |&d| (w, d)))
        .collect();
    let comps: Vec<Result<MelnikovComponents>> = pairs
        .par_iter()
        .map(|&(w, d)| {
            if constraint_branch(kappa1, kappa2, w).is_none() {
                return Err(Error::ConstraintViolation(format!("omega = {w}")));
            }
            let p = crate::darboux::derive_params_delta_rho(
                w,
                kappa1,
                kappa2,
                0.0,
                d,
                0.0,
                crate::darboux::Sign::Plus,
                crate::darboux::Sign::Plus,
            )?;
            melnikov_components(&p, grid, quad)
        })
        .collect();
    let mut out = Vec::with_capacity(pairs.len() * gammas.len());
    for (&(w, d), c) in pairs.iter().zip(&comps) {
        for &g in gammas {
            let cell = match c.as_ref().map_err(Clone::clone).and_then(|c| solve_alpha_beta(c, g)) {
                Ok(s) => ScanCell {
                    omega: w,
                    delta_rho: d,
                    gamma: g,
                    alpha: s.alpha_star,
                    beta: s.beta_star,
                    admissible: s.admissible,
                    flags: s.flags,
                },
                Err(e) => ScanCell {
                    omega: w,
                    delta_rho: d,
                    gamma: g,
                    alpha: f64::NAN,
                    beta: f64::NAN,
                    admissible: false,
                    flags: vec![error_flag(&e).to_string()],
                },
            };
            out.push(cell);
        }
    }
    out
}

fn error_flag(e: &Error) -> &'static str {
    match e {
        Error::SingularDenominator(_) => "singular_denominator",
        Error::ConstraintViolation(_) => "constraint",
        Error::QuadratureNotConverged { .. } => "quadrature",
        Error::DegenerateDenominator { .. } => "degenerate_denominator",
        Error::BranchUndefined(_) => "branch_undefined",
        _ => "error",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::{derive_params, Sign};

    fn fake(m: [[f64; 4]; 2]) -> MelnikovComponents {
        let p = derive_params(2f64.sqrt() / 2.0 + 0.11, 1.0, 2f64.sqrt(), 0.0, 1.1, 0.0, Sign::Plus, Sign::Plus)
            .unwrap();
        MelnikovComponents {
            m,
            imag_ratio: 0.0,
            params: p,
            t_range: (0.0, 0.0),
            nodes: 0,
            grid: (0, 0),
            quad: QuadratureConfig::default(),
            convergence_change: None,
        }
    }

    #[test]
    fn solution_zeroes_both_rows() {
        let c = fake([[0.3, -1.2, 0.7, 0.4], [-0.5, 0.9, 0.2, -1.1]]);
        for g in [0.0, 0.4, FRAC_PI_2, 2.5] {
            let s = solve_alpha_beta(&c, g).unwrap();
            let r = c.assemble(s.alpha_star, s.beta_star, g);
            assert!(r[0].abs() < 1e-14 && r[1].abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn proportional_rows_are_singular() {
        let c = fake([[0.3, -1.2, 0.7, 0.4], [0.6, -2.4, 1.4, 0.8]]);
        assert!(matches!(solve_alpha_beta(&c, 0.3), Err(Error::SingularDenominator(_))));
    }

    #[test]
    fn appendix_solution_satisfies_its_constraints() {
        let c = fake([[0.3, -1.2, 0.7, 0.4], [-0.5, 0.9, 0.2, -1.1]]);
        let s = appendix_chi(&c).unwrap();
        let r = c.assemble(s.alpha_star, s.beta_star, s.gamma);
        assert!(r[0].abs() < 1e-13 && r[1].abs() < 1e-13, "{r:?}");
        let dg = delta_gamma(&c.params);
        let rhs = -s.alpha_star * c.omega() * dg / (2.0 * (0.5 * dg).sin());
        assert!((s.beta_star * s.gamma.cos() - rhs).abs() < 1e-13);
    }
}
