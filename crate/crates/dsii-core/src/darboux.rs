//! The homoclinic orbit Q = q_c − 2b − 2b^(I) obtained by applying the
//! Bäcklund-Darboux transformation twice to the plane wave
//! q_c = η e^{−2i(η²−ω²)t + iγ}, with η = ω.
//!
//! ```text
//! τ  = 2κ₁λ₀ t − ρ                      first transform, x-dependent
//! τ̂  = 2 Re(iα) κ₂ ξ₁⁰ t + ρ̂             second transform, x- and y-dependent
//! ```
//!
//! All hyperbolic profiles are carried with the growing exponential
//! factored out (e^{±τ/2 − |τ|/2}), so |τ| of several hundred is harmless.
//!
//! The eigenfunctions Ψ⁺ = Γ^(I)Γψ⁺ and Φ₊ = Γ^(I)Γφ₊ are evaluated from
//! closed forms in which the vanishing combinations have been cancelled
//! by hand. Evaluating Γψ⁺ literally loses all digits because ψ⁺ lies in
//! the kernel of Γ up to a decaying remainder.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::spectral::{derivative, Parity, TorusField, TorusGrid};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// The Lax-pair unit α with α² = −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaxUnit {
    MinusI,
    PlusI,
}

impl LaxUnit {
    pub fn value(self) -> Complex64 {
        match self {
            LaxUnit::MinusI => -I,
            LaxUnit::PlusI => I,
        }
    }
    /// iα, which is real: +1 for α = −i.
    pub fn i_alpha(self) -> f64 {
        match self {
            LaxUnit::MinusI => 1.0,
            LaxUnit::PlusI => -1.0,
        }
    }
    fn flipped(self) -> Self {
        match self {
            LaxUnit::MinusI => LaxUnit::PlusI,
            LaxUnit::PlusI => LaxUnit::MinusI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbouxParams {
    pub eta: f64,
    pub gamma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lambda0: f64,
    /// √(η² − κ₂²/4), always positive.
    pub xi10: f64,
    /// ξ actually used by the second transform: ±ξ₁⁰.
    pub xi1: f64,
    pub vartheta1: f64,
    /// arg(iακ₂/2 + iξ₁) for the current α and ξ₁.
    pub vartheta2: f64,
    pub rho: f64,
    pub rho_hat: f64,
    pub vartheta_b: f64,
    pub vartheta_hat_b: f64,
    pub sign_x: Sign,
    pub sign_y: Sign,
    pub alpha_lax: LaxUnit,
    pub delta_rho: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn derive_params(
    omega: f64,
    kappa1: f64,
    kappa2: f64,
    rho: f64,
    rho_hat: f64,
    gamma: f64,
    sign_x: Sign,
    sign_y: Sign,
) -> Result<DarbouxParams> {
    let eta = omega;
    for (name, v) in [
        ("omega", omega),
        ("kappa1", kappa1),
        ("kappa2", kappa2),
        ("rho", rho),
        ("rho_hat", rho_hat),
        ("gamma", gamma),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} is not finite")));
        }
    }
    let l2 = eta * eta - 0.25 * kappa1 * kappa1;
    let x2 = eta * eta - 0.25 * kappa2 * kappa2;
    if l2 <= 0.0 {
        return Err(Error::BranchUndefined(format!(
            "eta^2 = {} <= kappa1^2/4 = {}",
            eta * eta,
            0.25 * kappa1 * kappa1
        )));
    }
    if x2 <= 0.0 {
        return Err(Error::BranchUndefined(format!(
            "eta^2 = {} <= kappa2^2/4 = {}",
            eta * eta,
            0.25 * kappa2 * kappa2
        )));
    }
    let lambda0 = l2.sqrt();
    let xi10 = x2.sqrt();
    let alpha_lax = LaxUnit::MinusI;
    let vartheta1 = lambda0.atan2(0.5 * kappa1);
    let vartheta2 = xi10.atan2(0.5 * alpha_lax.i_alpha() * kappa2);
    let mut p = DarbouxParams {
        eta,
        gamma,
        kappa1,
        kappa2,
        lambda0,
        xi10,
        xi1: xi10,
        vartheta1,
        vartheta2,
        rho,
        rho_hat,
        vartheta_b: vartheta1 + sign_x.value() * FRAC_PI_2,
        vartheta_hat_b: vartheta2 + sign_y.value() * FRAC_PI_2,
        sign_x,
        sign_y,
        alpha_lax,
        delta_rho: 0.0,
    };
    p.delta_rho = p.compute_delta_rho();
    Ok(p)
}

/// Like [`derive_params`], with ρ̂ chosen so that Δρ takes the given value.
#[allow(clippy::too_many_arguments)]
pub fn derive_params_delta_rho(
    omega: f64,
    kappa1: f64,
    kappa2: f64,
    rho: f64,
    delta_rho: f64,
    gamma: f64,
    sign_x: Sign,
    sign_y: Sign,
) -> Result<DarbouxParams> {
    let p = derive_params(omega, kappa1, kappa2, rho, 0.0, gamma, sign_x, sign_y)?;
    let rho_hat = delta_rho - p.rho_ratio() * rho;
    derive_params(omega, kappa1, kappa2, rho, rho_hat, gamma, sign_x, sign_y)
}

impl DarbouxParams {
    /// iα κ₂ ξ₁ / (κ₁ λ₀), the rate ratio between τ̂ and τ.
    pub fn rho_ratio(&self) -> f64 {
        self.alpha_lax.i_alpha() * self.kappa2 * self.xi1 / (self.kappa1 * self.lambda0)
    }

    fn compute_delta_rho(&self) -> f64 {
        self.rho_hat + self.rho_ratio() * self.rho
    }

    pub fn tau(&self, t: f64) -> f64 {
        2.0 * self.kappa1 * self.lambda0 * t - self.rho
    }

    pub fn tau_hat(&self, t: f64) -> f64 {
        2.0 * self.alpha_lax.i_alpha() * self.kappa2 * self.xi1 * t + self.rho_hat
    }

    /// Time at which τ takes the given value.
    pub fn t_of_tau(&self, tau: f64) -> f64 {
        (tau + self.rho) / (2.0 * self.kappa1 * self.lambda0)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..*self }
    }

    /// α → −α (so ϑ₂ → π − ϑ₂), ϑ̂ → ϑ̂ + π − 2ϑ₂, ρ̂ → −ρ̂.
    /// Yields the congruent-pair eigenfunctions along the same orbit.
    pub fn rptr(&self) -> Self {
        let alpha_lax = self.alpha_lax.flipped();
        self.replaced(alpha_lax, self.xi1)
    }

    /// ξ₁⁰ → −ξ₁⁰ (so ϑ₂ → −ϑ₂), ϑ̂ → ϑ̂ + π − 2ϑ₂, ρ̂ → −ρ̂.
    pub fn krptr(&self) -> Self {
        self.replaced(self.alpha_lax, -self.xi1)
    }

    fn replaced(&self, alpha_lax: LaxUnit, xi1: f64) -> Self {
        let mut p = Self {
            alpha_lax,
            xi1,
            vartheta2: xi1.atan2(0.5 * alpha_lax.i_alpha() * self.kappa2),
            vartheta_hat_b: self.vartheta_hat_b + PI - 2.0 * self.vartheta2,
            rho_hat: -self.rho_hat,
            ..*self
        };
        p.delta_rho = p.compute_delta_rho();
        p
    }

    fn q_c(&self) -> Complex64 {
        Complex64::from_polar(self.eta, self.gamma)
    }
}

/// First-transform coefficients along the x-line.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstTransform {
    pub t: f64,
    pub tau: f64,
    pub x: Vec<f64>,
    /// a(x), real and odd in x.
    pub a: Vec<f64>,
    /// b(x), even in x; c = b̄ and d = −a.
    pub b: Vec<Complex64>,
    /// min over x of 1 ∓ sech τ sin ϑ₁ cos κ₁x.
    pub denominator_min: f64,
}

struct XLine {
    a: f64,
    b: Complex64,
    /// Components of Γψ⁺ up to a constant, (V̄₂, −V̄₁)/|V|² · 2q_c e^{−iγ/2}.
    x1: Complex64,
    x2: Complex64,
}

fn x_line(p: &DarbouxParams, t: f64, x: f64) -> XLine {
    let tau = p.tau(t);
    let m = tau.abs();
    let qc = p.q_c();
    let xt = 0.5 * p.kappa1 * x + 0.5 * p.vartheta_b;
    let zt = xt - FRAC_PI_2 - p.vartheta1;
    let em = (-0.5 * tau - 0.5 * m).exp();
    let ep = (0.5 * tau - 0.5 * m).exp();
    let v1 = -qc * (em * Complex64::from_polar(1.0, xt) + ep * Complex64::from_polar(1.0, -xt));
    let v2 = p.eta * (em * Complex64::from_polar(1.0, zt) + ep * Complex64::from_polar(1.0, -zt));
    let n = v1.norm_sqr() + v2.norm_sqr();
    let a = p.lambda0 * (v1.norm_sqr() - v2.norm_sqr()) / n;
    let b = 2.0 * p.lambda0 * v1 * v2.conj() / n;
    let g = 2.0 * qc * Complex64::from_polar((-0.5 * m).exp(), -0.5 * p.gamma) / n;
    XLine {
        a,
        b,
        x1: g * v2.conj(),
        x2: -g * v1.conj(),
    }
}

pub fn first_darboux(p: &DarbouxParams, t: f64, grid: &TorusGrid) -> FirstTransform {
    let tau = p.tau(t);
    let sech = 1.0 / tau.cosh();
    let s = p.sign_x.value();
    let mut out = FirstTransform {
        t,
        tau,
        x: Vec::with_capacity(grid.nx()),
        a: Vec::with_capacity(grid.nx()),
        b: Vec::with_capacity(grid.nx()),
        denominator_min: f64::INFINITY,
    };
    for i in 0..grid.nx() {
        let x = grid.x(i);
        let l = x_line(p, t, x);
        out.x.push(x);
        out.a.push(l.a);
        out.b.push(l.b);
        let d = 1.0 - s * sech * p.vartheta1.sin() * (p.kappa1 * x).cos();
        out.denominator_min = out.denominator_min.min(d);
    }
    out
}

/// Second-level coefficients from G = W and its α∂_y derivatives:
/// `dg1` = α∂_y G₁ and `dg2b` = α∂_y Ḡ₂.
pub fn iterated_coefficients(
    g1: Complex64,
    g2: Complex64,
    dg1: Complex64,
    dg2b: Complex64,
) -> (Complex64, Complex64) {
    let n = g1.norm_sqr() + g2.norm_sqr();
    let a = -(g2 * dg2b + g1.conj() * dg1) / n;
    let b = -(g2.conj() * dg1 - g1 * dg2b) / n;
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarbouxSample {
    pub t: f64,
    pub tau: f64,
    pub tau_hat: f64,
    pub a_val: TorusField,
    pub b_val: TorusField,
    pub a_i_val: TorusField,
    pub b_i_val: TorusField,
    pub q_field: TorusField,
    /// Γφ₊ and Γφ₋ components, and W = s₊Γφ₊ + s₋Γφ₋ (rescaled by e^{−|τ̂|/2}).
    pub w1p: TorusField,
    pub w2p: TorusField,
    pub w1m: TorusField,
    pub w2m: TorusField,
    pub w1: TorusField,
    pub w2: TorusField,
    /// Ψ⁺ = Γ^(I)Γψ⁺ divided by iλ₀κ₁√(c₀⁺c₀⁻)e^{iγ/2}.
    pub psi_plus: [TorusField; 2],
    /// Φ₊ = Γ^(I)Γφ₊, normalized and scaled by e^{−|τ̂|/2}.
    pub phi_plus: [TorusField; 2],
    /// min |W|² / max |W|² over the grid.
    pub w_ratio: f64,
}

/// Full second-level evaluation on the grid.
pub fn iterate_darboux(p: &DarbouxParams, t: f64, grid: &TorusGrid) -> Result<DarbouxSample> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let len = grid.len();
    let tau = p.tau(t);
    let tau_hat = p.tau_hat(t);
    let mh = tau_hat.abs();
    let sp = (0.5 * tau_hat - 0.5 * mh).exp();
    let sm = (-0.5 * tau_hat - 0.5 * mh).exp();
    let ia = p.alpha_lax.i_alpha();
    let k = 0.5 * ia * p.kappa2;
    let qc = p.q_c();
    let phase_g = Complex64::from_polar((-0.5 * mh).exp(), -0.5 * p.gamma);
    let chi = |s: f64| Complex64::new(s * ia * 0.5 * p.kappa2, -p.xi1);

    let ylines: Vec<(Complex64, Complex64)> = (0..ny)
        .map(|j| {
            let yh = 0.5 * p.kappa2 * grid.y(j) + 0.5 * p.vartheta_hat_b;
            (Complex64::from_polar(1.0, yh), Complex64::from_polar(1.0, -yh))
        })
        .collect();

    let z = Complex64::default();
    let mut f = [(); 14].map(|_| vec![z; len]);
    let [a_v, b_v, ai_v, bi_v, q_v, w1p, w2p, w1m, w2m, w1, w2, ps1, ps2, ph1] = &mut f;
    let mut ph2 = vec![z; len];
    let (mut nmin, mut nmax) = (f64::INFINITY, 0.0f64);

    for i in 0..nx {
        let x = grid.x(i);
        let l = x_line(p, t, x);
        let e = Complex64::from_polar(1.0, p.xi1 * x);
        for (j, &(yp, ym)) in ylines.iter().enumerate() {
            let idx = i * ny + j;
            let mut fpm = [(z, z); 2];
            for (slot, (s, ey)) in [(1.0, yp), (-1.0, ym)].into_iter().enumerate() {
                let ph = ey * e;
                let p1 = -qc * ph;
                let p2 = chi(s) * ph;
                let ks = s * k;
                fpm[slot] = (
                    (ks + l.a) * p1 + l.b * p2,
                    l.b.conj() * p1 + (ks - l.a) * p2,
                );
            }
            let [(f1p, f2p), (f1m, f2m)] = fpm;
            let g1 = sp * f1p + sm * f1m;
            let g2 = sp * f2p + sm * f2m;
            let dg1 = k * (sp * f1p - sm * f1m);
            let dg2b = -k * (sp * f2p.conj() - sm * f2m.conj());
            let ng = g1.norm_sqr() + g2.norm_sqr();
            nmin = nmin.min(ng);
            nmax = nmax.max(ng);
            let (ai, bi) = iterated_coefficients(g1, g2, dg1, dg2b);

            let psi1 = (-p.lambda0 + ai) * l.x1 + bi * l.x2;
            let psi2 = bi.conj() * l.x1 + (-p.lambda0 - ai.conj()) * l.x2;

            let c1 = g1.conj() * f1p * f1m + sp * f2p.conj() * f1p * f2m + sm * f2m.conj() * f1m * f2p;
            let c2 = g2.conj() * f2p * f2m + sp * f1p.conj() * f2p * f1m + sm * f1m.conj() * f2m * f1p;

            a_v[idx] = Complex64::new(l.a, 0.0);
            b_v[idx] = l.b;
            ai_v[idx] = ai;
            bi_v[idx] = bi;
            q_v[idx] = qc - 2.0 * l.b - 2.0 * bi;
            w1p[idx] = f1p;
            w2p[idx] = f2p;
            w1m[idx] = f1m;
            w2m[idx] = f2m;
            w1[idx] = g1;
            w2[idx] = g2;
            ps1[idx] = psi1;
            ps2[idx] = psi2;
            ph1[idx] = c1 / ng * phase_g;
            ph2[idx] = c2 / ng * phase_g;
        }
    }

    let w_ratio = nmin / nmax;
    if !(w_ratio >= 1e-14) {
        return Err(Error::DegenerateDenominator { t, ratio: w_ratio });
    }
    let fld = |v: &mut Vec<Complex64>| TorusField::new(*grid, std::mem::take(v)).expect("grid size");
    let q = fld(q_v);
    let q_field = q.clone().with_parity_tol(Parity::EVEN, 1e-12).unwrap_or(q);
    Ok(DarbouxSample {
        t,
        tau,
        tau_hat,
        a_val: fld(a_v),
        b_val: fld(b_v),
        a_i_val: fld(ai_v),
        b_i_val: fld(bi_v),
        q_field,
        w1p: fld(w1p),
        w2p: fld(w2p),
        w1m: fld(w1m),
        w2m: fld(w2m),
        w1: fld(w1),
        w2: fld(w2),
        psi_plus: [fld(ps1), fld(ps2)],
        phi_plus: [fld(ph1), TorusField::new(*grid, ph2).expect("grid size")],
        w_ratio,
    })
}

/// Q(t) on the grid.
pub fn orbit(p: &DarbouxParams, t: f64, grid: &TorusGrid) -> Result<TorusField> {
    Ok(iterate_darboux(p, t, grid)?.q_field)
}

/// Transformed potentials after both steps, starting from r₁ = r₂ = 0
/// (the values at η = ω, where u and ũ vanish):
/// R₁ = 2D⁺(a + a^(I)), R₂ = −2D⁻(d + d^(I)) with d = −ā.
pub fn transform_potentials(
    p: &DarbouxParams,
    t: f64,
    grid: &TorusGrid,
) -> Result<(TorusField, TorusField)> {
    let s = iterate_darboux(p, t, grid)?;
    let alpha = p.alpha_lax.value();
    let a = s.a_val.add(&s.a_i_val);
    let d = a.map(|z| -z.conj());
    let dpm = |f: &TorusField, sign: f64| {
        let dx = derivative(f, 0, (0.0, 0.0));
        let dy = derivative(f, 1, (0.0, 0.0));
        dy.zip_map(&dx, |y, x| alpha * y + sign * x)
    };
    let r1 = dpm(&a, 1.0).scale(Complex64::new(2.0, 0.0));
    let r2 = dpm(&d, -1.0).scale(Complex64::new(-2.0, 0.0));
    Ok((r1, r2))
}

/// (q_c − 2b)/q_c at the given τ (taken at x = 0) and the predicted limit
/// e^{∓2iϑ₁}.
pub fn first_phase_limit(p: &DarbouxParams, tau: f64) -> (Complex64, Complex64) {
    let t = p.t_of_tau(tau);
    let l = x_line(p, t, 0.0);
    let measured = (p.q_c() - 2.0 * l.b) / p.q_c();
    let expected = Complex64::from_polar(1.0, -tau.signum() * 2.0 * p.vartheta1);
    (measured, expected)
}

/// Q/q_c at the given τ (worst grid point) and e^{iπ}e^{∓2i(ϑ₁−ϑ₂)}.
pub fn iterated_phase_limit(
    p: &DarbouxParams,
    tau: f64,
    grid: &TorusGrid,
) -> Result<(f64, Complex64)> {
    let t = p.t_of_tau(tau);
    let q = orbit(p, t, grid)?;
    let expected = -Complex64::from_polar(1.0, -tau.signum() * 2.0 * (p.vartheta1 - p.vartheta2));
    let qc = p.q_c();
    let err = q
        .values()
        .iter()
        .map(|&v| (v / qc - expected).norm())
        .fold(0.0, f64::max);
    Ok((err, expected))
}

/// Relative residual max|Lψ − λψ| / max|ψ| of the spatial Lax equation
/// (or its congruent form L̂) for a quasi-periodic ψ = g·e^{i(sx x + sy y)}.
/// The operator always uses α = −i.
pub fn lax_residual(
    psi: &[TorusField; 2],
    q: &TorusField,
    lambda: Complex64,
    shift: (f64, f64),
    congruent: bool,
) -> f64 {
    let alpha = LaxUnit::MinusI.value();
    let d = |f: &TorusField| (derivative(f, 0, shift), derivative(f, 1, shift));
    let (d1x, d1y) = d(&psi[0]);
    let (d2x, d2y) = d(&psi[1]);
    let mut worst = 0.0f64;
    for k in 0..q.values().len() {
        let (p1, p2) = (psi[0].values()[k], psi[1].values()[k]);
        let qv = q.values()[k];
        let dp1 = alpha * d1y.values()[k] + d1x.values()[k];
        let dm1 = alpha * d1y.values()[k] - d1x.values()[k];
        let dp2 = alpha * d2y.values()[k] + d2x.values()[k];
        let dm2 = alpha * d2y.values()[k] - d2x.values()[k];
        let (r1, r2) = if congruent {
            (-dp1 + qv * p2 - lambda * p1, qv.conj() * p1 - dm2 - lambda * p2)
        } else {
            (dm1 + qv * p2 - lambda * p1, qv.conj() * p1 + dp2 - lambda * p2)
        };
        worst = worst.max(r1.norm()).max(r2.norm());
    }
    worst / psi[0].max_abs().max(psi[1].max_abs())
}
