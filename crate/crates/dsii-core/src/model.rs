//! External parameters, the two-unstable-mode constraints, the saddle in the
//! constant subspace Π and the spectrum of the linearization L_ε at S_ω.

use num_complex::Complex64;

use crate::spectral::TorusField;
use crate::{Error, Result};

/// Which wavenumber constraint holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// κ₂ < κ₁ < 2κ₂ and κ₁² < 4ω² < min(κ₁²+κ₂², 4κ₂²).
    Cstr1,
    /// κ₁ < κ₂ < 2κ₁ and κ₂² < 4ω² < min(κ₁²+κ₂², 4κ₁²).
    Cstr2,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Cstr1 => "cstr1",
            Branch::Cstr2 => "cstr2",
        }
    }
}

/// Unvalidated parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    pub omega: f64,
    pub alpha_damp: f64,
    pub beta_drive: f64,
    pub epsilon: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub omega: f64,
    pub alpha_damp: f64,
    pub beta_drive: f64,
    pub epsilon: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub branch: Branch,
    /// Number of lattice modes with μ⁺ > 0 at ε = 0.
    pub unstable_modes: usize,
}

/// The scalars entering the right-hand side, with no constraint attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients {
    pub omega: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn coefficients(&self) -> PdeCoefficients {
        PdeCoefficients {
            omega: self.omega,
            epsilon: self.epsilon,
            alpha: self.alpha_damp,
            beta: self.beta_drive,
        }
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            omega: self.omega,
            alpha_damp: self.alpha_damp,
            beta_drive: self.beta_drive,
            epsilon: self.epsilon,
            kappa1: self.kappa1,
            kappa2: self.kappa2,
        }
    }

    /// Same parameters with a different ε.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        validate_params(
            RawParams {
                epsilon,
                ..self.raw()
            },
            false,
        )
    }

    /// λ₀ = √(ω² − κ₁²/4): half the growth rate of mode (κ₁, 0) per unit κ₁.
    pub fn lambda0(&self) -> f64 {
        (self.omega * self.omega - 0.25 * self.kappa1 * self.kappa1).sqrt()
    }
}

/// Which constraint branch (κ₁, κ₂, ω) satisfies, if any.
pub fn constraint_branch(kappa1: f64, kappa2: f64, omega: f64) -> Option<Branch> {
    let w = 4.0 * omega * omega;
    let (k1s, k2s) = (kappa1 * kappa1, kappa2 * kappa2);
    if kappa2 < kappa1 && kappa1 < 2.0 * kappa2 && k1s < w && w < (k1s + k2s).min(4.0 * k2s) {
        Some(Branch::Cstr1)
    } else if kappa1 < kappa2 && kappa2 < 2.0 * kappa1 && k2s < w && w < (k1s + k2s).min(4.0 * k1s)
    {
        Some(Branch::Cstr2)
    } else {
        None
    }
}

/// Open ω-interval on which the branch constraint holds for given κ.
pub fn admissible_omega(kappa1: f64, kappa2: f64) -> Option<(f64, f64)> {
    let (k1s, k2s) = (kappa1 * kappa1, kappa2 * kappa2);
    let (lo, hi) = if kappa2 < kappa1 && kappa1 < 2.0 * kappa2 {
        (k1s, (k1s + k2s).min(4.0 * k2s))
    } else if kappa1 < kappa2 && kappa2 < 2.0 * kappa1 {
        (k2s, (k1s + k2s).min(4.0 * k1s))
    } else {
        return None;
    };
    Some((0.5 * lo.sqrt(), 0.5 * hi.sqrt()))
}

/// Checks positivity and the constraint branch; with `require_saddle` also
/// αω < β.
pub fn validate_params(raw: RawParams, require_saddle: bool) -> Result<ModelParams> {
    let RawParams {
        omega,
        alpha_damp,
        beta_drive,
        epsilon,
        kappa1,
        kappa2,
    } = raw;
    let all = [omega, alpha_damp, beta_drive, epsilon, kappa1, kappa2];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite parameter in {raw:?}")));
    }
    if omega <= 0.0 || kappa1 <= 0.0 || kappa2 <= 0.0 || alpha_damp <= 0.0 || beta_drive <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "omega, alpha, beta, kappa1, kappa2 must be positive: {raw:?}"
        )));
    }
    if epsilon < 0.0 {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} < 0")));
    }
    let branch = constraint_branch(kappa1, kappa2, omega).ok_or_else(|| {
        Error::ConstraintViolation(format!(
            "kappa1 = {kappa1}, kappa2 = {kappa2}, 4 omega^2 = {}",
            4.0 * omega * omega
        ))
    })?;
    if require_saddle && alpha_damp * omega >= beta_drive {
        return Err(Error::NoSaddle {
            alpha_omega: alpha_damp * omega,
            beta: beta_drive,
        });
    }
    let unstable_modes = count_unstable(kappa1, kappa2, omega);
    if unstable_modes != 2 {
        return Err(Error::ConstraintViolation(format!(
            "{unstable_modes} unstable modes, expected 2"
        )));
    }
    Ok(ModelParams {
        omega,
        alpha_damp,
        beta_drive,
        epsilon,
        kappa1,
        kappa2,
        branch,
        unstable_modes,
    })
}

fn count_unstable(kappa1: f64, kappa2: f64, omega: f64) -> usize {
    // Every unstable mode has |ξ| < 2ω.
    let k1max = (2.0 * omega / kappa1).ceil() as i32;
    let k2max = (2.0 * omega / kappa2).ceil() as i32;
    let mut n = 0;
    for k1 in 0..=k1max {
        for k2 in 0..=k2max {
            if k1 + k2 == 0 {
                continue;
            }
            let (g, _) = rates(k1 as f64 * kappa1, k2 as f64 * kappa2, omega, 0.0, 0.0);
            if g > 0.0 {
                n += 1;
            }
        }
    }
    n
}

/// Growth part and oscillation part of μ_ξ^± for one wavevector:
/// μ = −ε(α+|ξ|²) ± r with r real (returned first) or imaginary (second).
fn rates(xi1: f64, xi2: f64, omega: f64, epsilon: f64, alpha: f64) -> (f64, f64) {
    let r2 = xi1 * xi1 + xi2 * xi2;
    let fac = (xi1 * xi1 - xi2 * xi2).abs() / r2.sqrt();
    let disc = 4.0 * omega * omega - r2;
    let damp = -epsilon * (alpha + r2);
    if disc >= 0.0 {
        (damp + fac * disc.sqrt(), 0.0)
    } else {
        (damp, fac * (-disc).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleState {
    pub i_val: f64,
    pub theta_val: f64,
    /// (μ₁, μ₂), μ₁ ≥ μ₂.
    pub mu_pair: (f64, f64),
}

/// Saddle from the truncated expansion
/// I = ω² − ε√(β²−α²ω²)/(2ω), cos θ = α√I/β, and its two eigenvalues.
pub fn saddle_state(params: &ModelParams) -> Result<SaddleState> {
    let (w, a, b, e) = (
        params.omega,
        params.alpha_damp,
        params.beta_drive,
        params.epsilon,
    );
    if a * w >= b {
        return Err(Error::NoSaddle {
            alpha_omega: a * w,
            beta: b,
        });
    }
    let i_val = w * w - e * (b * b - a * a * w * w).sqrt() / (2.0 * w);
    let theta_val = (a * i_val.sqrt() / b).acos();
    let bs = b * theta_val.sin();
    let rad = 4.0 * i_val.sqrt() * bs - e * (bs / i_val.sqrt()).powi(2);
    let root = e.sqrt() * rad.max(0.0).sqrt();
    Ok(SaddleState {
        i_val,
        theta_val,
        mu_pair: (root - e * a, -root - e * a),
    })
}

/// The exact fixed point of the constant-mode dynamics
/// q̇ = −2i(|q|²−ω²)q + ε(β − αq), found by Newton iteration from the
/// truncated expansion, with the eigenvalues of its 2×2 Jacobian.
pub fn saddle_refined(params: &ModelParams) -> Result<SaddleState> {
    let (w, a, b, e) = (
        params.omega,
        params.alpha_damp,
        params.beta_drive,
        params.epsilon,
    );
    if a * w >= b {
        return Err(Error::NoSaddle {
            alpha_omega: a * w,
            beta: b,
        });
    }
    // With q = r e^{iθ}: cos θ = αr/β and 2(r²−ω²)r + εβ sin θ = 0.
    let g = |r: f64| {
        let c = a * r / b;
        let s = (1.0 - c * c).max(0.0).sqrt();
        let dsdr = if s > 0.0 { -c * a / (b * s) } else { 0.0 };
        (
            2.0 * (r * r - w * w) * r + e * b * s,
            2.0 * (3.0 * r * r - w * w) + e * b * dsdr,
        )
    };
    let mut r = saddle_state(params)?.i_val.max(0.0).sqrt();
    for _ in 0..50 {
        let (v, d) = g(r);
        let step = v / d;
        r -= step;
        if step.abs() <= 1e-15 * r {
            break;
        }
    }
    let theta = (a * r / b).acos();
    let q = Complex64::from_polar(r, theta);
    let mu = fixed_point_eigenvalues(q, w, a, e);
    Ok(SaddleState {
        i_val: r * r,
        theta_val: theta,
        mu_pair: mu,
    })
}

/// Eigenvalues of the real Jacobian of q ↦ −2i(|q|²−ω²)q + ε(β − αq) at q.
pub(crate) fn fixed_point_eigenvalues(q: Complex64, omega: f64, alpha: f64, eps: f64) -> (f64, f64) {
    let (x, y) = (q.re, q.im);
    let s = x * x + y * y - omega * omega;
    // F = 2(s)(y, −x) + ε(β − αx, −αy) in components (u̇, v̇).
    let j11 = 4.0 * x * y - eps * alpha;
    let j12 = 2.0 * s + 4.0 * y * y;
    let j21 = -2.0 * s - 4.0 * x * x;
    let j22 = -4.0 * x * y - eps * alpha;
    let tr = j11 + j22;
    let det = j11 * j22 - j12 * j21;
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (tr / 2.0 + r, tr / 2.0 - r)
    } else {
        (tr / 2.0, tr / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    pub k1: i32,
    pub k2: i32,
    pub xi: (f64, f64),
    /// Real parts of μ_ξ^±.
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// |Im μ_ξ^±|, nonzero only outside the circle |ξ| = 2ω.
    pub frequency: f64,
}

impl SpectrumEntry {
    pub fn is_unstable(&self) -> bool {
        self.mu_plus > 0.0
    }
}

/// μ_ξ^± = −ε(α+|ξ|²) ± |ξ|⁻¹|ξ₁²−ξ₂²|√(4ω²−|ξ|²) over 0 ≤ k_j ≤ kmax.
pub fn linear_spectrum(params: &ModelParams, kmax: u32) -> Vec<SpectrumEntry> {
    let kmax = kmax.max(1) as i32;
    let mut out = Vec::with_capacity(((kmax + 1) * (kmax + 1) - 1) as usize);
    for k1 in 0..=kmax {
        for k2 in 0..=kmax {
            if k1 + k2 == 0 {
                continue;
            }
            let xi = (k1 as f64 * params.kappa1, k2 as f64 * params.kappa2);
            let (g, f) = rates(xi.0, xi.1, params.omega, params.epsilon, params.alpha_damp);
            let damp = -params.epsilon * (params.alpha_damp + xi.0 * xi.0 + xi.1 * xi.1);
            out.push(SpectrumEntry {
                k1,
                k2,
                xi,
                mu_plus: g,
                mu_minus: if f > 0.0 { g } else { 2.0 * damp - g },
                frequency: f,
            });
        }
    }
    out
}

/// Unperturbed dispersion relation Ω(ξ, η) for δq ∼ q_c e^{iξ·x + Ωt};
/// `None` outside the circle |ξ| = 2η where Ω is imaginary.
pub fn dispersion(xi: (f64, f64), eta: f64) -> Option<f64> {
    let r2 = xi.0 * xi.0 + xi.1 * xi.1;
    let disc = 4.0 * eta * eta - r2;
    if r2 == 0.0 || disc < 0.0 {
        return None;
    }
    Some((xi.0 * xi.0 - xi.1 * xi.1).abs() / r2.sqrt() * disc.sqrt())
}

/// Unit phases e^{iϑ_x}, e^{iϑ_y} of the unstable eigenfunctions,
/// (κ − i√(4ω²−κ²))/(2ω) for κ = κ₁, κ₂.
pub fn eigen_phases(params: &ModelParams) -> (Complex64, Complex64) {
    let w = params.omega;
    let ph = |k: f64| Complex64::new(k, -(4.0 * w * w - k * k).sqrt()) / (2.0 * w);
    (ph(params.kappa1), ph(params.kappa2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateDecomposition {
    pub j_val: f64,
    pub theta_mean: f64,
    pub f_field: TorusField,
}

impl CoordinateDecomposition {
    /// q = (ρ + f)e^{iθ} with ρ = √(J + ω² − ⟨|f|²⟩).
    pub fn reconstruct(&self, omega: f64) -> TorusField {
        let f2 = self.f_field.values().iter().map(|z| z.norm_sqr()).sum::<f64>()
            / self.f_field.values().len() as f64;
        let rho = (self.j_val + omega * omega - f2).max(0.0).sqrt();
        let ph = Complex64::from_polar(1.0, self.theta_mean);
        self.f_field.map(|z| (z + rho) * ph)
    }
}

/// Splits q into (J, θ, f) with ρ e^{iθ} = ⟨q⟩ and ⟨f⟩ = 0.
pub fn decompose_coordinates(q: &TorusField, omega: f64) -> Result<CoordinateDecomposition> {
    let m = q.mean();
    let scale = q.max_abs();
    if m.norm() <= 1e-14 * scale || m.norm() == 0.0 {
        return Err(Error::ZeroMean);
    }
    let (rho, theta) = m.to_polar();
    let rot = Complex64::from_polar(1.0, -theta);
    let f = q.map(|z| z * rot - rho);
    // Pin the mean to exactly zero.
    let fm = f.mean();
    let f = f.map(|z| z - fm);
    let f2 = f.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / f.values().len() as f64;
    Ok(CoordinateDecomposition {
        j_val: rho * rho + f2 - omega * omega,
        theta_mean: theta,
        f_field: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGrid;
    use approx::assert_relative_eq;

    fn reference() -> ModelParams {
        validate_params(
            RawParams {
                omega: 2f64.sqrt() / 2.0 + 0.11,
                alpha_damp: 5.645,
                beta_drive: 11.336,
                epsilon: 0.01,
                kappa1: 1.0,
                kappa2: 2f64.sqrt(),
            },
            true,
        )
        .unwrap()
    }

    #[test]
    fn reference_point_is_cstr2_with_two_modes() {
        let p = reference();
        assert_eq!(p.branch, Branch::Cstr2);
        assert_eq!(p.unstable_modes, 2);
    }

    #[test]
    fn equal_wavenumbers_violate_both_branches() {
        let raw = RawParams {
            kappa2: 1.0,
            ..reference().raw()
        };
        assert!(matches!(validate_params(raw, false), Err(Error::ConstraintViolation(_))));
    }

    #[test]
    fn omega_below_threshold_is_rejected() {
        let raw = RawParams {
            omega: 0.70,
            ..reference().raw()
        };
        assert!(matches!(validate_params(raw, false), Err(Error::ConstraintViolation(_))));
    }

    #[test]
    fn saddle_requires_alpha_omega_below_beta() {
        let raw = RawParams {
            beta_drive: 1.0,
            ..reference().raw()
        };
        assert!(matches!(validate_params(raw, true), Err(Error::NoSaddle { .. })));
        assert!(validate_params(raw, false).is_ok());
    }

    #[test]
    fn saddle_at_zero_epsilon_sits_on_the_circle() {
        let p = reference().with_epsilon(0.0).unwrap();
        let s = saddle_state(&p).unwrap();
        assert_eq!(s.i_val, p.omega * p.omega);
        assert_eq!(s.mu_pair, (0.0, 0.0));
        assert_relative_eq!(s.theta_val.cos(), p.alpha_damp * p.omega / p.beta_drive, epsilon = 1e-15);
    }

    #[test]
    fn saddle_eigenvalues_scale_like_root_epsilon() {
        let p = validate_params(
            RawParams {
                omega: 0.8171,
                epsilon: 1e-3,
                ..reference().raw()
            },
            true,
        )
        .unwrap();
        let s = saddle_state(&p).unwrap();
        assert!(s.mu_pair.0 > 0.0 && s.mu_pair.1 < 0.0);
        let r = s.mu_pair.0 / p.epsilon.sqrt();
        assert!(r > 0.1 && r < 10.0, "{r}");
    }

    #[test]
    fn refined_saddle_agrees_with_expansion_to_second_order() {
        let p = reference();
        let a = saddle_state(&p).unwrap();
        let b = saddle_refined(&p).unwrap();
        // The dropped terms are O(ε²).
        assert!((a.i_val - b.i_val).abs() < 10.0 * p.epsilon * p.epsilon * p.beta_drive);
        assert!(b.mu_pair.0 > 0.0 && b.mu_pair.1 < 0.0);
    }

    #[test]
    fn unstable_mode_rate_is_twice_kappa_lambda() {
        let p = reference().with_epsilon(0.0).unwrap();
        let sp = linear_spectrum(&p, 32);
        let e = sp.iter().find(|e| e.k1 == 1 && e.k2 == 0).unwrap();
        assert_relative_eq!(e.mu_plus, 2.0 * p.kappa1 * p.lambda0(), max_relative = 1e-14);
        assert_eq!(e.mu_plus, -e.mu_minus);
        let unstable: Vec<_> = sp.iter().filter(|e| e.is_unstable()).map(|e| (e.k1, e.k2)).collect();
        assert_eq!(unstable, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn spectrum_matches_dispersion_relation() {
        let p = reference().with_epsilon(0.0).unwrap();
        for e in linear_spectrum(&p, 4) {
            if let Some(om) = dispersion(e.xi, p.omega) {
                assert_relative_eq!(om, e.mu_plus, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn eigen_phases_have_unit_modulus() {
        let (a, b) = eigen_phases(&reference());
        assert_relative_eq!(a.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn decomposition_of_uniform_field() {
        let g = TorusGrid::new(16, 16, 1.0, 2f64.sqrt()).unwrap();
        let w = 0.8;
        let q = TorusField::constant(g, Complex64::from_polar(w, 0.4));
        let d = decompose_coordinates(&q, w).unwrap();
        assert!(d.j_val.abs() < 1e-14);
        assert_relative_eq!(d.theta_mean, 0.4, epsilon = 1e-15);
        assert!(d.f_field.max_abs() < 1e-15);
    }

    #[test]
    fn zero_mean_is_rejected() {
        let g = TorusGrid::new(16, 16, 1.0, 2f64.sqrt()).unwrap();
        let q = TorusField::from_fn(g, |x, _| Complex64::new(x.cos(), 0.0));
        assert_eq!(decompose_coordinates(&q, 0.8).unwrap_err(), Error::ZeroMean);
    }
}
