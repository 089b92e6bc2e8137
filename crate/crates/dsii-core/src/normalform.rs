//! Homological equations for the bilinear normal-form coefficients.
//!
//! For g = f + K(f,f) with
//!
//! ```text
//! K(f,f)^(m) = Σ_{k+ℓ=m} K̂₁(k,ℓ)f̂(k)f̂(ℓ) + K̂₂(k,ℓ)f̂(k)f̄̂(ℓ)
//!                        + K̂₂(ℓ,k)f̄̂(k)f̂(ℓ) + K̂₃(k,ℓ)f̄̂(k)f̄̂(ℓ),
//! ```
//!
//! where f̄̂(k) = conj f̂(−k), the identity iLK(f,f) − iK(Lf,f) − iK(f,Lf) = Ñ₂
//! reduces per pair (k,ℓ) to four complex equations in K̂₁, K̂₂(k,ℓ),
//! K̂₂(ℓ,k), K̂₃ and their conjugates. They are solved as a real 8×8 system.
//! Whether a solution exists for every pair, and how it decays, is open;
//! the scan reports what it finds.

use std::collections::HashMap;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::model::ModelParams;
use crate::spectral::{inv_laplacian_upsilon, TorusField};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type Mode = (i32, i32);

/// Above this the system is reported as singular.
pub const SINGULAR_COND: f64 = 1e14;
/// Above this a solution is flagged as numerically unreliable.
pub const NEAR_SINGULAR_COND: f64 = 1e10;

/// Coefficients the system depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormParams {
    pub omega: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl From<&ModelParams> for NormalFormParams {
    fn from(p: &ModelParams) -> Self {
        Self {
            omega: p.omega,
            epsilon: p.epsilon,
            alpha: p.alpha_damp,
            kappa1: p.kappa1,
            kappa2: p.kappa2,
        }
    }
}

impl NormalFormParams {
    fn wave(&self, k: Mode) -> (f64, f64) {
        (k.0 as f64 * self.kappa1, k.1 as f64 * self.kappa2)
    }

    /// a(k) = (k₁²κ₁² − k₂²κ₂²)/(k₁²κ₁² + k₂²κ₂²).
    pub fn a(&self, k: Mode) -> f64 {
        let (x, y) = self.wave(k);
        let (x2, y2) = (x * x, y * y);
        if x2 + y2 == 0.0 {
            0.0
        } else {
            (x2 - y2) / (x2 + y2)
        }
    }

    /// B(k) = 2ω²a(k).
    pub fn b(&self, k: Mode) -> f64 {
        2.0 * self.omega * self.omega * self.a(k)
    }

    /// (Lf)^(k) = λ_k f̂(k) + μ_k conj f̂(−k).
    fn l_symbol(&self, k: Mode) -> (Complex64, Complex64) {
        let (x, y) = self.wave(k);
        let bk = self.b(k);
        let lam = Complex64::new(-self.epsilon * (self.alpha + x * x + y * y), x * x - y * y - bk);
        (lam, -I * bk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormEntry {
    pub k: Mode,
    pub ell: Mode,
    pub k1: Complex64,
    pub k2_kl: Complex64,
    pub k2_lk: Complex64,
    pub k3: Complex64,
    /// Largest defect of the four complex equations relative to their scale.
    pub residual: f64,
    /// 2-norm condition number of the real 8×8 system.
    pub cond: f64,
    pub near_singular: bool,
    pub sigma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub sigma4: f64,
    pub b_k: f64,
    pub b_ell: f64,
    pub b_klsum: f64,
}

impl NormalFormEntry {
    pub fn max_coefficient(&self) -> f64 {
        [self.k1, self.k2_kl, self.k2_lk, self.k3]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// The same solution seen from (ℓ, k).
    pub fn swapped(&self) -> Self {
        Self {
            k: self.ell,
            ell: self.k,
            k2_kl: self.k2_lk,
            k2_lk: self.k2_kl,
            sigma2: self.sigma3,
            sigma3: self.sigma2,
            b_k: self.b_ell,
            b_ell: self.b_k,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct System {
    sigma: f64,
    s: [f64; 4],
    bk: f64,
    bl: f64,
    bm: f64,
    omega: f64,
}

impl System {
    fn new(k: Mode, l: Mode, p: &NormalFormParams) -> Self {
        let (k1, k2) = (k.0 as f64, k.1 as f64);
        let (l1, l2) = (l.0 as f64, l.1 as f64);
        let (c1, c2) = (p.kappa1 * p.kappa1, p.kappa2 * p.kappa2);
        let bk = p.b(k);
        let bl = p.b(l);
        let bm = p.b((k.0 + l.0, k.1 + l.1));
        let sigma = p.epsilon * (p.alpha - 2.0 * (k1 * l1 * c1 + k2 * l2 * c2));
        let s1 = 2.0 * (k2 * l2 * c2 - k1 * l1 * c1) + bm - bk - bl;
        let s2 = 2.0 * ((k2 + l2) * l2 * c2 - (k1 + l1) * l1 * c1) + bm - bk + bl;
        let s3 = 2.0 * ((k2 + l2) * k2 * c2 - (k1 + l1) * k1 * c1) + bm + bk - bl;
        let s4 = 2.0 * ((k2 * k2 + k2 * l2 + l2 * l2) * c2 - (k1 * k1 + k1 * l1 + l1 * l1) * c1) + bm + bk + bl;
        Self {
            sigma,
            s: [s1, s2, s3, s4],
            bk,
            bl,
            bm,
            omega: p.omega,
        }
    }

    /// Row e: (coefficients of x, coefficients of x̄, right-hand side).
    fn equations(&self) -> [([Complex64; 4], [Complex64; 4], Complex64); 4] {
        let z = Complex64::default();
        let r = |v: f64| Complex64::new(v, 0.0);
        let d = |s: f64| Complex64::new(s, self.sigma);
        let w = 0.5 / self.omega;
        let (bk, bl, bm) = (self.bk, self.bl, self.bm);
        [
            ([d(self.s[0]), r(bl), r(bk), z], [z, z, z, r(bm)], r(w * (bk + bl))),
            ([r(-bl), d(self.s[1]), z, r(bk)], [z, z, r(bm), z], r(w * (bm + bl))),
            ([r(-bk), z, d(self.s[2]), r(bl)], [z, r(bm), z, z], r(w * (bm + bk))),
            ([z, r(-bk), r(-bl), d(self.s[3])], [r(bm), z, z, z], z),
        ]
    }

    fn real_system(&self) -> (SMatrix<f64, 8, 8>, SVector<f64, 8>) {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut rhs = SVector::<f64, 8>::zeros();
        for (e, (c, cc, b)) in self.equations().iter().enumerate() {
            let (re, im) = (2 * e, 2 * e + 1);
            for u in 0..4 {
                let (x, y) = (2 * u, 2 * u + 1);
                // c·K
                a[(re, x)] += c[u].re;
                a[(re, y)] -= c[u].im;
                a[(im, x)] += c[u].im;
                a[(im, y)] += c[u].re;
                // c·K̄
                a[(re, x)] += cc[u].re;
                a[(re, y)] += cc[u].im;
                a[(im, x)] += cc[u].im;
                a[(im, y)] -= cc[u].re;
            }
            rhs[re] = b.re;
            rhs[im] = b.im;
        }
        (a, rhs)
    }

    /// Max relative defect of the complex equations at x.
    fn residual(&self, x: &[Complex64; 4]) -> f64 {
        let mut worst = 0.0f64;
        for (c, cc, b) in self.equations() {
            let mut lhs = Complex64::default();
            let mut scale = b.norm();
            for u in 0..4 {
                lhs += c[u] * x[u] + cc[u] * x[u].conj();
                scale += (c[u].norm() + cc[u].norm()) * x[u].norm();
            }
            if scale > 0.0 {
                worst = worst.max((lhs - b).norm() / scale);
            }
        }
        worst
    }
}

fn check_pair(k: Mode, l: Mode) -> Result<()> {
    if k == (0, 0) || l == (0, 0) || (k.0 + l.0, k.1 + l.1) == (0, 0) {
        return Err(Error::InvalidInput(format!("pair {k:?}, {l:?} needs k, l, k+l nonzero")));
    }
    Ok(())
}

/// Builds and solves the system for one pair.
pub fn assemble_and_solve(k: Mode, ell: Mode, params: &NormalFormParams) -> Result<NormalFormEntry> {
    check_pair(k, ell)?;
    let sys = System::new(k, ell, params);
    let (a, rhs) = sys.real_system();
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= SINGULAR_COND) {
        let null_dim = sv.iter().filter(|&&s| s <= smax / SINGULAR_COND).count();
        return Err(Error::SingularSystem {
            k,
            l: ell,
            cond,
            null_dim,
        });
    }
    // The SVD only certifies conditioning; LU with one refinement step gives
    // a residual at rounding level.
    let lu = a.full_piv_lu();
    let mut x = lu.solve(&rhs).ok_or(Error::SingularSystem {
        k,
        l: ell,
        cond,
        null_dim: 1,
    })?;
    if let Some(dx) = lu.solve(&(rhs - a * x)) {
        x += dx;
    }
    let sol = [0, 1, 2, 3].map(|u| Complex64::new(x[2 * u], x[2 * u + 1]));
    let residual = sys.residual(&sol);
    Ok(NormalFormEntry {
        k,
        ell,
        k1: sol[0],
        k2_kl: sol[1],
        k2_lk: sol[2],
        k3: sol[3],
        residual,
        cond,
        near_singular: cond > NEAR_SINGULAR_COND,
        sigma: sys.sigma,
        sigma1: sys.s[0],
        sigma2: sys.s[1],
        sigma3: sys.s[2],
        sigma4: sys.s[3],
        b_k: sys.bk,
        b_ell: sys.bl,
        b_klsum: sys.bm,
    })
}

/// Solved entries, looked up up to the k↔ℓ and (k,ℓ)→(−k,−ℓ) symmetries.
#[derive(Debug, Clone, Default)]
pub struct NormalFormTable {
    entries: HashMap<(Mode, Mode), NormalFormEntry>,
}

impl NormalFormTable {
    pub fn insert(&mut self, e: NormalFormEntry) {
        self.entries.insert((e.k, e.ell), e);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, k: Mode, l: Mode) -> Option<NormalFormEntry> {
        let neg = |m: Mode| (-m.0, -m.1);
        if let Some(e) = self.entries.get(&(k, l)).or_else(|| self.entries.get(&(neg(k), neg(l)))) {
            return Some(NormalFormEntry { k, ell: l, ..*e });
        }
        self.entries
            .get(&(l, k))
            .or_else(|| self.entries.get(&(neg(l), neg(k))))
            .map(|e| NormalFormEntry { k: l, ell: k, ..*e }.swapped())
    }

    /// Solves every pair drawn from `modes` (k + ℓ ≠ 0).
    pub fn solve_for(modes: &[Mode], params: &NormalFormParams) -> Result<Self> {
        let mut t = Self::default();
        for &k in modes {
            for &l in modes {
                if (k.0 + l.0, k.1 + l.1) != (0, 0) && t.get(k, l).is_none() {
                    t.insert(assemble_and_solve(k, l, params)?);
                }
            }
        }
        Ok(t)
    }
}

/// Relative defect of iLK(f,f) − iK(Lf,f) − iK(f,Lf) − Ñ₂ over all Fourier
/// modes, the left side built from the table, the right side by FFT.
pub fn homological_verify(table: &NormalFormTable, f: &TorusField, params: &NormalFormParams) -> Result<f64> {
    let g = *f.grid();
    let spec = f.spectrum();
    let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(0.0);
    }
    if spec[0].norm() > 1e-12 * peak {
        return Err(Error::InvalidInput("sample must have zero mean".into()));
    }
    let mut fh: HashMap<Mode, Complex64> = HashMap::new();
    let (mut mx, mut my) = (0, 0);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let z = spec[i * g.ny() + j];
            if z.norm() > 1e-13 * peak {
                let m = (g.mode_x(i), g.mode_y(j));
                mx = mx.max(m.0.abs());
                my = my.max(m.1.abs());
                fh.insert(m, z);
            }
        }
    }
    if 4 * mx >= g.nx() as i32 || 4 * my >= g.ny() as i32 {
        return Err(Error::InvalidInput("sample modes too high for the grid".into()));
    }

    // Right side by FFT.
    let abs2 = f.map(|z| Complex64::new(z.norm_sqr(), 0.0));
    let t1 = inv_laplacian_upsilon(&abs2).0;
    let re2 = f.map(|z| Complex64::new(2.0 * z.re, 0.0));
    let t2 = f.zip_map(&inv_laplacian_upsilon(&re2).0, |a, b| a * b);
    let m2 = t2.mean();
    let n2 = t1.zip_map(&t2, |a, b| 2.0 * params.omega * (a + b - m2));
    let rhs = n2.spectrum();

    // Left side by direct convolution.
    let lf = apply_l(&fh, params);
    let kff = bilinear(table, &fh, &fh)?;
    let klf = bilinear(table, &lf, &fh)?;
    let kfl = bilinear(table, &fh, &lf)?;
    let mut lhs: HashMap<Mode, Complex64> = HashMap::new();
    for (&m, &v) in &kff {
        let (lam, mu) = params.l_symbol(m);
        let back = kff.get(&(-m.0, -m.1)).copied().unwrap_or_default().conj();
        *lhs.entry(m).or_default() += I * (lam * v + mu * back);
    }
    for map in [&klf, &kfl] {
        for (&m, &v) in map {
            *lhs.entry(m).or_default() -= I * v;
        }
    }

    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let m = (g.mode_x(i), g.mode_y(j));
            let r = rhs[i * g.ny() + j];
            let l = lhs.get(&m).copied().unwrap_or_default();
            worst = worst.max((l - r).norm());
            scale = scale.max(r.norm()).max(l.norm());
        }
    }
    Ok(if scale == 0.0 { 0.0 } else { worst / scale })
}

fn apply_l(fh: &HashMap<Mode, Complex64>, p: &NormalFormParams) -> HashMap<Mode, Complex64> {
    fh.keys()
        .map(|&k| {
            let (lam, mu) = p.l_symbol(k);
            let bar = fh.get(&(-k.0, -k.1)).copied().unwrap_or_default().conj();
            (k, lam * fh[&k] + mu * bar)
        })
        .collect()
}

/// K(u, v) on sparse Fourier data. Both maps must be closed under k → −k.
fn bilinear(
    table: &NormalFormTable,
    u: &HashMap<Mode, Complex64>,
    v: &HashMap<Mode, Complex64>,
) -> Result<HashMap<Mode, Complex64>> {
    let bar = |h: &HashMap<Mode, Complex64>, k: Mode| h.get(&(-k.0, -k.1)).copied().unwrap_or_default().conj();
    let mut out: HashMap<Mode, Complex64> = HashMap::new();
    let mut ks: Vec<Mode> = u.keys().chain(v.keys()).copied().collect();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        for &l in &ks {
            let m = (k.0 + l.0, k.1 + l.1);
            if m == (0, 0) {
                continue;
            }
            let e = table.get(k, l).ok_or(Error::MissingEntry { k, l })?;
            let (uk, vl) = (u.get(&k).copied().unwrap_or_default(), v.get(&l).copied().unwrap_or_default());
            let (ubk, vbl) = (bar(u, k), bar(v, l));
            let term = e.k1 * uk * vl + e.k2_kl * uk * vbl + e.k2_lk * ubk * vl + e.k3 * ubk * vbl;
            *out.entry(m).or_default() += term;
        }
    }
    Ok(out)
}

/// One row of the scan, NaN where the pair was singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub k: Mode,
    pub ell: Mode,
    pub cond: f64,
    pub residual: f64,
    pub max_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub k: Mode,
    pub ell: Mode,
    pub cond: f64,
    pub null_dim: usize,
}

/// Decay of max_j |K̂_j| along k = s·dk + k0, ℓ = s·dl + l0.
#[derive(Debug, Clone, PartialEq)]
pub struct RayFit {
    pub name: String,
    pub dk: Mode,
    pub k0: Mode,
    pub dl: Mode,
    pub l0: Mode,
    /// Fitted m in max|K̂| ~ s^(−m).
    pub exponent: f64,
    pub fit_residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub kmax: i32,
    pub rows: Vec<ScanRow>,
    pub singular: Vec<SingularPair>,
    /// Pairs with NEAR_SINGULAR_COND < cond ≤ SINGULAR_COND.
    pub near_singular: Vec<(Mode, Mode, f64)>,
    /// Largest residual among pairs with cond ≤ NEAR_SINGULAR_COND.
    pub max_residual_well_conditioned: f64,
    pub rays: Vec<RayFit>,
}

/// Solves every pair with |k|∞, |ℓ|∞ ≤ kmax and k + ℓ ≠ 0.
pub fn lattice_scan(params: &NormalFormParams, kmax: i32) -> Result<ScanReport> {
    if kmax < 4 {
        return Err(Error::InvalidInput(format!("kmax = {kmax} < 4")));
    }
    let modes: Vec<Mode> = (-kmax..=kmax)
        .flat_map(|a| (-kmax..=kmax).map(move |b| (a, b)))
        .filter(|&m| m != (0, 0))
        .collect();
    let results: Vec<Vec<(ScanRow, Option<SingularPair>)>> = modes
        .par_iter()
        .map(|&k| {
            modes
                .iter()
                .filter(|&&l| (k.0 + l.0, k.1 + l.1) != (0, 0))
                .map(|&l| match assemble_and_solve(k, l, params) {
                    Ok(e) => (
                        ScanRow {
                            k,
                            ell: l,
                            cond: e.cond,
                            residual: e.residual,
                            max_k: e.max_coefficient(),
                        },
                        None,
                    ),
                    Err(Error::SingularSystem { cond, null_dim, .. }) => (
                        ScanRow {
                            k,
                            ell: l,
                            cond,
                            residual: f64::NAN,
                            max_k: f64::NAN,
                        },
                        Some(SingularPair {
                            k,
                            ell: l,
                            cond,
                            null_dim,
                        }),
                    ),
                    Err(e) => unreachable!("pair already checked: {e}"),
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(modes.len() * modes.len());
    let mut singular = Vec::new();
    let mut near = Vec::new();
    let mut worst = 0.0f64;
    for (row, s) in results.into_iter().flatten() {
        if let Some(s) = s {
            singular.push(s);
        } else if row.cond > NEAR_SINGULAR_COND {
            near.push((row.k, row.ell, row.cond));
        } else {
            worst = worst.max(row.residual);
        }
        rows.push(row);
    }
    let rays = default_rays(kmax)
        .into_iter()
        .map(|(name, dk, k0, dl, l0)| fit_ray(params, kmax, name, dk, k0, dl, l0))
        .collect();
    Ok(ScanReport {
        kmax,
        rows,
        singular,
        near_singular: near,
        max_residual_well_conditioned: worst,
        rays,
    })
}

type Ray = (&'static str, Mode, Mode, Mode, Mode);

fn default_rays(_kmax: i32) -> Vec<Ray> {
    vec![
        ("k=(s,0) l=(0,1)", (1, 0), (0, 0), (0, 0), (0, 1)),
        ("k=(0,s) l=(1,0)", (0, 1), (0, 0), (0, 0), (1, 0)),
        ("k=(s,s) l=(1,0)", (1, 1), (0, 0), (0, 0), (1, 0)),
        ("k=(s,0) l=(0,s)", (1, 0), (0, 0), (0, 1), (0, 0)),
        ("k=(s,1) l=(1,s)", (1, 0), (0, 1), (0, 1), (1, 0)),
        ("k=(s,0) l=(s,1)", (1, 0), (0, 0), (1, 0), (0, 1)),
    ]
}

/// Least-squares slope of log max|K̂| against log s over the upper half of
/// the admissible range of s; singular points are skipped.
fn fit_ray(p: &NormalFormParams, kmax: i32, name: &str, dk: Mode, k0: Mode, dl: Mode, l0: Mode) -> RayFit {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let inside = |m: Mode| m.0.abs() <= kmax && m.1.abs() <= kmax;
    for s in (kmax / 2).max(1)..=kmax {
        let k = (s * dk.0 + k0.0, s * dk.1 + k0.1);
        let l = (s * dl.0 + l0.0, s * dl.1 + l0.1);
        if !inside(k) || !inside(l) {
            continue;
        }
        if let Ok(e) = assemble_and_solve(k, l, p) {
            let v = e.max_coefficient();
            if v > 0.0 && v.is_finite() {
                xs.push((s as f64).ln());
                ys.push(v.ln());
            }
        }
    }
    let (exponent, fit_residual) = if xs.len() >= 2 {
        let (slope, r) = fit(&xs, &ys);
        (-slope, r)
    } else {
        (f64::NAN, f64::NAN)
    };
    RayFit {
        name: name.to_string(),
        dk,
        k0,
        dl,
        l0,
        exponent,
        fit_residual,
        points: xs.len(),
    }
}

fn fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    (slope, (rss / n).sqrt())
}
