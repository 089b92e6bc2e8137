//! Periodic rectangle [0, 2π/κ₁) × [0, 2π/κ₂), sampled on a uniform grid,
//! and the Fourier multipliers of the DSII equation.
//!
//! Layout is row-major with x as the slow index: sample (i, j) sits at
//! `values[i * ny + j]`, position (i·dx, j·dy).
//!
//! No dealiasing is applied. The homoclinic orbit is dominated by a handful
//! of harmonics of (κ₁, κ₂), and its spectrum falls below 1e-16 well before
//! the Nyquist mode at 64², so quadratic products do not alias at the
//! resolutions used here.

use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::model::{ModelParams, PdeCoefficients};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    nx: usize,
    ny: usize,
    kappa1: f64,
    kappa2: f64,
}

impl TorusGrid {
    pub fn new(nx: usize, ny: usize, kappa1: f64, kappa2: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidInput(format!(
                    "{name} = {n} must be a power of two >= 8"
                )));
            }
        }
        if !(kappa1.is_finite() && kappa1 > 0.0 && kappa2.is_finite() && kappa2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wavenumbers must be positive, got ({kappa1}, {kappa2})"
            )));
        }
        Ok(Self {
            nx,
            ny,
            kappa1,
            kappa2,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }
    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn period_x(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.kappa1
    }
    pub fn period_y(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.kappa2
    }
    pub fn dx(&self) -> f64 {
        self.period_x() / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        self.period_y() / self.ny as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }
    /// Area of one period cell.
    pub fn cell_area(&self) -> f64 {
        self.period_x() * self.period_y()
    }

    /// Signed lattice index of FFT bin `i` along x (Nyquist reported as −n/2).
    pub fn mode_x(&self, i: usize) -> i32 {
        signed_bin(i, self.nx)
    }
    pub fn mode_y(&self, j: usize) -> i32 {
        signed_bin(j, self.ny)
    }
    /// Physical wavenumbers ξ = (k₁κ₁, k₂κ₂) of bin (i, j).
    pub fn xi(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.mode_x(i) as f64 * self.kappa1,
            self.mode_y(j) as f64 * self.kappa2,
        )
    }

    /// Bin holding lattice mode (k₁, k₂), if it is strictly below Nyquist.
    pub fn bin(&self, k1: i32, k2: i32) -> Option<usize> {
        let hx = (self.nx / 2) as i32;
        let hy = (self.ny / 2) as i32;
        if k1.abs() >= hx || k2.abs() >= hy {
            return None;
        }
        let i = k1.rem_euclid(self.nx as i32) as usize;
        let j = k2.rem_euclid(self.ny as i32) as usize;
        Some(i * self.ny + j)
    }

    fn is_nyquist_x(&self, i: usize) -> bool {
        i == self.nx / 2
    }
    fn is_nyquist_y(&self, j: usize) -> bool {
        j == self.ny / 2
    }
}

fn signed_bin(i: usize, n: usize) -> i32 {
    if i < n / 2 {
        i as i32
    } else {
        i as i32 - n as i32
    }
}

/// Evenness markers. A set flag is a checked promise, see
/// [`TorusField::with_parity`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Parity {
    pub even_x: bool,
    pub even_y: bool,
}

impl Parity {
    pub const EVEN: Parity = Parity {
        even_x: true,
        even_y: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    grid: TorusGrid,
    values: Vec<Complex64>,
    parity: Parity,
}

impl TorusField {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            parity: Parity::default(),
        })
    }

    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            let x = grid.x(i);
            for j in 0..grid.ny {
                values.push(f(x, grid.y(j)));
            }
        }
        Self {
            grid,
            values,
            parity: Parity::default(),
        }
    }

    pub fn constant(grid: TorusGrid, c: Complex64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
            parity: Parity::EVEN,
        }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        self.parity = Parity::default();
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.ny + j]
    }

    /// Largest |f(−x,y) − f(x,y)| and |f(x,−y) − f(x,y)|, relative to max|f|.
    pub fn parity_defect(&self) -> (f64, f64) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let (mut dx, mut dy) = (0.0f64, 0.0f64);
        for i in 0..nx {
            let im = (nx - i) % nx;
            for j in 0..ny {
                let jm = (ny - j) % ny;
                let v = self.at(i, j);
                dx = dx.max((self.at(im, j) - v).norm());
                dy = dy.max((self.at(i, jm) - v).norm());
            }
        }
        (dx / scale, dy / scale)
    }

    /// Sets parity flags after checking them to 100 machine epsilons.
    pub fn with_parity(self, parity: Parity) -> Result<Self> {
        self.with_parity_tol(parity, 100.0 * f64::EPSILON)
    }

    pub fn with_parity_tol(mut self, parity: Parity, tol: f64) -> Result<Self> {
        let (dx, dy) = self.parity_defect();
        if (parity.even_x && dx > tol) || (parity.even_y && dy > tol) {
            return Err(Error::InvalidInput(format!(
                "parity flags {parity:?} violated: defects ({dx:e}, {dy:e}) > {tol:e}"
            )));
        }
        self.parity = parity;
        Ok(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Spatial mean ⟨f⟩ = (κ₁κ₂/4π²)∫∫ f.
    pub fn mean(&self) -> Complex64 {
        let n = self.values.len() as f64;
        let (re, im) = self
            .values
            .iter()
            .fold((0.0, 0.0), |(a, b), z| (a + z.re, b + z.im));
        Complex64::new(re / n, im / n)
    }

    /// Unweighted L² norm over one period cell, (∫∫|f|² dx dy)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.dx() * self.grid.dy()).sqrt()
    }

    /// Same norm evaluated from the Fourier coefficients.
    pub fn l2_norm_spectral(&self) -> f64 {
        let s: f64 = self.spectrum().iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.cell_area()).sqrt()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&z| f(z)).collect(),
            parity: self.parity,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            parity: Parity {
                even_x: self.parity.even_x && other.parity.even_x,
                even_y: self.parity.even_y && other.parity.even_y,
            },
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }
    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }
    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// Fourier coefficients ĉ with f = Σ ĉ e^{i ξ·x}, in FFT bin order.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        fft2(&mut data, self.grid.nx, self.grid.ny, false);
        let n = self.grid.len() as f64;
        for z in &mut data {
            *z /= n;
        }
        data
    }

    pub fn from_spectrum(grid: TorusGrid, mut coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        fft2(&mut coeffs, grid.nx, grid.ny, true);
        Self {
            grid,
            values: coeffs,
            parity: Parity::default(),
        }
    }

    /// Applies a Fourier multiplier m(i, j) given per bin.
    pub fn multiply(&self, m: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut s = self.spectrum();
        let ny = self.grid.ny;
        for i in 0..self.grid.nx {
            for j in 0..ny {
                s[i * ny + j] *= m(i, j);
            }
        }
        Self::from_spectrum(self.grid, s)
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static P: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

/// Unnormalized 2D transform in place.
fn fft2(data: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let py = plan(ny, inverse);
    let px = plan(nx, inverse);
    let mut scratch =
        vec![Complex64::default(); py.get_inplace_scratch_len().max(px.get_inplace_scratch_len())];
    for row in data.chunks_exact_mut(ny) {
        py.process_with_scratch(row, &mut scratch);
    }
    let mut col = vec![Complex64::default(); nx];
    for j in 0..ny {
        for i in 0..nx {
            col[i] = data[i * ny + j];
        }
        px.process_with_scratch(&mut col, &mut scratch);
        for i in 0..nx {
            data[i * ny + j] = col[i];
        }
    }
}

/// a(ξ) = (ξ₁² − ξ₂²)/(ξ₁² + ξ₂²), with a(0) = 0.
pub fn symbol_a(xi1: f64, xi2: f64) -> f64 {
    let r = xi1 * xi1 + xi2 * xi2;
    if r == 0.0 {
        0.0
    } else {
        (xi1 * xi1 - xi2 * xi2) / r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Upsilon,
    Laplacian,
    InvLaplacianUpsilon,
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Field(TorusField),
    Scalar(Complex64),
}

pub fn apply_operator(field: &TorusField, op: Operator) -> Applied {
    match op {
        Operator::Upsilon => Applied::Field(upsilon(field)),
        Operator::Laplacian => Applied::Field(laplacian(field)),
        Operator::InvLaplacianUpsilon => Applied::Field(inv_laplacian_upsilon(field).0),
        Operator::Mean => Applied::Scalar(field.mean()),
    }
}

/// Υ = ∂xx − ∂yy.
pub fn upsilon(f: &TorusField) -> TorusField {
    let g = f.grid;
    let mut out = f.multiply(|i, j| {
        let (a, b) = g.xi(i, j);
        Complex64::new(b * b - a * a, 0.0)
    });
    out.parity = f.parity;
    out
}

/// Δ = ∂xx + ∂yy.
pub fn laplacian(f: &TorusField) -> TorusField {
    let g = f.grid;
    let mut out = f.multiply(|i, j| {
        let (a, b) = g.xi(i, j);
        Complex64::new(-(a * a + b * b), 0.0)
    });
    out.parity = f.parity;
    out
}

/// Δ⁻¹Υ on the mean-zero part. Returns the field and the mean that was
/// projected out.
pub fn inv_laplacian_upsilon(f: &TorusField) -> (TorusField, Complex64) {
    let g = f.grid;
    let mut s = f.spectrum();
    let projected = s[0];
    let ny = g.ny;
    for i in 0..g.nx {
        for j in 0..ny {
            let (a, b) = g.xi(i, j);
            s[i * ny + j] *= symbol_a(a, b);
        }
    }
    let mut out = TorusField::from_spectrum(g, s);
    out.parity = f.parity;
    (out, projected)
}

pub fn mean(f: &TorusField) -> Complex64 {
    f.mean()
}

/// ∂x (axis 0) or ∂y (axis 1) of a quasi-periodic field
/// f = g·e^{i(sx·x + sy·y)} with g periodic. The Nyquist bin is dropped.
pub fn derivative(f: &TorusField, axis: usize, shift: (f64, f64)) -> TorusField {
    let g = f.grid;
    let phase = |x: f64, y: f64| Complex64::from_polar(1.0, shift.0 * x + shift.1 * y);
    let mut vals = f.values.clone();
    for i in 0..g.nx {
        for j in 0..g.ny {
            vals[i * g.ny + j] *= phase(-g.x(i), -g.y(j));
        }
    }
    let periodic = TorusField::new(g, vals).expect("same grid");
    let d = periodic.multiply(|i, j| {
        if (axis == 0 && g.is_nyquist_x(i)) || (axis == 1 && g.is_nyquist_y(j)) {
            return Complex64::default();
        }
        let (a, b) = g.xi(i, j);
        I * if axis == 0 { a } else { b }
    });
    let s = if axis == 0 { shift.0 } else { shift.1 };
    let mut out = d;
    for i in 0..g.nx {
        for j in 0..g.ny {
            let k = i * g.ny + j;
            out.values[k] = out.values[k] * phase(g.x(i), g.y(j)) + I * s * f.values[k];
        }
    }
    out
}

/// Mean-zero real u with Δu = −4∂y|q|².
pub fn solve_u(q: &TorusField) -> TorusField {
    let g = q.grid;
    let w = q.map(|z| Complex64::new(z.norm_sqr(), 0.0));
    let mut out = w.multiply(|i, j| {
        let (a, b) = g.xi(i, j);
        let r = a * a + b * b;
        if r == 0.0 || g.is_nyquist_y(j) {
            Complex64::default()
        } else {
            // −4(iξ₂)ŵ / (−|ξ|²)
            I * (4.0 * b / r)
        }
    });
    for z in &mut out.values {
        z.im = 0.0;
    }
    out
}

pub fn dsii_rhs(q: &TorusField, params: &ModelParams) -> TorusField {
    dsii_rhs_with(q, &params.coefficients())
}

/// q_t = −i{Υq + 2[Δ⁻¹Υ|q|² + ⟨|q|²⟩ − ω²]q} + ε(Δq − αq + β).
pub fn dsii_rhs_with(q: &TorusField, c: &PdeCoefficients) -> TorusField {
    let g = q.grid;
    let s = q.spectrum();
    let w = q.map(|z| Complex64::new(z.norm_sqr(), 0.0));
    let (nl, wmean) = inv_laplacian_upsilon(&w);
    let shift = wmean.re - c.omega * c.omega;
    let mut lin = s;
    let ny = g.ny;
    for i in 0..g.nx {
        for j in 0..ny {
            let (a, b) = g.xi(i, j);
            let ups = b * b - a * a;
            let lap = -(a * a + b * b);
            lin[i * ny + j] *= Complex64::new(c.epsilon * (lap - c.alpha), -ups);
        }
    }
    let lin = TorusField::from_spectrum(g, lin);
    let values = lin
        .values
        .iter()
        .zip(&q.values)
        .zip(&nl.values)
        .map(|((&l, &qv), &p)| l - I * 2.0 * (p.re + shift) * qv + c.epsilon * c.beta)
        .collect();
    let out = TorusField {
        grid: g,
        values,
        parity: Parity::default(),
    };
    carry_parity(out, q.parity, 1e-10)
}

/// Keeps those input flags that still hold to `tol` on the output.
pub(crate) fn carry_parity(mut out: TorusField, p: Parity, tol: f64) -> TorusField {
    if p.even_x || p.even_y {
        let (dx, dy) = out.parity_defect();
        out.parity = Parity {
            even_x: p.even_x && dx <= tol,
            even_y: p.even_y && dy <= tol,
        };
    }
    out
}

/// Writes the snapshot format: a header line `nx,ny,kappa1,kappa2`, its
/// values, then `x,y,re,im` rows with 17 significant digits.
pub fn write_field_csv<W: Write>(field: &TorusField, mut w: W) -> std::io::Result<()> {
    let g = field.grid;
    writeln!(w, "nx,ny,kappa1,kappa2")?;
    writeln!(w, "{},{},{:.16e},{:.16e}", g.nx, g.ny, g.kappa1, g.kappa2)?;
    writeln!(w, "x,y,re,im")?;
    for i in 0..g.nx {
        for j in 0..g.ny {
            let z = field.at(i, j);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                g.x(i),
                g.y(j),
                z.re,
                z.im
            )?;
        }
    }
    Ok(())
}

pub fn read_field_csv<R: BufRead>(r: R) -> Result<TorusField> {
    let bad = |m: &str| Error::InvalidInput(format!("field csv: {m}"));
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("truncated"))?
            .map_err(|e| bad(&e.to_string()))
    };
    if next()?.trim() != "nx,ny,kappa1,kappa2" {
        return Err(bad("missing header"));
    }
    let meta = next()?;
    let parts: Vec<&str> = meta.trim().split(',').collect();
    if parts.len() != 4 {
        return Err(bad("malformed grid line"));
    }
    let nx: usize = parts[0].parse().map_err(|_| bad("nx"))?;
    let ny: usize = parts[1].parse().map_err(|_| bad("ny"))?;
    let k1: f64 = parts[2].parse().map_err(|_| bad("kappa1"))?;
    let k2: f64 = parts[3].parse().map_err(|_| bad("kappa2"))?;
    let grid = TorusGrid::new(nx, ny, k1, k2)?;
    next()?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let line = next()?;
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 4 {
            return Err(bad("malformed row"));
        }
        let re: f64 = cols[2].parse().map_err(|_| bad("re"))?;
        let im: f64 = cols[3].parse().map_err(|_| bad("im"))?;
        values.push(Complex64::new(re, im));
    }
    TorusField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> TorusGrid {
        TorusGrid::new(32, 16, 1.0, 2f64.sqrt()).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::new(12, 16, 1.0, 1.0).is_err());
        assert!(TorusGrid::new(4, 16, 1.0, 1.0).is_err());
        assert!(TorusGrid::new(16, 16, 0.0, 1.0).is_err());
    }

    #[test]
    fn spectrum_round_trip() {
        let g = grid();
        let f = TorusField::from_fn(g, |x, y| Complex64::new((x + 0.3).sin(), (2.0 * y).cos() * x));
        let back = TorusField::from_spectrum(g, f.spectrum());
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_in_its_bin() {
        let g = grid();
        let f = TorusField::from_fn(g, |x, y| {
            Complex64::from_polar(1.0, 3.0 * g.kappa1() * x - 2.0 * g.kappa2() * y)
        });
        let s = f.spectrum();
        let b = g.bin(3, -2).unwrap();
        assert_relative_eq!(s[b].re, 1.0, epsilon = 1e-13);
        let rest: f64 = s.iter().enumerate().filter(|&(k, _)| k != b).map(|(_, z)| z.norm()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn derivative_of_shifted_exponential() {
        let g = grid();
        let s = (0.5, 0.7);
        let f = TorusField::from_fn(g, |x, y| Complex64::from_polar(1.0, s.0 * x + s.1 * y + g.kappa1() * x));
        let dx = derivative(&f, 0, s);
        let dy = derivative(&f, 1, s);
        for k in 0..g.len() {
            let v = f.values()[k];
            assert!((dx.values()[k] - I * (s.0 + g.kappa1()) * v).norm() < 1e-12);
            assert!((dy.values()[k] - I * s.1 * v).norm() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = grid();
        let f = TorusField::from_fn(g, |x, y| Complex64::new(x.exp() / 3.0, -y / 7.0));
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let back = read_field_csv(&buf[..]).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
    }
}
