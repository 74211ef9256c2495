//! Lax pair `(H, H₁)` of the n-component system, the zero-curvature check
//! `∂H/∂x − ∂H₁/∂t − i[H, H₁] = 0`, spectra, and the local three-level
//! Demkov–Osherov Hamiltonians.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{hermitian_deviation, CMatrix, EquationParams, LaxPair};
use crate::ode::second_derivative;

/// Spectra of matrices further than this from Hermitian are refused.
pub const HERMITIAN_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn check_lengths(u: &[f64], du: &[f64], params: &EquationParams) -> Result<()> {
    if u.len() != params.n() || du.len() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "u has {}, du {} components, parameters {}",
            u.len(),
            du.len(),
            params.n()
        )));
    }
    Ok(())
}

/// `H = A − 4tB + 2C` and `H₁` at `(t, x)`.
pub fn build_lax_pair(
    t: f64,
    x: f64,
    u: &[f64],
    du: &[f64],
    params: &EquationParams,
) -> Result<LaxPair> {
    check_lengths(u, du, params)?;
    let n = params.n();
    let norm2: f64 = u.iter().map(|v| v * v).sum();
    let base = 4.0 * t * t + x;
    let mut h = CMatrix::zeros(n + 1, n + 1);
    let mut h1 = CMatrix::zeros(n + 1, n + 1);
    h[(0, 0)] = re(base - 2.0 * norm2);
    h1[(0, 0)] = re(t);
    for k in 0..n {
        let eps = params.eps()[k];
        h[(k + 1, k + 1)] = re(-(base - 2.0 * eps) + 2.0 * u[k] * u[k]);
        for j in 0..n {
            if j != k {
                h[(j + 1, k + 1)] = re(2.0 * u[j] * u[k]);
            }
        }
        h[(0, k + 1)] = re(-4.0 * t * u[k]) - 2.0 * I * du[k];
        h[(k + 1, 0)] = re(-4.0 * t * u[k]) + 2.0 * I * du[k];
        h1[(k + 1, k + 1)] = re(-t);
        h1[(0, k + 1)] = re(-u[k]);
        h1[(k + 1, 0)] = re(-u[k]);
    }
    Ok(LaxPair { t, x, h, h1 })
}

/// `∂H/∂x` along a solution, given `u`, `u'` and `u''`.
fn dh_dx(t: f64, u: &[f64], du: &[f64], ddu: &[f64]) -> CMatrix {
    let n = u.len();
    let mut d = CMatrix::zeros(n + 1, n + 1);
    let dot: f64 = u.iter().zip(du).map(|(a, b)| a * b).sum();
    d[(0, 0)] = re(1.0 - 4.0 * dot);
    for k in 0..n {
        d[(k + 1, k + 1)] = re(-1.0 + 4.0 * u[k] * du[k]);
        for j in 0..n {
            if j != k {
                d[(j + 1, k + 1)] = re(2.0 * (du[j] * u[k] + u[j] * du[k]));
            }
        }
        d[(0, k + 1)] = re(-4.0 * t * du[k]) - 2.0 * I * ddu[k];
        d[(k + 1, 0)] = re(-4.0 * t * du[k]) + 2.0 * I * ddu[k];
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureResidual {
    pub frobenius_norm: f64,
    pub max_entry: f64,
    pub point: (f64, f64),
}

/// Residual matrix norms with an explicitly supplied `u''`.
pub fn zero_curvature_residual_with(
    t: f64,
    x: f64,
    u: &[f64],
    du: &[f64],
    ddu: &[f64],
    params: &EquationParams,
) -> Result<CurvatureResidual> {
    if ddu.len() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "u'' has {} components, parameters {}",
            ddu.len(),
            params.n()
        )));
    }
    let pair = build_lax_pair(t, x, u, du, params)?;
    let n = params.n();
    let mut dh1_dt = CMatrix::identity(n + 1, n + 1) * re(-1.0);
    dh1_dt[(0, 0)] = re(1.0);
    let commutator = &pair.h * &pair.h1 - &pair.h1 * &pair.h;
    let r = dh_dx(t, u, du, ddu) - dh1_dt - commutator * I;
    Ok(CurvatureResidual {
        frobenius_norm: r.norm(),
        max_entry: r.iter().map(|z| z.norm()).fold(0.0, f64::max),
        point: (t, x),
    })
}

/// Zero-curvature residual with `u''` taken from the equation of motion.
pub fn zero_curvature_residual(
    t: f64,
    x: f64,
    u: &[f64],
    du: &[f64],
    params: &EquationParams,
) -> Result<CurvatureResidual> {
    check_lengths(u, du, params)?;
    let mut ddu = vec![0.0; params.n()];
    second_derivative(x, u, params, &mut ddu);
    zero_curvature_residual_with(t, x, u, du, &ddu, params)
}

/// Ascending eigenvalues of `m + shift·1`.
pub fn spectrum(m: &CMatrix, shift: Option<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let deviation = hermitian_deviation(m);
    if !(deviation <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian { deviation });
    }
    let mut a = m.clone();
    if let Some(s) = shift {
        for d in 0..a.nrows() {
            a[(d, d)] += re(s);
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Identity shift `|x|^{3/2}(4τ² + 1)`, `τ = t/√|x|`, that keeps the
/// spectrum of `H(t, x)` bounded along a t-scan.
pub fn display_shift(t: f64, x: f64) -> f64 {
    let ax = x.abs();
    let tau = t / ax.sqrt();
    ax.powf(1.5) * (4.0 * tau * tau + 1.0)
}

/// Eigenvalues of `H(t, x)` (optionally with [`display_shift`]) for each `t`.
pub fn spectrum_scan(
    x: f64,
    u: &[f64],
    du: &[f64],
    params: &EquationParams,
    ts: &[f64],
    shifted: bool,
) -> Result<Vec<(f64, Vec<f64>)>> {
    ts.iter()
        .map(|&t| {
            let pair = build_lax_pair(t, x, u, du, params)?;
            let shift = shifted.then(|| display_shift(t, x));
            Ok((t, spectrum(&pair.h, shift)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomSide {
    /// Near `τ = −1/2`, local time `τ_m = τ + 1/2`.
    Minus,
    /// Near `τ = +1/2`, local time `τ_p = τ − 1/2`.
    Plus,
}

/// Three-level Demkov–Osherov Hamiltonian valid near `τ = ∓1/2` at `x < 0`.
pub fn build_dom_hamiltonian(
    side: DomSide,
    tau_local: f64,
    x: f64,
    u: &[f64],
    du: &[f64],
    params: &EquationParams,
) -> Result<CMatrix> {
    params.require_n(2)?;
    check_lengths(u, du, params)?;
    if !(x < 0.0) {
        return Err(Error::domain(format!(
            "local crossing models need x < 0, got {x}"
        )));
    }
    let eps = params.eps2()?;
    let ax = x.abs();
    let sq = ax.sqrt();
    let slope = 4.0 * ax.powf(1.5) * tau_local;
    let (lead, g): (f64, [Complex64; 2]) = match side {
        DomSide::Minus => (
            -slope,
            [0, 1].map(|k| Complex64::new(2.0 * ax * u[k], -2.0 * sq * du[k])),
        ),
        DomSide::Plus => (
            slope,
            [0, 1].map(|k| Complex64::new(-2.0 * ax * u[k], -2.0 * sq * du[k])),
        ),
    };
    let mut h = DMatrix::from_diagonal_element(3, 3, re(0.0));
    h[(0, 0)] = re(lead);
    h[(1, 1)] = re(-lead);
    h[(2, 2)] = re(-lead + 2.0 * sq * eps);
    for k in 0..2 {
        h[(0, k + 1)] = g[k];
        h[(k + 1, 0)] = g[k].conj();
    }
    Ok(h)
}
