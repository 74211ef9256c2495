//! Special-function kernels used by the connection formulas.
//!
//! The only kernel needed is `log Γ(iy)` for real `y > 0`. Its imaginary part
//! is returned on the continuous branch that starts at `-π/2` as `y → 0⁺`
//! (where `Γ(iy) ≈ -i/y`). For `y ≲ 3.4` this coincides with the principal
//! argument; beyond that the continuous branch leaves `(-π, π]` and keeps
//! growing like `y ln y - y`. Consumers only use it inside trigonometric
//! functions or phases reported mod 2π, so either branch gives the same
//! observable, but the continuous one never jumps.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Number of unit shifts applied before the Stirling series.
const SHIFT: usize = 16;

/// `B_{2k} / (2k (2k - 1))` for k = 1..=10.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

/// Stirling series for `log Γ(w)`, valid for `Re w ≥ SHIFT`.
fn ln_gamma_stirling(w: Complex64) -> Complex64 {
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    let mut acc = (w - 0.5) * w.ln() - w + half_ln_2pi;
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut term = inv;
    for c in STIRLING {
        acc += term * c;
        term *= inv2;
    }
    acc
}

/// `log Γ(iy)` with a continuous imaginary part.
///
/// Uses `Γ(z) = Γ(z + N) / ∏_{j<N} (z + j)`; each factor's argument is
/// `atan2(y, j) ∈ (0, π/2]`, so the imaginary part is accumulated without
/// any principal-value wrapping.
pub fn ln_gamma_imag_axis(y: f64) -> Result<Complex64> {
    if !y.is_finite() || y <= 0.0 {
        return Err(Error::domain(format!(
            "log-gamma on the imaginary axis requires finite y > 0, got {y}"
        )));
    }
    let shifted = ln_gamma_stirling(Complex64::new(SHIFT as f64, y));
    let mut re = shifted.re;
    let mut im = shifted.im;
    for j in 0..SHIFT {
        let j = j as f64;
        re -= 0.5 * (j * j + y * y).ln();
        im -= y.atan2(j);
    }
    Ok(Complex64::new(re, im))
}

/// `arg Γ(iy)` on the continuous branch starting from `-π/2` at `y → 0⁺`.
pub fn arg_gamma_imag(y: f64) -> Result<f64> {
    ln_gamma_imag_axis(y).map(|l| l.im)
}

/// Like [`arg_gamma_imag`] but returns the `y → 0⁺` limit `-π/2` at `y = 0`.
///
/// The connection formulas evaluate `arg Γ(i·α²/2)` and `arg Γ(2i·I₁)`,
/// whose arguments vanish for zero amplitudes.
pub fn arg_gamma_imag_or_limit(y: f64) -> Result<f64> {
    if y == 0.0 {
        Ok(-FRAC_PI_2)
    } else {
        arg_gamma_imag(y)
    }
}
