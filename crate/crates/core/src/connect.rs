//! Connection map from the `x → -∞` parameters to the `x → +∞` parameters of
//! the two-component system, its scalar reduction, the finite-x corrections,
//! and the phase-averaged actions.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_4, LN_2, PI};

use crate::error::{Error, Result};
use crate::model::{
    wrap_phase, EquationParams, FinalAsymptotics, InitialAsymptotics, Sign, TransitionConstants,
};
use crate::sampling::{compensated_sum, phase_pair, Moments};
use crate::specfun::arg_gamma_imag_or_limit;

/// `|sin Φ₁|` below this is treated as a separatrix crossing.
pub const SEPARATRIX_TOL: f64 = 1e-12;

/// `p_k` and `Φ_k` for the two-component system.
pub fn transition_constants(
    init: &InitialAsymptotics,
    params: &EquationParams,
) -> Result<TransitionConstants> {
    params.require_n(2)?;
    if init.n() != 2 {
        return Err(Error::UnsupportedDimension {
            got: init.n(),
            expected: 2,
        });
    }
    let eps = params.positive_eps2()?;
    let (a1, a2) = (init.alpha()[0], init.alpha()[1]);
    let (s1, s2) = (a1 * a1, a2 * a2);
    let log_eps = (eps / 4.0).ln();
    let big_phi = |own: f64, other: f64, phi: f64| -> Result<f64> {
        Ok(
            FRAC_PI_4 + arg_gamma_imag_or_limit(0.5 * own)? + phi - 1.5 * own * LN_2
                + 0.5 * other * log_eps,
        )
    };
    Ok(TransitionConstants {
        p1: (-PI * s1).exp(),
        p2: (-PI * s2).exp(),
        big_phi1: big_phi(s1, s2, init.phi()[0])?,
        big_phi2: big_phi(s2, s1, init.phi()[1])?,
    })
}

/// Diagnostics attached to an otherwise valid connection result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectWarning {
    /// `α₁ = 0`: `Φ₁` carries the phase of a mode with zero amplitude, so the
    /// sign `σ = sign sin Φ₁` is not physically determined. With `p₁ = 1` the
    /// `I₂` logarithm also diverges; the result carries `I₂ = +∞` and `φ₂ = NaN`.
    SigmaUndefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub final_: FinalAsymptotics,
    pub constants: TransitionConstants,
    pub warnings: Vec<ConnectWarning>,
}

/// Weights of the convex combination
/// `W = p₁p₂ T = w₀ + w₁ e^{2iΦ₁} + w₂ e^{2iΦ₂}`, with `w₀ + w₁ + w₂ = 1`.
fn mixing_weights(c: &TransitionConstants) -> [f64; 3] {
    [c.p1 * c.p2, c.p2 * (1.0 - c.p1), 1.0 - c.p2]
}

/// `D = 1 - |W|²`, evaluated as the non-negative sum
/// `4 Σ_{i<j} w_i w_j sin²((θ_i - θ_j)/2)` to avoid cancellation.
fn log_argument(c: &TransitionConstants) -> f64 {
    let [w0, w1, w2] = mixing_weights(c);
    let (s1, s2, s12) = (
        c.big_phi1.sin(),
        c.big_phi2.sin(),
        (c.big_phi1 - c.big_phi2).sin(),
    );
    4.0 * (w0 * w1 * s1 * s1 + w0 * w2 * s2 * s2 + w1 * w2 * s12 * s12)
}

/// `σ`, `I₁`, `I₂` from the transition constants.
pub fn final_actions(c: &TransitionConstants) -> Result<(Sign, f64, f64)> {
    let sin1 = c.big_phi1.sin();
    if sin1.abs() < SEPARATRIX_TOL {
        return Err(Error::SeparatrixSingular { sin_phi1: sin1 });
    }
    let sigma = Sign::of(sin1).expect("nonzero after tolerance check");
    let d = log_argument(c);
    if !(d > 0.0) {
        return Err(Error::ConnectionDomain { d });
    }
    let i1 = -d.ln() / (4.0 * PI);
    let i2 = -(2.0 * (c.p2 * c.p1 * (1.0 - c.p1)).sqrt() * sin1.abs()).ln() / PI - 2.0 * i1;
    Ok((sigma, i1, i2))
}

/// The phase `φ₂` in its closed form, written directly in the connection constants:
/// `3π/4 − (2/3)ε^{3/2} − I₂ ln(4√ε) + arg Γ(iI₂) − arg(e^{iΦ₂} + e^{−iΦ₂}(p₁ + (1−p₁)e^{2iΦ₁}))`.
///
/// Kept for comparison only. Under the exact symmetry `u → −u` (which sends
/// `Φ_k → Φ_k + π` and `σ → −σ`) this expression shifts by `π`, so together
/// with `u₂ = σA cos(…)` it leaves `u₂` unchanged instead of flipping it;
/// direct integration agrees with [`connect_forward`] instead.
pub fn closed_form_phi2(c: &TransitionConstants, i2: f64, eps: f64) -> Result<f64> {
    let z = mode1_factor(c);
    let e = Complex64::from_polar(1.0, c.big_phi2);
    let bracket = e + e.conj() * z;
    Ok(wrap_phase(phi2_base(i2, eps)? - bracket.arg()))
}

fn mode1_factor(c: &TransitionConstants) -> Complex64 {
    Complex64::new(c.p1, 0.0) + Complex64::from_polar(1.0 - c.p1, 2.0 * c.big_phi1)
}

fn phi2_base(i2: f64, eps: f64) -> Result<f64> {
    Ok(
        0.75 * PI - (2.0 / 3.0) * eps.powf(1.5) - i2 * (4.0 * eps.sqrt()).ln()
            + arg_gamma_imag_or_limit(i2)?,
    )
}

/// Full final parameters from already computed transition constants.
pub fn connect_from_constants(c: &TransitionConstants, eps: f64) -> Result<FinalAsymptotics> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("requires eps > 0, got {eps}")));
    }
    let (sigma, i1, i2) = final_actions(c)?;
    // rounding can leave a vanishing action slightly negative
    let (i1, i2) = (i1.max(0.0), i2.max(0.0));
    let [w0, w1, w2] = mixing_weights(c);
    // arg T = arg(p₁p₂T) since p₁p₂ > 0
    let w = Complex64::new(w0, 0.0)
        + Complex64::from_polar(w1, 2.0 * c.big_phi1)
        + Complex64::from_polar(w2, 2.0 * c.big_phi2);
    let phi1 = -0.75 * PI - 7.0 * i1 * LN_2 + arg_gamma_imag_or_limit(i1 * 2.0)? - w.arg();

    // Sign-consistent form: odd under u -> -u together with u2 = σ A cos(...).
    let phi2 = if i2.is_finite() {
        let e = Complex64::from_polar(1.0, c.big_phi2);
        let bracket = (e - e.conj() * mode1_factor(c)) * sigma.value();
        phi2_base(i2, eps)? - bracket.arg()
    } else {
        f64::NAN
    };

    FinalAsymptotics::new(sigma, i1, i2, phi1, phi2).map_err(|_| {
        Error::Internal(format!(
            "negative action from connection map: I1 = {i1}, I2 = {i2}"
        ))
    })
}

/// Connection map for `n = 2`.
pub fn connect_forward(init: &InitialAsymptotics, params: &EquationParams) -> Result<Connection> {
    let constants = transition_constants(init, params)?;
    let eps = params.positive_eps2()?;
    let final_ = connect_from_constants(&constants, eps)?;
    let mut warnings = Vec::new();
    if init.alpha()[0] == 0.0 {
        warnings.push(ConnectWarning::SigmaUndefined);
    }
    Ok(Connection {
        final_,
        constants,
        warnings,
    })
}

/// Final parameters of the scalar equation `u'' = xu − 2u³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarFinal {
    pub sigma: Sign,
    pub i1: f64,
    pub phi1: f64,
}

/// Scalar reduction (`α₂ = 0`), coded separately from [`connect_forward`]:
/// `I₁ = −(1/4π) ln(4p₁(1−p₁) sin²Φ₁)`.
pub fn connect_forward_scalar(alpha1: f64, phi1: f64) -> Result<ScalarFinal> {
    if !(alpha1 > 0.0) || !alpha1.is_finite() {
        return Err(Error::domain(format!("requires alpha1 > 0, got {alpha1}")));
    }
    if !phi1.is_finite() {
        return Err(Error::domain("phase must be finite"));
    }
    let a2 = alpha1 * alpha1;
    let p = (-PI * a2).exp();
    let big_phi =
        FRAC_PI_4 + arg_gamma_imag_or_limit(0.5 * a2)? + wrap_phase(phi1) - 1.5 * a2 * LN_2;
    let s = big_phi.sin();
    if s.abs() < SEPARATRIX_TOL {
        return Err(Error::SeparatrixSingular { sin_phi1: s });
    }
    let i1 = -(4.0 * p * (1.0 - p) * s * s).ln() / (4.0 * PI);
    let bracket = Complex64::new(p, 0.0) + Complex64::from_polar(1.0 - p, 2.0 * big_phi);
    let phi = -0.75 * PI - 7.0 * LN_2 * i1 + arg_gamma_imag_or_limit(2.0 * i1)? - bracket.arg();
    Ok(ScalarFinal {
        sigma: if s > 0.0 { Sign::Plus } else { Sign::Minus },
        i1,
        phi1: wrap_phase(phi),
    })
}

/// How the large-x model should be evaluated at finite x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionRecipe {
    /// Added to `φ₁`: `−2π I₂ √(ε / 2x)`.
    pub phi1_shift: f64,
    /// Use `σ√((x − 2u₂²)/2)` for the regular part of `u₁`.
    pub renormalize_regular_part: bool,
}

/// Finite-x corrections at `x`. The regular-part renormalization needs
/// `x − 2u₂² > 0`; since `|u₂| ≤ A` this is checked as `x > 2A²`.
pub fn apply_corrections(
    fin: &FinalAsymptotics,
    params: &EquationParams,
    x: f64,
) -> Result<CorrectionRecipe> {
    let eps = params.positive_eps2()?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!(
            "corrections need finite x > 0, got {x}"
        )));
    }
    let amp = fin.amplitude(eps);
    let margin = x - 2.0 * amp * amp;
    if !(margin > 0.0) {
        return Err(Error::CorrectionDomain { x, margin });
    }
    Ok(CorrectionRecipe {
        phi1_shift: -2.0 * PI * fin.i2 * (eps / (2.0 * x)).sqrt(),
        renormalize_regular_part: true,
    })
}

/// `c₁ = (1/π²) ∬_{(0,π)²} ln[4 − 2cos 2Φ₁ − 2cos 2Φ₂]` by the midpoint rule.
///
/// The integrand equals `ln(4 sin²Φ₁ + 4 sin²Φ₂)`; its log singularities sit
/// on the corners, which midpoint nodes never touch.
pub fn spanning_tree_constant_c1(grid_points_per_axis: usize) -> Result<f64> {
    let n = grid_points_per_axis;
    if n < 8 {
        return Err(Error::domain(format!("resolution must be >= 8, got {n}")));
    }
    let h = PI / n as f64;
    let sin2: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 0.5) * h).sin().powi(2))
        .collect();
    let rows: Vec<f64> = sin2
        .par_iter()
        .map(|&si| compensated_sum(sin2.iter().map(|&sj| (4.0 * (si + sj)).ln())))
        .collect();
    Ok(compensated_sum(rows) / (n as f64 * n as f64))
}

/// `4G/π` with `G` Catalan's constant; the limit of [`spanning_tree_constant_c1`].
pub const C1_EXACT: f64 = 4.0 * 0.915_965_594_177_219_015_054_603_514_932_384_110_774 / PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageMethod {
    MonteCarlo,
    /// Midpoint grid on the phase torus.
    TensorQuadrature,
}

/// Phase-averaged final actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageReport {
    pub mean_i1: f64,
    pub mean_i2: f64,
    /// Monte Carlo: standard error of the mean. Quadrature: difference to the
    /// half-resolution grid.
    pub std_err_i1: f64,
    pub std_err_i2: f64,
    /// Samples that entered the averages.
    pub n_samples: u64,
    /// Samples skipped as separatrix-singular.
    pub n_skipped: u64,
    pub method: AverageMethod,
}

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, Default)]
struct ActionMoments {
    i1: Moments,
    i2: Moments,
    skipped: u64,
}

impl ActionMoments {
    fn merge(self, o: Self) -> Self {
        Self {
            i1: self.i1.merge(o.i1),
            i2: self.i2.merge(o.i2),
            skipped: self.skipped + o.skipped,
        }
    }
}

/// Accumulate actions over `count` phase pairs produced by `phases(index)`.
///
/// Chunks are reduced in index order, so the result does not depend on the
/// number of worker threads.
fn accumulate(
    base: &TransitionConstants,
    count: usize,
    phases: impl Fn(usize) -> (f64, f64) + Sync,
) -> Result<ActionMoments> {
    let chunks: Vec<Result<ActionMoments>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = ActionMoments::default();
            for idx in chunk * CHUNK..((chunk + 1) * CHUNK).min(count) {
                let (f1, f2) = phases(idx);
                let c = TransitionConstants {
                    big_phi1: base.big_phi1 + f1,
                    big_phi2: base.big_phi2 + f2,
                    ..*base
                };
                match final_actions(&c) {
                    Ok((_, i1, i2)) => {
                        acc.i1.push(i1);
                        acc.i2.push(i2);
                    }
                    Err(Error::SeparatrixSingular { .. }) => acc.skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(acc)
        })
        .collect();
    chunks
        .into_iter()
        .try_fold(ActionMoments::default(), |a, c| Ok(a.merge(c?)))
}

/// Average `I₁`, `I₂` over uniform initial phases with `α₁ = α₂ = √(2𝓘)`.
///
/// `Φ_k` is affine in `φ_k` with unit slope, so the phase-independent part of
/// the transition constants is computed once and the phases are added per sample.
pub fn averaged_actions(
    initial_action: f64,
    params: &EquationParams,
    method: AverageMethod,
    n_samples: usize,
    seed: u64,
) -> Result<AverageReport> {
    if !(initial_action > 0.0) || !initial_action.is_finite() {
        return Err(Error::domain(format!(
            "initial action must be finite and > 0, got {initial_action}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be >= 1"));
    }
    let alpha = (2.0 * initial_action).sqrt();
    let base = transition_constants(&InitialAsymptotics::two(alpha, alpha, 0.0, 0.0)?, params)?;

    let report = |m: ActionMoments, err1: f64, err2: f64| -> Result<AverageReport> {
        if m.i1.count == 0 {
            return Err(Error::Internal(
                "every sample was separatrix-singular".into(),
            ));
        }
        Ok(AverageReport {
            mean_i1: m.i1.mean,
            mean_i2: m.i2.mean,
            std_err_i1: err1,
            std_err_i2: err2,
            n_samples: m.i1.count,
            n_skipped: m.skipped,
            method,
        })
    };

    match method {
        AverageMethod::MonteCarlo => {
            let m = accumulate(&base, n_samples, |i| phase_pair(seed, i as u64))?;
            let (e1, e2) = (m.i1.std_err(), m.i2.std_err());
            report(m, e1, e2)
        }
        AverageMethod::TensorQuadrature => {
            let side = ((n_samples as f64).sqrt().round() as usize).max(2);
            let grid = |side: usize| {
                let h = 2.0 * PI / side as f64;
                accumulate(&base, side * side, move |i| {
                    (
                        (((i / side) as f64) + 0.5) * h,
                        (((i % side) as f64) + 0.5) * h,
                    )
                })
            };
            let fine = grid(side)?;
            let coarse = grid((side / 2).max(1))?;
            let e1 = (fine.i1.mean - coarse.i1.mean).abs();
            let e2 = (fine.i2.mean - coarse.i2.mean).abs();
            report(fine, e1, e2)
        }
    }
}

/// Small-𝓘 asymptotic value of `⟨I₁⟩`: `(1/4π)[ln(1/(2π𝓘)) − c₁]`.
pub fn asymptotic_mean_i1(initial_action: f64, c1: f64) -> f64 {
    ((1.0 / (2.0 * PI * initial_action)).ln() - c1) / (4.0 * PI)
}

/// Small-𝓘 asymptotic value of `⟨I₂⟩`: `c₂/(2π)` with `c₂ = c₁`.
pub fn asymptotic_mean_i2(c1: f64) -> f64 {
    c1 / (2.0 * PI)
}
