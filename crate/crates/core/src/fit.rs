//! Extraction of the large-x parameters `(σ, I₁, I₂, φ₁, φ₂)` from an
//! integrated trajectory tail by nonlinear least squares.

use nalgebra::{Matrix4, Vector4};
use std::f64::consts::{PI, SQRT_2};

use crate::connect::apply_corrections;
use crate::error::{Error, Result};
use crate::model::{wrap_phase, EquationParams, FinalAsymptotics, Sign, Trajectory};

/// Which finite-x corrections enter the large-x model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Corrections {
    /// Regular part `√((x − 2u₂²)/2)` instead of `√(x/2)`.
    pub regular_part: bool,
    /// `φ₁ → φ₁ − 2πI₂√(ε/2x)`.
    pub phase_shift: bool,
    /// `φ₂ → φ₂ − 2√2 ρ²√(ε/x)`, the second-order pull of the fast `u₁`
    /// oscillation on the `u₂` frequency.
    pub sideband_shift: bool,
}

impl Corrections {
    pub const NONE: Self = Self {
        regular_part: false,
        phase_shift: false,
        sideband_shift: false,
    };
    /// The regular-part and `φ₁` corrections.
    pub const ALL: Self = Self {
        regular_part: true,
        phase_shift: true,
        sideband_shift: false,
    };
    pub const FULL: Self = Self {
        regular_part: true,
        phase_shift: true,
        sideband_shift: true,
    };

    pub fn any(&self) -> bool {
        self.regular_part || self.phase_shift || self.sideband_shift
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub final_: FinalAsymptotics,
    pub eps: f64,
    pub rms_residual: f64,
    pub window: (f64, f64),
    pub used_corrections: Corrections,
}

impl FitReport {
    pub const CSV_HEADER: [&'static str; 9] = [
        "eps",
        "sigma",
        "I1",
        "I2",
        "sin_phi1",
        "cos_phi1",
        "sin_phi2",
        "cos_phi2",
        "rms_residual",
    ];

    pub fn csv_record(&self) -> [f64; 9] {
        let f = &self.final_;
        [
            self.eps,
            f.sigma.value(),
            f.i1,
            f.i2,
            f.phi1.sin(),
            f.phi1.cos(),
            f.phi2.sin(),
            f.phi2.cos(),
            self.rms_residual,
        ]
    }
}

/// Free parameters `[ρ, A, φ₁, φ₂]` with σ and ε held fixed.
#[derive(Debug, Clone, Copy)]
struct Shape {
    sigma: f64,
    eps: f64,
    corrections: Corrections,
}

type Params = Vector4<f64>;

impl Shape {
    /// `(u₁, u₂)` and, if requested, their gradients with respect to the parameters.
    fn eval(&self, x: f64, p: &Params, grad: Option<(&mut [f64; 4], &mut [f64; 4])>) -> (f64, f64) {
        let (rho, amp, phi1, phi2) = (p[0], p[1], p[2], p[3]);
        let s = self.sigma;
        let se = self.eps.sqrt();
        let lnx = x.ln();

        let side_coeff = if self.corrections.sideband_shift {
            -2.0 * SQRT_2 * se / x.sqrt()
        } else {
            0.0
        };
        let th2 = se * x - 0.5 * amp * amp * se * lnx + phi2 + side_coeff * rho * rho;
        let (sin2, cos2) = th2.sin_cos();
        let u2 = s * amp * cos2;
        let du2_da = s * (cos2 + amp * amp * se * lnx * sin2);
        let du2_dphi2 = -s * amp * sin2;
        let du2_drho = du2_dphi2 * 2.0 * side_coeff * rho;

        let shift_coeff = if self.corrections.phase_shift {
            -PI * self.eps / (2.0 * x).sqrt()
        } else {
            0.0
        };
        let env = (2.0 * x).powf(-0.25);
        let th1 = (2.0 * SQRT_2 / 3.0) * x.powf(1.5) - 1.5 * rho * rho * lnx
            + phi1
            + shift_coeff * amp * amp;
        let (sin1, cos1) = th1.sin_cos();
        let reg_arg = if self.corrections.regular_part {
            x - 2.0 * u2 * u2
        } else {
            x
        };
        let reg = (0.5 * reg_arg.max(0.0)).sqrt();
        let u1 = s * reg + s * rho * env * cos1;

        if let Some((g1, g2)) = grad {
            let osc_dth = -s * rho * env * sin1;
            let (mut dreg_drho, mut dreg_da, mut dreg_dphi2) = (0.0, 0.0, 0.0);
            if self.corrections.regular_part && reg > 0.0 {
                dreg_drho = -u2 * du2_drho / reg;
                dreg_da = -u2 * du2_da / reg;
                dreg_dphi2 = -u2 * du2_dphi2 / reg;
            }
            g1[0] = s * env * (cos1 + 3.0 * rho * rho * lnx * sin1) + s * dreg_drho;
            g1[1] = s * dreg_da + osc_dth * 2.0 * shift_coeff * amp;
            g1[2] = osc_dth;
            g1[3] = s * dreg_dphi2;
            *g2 = [du2_drho, du2_da, 0.0, du2_dphi2];
        }
        (u1, u2)
    }
}

/// Evaluate the large-x model at `x > 0`.
pub fn final_asymptote_model(
    x: f64,
    fin: &FinalAsymptotics,
    params: &EquationParams,
    corrections: Corrections,
) -> Result<(f64, f64)> {
    let eps = params.eps2()?;
    if !(eps > 0.0) {
        return Err(Error::domain(format!("requires eps > 0, got {eps}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("model needs finite x > 0, got {x}")));
    }
    if corrections.any() {
        apply_corrections(fin, params, x)?;
    }
    let shape = Shape {
        sigma: fin.sigma.value(),
        eps,
        corrections,
    };
    let p = Params::new(fin.rho(), fin.amplitude(eps), fin.phi1, fin.phi2);
    Ok(shape.eval(x, &p, None))
}

/// Default window: the last 20% of the trajectory, widened when possible to
/// hold 20 periods of the `u₂` oscillation, never below `max(50, 10ε)`.
pub fn default_window(traj: &Trajectory) -> Result<(f64, f64)> {
    let eps = traj.params.eps2()?;
    let (Some(&lo), Some(&hi)) = (traj.xs().first(), traj.xs().last()) else {
        return Err(Error::domain("empty trajectory"));
    };
    let floor = 50f64.max(10.0 * eps);
    if hi <= floor {
        return Err(Error::domain(format!(
            "trajectory ends at x = {hi}, the fit needs samples beyond x = {floor}"
        )));
    }
    let mut start = hi - 0.2 * (hi - lo);
    if eps > 0.0 {
        start = start.min(hi - 20.0 * 2.0 * PI / eps.sqrt());
    }
    Ok((start.max(floor), hi))
}

fn check_window(traj: &Trajectory, window: (f64, f64)) -> Result<std::ops::Range<usize>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::domain(format!("empty fit window ({lo}, {hi})")));
    }
    let eps = traj.params.eps2()?;
    let floor = 10.0 * eps.max(1.0);
    if !(lo > floor) {
        return Err(Error::domain(format!(
            "fit window must lie in x > {floor}, got x_lo = {lo}"
        )));
    }
    let idx = traj.window_indices(lo, hi);
    if idx.len() < 16 {
        return Err(Error::domain(format!(
            "fit window ({lo}, {hi}) holds only {} samples",
            idx.len()
        )));
    }
    Ok(idx)
}

/// Sign of the windowed mean of `u₁`. The mean must reach half of the
/// expected regular part `⟨√(x/2)⟩`, otherwise the tail is not of the
/// assumed form.
pub fn estimate_sigma(traj: &Trajectory, window: (f64, f64)) -> Result<Sign> {
    let idx = check_window(traj, window)?;
    let n = idx.len() as f64;
    let mean = idx.clone().map(|i| traj.u(i, 0)).sum::<f64>() / n;
    let expected = idx.map(|i| (0.5 * traj.xs()[i]).sqrt()).sum::<f64>() / n;
    let floor = 0.5 * expected;
    if !(mean.abs() >= floor) {
        return Err(Error::AmbiguousSign { mean, floor });
    }
    Ok(Sign::of(mean).expect("nonzero mean"))
}

const PHASE_GRID: usize = 64;
const MAX_ITER: usize = 200;

struct Problem<'a> {
    shape: Shape,
    xs: &'a [f64],
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl Problem<'_> {
    fn sum_sq(&self, p: &Params) -> f64 {
        let mut s = 0.0;
        for ((&x, &a), &b) in self.xs.iter().zip(&self.u1).zip(&self.u2) {
            let (m1, m2) = self.shape.eval(x, p, None);
            s += (m1 - a).powi(2) + (m2 - b).powi(2);
        }
        s
    }

    fn normal_equations(&self, p: &Params) -> (Matrix4<f64>, Vector4<f64>, f64) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        let mut ss = 0.0;
        let (mut g1, mut g2) = ([0.0; 4], [0.0; 4]);
        for ((&x, &a), &b) in self.xs.iter().zip(&self.u1).zip(&self.u2) {
            let (m1, m2) = self.shape.eval(x, p, Some((&mut g1, &mut g2)));
            for (g, r) in [(&g1, m1 - a), (&g2, m2 - b)] {
                let gv = Vector4::from_column_slice(g);
                jtj += gv * gv.transpose();
                jtr += gv * r;
                ss += r * r;
            }
        }
        (jtj, jtr, ss)
    }

    /// Levenberg–Marquardt with Marquardt diagonal scaling. Returns the
    /// final point, its sum of squares and whether it converged.
    fn solve(&self, mut p: Params) -> (Params, f64, bool) {
        let mut lambda = 1e-3;
        let (mut jtj, mut jtr, mut ss) = self.normal_equations(&p);
        for _ in 0..MAX_ITER {
            let mut accepted = false;
            while lambda < 1e16 {
                let mut a = jtj;
                for d in 0..4 {
                    a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-jtr));
                let trial = p + step;
                let trial_ss = self.sum_sq(&trial);
                if trial_ss <= ss {
                    let done = ss - trial_ss <= 1e-15 * ss + 1e-300
                        || step.norm() <= 1e-13 * (1.0 + p.norm());
                    p = trial;
                    lambda = (lambda / 10.0).max(1e-12);
                    (jtj, jtr, ss) = self.normal_equations(&p);
                    if done {
                        return (p, ss, true);
                    }
                    accepted = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted {
                // no downhill step at any damping: a stationary point
                return (p, ss, true);
            }
        }
        (p, ss, false)
    }
}

/// Phase maximizing the correlation of `data` with `amp(x) cos(θ(x) + φ)`
/// over a uniform grid.
fn matched_phase(xs: &[f64], data: &[f64], carrier: impl Fn(f64) -> (f64, f64)) -> f64 {
    // Σ d·a cos(θ+φ) = C cos φ − S sin φ
    let (mut c, mut s) = (0.0, 0.0);
    for (&x, &d) in xs.iter().zip(data) {
        let (amp, th) = carrier(x);
        c += d * amp * th.cos();
        s += d * amp * th.sin();
    }
    (0..PHASE_GRID)
        .map(|k| 2.0 * PI * k as f64 / PHASE_GRID as f64)
        .max_by(|a, b| {
            let fa = c * a.cos() - s * a.sin();
            let fb = c * b.cos() - s * b.sin();
            fa.total_cmp(&fb)
        })
        .expect("grid is nonempty")
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x * x;
        n += 1;
    }
    (s / n.max(1) as f64).sqrt()
}

/// Least-squares fit of the large-x model to the samples inside `window`.
pub fn fit_tail(
    traj: &Trajectory,
    window: (f64, f64),
    corrections: Corrections,
) -> Result<FitReport> {
    if traj.params.n() != 2 {
        return Err(Error::UnsupportedDimension {
            got: traj.params.n(),
            expected: 2,
        });
    }
    let eps = traj.params.eps2()?;
    if !(eps > 0.0) {
        return Err(Error::domain(format!("requires eps > 0, got {eps}")));
    }
    let idx = check_window(traj, window)?;
    let sigma = estimate_sigma(traj, window)?;
    let s = sigma.value();
    let xs = &traj.xs()[idx.clone()];
    let problem = Problem {
        shape: Shape {
            sigma: s,
            eps,
            corrections,
        },
        xs,
        u1: idx.clone().map(|i| traj.u(i, 0)).collect(),
        u2: idx.map(|i| traj.u(i, 1)).collect(),
    };

    let periods = (window.1 - window.0) * eps.sqrt() / (2.0 * PI);
    if periods < 20.0 {
        log::warn!("fit window holds only {periods:.1} periods of u2");
    }

    // initial guesses
    let osc1: Vec<f64> = xs
        .iter()
        .zip(&problem.u1)
        .map(|(&x, &u)| s * (u - s * (0.5 * x).sqrt()))
        .collect();
    let rho0 = SQRT_2
        * rms(xs
            .iter()
            .zip(&osc1)
            .map(|(&x, &d)| d * (2.0 * x).powf(0.25)));
    let amp0 = SQRT_2 * rms(problem.u2.iter().copied());
    let phi1_0 = matched_phase(xs, &osc1, |x| {
        (
            (2.0 * x).powf(-0.25),
            (2.0 * SQRT_2 / 3.0) * x.powf(1.5) - 1.5 * rho0 * rho0 * x.ln(),
        )
    });
    let osc2: Vec<f64> = problem.u2.iter().map(|&u| s * u).collect();
    let phi2_0 = matched_phase(xs, &osc2, |x| {
        (
            1.0,
            eps.sqrt() * x - 0.5 * amp0 * amp0 * eps.sqrt() * x.ln(),
        )
    });

    let mut best: Option<(Params, f64, bool)> = None;
    for k1 in 0..4 {
        for k2 in 0..2 {
            let start = Params::new(
                rho0,
                amp0,
                phi1_0 + k1 as f64 * 0.5 * PI,
                phi2_0 + k2 as f64 * PI,
            );
            let cand = problem.solve(start);
            let better = match &best {
                None => true,
                Some((_, ss, conv)) => (cand.2 && !conv) || (cand.2 == *conv && cand.1 < *ss),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let (p, ss, converged) = best.expect("at least one start");

    // (ρ, φ₁) ≡ (−ρ, φ₁ + π) and likewise for (A, φ₂)
    let (mut rho, mut amp, mut phi1, mut phi2) = (p[0], p[1], p[2], p[3]);
    if rho < 0.0 {
        rho = -rho;
        phi1 += PI;
    }
    if amp < 0.0 {
        amp = -amp;
        phi2 += PI;
    }
    let final_ = FinalAsymptotics::from_amplitudes(
        sigma,
        rho,
        amp,
        wrap_phase(phi1),
        wrap_phase(phi2),
        eps,
    )?;
    let report = FitReport {
        final_,
        eps,
        rms_residual: (ss / (2 * xs.len()) as f64).sqrt(),
        window,
        used_corrections: corrections,
    };
    if !converged || !report.rms_residual.is_finite() {
        return Err(Error::FitFailure {
            best: Box::new(report),
        });
    }
    Ok(report)
}
