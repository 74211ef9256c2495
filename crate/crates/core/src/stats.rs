//! Parameter scans and phase-averaged ensembles, through the analytic
//! connection map, the integrate-and-fit pipeline, or both.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::connect::{averaged_actions, connect_forward, AverageMethod, AverageReport};
use crate::error::{Error, Result};
use crate::fit::{default_window, fit_tail, Corrections, FitReport};
use crate::model::{EquationParams, FinalAsymptotics, InitialAsymptotics};
use crate::ode::{integrate, seed_initial_state_with, IntegrationOptions, SeedOrder};
use crate::sampling::{phase_pair, Moments};

/// Smallest `ε` accepted by scans; the `u₂` oscillation is too slow to fit below it.
pub const EPS_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Analytic,
    Numeric,
    Both,
}

impl Pipeline {
    fn analytic(self) -> bool {
        matches!(self, Pipeline::Analytic | Pipeline::Both)
    }

    fn numeric(self) -> bool {
        matches!(self, Pipeline::Numeric | Pipeline::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Eps,
    Phi1,
    /// `α₁ = α₂ = √(2𝓘)`.
    Action,
}

/// Uniform grid of `n` points on `[lo, hi]`, or on the open interval with the
/// endpoints dropped (`k(hi − lo)/(n + 1)` offsets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub include_ends: bool,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let (lo, hi, n) = (self.lo, self.hi, self.n);
        if self.include_ends {
            if n == 1 {
                return vec![lo];
            }
            (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect()
        } else {
            (1..=n)
                .map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64)
                .collect()
        }
    }
}

/// Numerical pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSettings {
    pub interval: (f64, f64),
    pub options: IntegrationOptions,
    pub corrections: Corrections,
    pub seed_order: SeedOrder,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            interval: (-500.0, 500.0),
            options: IntegrationOptions::default(),
            corrections: Corrections::NONE,
            seed_order: SeedOrder::Leading,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub sweep: SweepVar,
    pub grid: Grid,
    /// Values of the non-swept inputs (`α`, `φ`).
    pub base: InitialAsymptotics,
    /// `ε` when not swept.
    pub eps: f64,
    pub pipeline: Pipeline,
    pub numeric: NumericSettings,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.n == 0 {
            return Err(Error::domain("scan grid is empty"));
        }
        if !(self.grid.lo.is_finite() && self.grid.hi.is_finite() && self.grid.lo <= self.grid.hi) {
            return Err(Error::domain(format!(
                "scan range must be finite with lo <= hi, got [{}, {}]",
                self.grid.lo, self.grid.hi
            )));
        }
        if self.base.n() != 2 {
            return Err(Error::UnsupportedDimension {
                got: self.base.n(),
                expected: 2,
            });
        }
        let eps_lo = match self.sweep {
            SweepVar::Eps => self.grid.points()[0],
            _ => self.eps,
        };
        if !(eps_lo >= EPS_FLOOR) {
            return Err(Error::domain(format!(
                "eps must be >= {EPS_FLOOR}, got {eps_lo}"
            )));
        }
        if self.sweep == SweepVar::Action && !(self.grid.points()[0] > 0.0) {
            return Err(Error::domain("swept action must be > 0"));
        }
        if self.pipeline.numeric() {
            self.numeric.options.validate()?;
            let (a, b) = self.numeric.interval;
            if !(a < 0.0 && b > 0.0) {
                return Err(Error::domain(format!(
                    "integration interval must straddle 0, got ({a}, {b})"
                )));
            }
        }
        Ok(())
    }

    fn point(&self, value: f64) -> Result<(InitialAsymptotics, EquationParams)> {
        let a = self.base.alpha();
        let p = self.base.phi();
        let (init, eps) = match self.sweep {
            SweepVar::Eps => (self.base.clone(), value),
            SweepVar::Phi1 => (InitialAsymptotics::two(a[0], a[1], value, p[1])?, self.eps),
            SweepVar::Action => {
                let alpha = (2.0 * value).sqrt();
                (InitialAsymptotics::two(alpha, alpha, p[0], p[1])?, self.eps)
            }
        };
        Ok((init, EquationParams::two(eps)?))
    }
}

/// `|Δ|` between the numerical and analytic final parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub i1: f64,
    pub i2: f64,
    pub sin_phi1: f64,
    pub sin_phi2: f64,
    pub sigma_agrees: bool,
}

impl Deltas {
    pub fn between(numeric: &FinalAsymptotics, analytic: &FinalAsymptotics) -> Self {
        Self {
            i1: (numeric.i1 - analytic.i1).abs(),
            i2: (numeric.i2 - analytic.i2).abs(),
            sin_phi1: (numeric.phi1.sin() - analytic.phi1.sin()).abs(),
            sin_phi2: (numeric.phi2.sin() - analytic.phi2.sin()).abs(),
            sigma_agrees: numeric.sigma == analytic.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub value: f64,
    pub init: InitialAsymptotics,
    pub eps: f64,
    pub analytic: Option<FinalAsymptotics>,
    pub numeric: Option<FitReport>,
    pub deltas: Option<Deltas>,
    /// Errors met at this point, e.g. a separatrix crossing.
    pub flags: Vec<String>,
}

impl ScanRow {
    pub const CSV_HEADER: [&'static str; 28] = [
        "value",
        "eps",
        "alpha1",
        "alpha2",
        "phi1_in",
        "phi2_in",
        "sigma",
        "I1",
        "I2",
        "sin_phi1",
        "cos_phi1",
        "sin_phi2",
        "cos_phi2",
        "num_sigma",
        "num_I1",
        "num_I2",
        "num_sin_phi1",
        "num_cos_phi1",
        "num_sin_phi2",
        "num_cos_phi2",
        "rms_residual",
        "dI1",
        "dI2",
        "dsin_phi1",
        "dsin_phi2",
        "sigma_agrees",
        "flagged",
        "flags",
    ];

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }

    pub fn csv_record(&self) -> Vec<String> {
        use crate::io::{fmt_f64, fmt_opt};
        let a = self.init.alpha();
        let p = self.init.phi();
        let mut rec: Vec<String> = [self.value, self.eps, a[0], a[1], p[0], p[1]]
            .into_iter()
            .map(fmt_f64)
            .collect();
        let fin = |f: Option<&FinalAsymptotics>| -> Vec<String> {
            [
                f.map(|f| f.sigma.value()),
                f.map(|f| f.i1),
                f.map(|f| f.i2),
                f.map(|f| f.phi1.sin()),
                f.map(|f| f.phi1.cos()),
                f.map(|f| f.phi2.sin()),
                f.map(|f| f.phi2.cos()),
            ]
            .into_iter()
            .map(fmt_opt)
            .collect()
        };
        rec.extend(fin(self.analytic.as_ref()));
        rec.extend(fin(self.numeric.as_ref().map(|r| &r.final_)));
        rec.push(fmt_opt(self.numeric.as_ref().map(|r| r.rms_residual)));
        let d = self.deltas.as_ref();
        rec.extend(
            [
                d.map(|d| d.i1),
                d.map(|d| d.i2),
                d.map(|d| d.sin_phi1),
                d.map(|d| d.sin_phi2),
            ]
            .into_iter()
            .map(fmt_opt),
        );
        rec.push(d.map(|d| d.sigma_agrees.to_string()).unwrap_or_default());
        rec.push(self.is_flagged().to_string());
        rec.push(self.flags.join("; "));
        rec
    }
}

/// Seed at the left end of `settings.interval`, integrate to the right end,
/// fit the default window.
pub fn numeric_final(
    init: &InitialAsymptotics,
    params: &EquationParams,
    settings: &NumericSettings,
) -> Result<FitReport> {
    let (x0, x1) = settings.interval;
    let s0 = seed_initial_state_with(init, params, x0, settings.seed_order)?;
    let traj = integrate(&s0, x1, params, &settings.options)?;
    let window = default_window(&traj)?;
    fit_tail(&traj, window, settings.corrections)
}

fn scan_point(spec: &ScanSpec, value: f64) -> ScanRow {
    let mut flags = Vec::new();
    let (init, params) = match spec.point(value) {
        Ok(v) => v,
        Err(e) => {
            return ScanRow {
                value,
                init: spec.base.clone(),
                eps: spec.eps,
                analytic: None,
                numeric: None,
                deltas: None,
                flags: vec![e.to_string()],
            }
        }
    };
    let eps = params.eps()[1];
    let analytic = if spec.pipeline.analytic() {
        match connect_forward(&init, &params) {
            Ok(c) => Some(c.final_),
            Err(e) => {
                flags.push(format!("analytic: {e}"));
                None
            }
        }
    } else {
        None
    };
    let numeric = if spec.pipeline.numeric() {
        match numeric_final(&init, &params, &spec.numeric) {
            Ok(r) => Some(r),
            Err(e) => {
                flags.push(format!("numeric: {e}"));
                None
            }
        }
    } else {
        None
    };
    let deltas = match (&analytic, &numeric) {
        (Some(a), Some(n)) => Some(Deltas::between(&n.final_, a)),
        _ => None,
    };
    ScanRow {
        value,
        init,
        eps,
        analytic,
        numeric,
        deltas,
        flags,
    }
}

/// One row per grid point, in grid order. Failures at individual points are
/// recorded in the row flags and never abort the scan.
pub fn run_scan(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    Ok(spec
        .grid
        .points()
        .into_par_iter()
        .map(|v| scan_point(spec, v))
        .collect())
}

/// Largest initial action accepted by [`run_vacuum_decay`].
pub const MAX_VACUUM_ACTION: f64 = 0.1;

/// Phase average of the final actions for `𝓘₁ = 𝓘₂ = 𝓘`.
pub fn run_vacuum_decay(
    initial_action: f64,
    eps: f64,
    n_samples: usize,
    pipeline: Pipeline,
    seed: u64,
    numeric: &NumericSettings,
) -> Result<AverageReport> {
    if !(initial_action > 0.0 && initial_action <= MAX_VACUUM_ACTION) {
        return Err(Error::domain(format!(
            "initial action must be in (0, {MAX_VACUUM_ACTION}], got {initial_action}"
        )));
    }
    let params = EquationParams::two(eps)?;
    match pipeline {
        Pipeline::Analytic => averaged_actions(
            initial_action,
            &params,
            AverageMethod::MonteCarlo,
            n_samples,
            seed,
        ),
        Pipeline::Numeric | Pipeline::Both => {
            if n_samples == 0 {
                return Err(Error::domain("n_samples must be >= 1"));
            }
            numeric.options.validate()?;
            let alpha = (2.0 * initial_action).sqrt();
            let results: Vec<Result<(f64, f64)>> = (0..n_samples as u64)
                .into_par_iter()
                .map(|i| {
                    let (f1, f2) = phase_pair(seed, i);
                    let init = InitialAsymptotics::two(alpha, alpha, f1, f2)?;
                    let r = numeric_final(&init, &params, numeric)?;
                    Ok((r.final_.i1, r.final_.i2))
                })
                .collect();
            let (mut m1, mut m2) = (Moments::default(), Moments::default());
            let mut skipped = 0;
            for r in results {
                match r {
                    Ok((a, b)) => {
                        m1.push(a);
                        m2.push(b);
                    }
                    Err(e) if e.is_numerical() => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            if m1.count == 0 {
                return Err(Error::Internal("every sample failed".into()));
            }
            Ok(AverageReport {
                mean_i1: m1.mean,
                mean_i2: m2.mean,
                std_err_i1: m1.std_err(),
                std_err_i2: m2.std_err(),
                n_samples: m1.count,
                n_skipped: skipped,
                method: AverageMethod::MonteCarlo,
            })
        }
    }
}

/// Raw analytic samples `(φ₁, φ₂, I₁, I₂)` of the vacuum-decay ensemble;
/// separatrix-singular draws are left out.
pub fn vacuum_samples(
    initial_action: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<[f64; 4]>> {
    let params = EquationParams::two(eps)?;
    let alpha = (2.0 * initial_action).sqrt();
    let mut out = Vec::with_capacity(n_samples);
    for i in 0..n_samples as u64 {
        let (f1, f2) = phase_pair(seed, i);
        let init = InitialAsymptotics::two(alpha, alpha, f1, f2)?;
        match connect_forward(&init, &params) {
            Ok(c) => out.push([f1, f2, c.final_.i1, c.final_.i2]),
            Err(Error::SeparatrixSingular { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Phase scan default: `φ₁` over the open interval `(0, π)`.
pub fn phi1_grid(n: usize) -> Grid {
    Grid {
        lo: 0.0,
        hi: PI,
        n,
        include_ends: false,
    }
}
