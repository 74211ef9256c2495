//! Command-line interface. Exit status: 0 on success, 2 for rejected input,
//! 3 for numerical failures.

mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub use config::ConfigFile;

use crate::connect::{
    averaged_actions, closed_form_phi2, connect_forward, spanning_tree_constant_c1, AverageMethod,
    C1_EXACT,
};
use crate::error::{Error, Result};
use crate::fit::{default_window, final_asymptote_model, fit_tail, Corrections};
use crate::io::{
    fmt_f64, read_trajectory, write_fit_report, write_spectrum, write_trajectory, writer,
};
use crate::lax::{spectrum_scan, zero_curvature_residual};
use crate::model::{EquationParams, FinalAsymptotics, InitialAsymptotics, Sign};
use crate::ode::{
    integrate, seed_initial_state, seed_initial_state_with, IntegrationOptions, SeedOrder,
};
use crate::sampling::phase_pair;
use crate::stats::{
    run_scan, run_vacuum_decay, vacuum_samples, Grid, NumericSettings, Pipeline, ScanRow, ScanSpec,
    SweepVar,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "painleve",
    version,
    about = "Two-component Painleve-II connection problem"
)]
pub struct Cli {
    /// Worker threads (falls back to PAINLEVE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` file with defaults for any flag of the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Read input angles in degrees.
    #[arg(long, global = true)]
    degrees: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic connection map; prints one CSV row.
    Connect(ConnectArgs),
    /// Seed at x0 < 0 and integrate; writes the trajectory CSV.
    Simulate(SimulateArgs),
    /// Fit the large-x model to a trajectory CSV.
    Fit(FitArgs),
    /// Parameter scan over eps, phi1 or the initial action.
    Scan(ScanArgs),
    /// Phase-averaged final actions for equal initial actions.
    Average(AverageArgs),
    /// Zero-curvature residuals along a trajectory.
    LaxCheck(LaxCheckArgs),
    /// Eigenvalues of H(t, x) along a t-scan.
    Spectrum(SpectrumArgs),
    /// Midpoint-rule value of the constant c1.
    C1(C1Args),
}

#[derive(Debug, Args)]
struct InitialArgs {
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi2: Option<f64>,
}

#[derive(Debug, Args)]
struct IntegrationArgs {
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x1: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long)]
    dense_dx: Option<f64>,
    /// Include the near-resonant coupling terms in the seed.
    #[arg(long)]
    refined_seed: bool,
}

#[derive(Debug, Args)]
struct CorrectionArgs {
    /// Regular-part and phi1 finite-x corrections in the fitted model.
    #[arg(long)]
    corrections: bool,
    /// Also the O(x^-1/2) shift of phi2 (implies --corrections).
    #[arg(long)]
    sideband: bool,
}

#[derive(Debug, Args)]
struct OutputArg {
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConnectArgs {
    #[command(flatten)]
    init: InitialArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    init: InitialArgs,
    #[command(flatten)]
    integ: IntegrationArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Trajectory CSV (`-` for stdin).
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_hi: Option<f64>,
    #[command(flatten)]
    corr: CorrectionArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepArg {
    Eps,
    Phi1,
    Action,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PipelineArg {
    Analytic,
    Numeric,
    Both,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long, value_enum)]
    sweep: Option<SweepArg>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Drop the range endpoints.
    #[arg(long)]
    open: bool,
    #[arg(long, value_enum)]
    pipeline: Option<PipelineArg>,
    #[command(flatten)]
    corr: CorrectionArgs,
    #[command(flatten)]
    init: InitialArgs,
    #[command(flatten)]
    integ: IntegrationArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Args)]
struct AverageArgs {
    /// Initial action of each mode.
    #[arg(long)]
    action: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    pipeline: Option<PipelineArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Also write the raw analytic samples to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[command(flatten)]
    corr: CorrectionArgs,
    #[command(flatten)]
    integ: IntegrationArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct LaxCheckArgs {
    /// Trajectory CSV (`-` for stdin).
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_hi: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Add |x|^{3/2}(4 tau^2 + 1) to the spectrum.
    #[arg(long)]
    shift: bool,
    /// Large-x data (x > 0): sigma, rho, A and the phases.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    amp: Option<f64>,
    #[command(flatten)]
    init: InitialArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct C1Args {
    /// Midpoint nodes per axis.
    #[arg(long)]
    resolution: Option<usize>,
    #[command(flatten)]
    out: OutputArg,
}

struct Ctx {
    cfg: ConfigFile,
    degrees: bool,
}

impl Ctx {
    fn angle(&self, v: f64) -> f64 {
        if self.degrees {
            v * PI / 180.0
        } else {
            v
        }
    }

    fn positive_eps(&self, flag: Option<f64>, default: Option<f64>) -> Result<f64> {
        let eps = match default {
            Some(d) => self.cfg.get("eps", flag, d)?,
            None => self.cfg.require("eps", flag)?,
        };
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::domain(format!(
                "eps must satisfy eps > 0, got {eps}"
            )));
        }
        Ok(eps)
    }

    fn initial(&self, a: &InitialArgs) -> Result<(InitialAsymptotics, EquationParams)> {
        let eps = self.positive_eps(a.eps, None)?;
        let init = InitialAsymptotics::two(
            self.cfg.require("alpha1", a.alpha1)?,
            self.cfg.require("alpha2", a.alpha2)?,
            self.angle(self.cfg.require("phi1", a.phi1)?),
            self.angle(self.cfg.require("phi2", a.phi2)?),
        )?;
        Ok((init, EquationParams::two(eps)?))
    }

    fn corrections(&self, a: &CorrectionArgs) -> Result<Corrections> {
        let base = self.cfg.switch("corrections", a.corrections)?;
        Ok(if self.cfg.switch("sideband", a.sideband)? {
            Corrections::FULL
        } else if base {
            Corrections::ALL
        } else {
            Corrections::NONE
        })
    }

    fn seed_order(&self, a: &IntegrationArgs) -> Result<SeedOrder> {
        Ok(if self.cfg.switch("refined-seed", a.refined_seed)? {
            SeedOrder::NearResonant
        } else {
            SeedOrder::Leading
        })
    }

    fn integration(&self, a: &IntegrationArgs) -> Result<(f64, f64, IntegrationOptions)> {
        let d = IntegrationOptions::default();
        let opts = IntegrationOptions {
            abs_tol: self.cfg.get("abs-tol", a.abs_tol, d.abs_tol)?,
            rel_tol: self.cfg.get("rel-tol", a.rel_tol, d.rel_tol)?,
            max_step: self.cfg.get("max-step", a.max_step, d.max_step)?,
            dense_output_dx: self.cfg.get("dense-dx", a.dense_dx, d.dense_output_dx)?,
        };
        opts.validate()?;
        let x0 = self.cfg.get("x0", a.x0, -500.0)?;
        let x1 = self.cfg.get("x1", a.x1, 500.0)?;
        if !(x0 < 0.0 && x1 > x0) {
            return Err(Error::domain(format!(
                "need x0 < 0 and x1 > x0, got ({x0}, {x1})"
            )));
        }
        Ok((x0, x1, opts))
    }

    fn pipeline(&self, flag: Option<PipelineArg>, default: &str) -> Result<Pipeline> {
        let name = match flag {
            Some(PipelineArg::Analytic) => "analytic".to_string(),
            Some(PipelineArg::Numeric) => "numeric".to_string(),
            Some(PipelineArg::Both) => "both".to_string(),
            None => self.cfg.get("pipeline", None, default.to_string())?,
        };
        match name.as_str() {
            "analytic" => Ok(Pipeline::Analytic),
            "numeric" => Ok(Pipeline::Numeric),
            "both" => Ok(Pipeline::Both),
            other => Err(Error::domain(format!("unknown pipeline {other:?}"))),
        }
    }
}

fn open_output(out: &OutputArg) -> Result<Box<dyn Write>> {
    Ok(match &out.output {
        Some(p) if p.as_os_str() != "-" => Box::new(BufWriter::new(File::create(p)?)),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: &Option<PathBuf>) -> Result<Box<dyn io::Read>> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => Box::new(File::open(p)?),
        _ => Box::new(io::stdin().lock()),
    })
}

fn csv_out(out: &OutputArg, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(open_output(out)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_connect(ctx: &Ctx, a: &ConnectArgs) -> Result<()> {
    let (init, params) = ctx.initial(&a.init)?;
    ctx.cfg.finish()?;
    let c = connect_forward(&init, &params)?;
    for w in &c.warnings {
        log::warn!("{w:?}");
    }
    let f = &c.final_;
    let eps = params.eps()[1];
    let closed = if f.i2.is_finite() {
        closed_form_phi2(&c.constants, f.i2, eps)?
    } else {
        f64::NAN
    };
    let row = [
        eps,
        init.alpha()[0],
        init.alpha()[1],
        init.phi()[0],
        init.phi()[1],
        c.constants.p1,
        c.constants.p2,
        c.constants.big_phi1,
        c.constants.big_phi2,
        f.sigma.value(),
        f.i1,
        f.i2,
        f.phi1,
        f.phi2,
        f.phi1.sin(),
        f.phi1.cos(),
        f.phi2.sin(),
        f.phi2.cos(),
        closed,
    ]
    .map(fmt_f64)
    .to_vec();
    csv_out(
        &a.out,
        &[
            "eps",
            "alpha1",
            "alpha2",
            "phi1_in",
            "phi2_in",
            "p1",
            "p2",
            "Phi1",
            "Phi2",
            "sigma",
            "I1",
            "I2",
            "phi1",
            "phi2",
            "sin_phi1",
            "cos_phi1",
            "sin_phi2",
            "cos_phi2",
            "phi2_closed_form",
        ],
        &[row],
    )
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let (init, params) = ctx.initial(&a.init)?;
    let (x0, x1, opts) = ctx.integration(&a.integ)?;
    let order = ctx.seed_order(&a.integ)?;
    ctx.cfg.finish()?;
    let s0 = seed_initial_state_with(&init, &params, x0, order)?;
    let traj = integrate(&s0, x1, &params, &opts)?;
    write_trajectory(&traj, open_output(&a.out)?)
}

fn cmd_fit(ctx: &Ctx, a: &FitArgs) -> Result<()> {
    let eps = ctx.positive_eps(a.eps, None)?;
    let lo = ctx.cfg.opt("x-lo", a.x_lo)?;
    let hi = ctx.cfg.opt("x-hi", a.x_hi)?;
    let corrections = ctx.corrections(&a.corr)?;
    let input = ctx.cfg.opt("input", a.input.clone())?;
    ctx.cfg.finish()?;
    let traj = read_trajectory(open_input(&input)?, EquationParams::two(eps)?)?;
    let (dlo, dhi) = default_window(&traj)?;
    let report = fit_tail(&traj, (lo.unwrap_or(dlo), hi.unwrap_or(dhi)), corrections)?;
    write_fit_report(&report, open_output(&a.out)?)
}

fn cmd_scan(ctx: &Ctx, a: &ScanArgs) -> Result<()> {
    let sweep_name = match a.sweep {
        Some(SweepArg::Eps) => "eps".to_string(),
        Some(SweepArg::Phi1) => "phi1".to_string(),
        Some(SweepArg::Action) => "action".to_string(),
        None => ctx.cfg.require("sweep", None::<String>)?,
    };
    let sweep = match sweep_name.as_str() {
        "eps" => SweepVar::Eps,
        "phi1" => SweepVar::Phi1,
        "action" => SweepVar::Action,
        other => return Err(Error::domain(format!("unknown sweep {other:?}"))),
    };
    let (mut lo, mut hi) = (ctx.cfg.require("lo", a.lo)?, ctx.cfg.require("hi", a.hi)?);
    if sweep == SweepVar::Phi1 {
        lo = ctx.angle(lo);
        hi = ctx.angle(hi);
    }
    let grid = Grid {
        lo,
        hi,
        n: ctx.cfg.get("points", a.points, 20)?,
        include_ends: !ctx.cfg.switch("open", a.open)?,
    };
    let pipeline = ctx.pipeline(a.pipeline, "analytic")?;
    let eps = match sweep {
        SweepVar::Eps => ctx.cfg.get("eps", a.init.eps, 1.0)?,
        _ => ctx.positive_eps(a.init.eps, None)?,
    };
    let swept = |name: &str, v: Option<f64>| -> Result<f64> {
        let needed = match sweep {
            SweepVar::Phi1 => name != "phi1",
            SweepVar::Action => name == "phi1" || name == "phi2",
            SweepVar::Eps => true,
        };
        if needed {
            ctx.cfg.require(name, v)
        } else {
            ctx.cfg.get(name, v, 0.0)
        }
    };
    let base = InitialAsymptotics::two(
        swept("alpha1", a.init.alpha1)?,
        swept("alpha2", a.init.alpha2)?,
        ctx.angle(swept("phi1", a.init.phi1)?),
        ctx.angle(swept("phi2", a.init.phi2)?),
    )?;
    let numeric = if matches!(pipeline, Pipeline::Analytic) {
        NumericSettings::default()
    } else {
        let (x0, x1, options) = ctx.integration(&a.integ)?;
        NumericSettings {
            interval: (x0, x1),
            options,
            corrections: ctx.corrections(&a.corr)?,
            seed_order: ctx.seed_order(&a.integ)?,
        }
    };
    ctx.cfg.finish()?;
    let spec = ScanSpec {
        sweep,
        grid,
        base,
        eps,
        pipeline,
        numeric,
    };
    let rows = run_scan(&spec)?;
    let flagged = rows.iter().filter(|r| r.is_flagged()).count();
    if flagged > 0 {
        log::warn!("{flagged} of {} scan rows flagged", rows.len());
    }
    let recs: Vec<Vec<String>> = rows.iter().map(ScanRow::csv_record).collect();
    csv_out(&a.out, &ScanRow::CSV_HEADER, &recs)
}

fn cmd_average(ctx: &Ctx, a: &AverageArgs) -> Result<()> {
    let action = ctx.cfg.require("action", a.action)?;
    let eps = ctx.positive_eps(a.eps, Some(1.0))?;
    let samples = ctx.cfg.get("samples", a.samples, 1_000_000)?;
    let seed = ctx.cfg.get("seed", a.seed, 0)?;
    let pipeline = ctx.pipeline(a.pipeline, "analytic")?;
    let method = match a.method {
        Some(MethodArg::MonteCarlo) => AverageMethod::MonteCarlo,
        Some(MethodArg::Quadrature) => AverageMethod::TensorQuadrature,
        None => match ctx
            .cfg
            .get("method", None, "monte-carlo".to_string())?
            .as_str()
        {
            "monte-carlo" => AverageMethod::MonteCarlo,
            "quadrature" => AverageMethod::TensorQuadrature,
            other => return Err(Error::domain(format!("unknown method {other:?}"))),
        },
    };
    let dump = ctx.cfg.opt("dump", a.dump.clone())?;
    let numeric = if matches!(pipeline, Pipeline::Analytic) {
        NumericSettings::default()
    } else {
        let (x0, x1, options) = ctx.integration(&a.integ)?;
        NumericSettings {
            interval: (x0, x1),
            options,
            corrections: ctx.corrections(&a.corr)?,
            seed_order: ctx.seed_order(&a.integ)?,
        }
    };
    ctx.cfg.finish()?;
    let report = match (pipeline, method) {
        (Pipeline::Analytic, AverageMethod::TensorQuadrature) => {
            if !(action > 0.0 && action <= crate::stats::MAX_VACUUM_ACTION) {
                return Err(Error::domain(format!(
                    "action must be in (0, 0.1], got {action}"
                )));
            }
            averaged_actions(action, &EquationParams::two(eps)?, method, samples, seed)?
        }
        _ => run_vacuum_decay(action, eps, samples, pipeline, seed, &numeric)?,
    };
    if let Some(path) = dump {
        let rows: Vec<Vec<String>> = vacuum_samples(action, eps, samples, seed)?
            .into_iter()
            .map(|r| r.map(fmt_f64).to_vec())
            .collect();
        csv_out(
            &OutputArg { output: Some(path) },
            &["phi1_in", "phi2_in", "I1", "I2"],
            &rows,
        )?;
    }
    let method_name = match report.method {
        AverageMethod::MonteCarlo => "monte-carlo",
        AverageMethod::TensorQuadrature => "quadrature",
    };
    let mut row: Vec<String> = [
        action,
        eps,
        report.mean_i1,
        report.std_err_i1,
        report.mean_i2,
        report.std_err_i2,
    ]
    .map(fmt_f64)
    .to_vec();
    row.push(report.n_samples.to_string());
    row.push(report.n_skipped.to_string());
    row.push(method_name.to_string());
    csv_out(
        &a.out,
        &[
            "action", "eps", "mean_I1", "err_I1", "mean_I2", "err_I2", "samples", "skipped",
            "method",
        ],
        &[row],
    )
}

fn cmd_lax_check(ctx: &Ctx, a: &LaxCheckArgs) -> Result<()> {
    let eps = ctx.positive_eps(a.eps, None)?;
    let points = ctx.cfg.get("points", a.points, 100)?;
    let seed = ctx.cfg.get("seed", a.seed, 0)?;
    let t_max = ctx.cfg.get("t-max", a.t_max, 3.0)?;
    let input = ctx.cfg.opt("input", a.input.clone())?;
    ctx.cfg.finish()?;
    if points == 0 || !(t_max >= 0.0) {
        return Err(Error::domain("need points >= 1 and t-max >= 0"));
    }
    let params = EquationParams::two(eps)?;
    let traj = read_trajectory(open_input(&input)?, params.clone())?;
    if traj.is_empty() {
        return Err(Error::domain("trajectory is empty"));
    }
    let (mut max_norm, mut max_entry, mut sum) = (0.0f64, 0.0f64, 0.0);
    for i in 0..points as u64 {
        let (r1, r2) = phase_pair(seed, i);
        let idx = ((r1 / (2.0 * PI)) * traj.len() as f64) as usize % traj.len();
        let t = t_max * (r2 / PI - 1.0);
        let s = traj.state(idx);
        let r = zero_curvature_residual(t, s.x, &s.u, &s.du, &params)?;
        max_norm = max_norm.max(r.frobenius_norm);
        max_entry = max_entry.max(r.max_entry);
        sum += r.frobenius_norm;
    }
    let mut row = vec![points.to_string()];
    row.extend([max_norm, sum / points as f64, max_entry].map(fmt_f64));
    csv_out(
        &a.out,
        &["points", "max_frobenius", "mean_frobenius", "max_entry"],
        &[row],
    )
}

/// `(u, u')` of the large-x model at `x`, with `u'` by central differences.
pub fn model_state(
    x: f64,
    fin: &FinalAsymptotics,
    params: &EquationParams,
) -> Result<([f64; 2], [f64; 2])> {
    let (u1, u2) = final_asymptote_model(x, fin, params, Corrections::NONE)?;
    let h = 1e-5 * x.max(1.0);
    let (p1, p2) = final_asymptote_model(x + h, fin, params, Corrections::NONE)?;
    let (m1, m2) = final_asymptote_model(x - h, fin, params, Corrections::NONE)?;
    Ok(([u1, u2], [(p1 - m1) / (2.0 * h), (p2 - m2) / (2.0 * h)]))
}

fn cmd_spectrum(ctx: &Ctx, a: &SpectrumArgs) -> Result<()> {
    let x = ctx.cfg.require("x", a.x)?;
    let t_lo = ctx.cfg.get("t-lo", a.t_lo, -4.0)?;
    let t_hi = ctx.cfg.get("t-hi", a.t_hi, 4.0)?;
    let n = ctx.cfg.get("points", a.points, 801)?;
    let shift = ctx.cfg.switch("shift", a.shift)?;
    if !(t_lo < t_hi) || n < 2 || !x.is_finite() || x == 0.0 {
        return Err(Error::domain(
            "need t-lo < t-hi, points >= 2 and finite x != 0",
        ));
    }
    let (u, du, params) = if x > 0.0 {
        let eps = ctx.positive_eps(a.init.eps, None)?;
        let sigma = Sign::of(ctx.cfg.require("sigma", a.sigma)?)
            .ok_or_else(|| Error::domain("sigma must be +1 or -1"))?;
        let params = EquationParams::two(eps)?;
        let fin = FinalAsymptotics::from_amplitudes(
            sigma,
            ctx.cfg.require("rho", a.rho)?,
            ctx.cfg.require("amp", a.amp)?,
            ctx.angle(ctx.cfg.get("phi1", a.init.phi1, 0.0)?),
            ctx.angle(ctx.cfg.get("phi2", a.init.phi2, 0.0)?),
            eps,
        )?;
        let (u, du) = model_state(x, &fin, &params)?;
        (u, du, params)
    } else {
        let (init, params) = ctx.initial(&a.init)?;
        let s = seed_initial_state(&init, &params, x)?;
        ([s.u[0], s.u[1]], [s.du[0], s.du[1]], params)
    };
    ctx.cfg.finish()?;
    let ts: Vec<f64> = (0..n)
        .map(|k| t_lo + (t_hi - t_lo) * k as f64 / (n - 1) as f64)
        .collect();
    let rows = spectrum_scan(x, &u, &du, &params, &ts, shift)?;
    write_spectrum(&rows, open_output(&a.out)?)
}

fn cmd_c1(ctx: &Ctx, a: &C1Args) -> Result<()> {
    let res = ctx.cfg.get("resolution", a.resolution, 4096)?;
    ctx.cfg.finish()?;
    let c1 = spanning_tree_constant_c1(res)?;
    let mut row = vec![res.to_string()];
    row.extend([c1, C1_EXACT, c1 - C1_EXACT].map(fmt_f64));
    csv_out(&a.out, &["resolution", "c1", "limit", "difference"], &[row])
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("PAINLEVE_THREADS") {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| {
                Error::domain(format!("PAINLEVE_THREADS must be an integer, got {v:?}"))
            })
        }
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Error::domain("--threads must be >= 1"));
        }
        // fails only if a pool already exists, e.g. when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let ctx = Ctx {
        cfg,
        degrees: cli.degrees,
    };
    match &cli.command {
        Command::Connect(a) => cmd_connect(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Scan(a) => cmd_scan(&ctx, a),
        Command::Average(a) => cmd_average(&ctx, a),
        Command::LaxCheck(a) => cmd_lax_check(&ctx, a),
        Command::Spectrum(a) => cmd_spectrum(&ctx, a),
        Command::C1(a) => cmd_c1(&ctx, a),
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            }
        }
    }
}
