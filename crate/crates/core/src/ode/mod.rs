//! Integration of `u_k'' = x u_k − 2u_k Σ_j u_j² − ε_k u_k` with asymptotic
//! seeding at large negative x.

mod dop853;
pub mod tableau;

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::model::{
    EquationParams, InitialAsymptotics, Trajectory, TrajectoryMeta, TrajectoryState,
};

/// Samples with `|u_k|` above this abort the integration; true solutions grow
/// only like `√x`.
pub const BLOWUP_LIMIT: f64 = 1e3;

/// Seeding closer to the origin than this is allowed but inaccurate.
pub const SEED_WARN_X: f64 = -50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    /// Upper bound on the sample spacing; the spacing also shrinks so the
    /// fastest local oscillation advances less than π/8 between samples.
    pub dense_output_dx: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_step: 1.0,
            dense_output_dx: 0.05,
        }
    }
}

impl IntegrationOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(Error::domain(format!(
                    "{name} must be in (0, 1e-3], got {v}"
                )));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::domain(format!(
                "max_step must be > 0, got {}",
                self.max_step
            )));
        }
        if !(self.dense_output_dx > 0.0 && self.dense_output_dx.is_finite()) {
            return Err(Error::domain(format!(
                "dense_output_dx must be finite and > 0, got {}",
                self.dense_output_dx
            )));
        }
        Ok(())
    }
}

/// Second derivatives `u''` at `x`.
pub fn second_derivative(x: f64, u: &[f64], params: &EquationParams, out: &mut [f64]) {
    let norm2: f64 = u.iter().map(|v| v * v).sum();
    for ((o, &uk), &ek) in out.iter_mut().zip(u).zip(params.eps()) {
        *o = x * uk - 2.0 * uk * norm2 - ek * uk;
    }
}

/// First-order form on the flat layout `y = [u.., u'..]`.
pub fn rhs_flat(x: f64, y: &[f64], params: &EquationParams, dy: &mut [f64]) {
    let n = params.n();
    dy[..n].copy_from_slice(&y[n..]);
    second_derivative(x, &y[..n], params, &mut dy[n..]);
}

/// `(u', u'')` at the given state.
pub fn rhs(state: &TrajectoryState, params: &EquationParams) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.n() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} components, parameters {}",
            state.n(),
            params.n()
        )));
    }
    let mut ddu = vec![0.0; state.n()];
    second_derivative(state.x, &state.u, params, &mut ddu);
    Ok((state.du.clone(), ddu))
}

/// Which terms of the `x → −∞` expansion enter the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedOrder {
    /// The two-term expansion with logarithmic phases only.
    #[default]
    Leading,
    /// Adds the first-order response to the near-resonant coupling terms
    /// with phases `2θ₂ − θ₁` and `2θ₁ − θ₂`, whose frequency mismatch is only
    /// `~ε/√|x|`. Their effect on `u` is `O(α²/(ε√|x|))` relative, far above the
    /// non-resonant `O(|x|^{-3/2})` terms.
    NearResonant,
}

/// State at `x0 < 0` from the `x → −∞` expansion.
pub fn seed_initial_state(
    init: &InitialAsymptotics,
    params: &EquationParams,
    x0: f64,
) -> Result<TrajectoryState> {
    seed_initial_state_with(init, params, x0, SeedOrder::Leading)
}

pub fn seed_initial_state_with(
    init: &InitialAsymptotics,
    params: &EquationParams,
    x0: f64,
    order: SeedOrder,
) -> Result<TrajectoryState> {
    params.require_n(2)?;
    if init.n() != 2 {
        return Err(Error::UnsupportedDimension {
            got: init.n(),
            expected: 2,
        });
    }
    if !(x0 < 0.0) || !x0.is_finite() {
        return Err(Error::domain(format!(
            "seed point must be finite and < 0, got {x0}"
        )));
    }
    if x0 > SEED_WARN_X {
        log::warn!("seeding at x0 = {x0}: the asymptotic expansion is inaccurate this close to 0");
    }
    let eps = params.eps2()?;
    if order == SeedOrder::NearResonant && !(eps > 0.0) {
        return Err(Error::domain("near-resonant seed terms need eps > 0"));
    }
    let s = -x0;
    let alpha = [init.alpha()[0], init.alpha()[1]];
    let shift = [0.0, eps];
    let omega = shift.map(|e| (s + e).sqrt());
    let action = alpha.map(|a| 0.5 * a * a);

    // u_k = α_k r^{-1/4} cos ψ_k with ψ_k = θ_k − π/2; the log phase uses
    // ln(−x), not ln(−x + ε), for both components
    let mut psi = [0.0; 2];
    let mut dpsi = [0.0; 2];
    for k in 0..2 {
        let j = 1 - k;
        let r = s + shift[k];
        let log_coeff = (3.0 * alpha[k] * alpha[k] + 2.0 * alpha[j] * alpha[j]) / 4.0;
        psi[k] = (2.0 / 3.0) * r.powf(1.5) + log_coeff * s.ln() + init.phi()[k] - FRAC_PI_2;
        dpsi[k] = r.sqrt() + log_coeff / s;
        if order == SeedOrder::NearResonant {
            // slow phase drift left over from the near-resonant terms at second order
            let num = if k == 0 {
                action[1] * (action[1] - 2.0 * action[0])
            } else {
                action[0] * (2.0 * action[1] - action[0])
            };
            psi[k] -= num / (2.0 * eps * s.sqrt());
            dpsi[k] += num / (4.0 * eps * s.powf(1.5));
        }
    }
    let mut u = [0.0; 2];
    let mut du = [0.0; 2];
    for k in 0..2 {
        let j = 1 - k;
        let r = s + shift[k];
        let env = r.powf(-0.25);
        let (sin, cos) = psi[k].sin_cos();
        u[k] = alpha[k] * env * cos;
        let mut du_ds = alpha[k] * (-0.25 * env / r * cos - env * sin * dpsi[k]);
        if order == SeedOrder::NearResonant && alpha[k] != 0.0 {
            let mismatch = omega[j] - omega[k];
            let amp =
                alpha[k] * alpha[j] * alpha[j] / (8.0 * omega[k].powf(1.5) * omega[j] * mismatch);
            let (sa, ca) = (2.0 * psi[j] - psi[k]).sin_cos();
            u[k] += amp * ca;
            du_ds -= amp * sa * (2.0 * dpsi[j] - dpsi[k]);
        }
        du[k] = -du_ds;
    }
    TrajectoryState::new(x0, u.to_vec(), du.to_vec())
}

/// Fastest local angular frequency of the linearized oscillations.
fn fastest_frequency(x: f64, eps_max: f64) -> f64 {
    let w = if x > 0.0 {
        (2.0 * x).sqrt().max(eps_max.sqrt())
    } else {
        (eps_max - x).sqrt()
    };
    w.max(1.0)
}

fn sample_spacing(x: f64, eps_max: f64, cap: f64) -> f64 {
    (PI / 8.0 / fastest_frequency(x, eps_max)).min(cap)
}

/// Integrate from `state0.x` to `x1` (either direction). Samples are returned
/// in increasing x and include both endpoints.
pub fn integrate(
    state0: &TrajectoryState,
    x1: f64,
    params: &EquationParams,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    if state0.n() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} components, parameters {}",
            state0.n(),
            params.n()
        )));
    }
    if !state0.is_finite() || !x1.is_finite() {
        return Err(Error::domain("initial state and endpoint must be finite"));
    }
    let x0 = state0.x;
    if x1 == x0 {
        return Err(Error::domain("integration interval is empty"));
    }
    let n = params.n();
    let dir = if x1 > x0 { 1.0 } else { -1.0 };
    let eps_max = *params.eps().last().expect("n >= 1");

    let y0 = state0.to_flat();
    let mut xs = vec![x0];
    let mut states = y0.clone();
    let mut next = x0 + dir * sample_spacing(x0, eps_max, opts.dense_output_dx);
    let mut buf = vec![0.0; 2 * n];

    let settings = dop853::Settings {
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
        max_step: opts.max_step,
    };
    let result = dop853::solve(
        |x, y, dy| rhs_flat(x, y, params, dy),
        x0,
        &y0,
        x1,
        &settings,
        |x| 1.5 / fastest_frequency(x, eps_max),
        |step, y_new| {
            if y_new[..n].iter().any(|v| !(v.abs() <= BLOWUP_LIMIT)) {
                return Err(Error::IntegrationFailure {
                    last_good_x: step.x_old,
                    reason: format!("|u| exceeded {BLOWUP_LIMIT}"),
                });
            }
            let x_new = step.x_new();
            loop {
                let spacing = sample_spacing(next, eps_max, opts.dense_output_dx);
                // stop short of the endpoint, which is appended exactly
                if (next - x_new) * dir > 0.0 || (x1 - next) * dir < 0.5 * spacing {
                    break;
                }
                step.eval(next, &mut buf);
                xs.push(next);
                states.extend_from_slice(&buf);
                next += dir * spacing;
            }
            if x_new == x1 {
                xs.push(x1);
                states.extend_from_slice(y_new);
            }
            Ok(())
        },
    );
    let stats = match result {
        Ok(stats) => stats,
        Err(dop853::StepFailure::Underflow { x }) => {
            return Err(Error::IntegrationFailure {
                last_good_x: x,
                reason: "step size underflow".into(),
            })
        }
        Err(dop853::StepFailure::Callback(e)) => return Err(e),
    };

    if dir < 0.0 {
        xs.reverse();
        let w = 2 * n;
        let rows = states.len() / w;
        let mut flipped = Vec::with_capacity(states.len());
        for r in (0..rows).rev() {
            flipped.extend_from_slice(&states[r * w..(r + 1) * w]);
        }
        states = flipped;
    }
    let meta = TrajectoryMeta {
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
        steps_accepted: stats.accepted,
        steps_rejected: stats.rejected,
    };
    Trajectory::new(params.clone(), meta, xs, states)
}

/// `𝓗 = P²/2 − x X²/2 + X⁴/2 + ε u₂²/2` with `X² = u₁² + u₂²`, `P = u'`.
pub fn hamiltonian_energy(state: &TrajectoryState, x: f64, params: &EquationParams) -> Result<f64> {
    let eps = params.eps2()?;
    if state.n() != 2 {
        return Err(Error::UnsupportedDimension {
            got: state.n(),
            expected: 2,
        });
    }
    let p2: f64 = state.du.iter().map(|v| v * v).sum();
    let x2: f64 = state.u.iter().map(|v| v * v).sum();
    Ok(0.5 * p2 - 0.5 * x * x2 + 0.5 * x2 * x2 + 0.5 * eps * state.u[1] * state.u[1])
}
