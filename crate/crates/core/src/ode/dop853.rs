//! Adaptive Dormand-Prince 8(5,3) stepper with 7th-order dense output.

use super::tableau::{A, B, C, D, E3, E5, INTERPOLATOR_POWER, N_STAGES, N_STAGES_EXTENDED};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
/// PI controller weight on the previous error.
const BETA: f64 = 0.04;
const ERR_EXPONENT: f64 = 1.0 / 8.0 - 0.2 * BETA;

/// Interpolant over one accepted step.
pub struct DenseStep<'a> {
    pub x_old: f64,
    pub h: f64,
    y_old: &'a [f64],
    coeffs: &'a [Vec<f64>],
}

impl DenseStep<'_> {
    pub fn x_new(&self) -> f64 {
        self.x_old + self.h
    }

    /// Evaluate the interpolant at `x` (between `x_old` and `x_old + h`).
    pub fn eval(&self, x: f64, out: &mut [f64]) {
        let s = (x - self.x_old) / self.h;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.coeffs.iter().rev().enumerate() {
            let w = if i % 2 == 0 { s } else { 1.0 - s };
            for (o, r) in out.iter_mut().zip(row) {
                *o = (*o + r) * w;
            }
        }
        for (o, y) in out.iter_mut().zip(self.y_old) {
            *o += y;
        }
    }
}

pub struct Settings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
}

pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

pub enum StepFailure<E> {
    /// Step size fell below the floating-point resolution at `x`.
    Underflow { x: f64 },
    /// The step callback rejected the state.
    Callback(E),
}

/// Integrate `y' = f(x, y)` from `x0` to `x1` (either direction), calling
/// `on_step` with the dense interpolant of every accepted step.
///
/// `step_cap(x)` bounds `|h|` locally in addition to `settings.max_step`.
pub fn solve<F, G, E>(
    mut f: F,
    x0: f64,
    y0: &[f64],
    x1: f64,
    settings: &Settings,
    step_cap: impl Fn(f64) -> f64,
    mut on_step: G,
) -> Result<Stats, StepFailure<E>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(&DenseStep<'_>, &[f64]) -> Result<(), E>,
{
    let dim = y0.len();
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let mut stats = Stats {
        accepted: 0,
        rejected: 0,
    };
    if x1 == x0 {
        return Ok(stats);
    }

    let mut x = x0;
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; N_STAGES_EXTENDED];
    let mut coeffs: Vec<Vec<f64>> = vec![vec![0.0; dim]; INTERPOLATOR_POWER];

    f(x, &y, &mut k[0]);
    let mut h_abs = initial_step(&mut f, x, &y, &k[0], dir, settings)
        .min(settings.max_step)
        .min(step_cap(x));
    let mut err_prev: f64 = 1e-4;

    loop {
        let remaining = (x1 - x).abs();
        if remaining == 0.0 {
            return Ok(stats);
        }
        let min_step = 10.0 * (next_toward(x, dir) - x).abs();
        h_abs = h_abs.min(settings.max_step).min(step_cap(x));

        let (x_next, h, err) = loop {
            if h_abs < min_step {
                return Err(StepFailure::Underflow { x });
            }
            let mut h = h_abs * dir;
            let mut x_next = x + h;
            if (x_next - x1) * dir >= 0.0 {
                x_next = x1;
                h = x1 - x;
                h_abs = h.abs();
            }

            for s in 1..N_STAGES {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    tmp[i] = y[i] + h * acc;
                }
                f(x + C[s] * h, &tmp, &mut k[s]);
            }
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(N_STAGES) {
                    acc += B[j] * kj[i];
                }
                y_new[i] = y[i] + h * acc;
            }
            f(x + h, &y_new, &mut k[N_STAGES]);

            let err = error_norm(&k, &y, &y_new, h, settings);
            if err < 1.0 {
                break (x_next, h, err);
            }
            stats.rejected += 1;
            h_abs *= (SAFETY * err.powf(-ERR_EXPONENT)).max(MIN_FACTOR);
        };

        // extra stages for the interpolant
        for s in N_STAGES + 1..N_STAGES_EXTENDED {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            f(x + C[s] * h, &tmp, &mut k[s]);
        }
        for i in 0..dim {
            let dy = y_new[i] - y[i];
            coeffs[0][i] = dy;
            coeffs[1][i] = h * k[0][i] - dy;
            coeffs[2][i] = 2.0 * dy - h * (k[N_STAGES][i] + k[0][i]);
            for (r, drow) in D.iter().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += drow[j] * kj[i];
                }
                coeffs[3 + r][i] = h * acc;
            }
        }

        let step = DenseStep {
            x_old: x,
            h,
            y_old: &y,
            coeffs: &coeffs,
        };
        on_step(&step, &y_new).map_err(StepFailure::Callback)?;
        stats.accepted += 1;

        x = x_next;
        y.copy_from_slice(&y_new);
        // FSAL: the last stage is the derivative at the new point
        k.swap(0, N_STAGES);

        let factor = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err.powf(-ERR_EXPONENT) * err_prev.powf(BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        err_prev = err.max(1e-4);
        h_abs *= factor;
    }
}

fn next_toward(x: f64, dir: f64) -> f64 {
    let bits = x.to_bits();
    if x == 0.0 {
        return dir * f64::from_bits(1);
    }
    let up = (x > 0.0) == (dir > 0.0);
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}

fn error_norm(k: &[Vec<f64>], y: &[f64], y_new: &[f64], h: f64, s: &Settings) -> f64 {
    let dim = y.len();
    let mut e5 = 0.0;
    let mut e3 = 0.0;
    for i in 0..dim {
        let scale = s.abs_tol + s.rel_tol * y[i].abs().max(y_new[i].abs());
        let mut a5 = 0.0;
        let mut a3 = 0.0;
        for (j, kj) in k.iter().enumerate().take(N_STAGES + 1) {
            a5 += E5[j] * kj[i];
            a3 += E3[j] * kj[i];
        }
        e5 += (a5 / scale).powi(2);
        e3 += (a3 / scale).powi(2);
    }
    if e5 == 0.0 && e3 == 0.0 {
        return 0.0;
    }
    h.abs() * e5 / ((e5 + 0.01 * e3) * dim as f64).sqrt()
}

/// Starting step from the local derivative scale (Hairer, Norsett & Wanner II.4).
fn initial_step<F>(f: &mut F, x: f64, y: &[f64], f0: &[f64], dir: f64, s: &Settings) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y.len() as f64;
    let scale: Vec<f64> = y.iter().map(|v| s.abs_tol + s.rel_tol * v.abs()).collect();
    let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|a| a * a).sum::<f64>() / dim).sqrt();
    let d0 = rms(&mut y.iter().zip(&scale).map(|(a, b)| a / b));
    let d1 = rms(&mut f0.iter().zip(&scale).map(|(a, b)| a / b));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * dir * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(x + h0 * dir, &y1, &mut f1);
    let d2 = rms(&mut f1.iter().zip(f0).zip(&scale).map(|((a, b), c)| (a - b) / c)) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1)
}
