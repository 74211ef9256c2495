//! Domain types shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduce an angle to `(-π, π]`.
pub fn wrap_signed(phi: f64) -> f64 {
    let r = wrap_phase(phi);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Parameters of the n-component system: offsets `ε₁ = 0 ≤ ε₂ ≤ … ≤ εₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationParams {
    eps: Vec<f64>,
}

impl EquationParams {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::domain("at least one component is required"));
        }
        if eps.iter().any(|e| !e.is_finite()) {
            return Err(Error::domain("offsets must be finite"));
        }
        if eps[0] != 0.0 {
            return Err(Error::domain(format!(
                "the first offset is pinned to 0 (shift x by it), got {}",
                eps[0]
            )));
        }
        if eps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("offsets must be non-decreasing"));
        }
        Ok(Self { eps })
    }

    /// The two-component system with offsets `(0, ε)`; requires `ε ≥ 0`.
    pub fn two(eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::domain(format!("eps must be >= 0, got {eps}")));
        }
        Self::new(vec![0.0, eps])
    }

    /// Single-component (scalar Painlevé-II) system.
    pub fn scalar() -> Self {
        Self { eps: vec![0.0] }
    }

    pub fn n(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    /// `ε ≡ ε₂` of the two-component system.
    pub fn eps2(&self) -> Result<f64> {
        self.require_n(2)?;
        Ok(self.eps[1])
    }

    pub(crate) fn require_n(&self, expected: usize) -> Result<()> {
        if self.n() != expected {
            return Err(Error::UnsupportedDimension {
                got: self.n(),
                expected,
            });
        }
        Ok(())
    }

    /// `ε` for operations that need the strictly positive two-component offset.
    pub(crate) fn positive_eps2(&self) -> Result<f64> {
        let eps = self.eps2()?;
        if !(eps > 0.0) {
            return Err(Error::domain(format!("requires eps > 0, got {eps}")));
        }
        Ok(eps)
    }
}

/// Amplitudes and phases of the solution as `x → -∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialAsymptotics {
    alpha: Vec<f64>,
    phi: Vec<f64>,
}

impl InitialAsymptotics {
    pub fn new(alpha: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if alpha.len() != phi.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes but {} phases",
                alpha.len(),
                phi.len()
            )));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::domain("amplitudes must be finite and >= 0"));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("phases must be finite"));
        }
        let phi = phi.into_iter().map(wrap_phase).collect();
        Ok(Self { alpha, phi })
    }

    pub fn two(alpha1: f64, alpha2: f64, phi1: f64, phi2: f64) -> Result<Self> {
        Self::new(vec![alpha1, alpha2], vec![phi1, phi2])
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Phases, reduced to `[0, 2π)`.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Adiabatic invariants `𝓘_k = α_k² / 2`.
    pub fn adiabatic_invariants(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| 0.5 * a * a).collect()
    }

    /// Same amplitudes, every component negated (`φ_k → φ_k + π`).
    pub fn negated(&self) -> Self {
        Self {
            alpha: self.alpha.clone(),
            phi: self.phi.iter().map(|p| wrap_phase(p + PI)).collect(),
        }
    }
}

/// Transition probabilities `p_k = exp(-π α_k²)` and the combined phases `Φ_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionConstants {
    pub p1: f64,
    pub p2: f64,
    pub big_phi1: f64,
    pub big_phi2: f64,
}

/// The sign parameter of the regular part `σ √(x/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn of(v: f64) -> Option<Self> {
        if v > 0.0 {
            Some(Sign::Plus)
        } else if v < 0.0 {
            Some(Sign::Minus)
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Minus => "-1",
            Sign::Plus => "1",
        })
    }
}

/// Parameters of the solution as `x → +∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalAsymptotics {
    pub sigma: Sign,
    /// `I₁ = ρ²/2`
    pub i1: f64,
    /// `I₂ = A²√ε/2`
    pub i2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl FinalAsymptotics {
    pub fn new(sigma: Sign, i1: f64, i2: f64, phi1: f64, phi2: f64) -> Result<Self> {
        if !(i1 >= 0.0) || !(i2 >= 0.0) {
            return Err(Error::domain(format!(
                "actions must be >= 0, got I1 = {i1}, I2 = {i2}"
            )));
        }
        Ok(Self {
            sigma,
            i1,
            i2,
            phi1: wrap_phase(phi1),
            phi2: wrap_phase(phi2),
        })
    }

    /// Build from the amplitudes `ρ`, `A` used in the large-x expansion.
    pub fn from_amplitudes(
        sigma: Sign,
        rho: f64,
        amp: f64,
        phi1: f64,
        phi2: f64,
        eps: f64,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::domain(format!("requires eps > 0, got {eps}")));
        }
        Self::new(
            sigma,
            0.5 * rho * rho,
            0.5 * amp * amp * eps.sqrt(),
            phi1,
            phi2,
        )
    }

    pub fn rho(&self) -> f64 {
        (2.0 * self.i1).sqrt()
    }

    /// Amplitude `A = √(2 I₂ / √ε)` of the second component.
    pub fn amplitude(&self, eps: f64) -> f64 {
        (2.0 * self.i2 / eps.sqrt()).sqrt()
    }
}

/// One sample `(x, u, u')` of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub x: f64,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

impl TrajectoryState {
    pub fn new(x: f64, u: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        if u.len() != du.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates but {} velocities",
                u.len(),
                du.len()
            )));
        }
        let s = Self { x, u, du };
        if !s.is_finite() {
            return Err(Error::domain("state entries must be finite"));
        }
        Ok(s)
    }

    pub fn zero(x: f64, n: usize) -> Self {
        Self {
            x,
            u: vec![0.0; n],
            du: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.u.iter().chain(&self.du).all(|v| v.is_finite())
    }

    pub fn negated(&self) -> Self {
        Self {
            x: self.x,
            u: self.u.iter().map(|v| -v).collect(),
            du: self.du.iter().map(|v| -v).collect(),
        }
    }

    /// Flat `[u_1..u_n, u'_1..u'_n]` layout used by the integrator.
    pub fn to_flat(&self) -> Vec<f64> {
        self.u.iter().chain(&self.du).copied().collect()
    }

    pub fn from_flat(x: f64, y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self {
            x,
            u: y[..n].to_vec(),
            du: y[n..].to_vec(),
        }
    }
}

/// Tolerances the trajectory was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

/// Densely sampled solution, stored flat: `states[i*2n .. (i+1)*2n]` holds
/// `[u_1..u_n, u'_1..u'_n]` at `xs[i]`. `xs` is strictly increasing.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: EquationParams,
    pub meta: TrajectoryMeta,
    xs: Vec<f64>,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn new(
        params: EquationParams,
        meta: TrajectoryMeta,
        xs: Vec<f64>,
        states: Vec<f64>,
    ) -> Result<Self> {
        let width = 2 * params.n();
        if states.len() != xs.len() * width {
            return Err(Error::DimensionMismatch(format!(
                "{} samples need {} state values, got {}",
                xs.len(),
                xs.len() * width,
                states.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain(
                "trajectory x values must be strictly increasing",
            ));
        }
        if xs.iter().chain(&states).any(|v| !v.is_finite()) {
            return Err(Error::domain("trajectory entries must be finite"));
        }
        Ok(Self {
            params,
            meta,
            xs,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Flat `[u.., u'..]` slice of sample `i`.
    pub fn flat(&self, i: usize) -> &[f64] {
        let w = 2 * self.params.n();
        &self.states[i * w..(i + 1) * w]
    }

    pub fn u(&self, i: usize, k: usize) -> f64 {
        self.flat(i)[k]
    }

    pub fn du(&self, i: usize, k: usize) -> f64 {
        self.flat(i)[self.params.n() + k]
    }

    pub fn state(&self, i: usize) -> TrajectoryState {
        TrajectoryState::from_flat(self.xs[i], self.flat(i))
    }

    pub fn first(&self) -> Option<TrajectoryState> {
        (!self.is_empty()).then(|| self.state(0))
    }

    pub fn last(&self) -> Option<TrajectoryState> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    /// Index range of samples with `lo <= x <= hi`.
    pub fn window_indices(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.xs.partition_point(|&x| x < lo);
        let end = self.xs.partition_point(|&x| x <= hi);
        start..end.max(start)
    }
}

pub type CMatrix = DMatrix<Complex64>;

/// Hermitian matrices `H(t, x)` and `H₁(t, x)` of the Lax pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxPair {
    pub t: f64,
    pub x: f64,
    pub h: CMatrix,
    pub h1: CMatrix,
}

/// Largest `|M_ij - conj(M_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}
