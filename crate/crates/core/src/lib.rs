//! Two-component Painlevé-II system
//! `u_k'' = x u_k − 2u_k(u₁² + u₂²) − ε_k u_k`:
//! exact connection formulas between the `x → ∓∞` asymptotics, a Lax-pair
//! zero-curvature verifier, high-order integration with tail fitting, and
//! phase-averaged final actions.

pub mod cli;
pub mod connect;
pub mod error;
pub mod fit;
pub mod io;
pub mod lax;
pub mod model;
pub mod ode;
pub mod sampling;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    EquationParams, FinalAsymptotics, InitialAsymptotics, LaxPair, Sign, Trajectory,
    TrajectoryState, TransitionConstants,
};
