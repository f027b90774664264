//! Numerical laboratory for the semidiscrete heat equation and the
//! stationary discrete Schrodinger equation on `(hZ)^d`.
//!
//! Modules:
//! * [`besselkit`]: log-domain `I_n`, `K_nu`, `J_n` and inequality audits.
//! * [`lattice`]: truncated boxes, fields, difference operators, annulus sums.
//! * [`heat_sim`]: integrators, closed-form solutions, energy audits.
//! * [`convexity`]: Bessel weights, weighted energies, commutator audits.
//! * [`carleman`]: parabolic Carleman machinery and regime bounds.
//! * [`elliptic_uc`]: elliptic Carleman audit and shell recursion.
//! * [`fit`]: least-squares helpers for exponent recovery.

pub mod besselkit;
pub mod carleman;
pub mod convexity;
pub mod elliptic_uc;
pub mod error;
pub mod fit;
pub mod lattice;
pub mod heat_sim;
pub mod logscalar;
pub mod rng;

pub use error::{LabError, Result};
pub use logscalar::LogScalar;
pub use carleman::{CarlemanConfig, Regime, TimeProfile, Verdict};
pub use convexity::{WeightKind, WeightSpec, WeightedEnergy};
pub use elliptic_uc::{EllipticProblem, ShellData};
pub use heat_sim::{HeatProblem, Method, Trajectory};
pub use lattice::{Annulus, LatticeBox, LatticeField, LogField, Metric, Site};
