//! Simulation and stability analysis of a two-compartment model of blood
//! cell production (hematopoiesis) with a distributed cell-cycle delay.
//!
//! The model tracks a resting (quiescent) stem cell population `x(t)` and a
//! proliferating population `y(t)`. Resting cells die or differentiate at
//! rate `delta`, and re-enter the cell cycle at a population-dependent Hill
//! rate `beta(x)`. Proliferating cells die by apoptosis at rate `gamma` and
//! divide at a cycle age `tau` distributed on `[tau_min, tau_max]` with
//! density `f`. After the first generation the populations obey an
//! autonomous pair of delay differential equations whose kernel is the
//! apoptosis-weighted division density `e^{-gamma tau} f(tau)`.
//!
//! The crate provides:
//!
//! * [`kernel`]: the division density and its weighted integral transforms,
//! * [`model`]: parameters, the Hill rate, equilibria and existence tests,
//! * [`history`]: construction of the exact initial history on `[0, tau_max]`
//!   from the initial resting mass `mu`,
//! * [`integrator`]: a fixed-step Runge–Kutta integrator with dense output
//!   for the delayed system,
//! * [`stability`]: characteristic equations, stability classification and
//!   a Hopf bifurcation locator,
//! * [`diagnostics`]: period/amplitude estimation and convergence checks,
//! * [`cli`]: the command line surface (single runs, sweeps, verification).

pub mod cli;
pub mod config;
pub mod diagnostics;
mod error;
pub mod history;
pub mod integrator;
pub mod kernel;
pub mod model;
pub mod stability;
pub mod trajectory;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
