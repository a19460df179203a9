//! Simulation and fluid analysis of the `M_t/G/n/n` loss system.
//!
//! The library has three layers:
//!
//! * model primitives — arrival [`intensity`] functions and service-time
//!   [`lifetimes`];
//! * the event-driven [`simulator`] producing occupied-fraction paths with
//!   their integrated and blocked observables, and the [`fluid`] solver for
//!   the capacity-constrained Volterra equation those paths concentrate on
//!   as the server count grows;
//! * [`observables`] and the replication [`harness`] that measure one
//!   against the other.

pub mod error;
pub mod fluid;
pub mod harness;
pub mod intensity;
pub mod lifetimes;
pub mod observables;
mod quad;
pub mod simulator;

pub use error::{Error, Result};
pub use fluid::{
    default_step, default_tol_pin, regimes, solve, solve_mollified, FluidSolution,
    RegimeIntervals, RegimeKind, Scheme,
};
pub use harness::{
    convergence_experiment, residual_moment_check, sup_error, ErrorRow, ErrorTable, ResidualCheck,
};
pub use intensity::IntensitySpec;
pub use lifetimes::LifetimeDist;
pub use observables::{align, congestion_ratio, idleness, OverlaySeries};
pub use simulator::{sample_arrivals, simulate, EventKind, ModelConfig, SimEvent, SimPath};
