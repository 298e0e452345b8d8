//! Coupling constructions for discrete-time interacting particle systems on
//! finite lattices, together with the metrics they are judged in, exact
//! coupling checks on small finite chains, and Monte Carlo estimators.
//!
//! Module map:
//!
//! * [`lattice`]: tori and open windows, configurations, shifts, cylinders,
//!   particle densities.
//! * [`metrics`]: cylinder metric, discrepancy densities (plain and
//!   shift-minimized) and the spatial averages of cylinder indicators.
//! * [`systems`]: the synchronous particle framework and the model zoo
//!   (TASEP, particle/vacancy exchange, shift-annihilation, halving and
//!   doubling maps).
//! * [`coupling`]: two-copy couplings, the particle pairing procedure, the
//!   meeting-time splice and quasi intersection times.
//! * [`exact`]: linear algebra oracles on finite chains.
//! * [`estimators`]: replica harness and statistical probes.

pub mod coupling;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod lattice;
pub mod metrics;
pub mod systems;

pub use error::{Error, Result};
